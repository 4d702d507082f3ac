// Copyright 2026 The Preictal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "preictal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "preictal/error.hpp"

namespace preictal {

namespace {

// Slack for comparing times built from sums of window lengths.
constexpr double kTimeEps = 1e-6;

bool by_patient_then_time(const WindowRef& a, const WindowRef& b) {
  if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
  if (a.start_s != b.start_s) return a.start_s < b.start_s;
  return a.label < b.label;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::string label_name(WindowLabel label) {
  return label == WindowLabel::kPreictal ? "preictal" : "interictal";
}

std::string source_name(WindowSource source) {
  return source == WindowSource::kOversampled ? "oversampled" : "stride_native";
}

WindowLabel parse_label(const std::string& name) {
  if (name == "preictal") return WindowLabel::kPreictal;
  if (name == "interictal") return WindowLabel::kInterictal;
  throw IntegrityError("unknown window label '" + name + "'");
}

WindowSource parse_source(const std::string& name) {
  if (name == "stride_native") return WindowSource::kStrideNative;
  if (name == "oversampled") return WindowSource::kOversampled;
  throw IntegrityError("unknown window source '" + name + "'");
}

void LabelingPolicy::validate() const {
  if (!(sop_s > 0 && sph_s > 0 && preictal_horizon_s > 0 && interictal_margin_s > 0 &&
        window_len_s > 0 && merge_gap_s > 0)) {
    throw ConfigError("labeling: all durations must be positive");
  }
  if (preictal_horizon_s < window_len_s) {
    throw ConfigError("labeling: preictal_horizon_s must be at least window_len_s");
  }
}

std::string format_seconds(double seconds) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), seconds);
  return std::string(buf, res.ptr);
}

std::string WindowRef::id() const {
  return patient_id + ":" + format_seconds(start_s) + ":" + label_name(label) + ":" +
         source_name(source);
}

WindowRef WindowRef::parse(const std::string& id) {
  const auto parts = split(id, ':');
  if (parts.size() != 4 || parts[0].empty()) {
    throw IntegrityError("malformed window id '" + id + "'");
  }
  WindowRef w;
  w.patient_id = parts[0];
  const auto& t = parts[1];
  const auto res = std::from_chars(t.data(), t.data() + t.size(), w.start_s);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw IntegrityError("malformed window start in '" + id + "'");
  }
  w.label = parse_label(parts[2]);
  w.source = parse_source(parts[3]);
  return w;
}

std::string WindowRef::cache_filename() const {
  return patient_id + "_" + format_seconds(start_s) + "_" + label_name(label) + "_" +
         source_name(source) + ".spec";
}

std::vector<SeizureEvent> merge_seizures(const std::vector<SeizureEvent>& events,
                                         double gap_s) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].onset_s < events[i - 1].offset_s) {
      throw PreconditionError("merge_seizures: events must be sorted and non-overlapping");
    }
  }
  std::vector<SeizureEvent> out;
  for (const auto& e : events) {
    if (!out.empty() && e.onset_s - out.back().offset_s < gap_s) {
      out.back().offset_s = std::max(out.back().offset_s, e.offset_s);
    } else {
      out.push_back(e);
    }
  }
  return out;
}

std::vector<WindowLabelEntry> label_windows(const AnnotatedRecording& rec,
                                            const LabelingPolicy& policy) {
  policy.validate();
  const double w = policy.window_len_s;
  const double t0 = rec.record.start_time_s;
  const double end = rec.record.end_time_s();
  const auto count = static_cast<long long>(std::floor((end - t0) / w + kTimeEps));

  std::vector<WindowLabelEntry> out;
  for (long long j = 0; j < count; ++j) {
    const double s = t0 + static_cast<double>(j) * w;
    const double e = s + w;
    bool touches_seizure = false;
    bool in_sph = false;
    bool preictal = false;
    bool interictal = true;
    for (const auto& z : rec.seizures) {
      if (s < z.offset_s - kTimeEps && e > z.onset_s + kTimeEps) touches_seizure = true;
      if (s < z.onset_s - kTimeEps && e > z.onset_s - policy.sph_s + kTimeEps) in_sph = true;
      const double zone_begin = z.onset_s - policy.sph_s - policy.preictal_horizon_s;
      const double zone_end = z.onset_s - policy.sph_s;
      if (s >= zone_begin - kTimeEps && e <= zone_end + kTimeEps) preictal = true;
      const bool far_before = e <= z.onset_s - policy.interictal_margin_s + kTimeEps;
      const bool far_after = s >= z.offset_s + policy.interictal_margin_s - kTimeEps;
      const bool in_zone = s < z.onset_s - kTimeEps && e > zone_begin + kTimeEps;
      if (!(far_before || far_after) || in_zone) interictal = false;
    }
    // SPH buffers stay unlabeled even inside the next seizure's preictal zone.
    if (touches_seizure || in_sph) continue;
    if (preictal) {
      out.push_back({s, WindowLabel::kPreictal});
    } else if (interictal) {
      out.push_back({s, WindowLabel::kInterictal});
    }
  }
  return out;
}

std::size_t oversampled_count(const std::vector<Interval>& intervals, double stride_s,
                              double window_len_s) {
  if (!(stride_s > 0.0)) throw ConfigError("oversample: stride must be positive");
  std::size_t n = 0;
  for (const auto& iv : intervals) {
    const double room = iv.length_s() - window_len_s;
    if (room < -kTimeEps) continue;
    n += static_cast<std::size_t>(std::floor(std::max(0.0, room) / stride_s + kTimeEps)) + 1;
  }
  return n;
}

std::vector<WindowRef> oversample_preictal(const std::string& patient_id,
                                           const std::vector<Interval>& intervals,
                                           double stride_s, double window_len_s,
                                           WindowLabel label) {
  if (!(stride_s > 0.0)) throw ConfigError("oversample: stride S must be positive");
  if (stride_s > window_len_s + kTimeEps) {
    throw ConfigError("oversample: stride S must not exceed the window length");
  }
  std::vector<WindowRef> out;
  for (const auto& iv : intervals) {
    const double room = iv.length_s() - window_len_s;
    if (room < -kTimeEps) continue;
    const auto n = static_cast<long long>(std::floor(std::max(0.0, room) / stride_s + kTimeEps)) + 1;
    for (long long j = 0; j < n; ++j) {
      const double offset = static_cast<double>(j) * stride_s;
      const double phase = std::fmod(offset, window_len_s);
      const bool native = phase < kTimeEps || window_len_s - phase < kTimeEps;
      out.push_back({patient_id, iv.begin_s + offset, label,
                     native ? WindowSource::kStrideNative : WindowSource::kOversampled});
    }
  }
  return out;
}

const std::vector<double>& stride_grid() {
  static const std::vector<double> kGrid = {30, 15, 10, 6, 5, 3, 2, 1};
  return kGrid;
}

StrideChoice choose_stride(const std::vector<Interval>& intervals, std::size_t target_count,
                           double window_len_s) {
  if (target_count < 1) throw PreconditionError("choose_stride: target_count must be >= 1");
  for (double s : stride_grid()) {
    if (s > window_len_s + kTimeEps) continue;
    const auto n = oversampled_count(intervals, s, window_len_s);
    if (n >= target_count) return {s, n, false};
  }
  return {1.0, oversampled_count(intervals, 1.0, window_len_s), true};
}

double choose_stride(double preictal_budget_s, std::size_t target_count,
                     double window_len_s) {
  return choose_stride({Interval{0.0, preictal_budget_s}}, target_count, window_len_s)
      .stride_s;
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "# ratio=" << format_seconds(manifest.ratio) << " seed=" << manifest.seed << "\n";
  out << "[train]\n";
  for (const auto& w : manifest.train) out << w.id() << "\n";
  out << "[test]\n";
  for (const auto& w : manifest.test) out << w.id() << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  SplitManifest m;
  std::vector<WindowRef>* section = nullptr;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream is(line.substr(1));
      std::string kv;
      while (is >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto value = kv.substr(eq + 1);
        if (key == "ratio") m.ratio = std::stod(value);
        if (key == "seed") m.seed = std::stoull(value);
      }
      continue;
    }
    if (line == "[train]") {
      section = &m.train;
    } else if (line == "[test]") {
      section = &m.test;
    } else if (section == nullptr) {
      throw IntegrityError(path.string() + ": window id before [train]/[test] header");
    } else {
      section->push_back(WindowRef::parse(line));
    }
  }
  return m;
}

SplitManifest split_dataset(const std::vector<WindowRef>& windows, double ratio,
                            std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split: ratio must be in (0, 1)");
  for (const auto& w : windows) {
    if (w.source != WindowSource::kStrideNative) {
      throw PreconditionError("split: oversampling happens after splitting; got " + w.id());
    }
  }
  if (windows.size() < 2) {
    throw SplitError("split: need at least 2 windows to form train and test blocks");
  }
  std::vector<WindowRef> sorted = windows;
  std::sort(sorted.begin(), sorted.end(), by_patient_then_time);

  SplitManifest m;
  m.ratio = ratio;
  m.seed = seed;
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].patient_id == sorted[begin].patient_id) ++end;
    const std::size_t n = end - begin;
    std::size_t n_test = 0;
    if (n >= 2) {
      n_test = static_cast<std::size_t>(std::llround((1.0 - ratio) * static_cast<double>(n)));
      n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    }
    const std::size_t cut = end - n_test;
    m.train.insert(m.train.end(), sorted.begin() + static_cast<std::ptrdiff_t>(begin),
                   sorted.begin() + static_cast<std::ptrdiff_t>(cut));
    m.test.insert(m.test.end(), sorted.begin() + static_cast<std::ptrdiff_t>(cut),
                  sorted.begin() + static_cast<std::ptrdiff_t>(end));
    begin = end;
  }
  if (m.train.empty() || m.test.empty()) {
    throw SplitError("split: fewer than 2 blocks; train or test would be empty");
  }
  return m;
}

std::vector<Interval> native_runs(const std::vector<WindowRef>& windows, WindowLabel label,
                                  double window_len_s) {
  std::vector<double> starts;
  for (const auto& w : windows) {
    if (w.label == label && w.source == WindowSource::kStrideNative) starts.push_back(w.start_s);
  }
  std::sort(starts.begin(), starts.end());
  std::vector<Interval> runs;
  for (double s : starts) {
    if (!runs.empty() && std::abs(runs.back().end_s - s) < kTimeEps) {
      runs.back().end_s = s + window_len_s;
    } else {
      runs.push_back({s, s + window_len_s});
    }
  }
  return runs;
}

SplitManifest balance_training_split(SplitManifest manifest, const LabelingPolicy& policy,
                                     std::vector<BalanceSummary>* summary) {
  const double w = policy.window_len_s;
  std::map<std::string, std::vector<WindowRef>> by_patient;
  for (const auto& x : manifest.train) {
    if (x.source != WindowSource::kStrideNative) {
      throw PreconditionError("balance: training split already contains oversampled windows");
    }
    by_patient[x.patient_id].push_back(x);
  }

  std::vector<WindowRef> train;
  for (auto& [patient, windows] : by_patient) {
    const auto n_pre = static_cast<std::size_t>(std::count_if(
        windows.begin(), windows.end(),
        [](const WindowRef& x) { return x.label == WindowLabel::kPreictal; }));
    const std::size_t n_inter = windows.size() - n_pre;
    BalanceSummary row{patient, WindowLabel::kPreictal, w, n_pre, n_inter, false};

    const WindowLabel minority =
        n_pre <= n_inter ? WindowLabel::kPreictal : WindowLabel::kInterictal;
    const std::size_t have = std::min(n_pre, n_inter);
    const std::size_t target = std::max(n_pre, n_inter);
    row.oversampled_class = minority;
    // A class absent from the training block cannot be oversampled.
    if (have == 0 && target > 0) row.shortfall = true;
    if (have > 0 && have < target) {
      const auto runs = native_runs(windows, minority, w);
      const auto choice = choose_stride(runs, target, w);
      row.stride_s = choice.stride_s;
      row.shortfall = choice.shortfall;
      std::vector<WindowRef> extra;
      for (auto& x : oversample_preictal(patient, runs, choice.stride_s, w, minority)) {
        if (x.source == WindowSource::kOversampled) extra.push_back(std::move(x));
      }
      const std::size_t needed = target - have;
      if (extra.size() > needed) {
        std::vector<WindowRef> kept;
        kept.reserve(needed);
        for (std::size_t j = 0; j < needed; ++j) kept.push_back(extra[j * extra.size() / needed]);
        extra = std::move(kept);
      }
      if (minority == WindowLabel::kPreictal) {
        row.preictal += extra.size();
      } else {
        row.interictal += extra.size();
      }
      windows.insert(windows.end(), extra.begin(), extra.end());
    }
    std::sort(windows.begin(), windows.end(), by_patient_then_time);
    train.insert(train.end(), windows.begin(), windows.end());
    if (summary) summary->push_back(row);
  }
  manifest.train = std::move(train);
  return manifest;
}

std::vector<SplitManifest> leave_one_seizure_out(const std::vector<WindowRef>& windows,
                                                 const std::vector<PatientSeizures>& seizures,
                                                 const LabelingPolicy& policy,
                                                 std::uint64_t seed) {
  const double w = policy.window_len_s;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<WindowRef> sorted = windows;
  std::sort(sorted.begin(), sorted.end(), by_patient_then_time);

  std::vector<SplitManifest> folds;
  for (const auto& ps : seizures) {
    const auto& z = ps.seizures;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double lo = i == 0 ? -kInf : 0.5 * (z[i - 1].offset_s + z[i].onset_s);
      const double hi = i + 1 == z.size() ? kInf : 0.5 * (z[i].offset_s + z[i + 1].onset_s);
      SplitManifest fold;
      fold.ratio = 0.0;
      fold.seed = seed;
      double test_begin = kInf;
      double test_end = -kInf;
      for (const auto& x : sorted) {
        if (x.patient_id == ps.patient_id && x.start_s >= lo && x.start_s < hi) {
          fold.test.push_back(x);
          test_begin = std::min(test_begin, x.start_s);
          test_end = std::max(test_end, x.start_s + w);
        }
      }
      if (fold.test.empty()) continue;
      for (const auto& x : sorted) {
        const bool overlaps = x.patient_id == ps.patient_id && x.start_s < test_end &&
                              x.start_s + w > test_begin;
        if (!overlaps) fold.train.push_back(x);
      }
      if (fold.train.empty()) continue;
      const double total = static_cast<double>(fold.train.size() + fold.test.size());
      fold.ratio = static_cast<double>(fold.train.size()) / total;
      folds.push_back(std::move(fold));
    }
  }
  return folds;
}

}  // namespace preictal
