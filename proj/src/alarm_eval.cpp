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

#include "preictal/alarm_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "preictal/error.hpp"

namespace preictal {

void PredictionStream::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.probability >= 0.0 && p.probability <= 1.0)) {
      throw PreconditionError("prediction probability outside [0, 1] at window " +
                              std::to_string(i));
    }
    if (i > 0 && !(p.window_start_s > points[i - 1].window_start_s)) {
      throw PreconditionError("prediction window starts must be strictly increasing");
    }
  }
  if (!(window_len_s > 0.0)) throw ConfigError("window_len_s must be positive");
}

std::vector<bool> PredictionStream::positives() const {
  std::vector<bool> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.probability >= threshold);
  return out;
}

std::vector<std::size_t> k_of_n_raw(const std::vector<bool>& positive, int k, int n) {
  if (n < 1 || k < 1 || k > n) {
    throw ConfigError("k-of-n requires 1 <= k <= n, got k=" + std::to_string(k) +
                      " n=" + std::to_string(n));
  }
  const auto un = static_cast<std::size_t>(n);
  std::vector<std::size_t> out;
  int count = 0;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    count += positive[i] ? 1 : 0;
    if (i >= un) count -= positive[i - un] ? 1 : 0;
    if (i + 1 >= un && count >= k) out.push_back(i);
  }
  return out;
}

AlarmTimeline k_of_n_alarms(const PredictionStream& stream, int k, int n, double refractory_s) {
  stream.validate();
  if (refractory_s < 0.0) throw ConfigError("refractory period must be non-negative");
  k_of_n_raw({}, k, n);  // validates k and n
  const auto positive = stream.positives();
  // Raw alarms per contiguous run of windows; a gap restarts the count.
  std::vector<std::size_t> raw;
  std::size_t begin = 0;
  while (begin < positive.size()) {
    std::size_t end = begin + 1;
    while (end < positive.size() &&
           stream.points[end].window_start_s - stream.points[end - 1].window_start_s <=
               stream.window_len_s + 1e-6) {
      ++end;
    }
    const std::vector<bool> run(positive.begin() + static_cast<std::ptrdiff_t>(begin),
                                positive.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t i : k_of_n_raw(run, k, n)) raw.push_back(begin + i);
    begin = end;
  }

  AlarmTimeline timeline;
  timeline.refractory_s = refractory_s;
  std::optional<double> last;
  for (std::size_t i : raw) {
    const double t = stream.points[i].window_start_s + stream.window_len_s;
    if (last && t - *last < refractory_s) continue;
    timeline.alarm_times_s.push_back(t);
    last = t;
  }
  return timeline;
}

EventScore score_events(const AlarmTimeline& alarms, const std::vector<SeizureEvent>& seizures,
                        double sop_s, double sph_s, const std::vector<RecordSpan>& spans) {
  EventScore score;
  auto predicts = [&](double alarm, double onset) {
    return onset >= alarm + sph_s && onset <= alarm + sph_s + sop_s;
  };
  for (const auto& sz : seizures) {
    SeizureOutcome outcome{sz, false, std::nullopt};
    for (double t : alarms.alarm_times_s) {
      if (predicts(t, sz.onset_s) && (!outcome.alarm_time_s || t < *outcome.alarm_time_s)) {
        outcome.alarm_time_s = t;
      }
    }
    outcome.predicted = outcome.alarm_time_s.has_value();
    (outcome.predicted ? score.tp : score.fn) += 1;
    score.seizures.push_back(outcome);
  }
  for (double t : alarms.alarm_times_s) {
    const bool hit = std::any_of(seizures.begin(), seizures.end(),
                                 [&](const SeizureEvent& s) { return predicts(t, s.onset_s); });
    if (!hit) ++score.fp;
  }

  double seconds = 0.0;
  for (const auto& span : spans) {
    // Union of excluded intervals clipped to the span.
    std::vector<std::pair<double, double>> excluded;
    for (const auto& sz : seizures) {
      const double b = std::max(span.begin_s, sz.onset_s - sph_s - sop_s);
      const double e = std::min(span.end_s, sz.offset_s);
      if (e > b) excluded.emplace_back(b, e);
    }
    std::sort(excluded.begin(), excluded.end());
    double removed = 0.0;
    double cur_b = 0.0;
    double cur_e = 0.0;
    bool open = false;
    for (const auto& [b, e] : excluded) {
      if (open && b <= cur_e) {
        cur_e = std::max(cur_e, e);
        continue;
      }
      if (open) removed += cur_e - cur_b;
      cur_b = b;
      cur_e = e;
      open = true;
    }
    if (open) removed += cur_e - cur_b;
    seconds += std::max(0.0, span.end_s - span.begin_s - removed);
  }
  score.interictal_hours = seconds / 3600.0;
  return score;
}

EventScore score_events(const AlarmTimeline& alarms, const std::vector<SeizureEvent>& seizures,
                        double sop_s, double sph_s, const RecordSpan& span) {
  return score_events(alarms, seizures, sop_s, sph_s, std::vector<RecordSpan>{span});
}

std::optional<double> sensitivity(const EventScore& score) {
  const int n = score.tp + score.fn;
  if (n == 0) return std::nullopt;
  return 100.0 * static_cast<double>(score.tp) / static_cast<double>(n);
}

std::optional<double> fpr(const EventScore& score) {
  if (!(score.interictal_hours > 0.0)) return std::nullopt;
  return static_cast<double>(score.fp) / score.interictal_hours;
}

double chance_probability(double fpr_per_hour, double sop_hours) {
  if (fpr_per_hour < 0.0 || sop_hours < 0.0) {
    throw PreconditionError("chance_probability needs non-negative fpr and sop");
  }
  return -std::expm1(-fpr_per_hour * sop_hours);
}

double chance_significance(int k, int L, double P) {
  if (L < 0) throw PreconditionError("chance_significance: L must be >= 0");
  if (!(P >= 0.0 && P <= 1.0)) throw PreconditionError("chance_significance: P outside [0, 1]");
  if (k <= 0) return 1.0;
  if (k > L) return 0.0;
  if (P == 0.0) return 0.0;
  if (P == 1.0) return 1.0;
  double total = 0.0;
  if (L <= 64) {
    unsigned __int128 c = 1;  // C(L, i)
    for (int i = 0; i <= L; ++i) {
      if (i > 0) c = c * static_cast<unsigned>(L - i + 1) / static_cast<unsigned>(i);
      if (i >= k) {
        total += static_cast<double>(c) * std::pow(P, i) * std::pow(1.0 - P, L - i);
      }
    }
  } else {
    const double lp = std::log(P);
    const double lq = std::log1p(-P);
    for (int i = k; i <= L; ++i) {
      const double log_c = std::lgamma(L + 1.0) - std::lgamma(i + 1.0) - std::lgamma(L - i + 1.0);
      total += std::exp(log_c + i * lp + (L - i) * lq);
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

PatientRow make_patient_row(const std::string& patient_id, const EventScore& score,
                            double eeg_hours, std::optional<double> window_sensitivity_pct) {
  PatientRow row;
  row.patient_id = patient_id;
  row.n_seizures = score.tp + score.fn;
  row.eeg_hours = eeg_hours;
  row.sensitivity_pct = sensitivity(score);
  row.fpr_per_hour = fpr(score);
  row.window_sensitivity_pct = window_sensitivity_pct;
  row.score = score;
  return row;
}

EvalReport build_report(std::vector<PatientRow> rows, double sop_hours) {
  EvalReport r;
  r.sop_hours = sop_hours;
  double sen_sum = 0.0;
  double fpr_sum = 0.0;
  int sen_n = 0;
  int fpr_n = 0;
  for (const auto& row : rows) {
    r.total_seizures += row.n_seizures;
    r.total_tp += row.score.tp;
    r.total_hours += row.eeg_hours;
    if (row.sensitivity_pct) {
      sen_sum += *row.sensitivity_pct;
      ++sen_n;
    }
    if (row.fpr_per_hour) {
      fpr_sum += *row.fpr_per_hour;
      ++fpr_n;
    }
  }
  if (sen_n > 0) r.mean_sensitivity_pct = sen_sum / sen_n;
  if (fpr_n > 0) r.mean_fpr_per_hour = fpr_sum / fpr_n;
  if (r.total_seizures > 0) {
    double weighted = 0.0;
    for (const auto& row : rows) {
      if (row.sensitivity_pct) weighted += *row.sensitivity_pct * row.n_seizures;
    }
    r.weighted_sensitivity_pct = weighted / r.total_seizures;
  }
  r.p_chance = chance_probability(r.mean_fpr_per_hour.value_or(0.0), sop_hours);
  r.p_value = chance_significance(r.total_tp, r.total_seizures, r.p_chance);
  r.rows = std::move(rows);
  return r;
}

namespace {

std::string num(std::optional<double> v, int digits = 6) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "patient,n_seizures,eeg_hours,sensitivity_pct,fpr_per_hour\n";
  for (const auto& row : r.rows) {
    out << row.patient_id << ',' << row.n_seizures << ',' << num(row.eeg_hours) << ','
        << num(row.sensitivity_pct) << ',' << num(row.fpr_per_hour) << '\n';
  }
  out << "aggregate," << r.total_seizures << ',' << num(r.total_hours) << ','
      << num(r.mean_sensitivity_pct) << ',' << num(r.mean_fpr_per_hour) << '\n';
  out << "P_chance," << num(r.p_chance, 9) << ",,,\n";
  out << "p_value," << num(r.p_value, 9) << ",,,\n";
  return out.str();
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  const std::size_t w = 12;
  out << pad("Patient", w) << pad("Seizures", w) << pad("EEG (h)", w) << pad("SEN (%)", w)
      << pad("FPR (/h)", w) << "Window SEN (%)\n";
  out << std::string(5 * w + 14, '-') << '\n';
  for (const auto& row : r.rows) {
    out << pad(row.patient_id, w) << pad(std::to_string(row.n_seizures), w)
        << pad(num(row.eeg_hours, 2), w) << pad(num(row.sensitivity_pct, 3), w)
        << pad(num(row.fpr_per_hour, 4), w) << num(row.window_sensitivity_pct, 3) << '\n';
  }
  out << std::string(5 * w + 14, '-') << '\n';
  out << pad("Total", w) << pad(std::to_string(r.total_seizures), w)
      << pad(num(r.total_hours, 2), w) << pad(num(r.mean_sensitivity_pct, 3), w)
      << num(r.mean_fpr_per_hour, 4) << '\n';
  out << "Seizure-weighted SEN (%): " << num(r.weighted_sensitivity_pct, 3) << '\n';
  out << "Chance prediction probability (SOP " << num(r.sop_hours, 2)
      << " h): " << num(r.p_chance, 6) << '\n';
  out << "p-value (>= " << r.total_tp << " of " << r.total_seizures
      << " seizures by chance): " << num(r.p_value, 6) << '\n';
  return out.str();
}

}  // namespace preictal
