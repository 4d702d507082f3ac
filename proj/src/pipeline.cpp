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

#include "preictal/cli/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "preictal/error.hpp"
#include "preictal/parallel.hpp"
#include "preictal/rng.hpp"

namespace preictal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRecordExt = ".eegr";
constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kRecordingsFile = "recordings.json";
constexpr const char* kWindowsDir = "windows";

void note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string shortest(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

json seizures_json(const std::vector<SeizureEvent>& seizures) {
  json out = json::array();
  for (const auto& s : seizures) out.push_back({s.onset_s, s.offset_s});
  return out;
}

// Exclusive lock on a cache directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw IoError("cache directory " + dir.string() + " is locked (" + path_.string() +
                    " exists)");
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

struct PatientMeta {
  std::vector<SeizureEvent> seizures;
  std::vector<RecordSpan> records;
};

struct CacheMeta {
  double sample_rate_hz = 256.0;
  double window_len_s = 30.0;
  Shape input_shape;
  std::map<std::string, PatientMeta> patients;
};

CacheMeta read_cache_meta(const fs::path& cache_dir) {
  const json doc = read_json(cache_dir / kRecordingsFile);
  CacheMeta meta;
  try {
    meta.sample_rate_hz = doc.at("sample_rate_hz").get<double>();
    meta.window_len_s = doc.at("window_len_s").get<double>();
    meta.input_shape = doc.at("input_shape").get<Shape>();
    for (const auto& [pid, p] : doc.at("patients").items()) {
      PatientMeta pm;
      for (const auto& s : p.at("seizures")) {
        pm.seizures.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
      }
      for (const auto& r : p.at("records")) {
        pm.records.push_back({r.at("begin_s").get<double>(), r.at("end_s").get<double>()});
      }
      meta.patients[pid] = std::move(pm);
    }
  } catch (const json::exception& e) {
    throw IntegrityError((cache_dir / kRecordingsFile).string() + ": " + e.what());
  }
  return meta;
}

Tensor<float> load_window(const fs::path& cache_dir, const WindowRef& ref, const Shape& shape) {
  const auto path = cache_dir / kWindowsDir / ref.cache_filename();
  if (!fs::exists(path)) throw IoError("missing cached window " + path.string());
  auto t = read_spectrogram(path);
  if (t.shape() != shape) {
    throw IntegrityError(path.string() + ": shape " + shape_string(t.shape()) + ", expected " +
                         shape_string(shape));
  }
  return t;
}

}  // namespace

std::vector<fs::path> cmd_synth(const RunConfig& cfg, const fs::path& out_dir,
                                const Logger& log) {
  ensure_dir(out_dir);
  const int patients = cfg.synth_patients();
  json listing = json::array();
  std::vector<fs::path> written;
  for (int p = 0; p < patients; ++p) {
    const auto sc = cfg.synth(p);
    const std::uint64_t seed = CounterRng(cfg.seed(), 0x5EED0000ULL + p).next_u64();
    const auto rec = synth_eeg(sc, seed);
    const auto path = out_dir / (sc.patient_id + "_synth" + kRecordExt);
    write_record(path, rec);
    note(log, "wrote " + path.string());
    listing.push_back({{"file", path.filename().string()},
                       {"patient_id", sc.patient_id},
                       {"sample_rate_hz", sc.sample_rate_hz},
                       {"duration_s", sc.duration_s},
                       {"seizures", seizures_json(rec.seizures)}});
    written.push_back(path);
  }
  write_text(out_dir / "records.json", json{{"records", listing}}.dump(2) + "\n");
  return written;
}

fs::path cmd_import_csv(const RunConfig& cfg, const fs::path& csv, const std::string& patient_id,
                        const fs::path& out_dir, const fs::path& annotations, const Logger& log) {
  if (patient_id.empty() || patient_id.find('_') != std::string::npos) {
    throw ConfigError("patient id must be non-empty and must not contain '_'");
  }
  const auto rate = cfg.integer("import.sample_rate_hz");
  if (rate < 1) throw ConfigError("import.sample_rate_hz must be positive");
  AnnotatedRecording rec;
  rec.record = import_csv(csv, patient_id, static_cast<std::uint32_t>(rate),
                          cfg.real("import.start_time_s"));
  if (!annotations.empty()) rec.seizures = read_annotations(annotations);
  rec.validate();
  ensure_dir(out_dir);
  const auto path = out_dir / (patient_id + "_" + csv.stem().string() + kRecordExt);
  write_record(path, rec);
  note(log, "wrote " + path.string());
  return path;
}

PreprocessSummary cmd_preprocess(const RunConfig& cfg, const fs::path& records_dir,
                                 const fs::path& cache_dir, const Logger& log) {
  const auto policy = cfg.labeling();
  const auto stft = cfg.stft();
  const double ratio = cfg.split_ratio();
  const int threads = cfg.threads();

  if (!fs::is_directory(records_dir)) {
    throw IoError("records directory " + records_dir.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(records_dir)) {
    if (e.is_regular_file() && e.path().extension() == kRecordExt) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no " + std::string(kRecordExt) + " files in " + records_dir.string());

  ensure_dir(cache_dir / kWindowsDir);
  DirectoryLock lock(cache_dir);

  // Pass 1: headers, channel check, labels.
  struct RecordInfo {
    fs::path path;
    std::string patient_id;
    double begin_s;
    double end_s;
  };
  std::vector<RecordInfo> infos;
  std::vector<WindowRef> native;
  std::map<std::string, PatientMeta> patients;
  std::string missing_msg;
  std::vector<std::string> missing_all;
  std::optional<std::uint32_t> rate;
  for (const auto& path : files) {
    auto rec = read_record(path);
    try {
      rec = select_channels(rec);
    } catch (const MissingChannelError& e) {
      if (!missing_msg.empty()) missing_msg += "; ";
      missing_msg += path.filename().string() + ": " + e.what();
      for (const auto& m : e.missing()) missing_all.push_back(m);
      continue;
    }
    if (rate && *rate != rec.record.sample_rate_hz) {
      throw IntegrityError("records disagree on sample rate: " + path.string());
    }
    rate = rec.record.sample_rate_hz;
    std::sort(rec.seizures.begin(), rec.seizures.end(),
              [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
    rec.seizures = merge_seizures(rec.seizures, policy.merge_gap_s);
    const auto& pid = rec.record.patient_id;
    for (const auto& e : label_windows(rec, policy)) {
      native.push_back({pid, e.start_s, e.label, WindowSource::kStrideNative});
    }
    auto& pm = patients[pid];
    pm.records.push_back({rec.record.start_time_s, rec.record.end_time_s()});
    pm.seizures.insert(pm.seizures.end(), rec.seizures.begin(), rec.seizures.end());
    infos.push_back({path, pid, rec.record.start_time_s, rec.record.end_time_s()});
    note(log, "labeled " + path.filename().string());
  }
  if (!missing_msg.empty()) throw MissingChannelError(missing_all, missing_msg);

  PreprocessSummary summary;
  summary.records = infos.size();
  summary.manifest = split_dataset(native, ratio, cfg.seed());
  summary.manifest = balance_training_split(summary.manifest, policy, &summary.balance);

  // Pass 2: spectrograms, one record in memory at a time.
  std::vector<WindowRef> all = summary.manifest.train;
  all.insert(all.end(), summary.manifest.test.begin(), summary.manifest.test.end());
  std::set<std::string> expected;
  for (const auto& w : all) expected.insert(w.cache_filename());
  std::vector<bool> done(all.size(), false);
  for (const auto& info : infos) {
    std::vector<std::size_t> mine;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (!done[i] && all[i].patient_id == info.patient_id && all[i].start_s >= info.begin_s &&
          all[i].start_s + policy.window_len_s <= info.end_s + 1e-6) {
        mine.push_back(i);
      }
    }
    if (mine.empty()) continue;
    const auto rec = select_channels(read_record(info.path));
    parallel_map(mine.size(), threads, [&](std::size_t j) {
      const auto& w = all[mine[j]];
      const auto start = static_cast<Index>(
          std::llround((w.start_s - rec.record.start_time_s) * rec.record.sample_rate_hz));
      const auto spec = build_spectrogram(rec.record, start, policy.window_len_s, stft);
      write_spectrogram(cache_dir / kWindowsDir / w.cache_filename(), spec.values);
      return 0;
    });
    for (std::size_t i : mine) done[i] = true;
    note(log, "cached " + std::to_string(mine.size()) + " windows of " +
                  info.path.filename().string());
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!done[i]) throw IntegrityError("window " + all[i].id() + " lies outside every record");
  }
  // Drop stale cache entries so the cache mirrors the manifest.
  for (const auto& e : fs::directory_iterator(cache_dir / kWindowsDir)) {
    if (!expected.count(e.path().filename().string())) fs::remove(e.path());
  }
  summary.cached_windows = expected.size();

  json pj = json::object();
  for (auto& [pid, pm] : patients) {
    std::sort(pm.seizures.begin(), pm.seizures.end(),
              [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
    pm.seizures = merge_seizures(pm.seizures, policy.merge_gap_s);
    json recs = json::array();
    for (const auto& r : pm.records) recs.push_back({{"begin_s", r.begin_s}, {"end_s", r.end_s}});
    pj[pid] = {{"records", recs}, {"seizures", seizures_json(pm.seizures)}};
  }
  const auto shape = spectrogram_shape(static_cast<Index>(canonical_channels().size()),
                                       policy.window_len_s, rate.value_or(256), stft);
  const json meta = {{"sample_rate_hz", rate.value_or(256)},
                     {"window_len_s", policy.window_len_s},
                     {"input_shape", shape},
                     {"patients", pj}};
  write_text(cache_dir / kRecordingsFile, meta.dump(2) + "\n");
  write_manifest(cache_dir / kManifestFile, summary.manifest);
  for (const auto& b : summary.balance) {
    note(log, "balance " + b.patient_id + ": oversampled " + label_name(b.oversampled_class) +
                  " at stride " + shortest(b.stride_s) + " s -> " + std::to_string(b.preictal) +
                  " preictal / " + std::to_string(b.interictal) + " interictal" +
                  (b.shortfall ? " (shortfall)" : ""));
  }
  return summary;
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& cache_dir, const fs::path& checkpoint,
                       const fs::path& log_path, bool resume, const Logger& log) {
  const auto tcfg = cfg.train();
  const auto noam = cfg.noam();
  const auto meta = read_cache_meta(cache_dir);
  const auto manifest = read_manifest(cache_dir / kManifestFile);
  if (manifest.train.empty()) throw ConfigError("training split is empty");
  const auto model_cfg = cfg.model(meta.input_shape);

  std::vector<TrainingWindow> windows;
  windows.reserve(manifest.train.size());
  for (const auto& w : manifest.train) {
    windows.push_back({w.patient_id, w.start_s, static_cast<int>(w.label),
                       load_window(cache_dir, w, meta.input_shape)});
  }
  const SequenceSet data(std::move(windows), tcfg.sequence_len);
  note(log, "training on " + std::to_string(manifest.train.size()) + " windows, " +
                std::to_string(data.size()) + " sequences");

  nn::ModelParams params(model_cfg);
  AdamState adam;
  if (resume && fs::exists(checkpoint)) {
    auto ck = read_checkpoint(checkpoint);
    if (!(ck.params.config() == model_cfg)) {
      throw ConfigError("checkpoint " + checkpoint.string() + " was trained with another model");
    }
    params = std::move(ck.params);
    adam = std::move(ck.adam);
    note(log, "resuming at step " + std::to_string(adam.step_num));
  } else {
    params = nn::init_params(model_cfg, tcfg.seed);
    adam = AdamState::zeros_for(params);
    if (!log_path.empty()) write_text(log_path, "");
  }
  if (!checkpoint.parent_path().empty()) ensure_dir(checkpoint.parent_path());

  TrainOutputs outs;
  outs.checkpoint = checkpoint;
  if (!log_path.empty()) outs.log = log_path;
  if (log) {
    outs.on_step = [&](const TrainLogEntry& e) {
      if (e.step % 10 == 0 || e.step == tcfg.max_steps) log(format_log_line(e));
    };
  }
  auto result = train(data, std::move(params), std::move(adam), tcfg, noam, outs);
  return {result.adam.step_num, std::move(result.log), data.size()};
}

std::vector<WindowPrediction> predict_windows(const nn::ModelParams& params,
                                              const std::vector<WindowRef>& windows,
                                              const fs::path& cache_dir, std::int64_t context,
                                              int threads) {
  if (context < 1) throw ConfigError("prediction context must be >= 1");
  std::vector<WindowRef> sorted = windows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.patient_id != b.patient_id ? a.patient_id < b.patient_id : a.start_s < b.start_s;
  });
  const auto& mc = params.config();
  const Shape shape{mc.input_channels, mc.input_height, mc.input_width};
  const auto features = parallel_map(sorted.size(), threads, [&](std::size_t i) {
    return nn::encode(load_window(cache_dir, sorted[i], shape).cast<double>(), params);
  });
  const auto probs = parallel_map(sorted.size(), threads, [&](std::size_t i) {
    std::size_t first = i;
    while (first > 0 && i - first + 1 < static_cast<std::size_t>(context) &&
           sorted[first - 1].patient_id == sorted[i].patient_id) {
      --first;
    }
    const std::span<const Vector<double>> ctx(features.data() + first, i - first + 1);
    const auto p = nn::classify_features(ctx, params, nn::zero_state(mc));
    return p(p.rows() - 1, static_cast<Index>(WindowLabel::kPreictal));
  });
  std::vector<WindowPrediction> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out.push_back({sorted[i].patient_id, sorted[i].start_s, sorted[i].label, probs[i]});
  }
  return out;
}

void write_predictions(const fs::path& path, const std::vector<WindowPrediction>& preds) {
  std::ostringstream out;
  out << "patient,window_start_s,label,probability\n";
  for (const auto& p : preds) {
    out << p.patient_id << ',' << shortest(p.window_start_s) << ',' << label_name(p.label) << ','
        << shortest(p.probability) << '\n';
  }
  write_text(path, out.str());
}

std::vector<WindowPrediction> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "patient,window_start_s,label,probability") {
    throw FormatError(path.string() + ": unexpected header", 0);
  }
  std::vector<WindowPrediction> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 4) throw FormatError(path.string() + ": malformed line '" + line + "'", 0);
    try {
      out.push_back({f[0], std::stod(f[1]), parse_label(f[2]), std::stod(f[3])});
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": malformed line '" + line + "'", 0);
    }
  }
  return out;
}

EvalReport score_predictions(const RunConfig& cfg, const std::vector<WindowPrediction>& preds,
                             const fs::path& cache_dir, const fs::path& out_dir) {
  const auto policy = cfg.labeling();
  const auto alarm = cfg.alarm();
  const auto meta = read_cache_meta(cache_dir);
  std::map<std::string, std::vector<WindowPrediction>> by_patient;
  for (const auto& p : preds) by_patient[p.patient_id].push_back(p);

  std::vector<PatientRow> rows;
  std::ostringstream alarms_csv;
  alarms_csv << "patient,alarm_time_s,outcome\n";
  for (auto& [pid, ps] : by_patient) {
    std::sort(ps.begin(), ps.end(),
              [](const auto& a, const auto& b) { return a.window_start_s < b.window_start_s; });
    PredictionStream stream;
    stream.patient_id = pid;
    stream.window_len_s = policy.window_len_s;
    stream.threshold = alarm.threshold;
    std::vector<RecordSpan> spans;
    std::size_t preictal = 0;
    std::size_t flagged = 0;
    for (const auto& p : ps) {
      stream.points.push_back({p.window_start_s, p.probability});
      const double end = p.window_start_s + policy.window_len_s;
      if (!spans.empty() && p.window_start_s <= spans.back().end_s + 1e-6) {
        spans.back().end_s = std::max(spans.back().end_s, end);
      } else {
        spans.push_back({p.window_start_s, end});
      }
      if (p.label == WindowLabel::kPreictal) {
        ++preictal;
        if (p.probability >= alarm.threshold) ++flagged;
      }
    }
    const auto timeline = k_of_n_alarms(stream, alarm.k, alarm.n, alarm.refractory_s);
    std::vector<SeizureEvent> scored;
    const auto it = meta.patients.find(pid);
    if (it == meta.patients.end()) throw IntegrityError("no recording metadata for " + pid);
    for (const auto& s : it->second.seizures) {
      if (s.onset_s >= spans.front().begin_s) scored.push_back(s);
    }
    const auto score = score_events(timeline, scored, policy.sop_s, policy.sph_s, spans);
    double seconds = 0.0;
    for (const auto& s : spans) seconds += s.end_s - s.begin_s;
    std::optional<double> window_sen;
    if (preictal > 0) window_sen = 100.0 * static_cast<double>(flagged) / preictal;
    rows.push_back(make_patient_row(pid, score, seconds / 3600.0, window_sen));

    for (double t : timeline.alarm_times_s) {
      std::string outcome = "FP";
      for (const auto& o : score.seizures) {
        if (o.alarm_time_s && *o.alarm_time_s == t) outcome = "TP";
      }
      if (outcome == "FP") {
        for (const auto& s : scored) {
          if (s.onset_s >= t + policy.sph_s && s.onset_s <= t + policy.sph_s + policy.sop_s) {
            outcome = "redundant";
          }
        }
      }
      alarms_csv << pid << ',' << shortest(t) << ',' << outcome << '\n';
    }
  }
  const auto report = build_report(std::move(rows), policy.sop_s / 3600.0);
  ensure_dir(out_dir);
  write_text(out_dir / "alarms.csv", alarms_csv.str());
  write_text(out_dir / "report.csv", report_csv(report));
  write_text(out_dir / "report.txt", report_table(report));
  return report;
}

EvalReport cmd_evaluate(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& cache_dir,
                        const fs::path& out_dir, const Logger& log) {
  const auto ck = read_checkpoint(checkpoint);
  const auto manifest = read_manifest(cache_dir / kManifestFile);
  if (manifest.test.empty()) throw ConfigError("test split is empty");
  const auto preds = predict_windows(ck.params, manifest.test, cache_dir,
                                     cfg.integer("train.sequence_len"), cfg.threads());
  ensure_dir(out_dir);
  write_predictions(out_dir / "predictions.csv", preds);
  note(log, "wrote " + (out_dir / "predictions.csv").string());
  return score_predictions(cfg, preds, cache_dir, out_dir);
}

EvalReport cmd_report(const RunConfig& cfg, const fs::path& predictions, const fs::path& cache_dir,
                      const fs::path& out_dir, const Logger& log) {
  const auto preds = read_predictions(predictions);
  if (preds.empty()) throw IntegrityError(predictions.string() + " holds no predictions");
  auto report = score_predictions(cfg, preds, cache_dir, out_dir);
  note(log, "wrote " + (out_dir / "report.csv").string());
  return report;
}

}  // namespace preictal::cli
