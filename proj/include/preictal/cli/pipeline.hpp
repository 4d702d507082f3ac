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

// Pipeline commands behind the CLI subcommands.
//
// Directory layout:
//   records/  <patient>_<name>.eegr + .ann sidecars, records.json
//   cache/    windows/*.spec, manifest.txt, recordings.json, .lock while
//             preprocessing
//   eval/     predictions.csv, alarms.csv, report.csv, report.txt

#ifndef PREICTAL_CLI_PIPELINE_HPP_
#define PREICTAL_CLI_PIPELINE_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "preictal/alarm_eval.hpp"
#include "preictal/cli/config.hpp"
#include "preictal/dataset.hpp"
#include "preictal/training.hpp"

namespace preictal::cli {

using Logger = std::function<void(const std::string&)>;

/// Writes one synthetic recording per patient plus records.json.
std::vector<std::filesystem::path> cmd_synth(const RunConfig& cfg,
                                             const std::filesystem::path& out_dir,
                                             const Logger& log = {});

/// Converts a CSV file into a record (with an optional annotation file of
/// onset/offset lines) inside out_dir.
std::filesystem::path cmd_import_csv(const RunConfig& cfg, const std::filesystem::path& csv,
                                     const std::string& patient_id,
                                     const std::filesystem::path& out_dir,
                                     const std::filesystem::path& annotations = {},
                                     const Logger& log = {});

struct PreprocessSummary {
  std::size_t records = 0;
  std::size_t cached_windows = 0;
  SplitManifest manifest;
  std::vector<BalanceSummary> balance;
};

/// Labels, splits, balances and caches every window. Missing channels are
/// reported for every offending file in one data error.
PreprocessSummary cmd_preprocess(const RunConfig& cfg, const std::filesystem::path& records_dir,
                                 const std::filesystem::path& cache_dir, const Logger& log = {});

struct TrainSummary {
  std::int64_t steps = 0;
  std::vector<TrainLogEntry> log;
  std::size_t sequences = 0;
};

/// Trains on the cached training split. With `resume`, continues from the
/// checkpoint's optimizer step.
TrainSummary cmd_train(const RunConfig& cfg, const std::filesystem::path& cache_dir,
                       const std::filesystem::path& checkpoint,
                       const std::filesystem::path& log_path, bool resume,
                       const Logger& log = {});

/// Scores test-split predictions of a checkpoint; writes predictions.csv and
/// the report files to out_dir.
EvalReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& cache_dir,
                        const std::filesystem::path& out_dir, const Logger& log = {});

/// Rebuilds the report from a predictions.csv file and the cache metadata.
EvalReport cmd_report(const RunConfig& cfg, const std::filesystem::path& predictions,
                      const std::filesystem::path& cache_dir,
                      const std::filesystem::path& out_dir, const Logger& log = {});

struct WindowPrediction {
  std::string patient_id;
  double window_start_s = 0.0;
  WindowLabel label = WindowLabel::kInterictal;
  double probability = 0.0;
};

/// Preictal probability of each window given up to `context` preceding
/// windows (same patient, time order) fed from a zero LSTM state.
std::vector<WindowPrediction> predict_windows(const nn::ModelParams& params,
                                              const std::vector<WindowRef>& windows,
                                              const std::filesystem::path& cache_dir,
                                              std::int64_t context, int threads);

EvalReport score_predictions(const RunConfig& cfg, const std::vector<WindowPrediction>& preds,
                             const std::filesystem::path& cache_dir,
                             const std::filesystem::path& out_dir);

void write_predictions(const std::filesystem::path& path,
                       const std::vector<WindowPrediction>& preds);
std::vector<WindowPrediction> read_predictions(const std::filesystem::path& path);

}  // namespace preictal::cli

#endif  // PREICTAL_CLI_PIPELINE_HPP_
