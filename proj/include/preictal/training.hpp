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

// Adam with a Noam warmup schedule and the mini-batch training loop.

#ifndef PREICTAL_TRAINING_HPP_
#define PREICTAL_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "preictal/nn/model.hpp"

namespace preictal {

struct NoamConfig {
  double initial_lr_rate = 0.001;
  std::int64_t warmup_steps = 4000;

  void validate() const;
};

/// lr = (initial * warmup)^0.5 * min(step^-0.5, step * warmup^-1.5).
/// Throws PreconditionError for step < 1.
double noam_lr(std::int64_t step_num, const NoamConfig& cfg);

struct AdamState {
  Vector<double> m;
  Vector<double> v;
  std::int64_t step_num = 0;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;

  static AdamState zeros_for(const nn::ModelParams& params);
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update in place. A non-finite gradient component
/// throws TrainingError naming its tensor; nothing is modified in that case.
void adam_apply(nn::ModelParams& params, const nn::ModelParams& grads, AdamState& state,
                double lr);

struct TrainConfig {
  std::int64_t batch_size = 50;
  std::int64_t max_steps = 2000;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;  // 0 writes only the final checkpoint
  std::int64_t sequence_len = 10;
  int threads = 1;

  void validate() const;
};

/// One cached training window.
struct TrainingWindow {
  std::string patient_id;
  double start_s = 0.0;
  int label = 0;
  Tensor<float> spectrogram;
};

/// Training sequences: every run of sequence_len consecutive windows (in
/// time order) of a patient; a patient with fewer windows contributes one
/// shorter sequence.
class SequenceSet {
 public:
  SequenceSet(std::vector<TrainingWindow> windows, std::int64_t sequence_len);

  std::size_t size() const { return sequences_.size(); }
  const std::vector<std::size_t>& indices(std::size_t seq) const { return sequences_[seq]; }
  const std::vector<TrainingWindow>& windows() const { return windows_; }

 private:
  std::vector<TrainingWindow> windows_;
  std::vector<std::vector<std::size_t>> sequences_;
};

/// Sequence index used at position `j` of the batch for `step` (1-based).
/// Passes over the sequence set use independent seeded permutations, so the
/// schedule depends only on (seed, step).
class BatchSchedule {
 public:
  BatchSchedule(std::size_t num_sequences, std::int64_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> batch(std::int64_t step);

 private:
  const std::vector<std::size_t>& permutation(std::uint64_t pass);
  std::size_t n_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t cached_pass_ = ~0ULL;
  std::vector<std::size_t> perm_;
};

struct TrainLogEntry {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  bool operator==(const TrainLogEntry&) const = default;
};

// "step<TAB>lr<TAB>loss", round-trippable number formatting.
std::string format_log_line(const TrainLogEntry& entry);
std::vector<TrainLogEntry> read_train_log(const std::filesystem::path& path);

struct TrainOutputs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> log;  // appended to
  std::function<void(const TrainLogEntry&)> on_step;
};

struct TrainResult {
  nn::ModelParams params;
  AdamState adam;
  std::vector<TrainLogEntry> log;
};

/// Runs steps adam.step_num + 1 .. cfg.max_steps. Each step averages the
/// gradient of batch_size sequences, then applies noam_lr and adam_apply.
/// A non-finite loss or gradient throws TrainingError; the checkpoint on
/// disk is then the last one written before the failure.
TrainResult train(const SequenceSet& data, nn::ModelParams params, AdamState adam,
                  const TrainConfig& cfg, const NoamConfig& noam, const TrainOutputs& out = {});

// Mean loss and per-window accuracy (argmax) over every sequence.
struct SequenceMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};
SequenceMetrics evaluate_sequences(const SequenceSet& data, const nn::ModelParams& params,
                                   int threads = 1);

// Model parameters followed by "adam.*" entries.
void write_checkpoint(const std::filesystem::path& path, const nn::ModelParams& params,
                      const AdamState& adam);
struct Checkpoint {
  nn::ModelParams params;
  AdamState adam;
};
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace preictal

#endif  // PREICTAL_TRAINING_HPP_
