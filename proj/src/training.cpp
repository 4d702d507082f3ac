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

#include "preictal/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "preictal/error.hpp"
#include "preictal/parallel.hpp"
#include "preictal/rng.hpp"

namespace preictal {

namespace {

std::string shortest(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError(where + ": bad number '" + s + "'", 0);
  }
  return x;
}

}  // namespace

void NoamConfig::validate() const {
  if (!(initial_lr_rate > 0.0) || !std::isfinite(initial_lr_rate)) {
    throw ConfigError("noam initial_lr_rate must be positive");
  }
  if (warmup_steps < 1) throw ConfigError("noam warmup_steps must be positive");
}

double noam_lr(std::int64_t step_num, const NoamConfig& cfg) {
  if (step_num < 1) {
    throw PreconditionError("noam_lr: step_num must be >= 1, got " + std::to_string(step_num));
  }
  cfg.validate();
  const double s = static_cast<double>(step_num);
  const double w = static_cast<double>(cfg.warmup_steps);
  return std::sqrt(cfg.initial_lr_rate * w) * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

AdamState AdamState::zeros_for(const nn::ModelParams& params) {
  AdamState s;
  s.m = Vector<double>::Zero(params.values().size());
  s.v = Vector<double>::Zero(params.values().size());
  return s;
}

void adam_apply(nn::ModelParams& params, const nn::ModelParams& grads, AdamState& state,
                double lr) {
  auto& theta = params.values();
  const auto& g = grads.values();
  if (g.size() != theta.size()) throw ShapeError("adam_apply: gradient size mismatch");
  if (state.m.size() != theta.size() || state.v.size() != theta.size()) {
    throw ShapeError("adam_apply: optimizer state size mismatch");
  }
  for (Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw TrainingError("non-finite gradient in tensor '" + params.layout().owner(i).name +
                          "'");
    }
  }
  state.step_num += 1;
  const double t = static_cast<double>(state.step_num);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);
  for (Index i = 0; i < theta.size(); ++i) {
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (sequence_len < 1) throw ConfigError("sequence_len must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

SequenceSet::SequenceSet(std::vector<TrainingWindow> windows, std::int64_t sequence_len)
    : windows_(std::move(windows)) {
  if (sequence_len < 1) throw ConfigError("sequence_len must be >= 1");
  std::stable_sort(windows_.begin(), windows_.end(), [](const auto& a, const auto& b) {
    if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
    return a.start_s < b.start_s;
  });
  const auto len = static_cast<std::size_t>(sequence_len);
  std::size_t begin = 0;
  while (begin < windows_.size()) {
    std::size_t end = begin;
    while (end < windows_.size() && windows_[end].patient_id == windows_[begin].patient_id) ++end;
    const std::size_t n = end - begin;
    if (n < len) {
      std::vector<std::size_t> seq(n);
      std::iota(seq.begin(), seq.end(), begin);
      sequences_.push_back(std::move(seq));
    } else {
      for (std::size_t s = begin; s + len <= end; ++s) {
        std::vector<std::size_t> seq(len);
        std::iota(seq.begin(), seq.end(), s);
        sequences_.push_back(std::move(seq));
      }
    }
    begin = end;
  }
}

BatchSchedule::BatchSchedule(std::size_t num_sequences, std::int64_t batch_size,
                             std::uint64_t seed)
    : n_(num_sequences), batch_size_(batch_size), seed_(seed) {
  if (n_ == 0) throw ConfigError("training set has no sequences");
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
}

const std::vector<std::size_t>& BatchSchedule::permutation(std::uint64_t pass) {
  if (pass != cached_pass_) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    CounterRng rng(seed_, 0x7A11000000000000ULL + pass);
    shuffle(perm_, rng);
    cached_pass_ = pass;
  }
  return perm_;
}

std::vector<std::size_t> BatchSchedule::batch(std::int64_t step) {
  if (step < 1) throw PreconditionError("batch schedule steps start at 1");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(batch_size_));
  const auto first = static_cast<std::uint64_t>(step - 1) * static_cast<std::uint64_t>(batch_size_);
  for (std::int64_t j = 0; j < batch_size_; ++j) {
    const std::uint64_t pos = first + static_cast<std::uint64_t>(j);
    out.push_back(permutation(pos / n_)[pos % n_]);
  }
  return out;
}

std::string format_log_line(const TrainLogEntry& e) {
  return std::to_string(e.step) + "\t" + shortest(e.lr) + "\t" + shortest(e.loss);
}

std::vector<TrainLogEntry> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training log " + path.string());
  std::vector<TrainLogEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string step, lr, loss;
    if (!std::getline(fields, step, '\t') || !std::getline(fields, lr, '\t') ||
        !std::getline(fields, loss)) {
      throw FormatError(path.string() + ": malformed log line '" + line + "'", 0);
    }
    out.push_back({std::stoll(step), parse_double(lr, path.string()),
                   parse_double(loss, path.string())});
  }
  return out;
}

namespace {

// Converts the windows referenced by a batch to f64 once each.
struct BatchWindows {
  std::map<std::size_t, nn::Window> storage;
  std::vector<nn::Sample> samples;

  BatchWindows(const SequenceSet& data, const std::vector<std::size_t>& seqs) {
    for (std::size_t s : seqs) {
      nn::Sample sample;
      for (std::size_t w : data.indices(s)) {
        auto it = storage.find(w);
        if (it == storage.end()) {
          it = storage.emplace(w, data.windows()[w].spectrogram.cast<double>()).first;
        }
        sample.windows.push_back(&it->second);
        sample.labels.push_back(data.windows()[w].label);
      }
      samples.push_back(std::move(sample));
    }
  }
};

}  // namespace

TrainResult train(const SequenceSet& data, nn::ModelParams params, AdamState adam,
                  const TrainConfig& cfg, const NoamConfig& noam, const TrainOutputs& out) {
  cfg.validate();
  noam.validate();
  if (data.size() == 0) throw ConfigError("training set is empty");
  if (adam.m.size() == 0) adam = AdamState::zeros_for(params);

  BatchSchedule schedule(data.size(), cfg.batch_size, cfg.seed);
  std::ofstream log_file;
  if (out.log) {
    log_file.open(*out.log, std::ios::app);
    if (!log_file) throw IoError("cannot open training log " + out.log->string());
  }

  TrainResult result{std::move(params), std::move(adam), {}};
  for (std::int64_t step = result.adam.step_num + 1; step <= cfg.max_steps; ++step) {
    BatchWindows batch(data, schedule.batch(step));
    const auto grads = nn::batch_backward(batch.samples, result.params, cfg.threads);
    if (!std::isfinite(grads.loss)) {
      throw TrainingError("non-finite loss at step " + std::to_string(step));
    }
    const double lr = noam_lr(step, noam);
    adam_apply(result.params, grads.grads, result.adam, lr);
    const TrainLogEntry entry{step, lr, grads.loss};
    result.log.push_back(entry);
    if (log_file.is_open()) log_file << format_log_line(entry) << '\n' << std::flush;
    if (out.on_step) out.on_step(entry);
    if (out.checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      write_checkpoint(*out.checkpoint, result.params, result.adam);
    }
  }
  if (out.checkpoint) write_checkpoint(*out.checkpoint, result.params, result.adam);
  return result;
}

SequenceMetrics evaluate_sequences(const SequenceSet& data, const nn::ModelParams& params,
                                   int threads) {
  if (data.size() == 0) throw ConfigError("no sequences to evaluate");
  struct PerSeq {
    double loss;
    std::size_t correct;
    std::size_t steps;
  };
  const auto per = parallel_map(data.size(), threads, [&](std::size_t s) {
    std::vector<nn::Window> windows;
    std::vector<int> labels;
    for (std::size_t w : data.indices(s)) {
      windows.push_back(data.windows()[w].spectrogram.cast<double>());
      labels.push_back(data.windows()[w].label);
    }
    const auto r = nn::forward(windows, params, nn::zero_state(params.config()));
    PerSeq p{0.0, 0, windows.size()};
    for (Index t = 0; t < r.probs.rows(); ++t) {
      const auto y = static_cast<std::size_t>(t);
      p.loss += nn::cross_entropy(r.probs.row(t).transpose(), labels[y]);
      Index best = 0;
      r.probs.row(t).maxCoeff(&best);
      if (best == labels[y]) ++p.correct;
    }
    p.loss /= static_cast<double>(windows.size());
    return p;
  });
  SequenceMetrics m;
  std::size_t correct = 0;
  std::size_t steps = 0;
  for (const auto& p : per) {
    m.loss += p.loss;
    correct += p.correct;
    steps += p.steps;
  }
  m.loss /= static_cast<double>(per.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(steps);
  return m;
}

void write_checkpoint(const std::filesystem::path& path, const nn::ModelParams& params,
                      const AdamState& adam) {
  auto table = nn::params_to_table(params);
  if (adam.m.size() == params.values().size()) {
    Vector<double> hyper(4);
    hyper << static_cast<double>(adam.step_num), adam.beta1, adam.beta2, adam.epsilon;
    table.push_back({"adam.hyper", {4}, hyper});
    for (const auto& e : params.layout().entries()) {
      table.push_back({"adam.m." + e.name, e.shape, adam.m.segment(e.offset, e.size)});
    }
    for (const auto& e : params.layout().entries()) {
      table.push_back({"adam.v." + e.name, e.shape, adam.v.segment(e.offset, e.size)});
    }
  }
  nn::write_tensor_table(path, table);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto table = nn::read_tensor_table(path);
  Checkpoint ck{nn::params_from_table(table), {}};
  std::map<std::string, const nn::NamedTensor*> by_name;
  for (const auto& t : table) by_name[t.name] = &t;
  const auto hyper = by_name.find("adam.hyper");
  if (hyper == by_name.end()) {
    ck.adam = AdamState::zeros_for(ck.params);
    return ck;
  }
  if (hyper->second->values.size() != 4) throw IntegrityError("malformed adam.hyper entry");
  const auto& h = hyper->second->values;
  ck.adam = AdamState::zeros_for(ck.params);
  ck.adam.step_num = static_cast<std::int64_t>(h[0]);
  ck.adam.beta1 = h[1];
  ck.adam.beta2 = h[2];
  ck.adam.epsilon = h[3];
  for (const auto& e : ck.params.layout().entries()) {
    for (const char* kind : {"adam.m.", "adam.v."}) {
      const auto it = by_name.find(kind + e.name);
      if (it == by_name.end() || it->second->shape != e.shape) {
        throw IntegrityError("checkpoint optimizer state lacks '" + std::string(kind) + e.name +
                             "'");
      }
      auto& dst = kind[5] == 'm' ? ck.adam.m : ck.adam.v;
      dst.segment(e.offset, e.size) = it->second->values;
    }
  }
  return ck;
}

}  // namespace preictal
