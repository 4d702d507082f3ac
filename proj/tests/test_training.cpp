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


#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "oracles.hpp"
#include "preictal/error.hpp"
#include "preictal/rng.hpp"
#include "preictal/training.hpp"

using namespace preictal;

namespace {

// Two patients of 100 windows each on the tiny input shape; preictal
// windows carry a positive offset on channel 0.
std::vector<TrainingWindow> separable_windows(std::uint64_t seed) {
  const auto cfg = nn::ModelConfig::tiny();
  CounterRng rng(seed);
  std::vector<TrainingWindow> out;
  for (int p = 0; p < 2; ++p) {
    for (int i = 0; i < 100; ++i) {
      TrainingWindow w;
      w.patient_id = "p" + std::to_string(p);
      w.start_s = 30.0 * i;
      w.label = (i / 25) % 2;
      w.spectrogram = Tensor<float>({cfg.input_channels, cfg.input_height, cfg.input_width});
      for (Index k = 0; k < w.spectrogram.size(); ++k) {
        w.spectrogram.data()[k] = static_cast<float>(rng.normal());
      }
      if (w.label == 1) {
        for (Index y = 0; y < cfg.input_height; ++y) {
          for (Index x = 0; x < cfg.input_width; ++x) w.spectrogram(0, y, x) += 1.0f;
        }
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

TrainConfig small_train(std::int64_t steps) {
  TrainConfig c;
  c.batch_size = 16;
  c.max_steps = steps;
  c.sequence_len = 3;
  c.seed = 4;
  return c;
}

NoamConfig fast_noam() { return {0.001, 50}; }

}  // namespace

TEST_CASE("noam learning rate examples") {
  const NoamConfig cfg{0.001, 4000};
  CHECK(std::abs(noam_lr(4000, cfg) - 0.0316228) < 1e-6);
  CHECK(noam_lr(1, cfg) == doctest::Approx(7.9057e-6).epsilon(1e-4));
  const double w = 4000;
  CHECK(std::abs(std::pow(w, -0.5) - w * std::pow(w, -1.5)) < 1e-15);
  CHECK_THROWS_AS(noam_lr(0, cfg), PreconditionError);
  CHECK_THROWS_AS(noam_lr(1, NoamConfig{0.0, 10}), ConfigError);
  CHECK_THROWS_AS(noam_lr(1, NoamConfig{0.1, 0}), ConfigError);
}

TEST_CASE("noam matches the closed form for random configurations and is unimodal") {
  CounterRng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const NoamConfig cfg{std::exp(rng.uniform(std::log(1e-5), std::log(1.0))),
                         1 + static_cast<std::int64_t>(rng.below(10000))};
    const auto s = 1 + static_cast<std::int64_t>(rng.below(40000));
    const long double init = cfg.initial_lr_rate;
    const long double wu = static_cast<long double>(cfg.warmup_steps);
    const long double sl = static_cast<long double>(s);
    const long double ref = std::sqrt(init * wu) * std::min(1.0L / std::sqrt(sl), sl / (wu * std::sqrt(wu)));
    CHECK(std::abs(noam_lr(s, cfg) - static_cast<double>(ref)) <= 1e-12 * static_cast<double>(ref));
  }
  for (int i = 0; i < 20; ++i) {
    const NoamConfig cfg{rng.uniform(1e-4, 1e-2), 1 + static_cast<std::int64_t>(rng.below(300))};
    for (std::int64_t s = 1; s < 2 * cfg.warmup_steps; ++s) {
      if (s < cfg.warmup_steps) {
        CHECK(noam_lr(s + 1, cfg) >= noam_lr(s, cfg));
      } else {
        CHECK(noam_lr(s + 1, cfg) <= noam_lr(s, cfg));
      }
    }
  }
}

TEST_CASE("adam first step moves each parameter by lr against the gradient sign") {
  auto params = nn::init_params(nn::ModelConfig::tiny(), 1);
  auto grads = params.zeros_like();
  CounterRng rng(2);
  for (Index i = 0; i < grads.values().size(); ++i) {
    grads.values()[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::pow(10.0, rng.uniform(-3, 3));
  }
  const auto before = params.values();
  auto state = AdamState::zeros_for(params);
  adam_apply(params, grads, state, 0.01);
  CHECK(state.step_num == 1);
  for (Index i = 0; i < before.size(); ++i) {
    const double expected = before[i] - 0.01 * (grads.values()[i] > 0 ? 1.0 : -1.0);
    CHECK(std::abs(params.values()[i] - expected) < 1e-6);
  }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  auto params = nn::init_params(nn::ModelConfig::tiny(), 1);
  const auto before = params.values();
  auto state = AdamState::zeros_for(params);
  adam_apply(params, params.zeros_like(), state, 0.5);
  CHECK(params.values() == before);
}

TEST_CASE("two adam steps match the scalar oracle") {
  auto params = nn::init_params(nn::ModelConfig::tiny(), 3);
  auto grads = params.zeros_like();
  CounterRng rng(5);
  for (Index i = 0; i < grads.values().size(); ++i) grads.values()[i] = rng.normal();
  const auto before = params.values();
  auto state = AdamState::zeros_for(params);
  adam_apply(params, grads, state, 0.003);
  adam_apply(params, grads, state, 0.003);
  CHECK(state.step_num == 2);
  for (Index i = 0; i < before.size(); ++i) {
    const double g = grads.values()[i];
    const double ref = oracle::adam_scalar(before[i], {g, g}, 0.003, 0.9, 0.98, 1e-9);
    CHECK(std::abs(params.values()[i] - ref) < 1e-12);
  }
}

TEST_CASE("adam moments stay finite and v stays non-negative") {
  auto params = nn::init_params(nn::ModelConfig::tiny(), 3);
  auto state = AdamState::zeros_for(params);
  CounterRng rng(6);
  for (int step = 0; step < 50; ++step) {
    auto grads = params.zeros_like();
    for (Index i = 0; i < grads.values().size(); ++i) {
      grads.values()[i] = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    }
    adam_apply(params, grads, state, 1e-3);
    CHECK(state.m.allFinite());
    CHECK(state.v.allFinite());
    CHECK((state.v.array() >= 0).all());
  }
}

TEST_CASE("non-finite gradient is a training error naming the tensor") {
  auto params = nn::init_params(nn::ModelConfig::tiny(), 3);
  auto grads = params.zeros_like();
  grads.tensor("dense2.W")[3] = std::numeric_limits<double>::quiet_NaN();
  auto state = AdamState::zeros_for(params);
  const auto before = params.values();
  try {
    adam_apply(params, grads, state, 0.01);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("dense2.W") != std::string::npos);
  }
  CHECK(params.values() == before);
  CHECK(state.step_num == 0);
}

TEST_CASE("sequences and batch schedule") {
  const SequenceSet set(separable_windows(1), 3);
  CHECK(set.size() == 2 * 98);
  for (std::size_t s = 0; s < set.size(); ++s) {
    const auto& idx = set.indices(s);
    REQUIRE(idx.size() == 3);
    CHECK(set.windows()[idx[0]].patient_id == set.windows()[idx[2]].patient_id);
    CHECK(set.windows()[idx[2]].start_s - set.windows()[idx[0]].start_s == 60.0);
  }
  BatchSchedule a(10, 4, 9);
  BatchSchedule b(10, 4, 9);
  std::vector<int> seen(10, 0);
  for (std::int64_t step = 1; step <= 5; ++step) {
    const auto x = a.batch(step);
    CHECK(x == b.batch(step));
    for (auto i : x) seen[i]++;
  }
  for (int c : seen) CHECK(c == 2);  // 20 draws over 10 items: two full passes
  CHECK_THROWS_AS(BatchSchedule(0, 4, 1), ConfigError);
  const SequenceSet empty({}, 3);
  const auto params = nn::init_params(nn::ModelConfig::tiny(), 1);
  CHECK_THROWS_AS(train(empty, params, AdamState::zeros_for(params), small_train(1), fast_noam()),
                  ConfigError);
}

TEST_CASE("training overfits a tiny separable dataset") {
  const SequenceSet set(separable_windows(1), 3);
  auto params = nn::init_params(nn::ModelConfig::tiny(), 7);
  const auto before = evaluate_sequences(set, params);
  auto cfg = small_train(300);
  cfg.batch_size = 50;
  const auto r = train(set, params, AdamState::zeros_for(params), cfg, fast_noam());
  REQUIRE(r.log.size() == 300);
  const auto after = evaluate_sequences(set, r.params);
  MESSAGE("loss " << before.loss << " -> " << after.loss << ", accuracy " << after.accuracy);
  CHECK(after.loss < 0.2);
  CHECK(after.accuracy >= 0.95);
  // Learning within 50 steps: steps 41..50 all beat the untrained loss.
  for (int i = 40; i < 50; ++i) CHECK(r.log[static_cast<std::size_t>(i)].loss < before.loss);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const SequenceSet set(separable_windows(2), 3);
  const auto params = nn::init_params(nn::ModelConfig::tiny(), 7);
  const auto a = train(set, params, AdamState::zeros_for(params), small_train(15), fast_noam());
  const auto b = train(set, params, AdamState::zeros_for(params), small_train(15), fast_noam());
  CHECK(a.log == b.log);
  CHECK(a.params == b.params);
  CHECK(a.adam == b.adam);
  auto other = small_train(15);
  other.seed = 5;
  CHECK_FALSE(train(set, params, AdamState::zeros_for(params), other, fast_noam()).log == a.log);
}

TEST_CASE("batch of identical samples has the single-sample loss") {
  const SequenceSet set(separable_windows(3), 3);
  const auto params = nn::init_params(nn::ModelConfig::tiny(), 7);
  std::vector<nn::Window> seq;
  std::vector<int> labels;
  for (auto i : set.indices(0)) {
    seq.push_back(set.windows()[i].spectrogram.cast<double>());
    labels.push_back(set.windows()[i].label);
  }
  nn::Sample s;
  for (const auto& w : seq) s.windows.push_back(&w);
  s.labels = labels;
  const std::vector<nn::Sample> many(6, s);
  const auto r = nn::batch_backward(many, params);
  const double single = nn::sequence_loss(s.windows, labels, params, nn::zero_state(params.config()));
  CHECK(std::abs(r.loss - single) <= 1e-15 * single);
  for (double l : r.sample_losses) CHECK(l == r.sample_losses[0]);
}

TEST_CASE("checkpoint round trip restores parameters and optimizer state bitwise") {
  oracle::TempDir dir("train");
  const SequenceSet set(separable_windows(4), 3);
  const auto params = nn::init_params(nn::ModelConfig::tiny(), 7);
  const auto r = train(set, params, AdamState::zeros_for(params), small_train(5), fast_noam());
  write_checkpoint(dir / "m.ckpt", r.params, r.adam);
  const auto back = read_checkpoint(dir / "m.ckpt");
  CHECK(back.params == r.params);
  CHECK(back.adam == r.adam);

  nn::write_tensor_table(dir / "p.ckpt", nn::params_to_table(r.params));
  const auto bare = read_checkpoint(dir / "p.ckpt");
  CHECK(bare.params == r.params);
  CHECK(bare.adam == AdamState::zeros_for(r.params));

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(read_checkpoint(dir / "junk.ckpt"), FormatError);
}

TEST_CASE("resuming from a checkpoint reproduces the continuous run") {
  oracle::TempDir dir("resume");
  const SequenceSet set(separable_windows(5), 3);
  const auto params = nn::init_params(nn::ModelConfig::tiny(), 7);
  const auto full = train(set, params, AdamState::zeros_for(params), small_train(20), fast_noam());

  TrainOutputs out;
  out.checkpoint = dir / "m.ckpt";
  out.log = dir / "train.log";
  train(set, params, AdamState::zeros_for(params), small_train(10), fast_noam(), out);
  const auto ck = read_checkpoint(dir / "m.ckpt");
  CHECK(ck.adam.step_num == 10);
  const auto resumed = train(set, ck.params, ck.adam, small_train(20), fast_noam(), out);
  CHECK(resumed.params == full.params);
  CHECK(resumed.adam == full.adam);
  const auto log = read_train_log(dir / "train.log");
  CHECK(log == full.log);
}

TEST_CASE("train log lines") {
  const TrainLogEntry e{12, 0.00125, 0.6931471805599453};
  CHECK(format_log_line(e) == "12\t0.00125\t0.6931471805599453");
  oracle::TempDir dir("log");
  std::ofstream(dir / "t.log") << format_log_line(e) << "\n";
  CHECK(read_train_log(dir / "t.log") == std::vector<TrainLogEntry>{e});
}

TEST_CASE("train configuration validation") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.sequence_len = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
