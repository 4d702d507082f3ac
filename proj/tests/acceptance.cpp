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


// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here. The exit status is the number of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "preictal/alarm_eval.hpp"
#include "preictal/cli/config.hpp"
#include "preictal/cli/pipeline.hpp"
#include "preictal/dataset.hpp"
#include "preictal/eegio.hpp"
#include "preictal/nn/model.hpp"
#include "preictal/rng.hpp"
#include "preictal/spectral.hpp"
#include "preictal/training.hpp"
#include "scenarios.hpp"

using namespace preictal;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// 1. Default pipeline shape on one 30 s window.
Verdict default_shape() {
  SynthConfig cfg;
  cfg.duration_s = 30;
  const auto rec = synth_eeg(cfg, 11);
  const auto t0 = Clock::now();
  const auto spec = build_spectrogram(rec.record);
  const double secs = seconds_since(t0);
  const auto s = spec.values.shape();
  const bool ok = s == Shape{18, 59, 114} && secs < 1.0;
  return {ok, "shape (" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," +
                  std::to_string(s[2]) + ") in " + fmt(secs, 3) + " s"};
}

// 2. FFT-based STFT against direct summation.
Verdict stft_oracle() {
  const auto t0 = Clock::now();
  const StftConfig cfg;
  const auto taper = oracle::gaussian_taper(256, 256.0 / 6.0);
  CounterRng rng(20260);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 256 + rng.below(1024 - 256 + 1);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal() * 40.0;
    const Vector<double> v = Eigen::Map<const Vector<double>>(x.data(), static_cast<Index>(n));
    const auto fast = stft<double>(v, cfg);
    const auto ref = oracle::stft(x, 256, 128, taper);
    if (static_cast<std::size_t>(fast.rows()) != ref.size()) return {false, "frame count mismatch"};
    double scale = 0.0;
    for (const auto& f : ref) {
      for (const auto& c : f) scale = std::max(scale, std::abs(c));
    }
    for (std::size_t t = 0; t < ref.size(); ++t) {
      for (std::size_t k = 0; k < ref[t].size(); ++k) {
        const auto d = fast(static_cast<Index>(t), static_cast<Index>(k)) - ref[t][k];
        worst = std::max(worst, std::abs(d) / scale);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && secs < 30.0,
          "max rel err " + fmt(worst, 3) + " over 200 signals in " + fmt(secs, 3) + " s"};
}

// 3. Retained frequency bins.
Verdict band_excision() {
  const auto hz = stft_bin_hz(StftConfig{}, 256);
  const auto keep = retained_bins(hz);
  std::vector<Index> expected;
  for (Index k = 1; k <= 56; ++k) expected.push_back(k);
  for (Index k = 64; k <= 116; ++k) expected.push_back(k);
  for (Index k = 124; k <= 128; ++k) expected.push_back(k);
  bool hz_ok = true;
  for (Index k : keep) hz_ok = hz_ok && hz[static_cast<std::size_t>(k)] == static_cast<double>(k);
  return {keep == expected && hz_ok, std::to_string(keep.size()) + " bins retained"};
}

// 4. Analytic gradients against central differences on the tiny model.
Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  bool covered = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = gradcheck::check(gradcheck::make_problem(seed, 3), 1e-5);
    if (r.worst_rel_err > worst) {
      worst = r.worst_rel_err;
      where = r.worst_param;
    }
    covered = covered && r.checked == nn::ModelParams(nn::ModelConfig::tiny()).values().size();
  }
  const double secs = seconds_since(t0);
  return {covered && worst < 1e-4 && secs < 120.0,
          "worst rel err " + fmt(worst, 3) + " (" + where + ") over 5 seeds in " +
              fmt(secs, 3) + " s"};
}

// 5. Full-size layer shapes.
Verdict shape_chain() {
  const auto chain = nn::ModelConfig::standard().shape_chain();
  const std::vector<Shape> expected = {{18, 59, 114}, {20, 27, 54}, {40, 21, 48},
                                       {60, 8, 21},   {10080},      {512},
                                       {1024},        {512},        {2}};
  return {chain == expected, std::to_string(chain.size()) + " stages"};
}

// 6. Learning-rate schedule.
Verdict noam_schedule() {
  const NoamConfig cfg{0.001, 4000};
  const double lr = noam_lr(4000, cfg);
  const double s = 4000.0;
  const double decay = 1.0 / std::sqrt(s);
  const double warm = s * std::pow(s, -1.5);
  const bool ok = std::abs(lr - 0.0316228) <= 1e-6 &&
                  std::abs(decay - warm) <= 1e-15 * decay &&
                  std::abs(lr - std::sqrt(0.001 * 4000.0) * decay) <= 1e-15;
  return {ok, "lr(4000) = " + fmt(lr, 9) + ", branches " + fmt(decay, 12) + " / " +
                  fmt(warm, 12)};
}

// 7. Two Adam steps against a hand-evaluated trace.
Verdict adam_oracle() {
  auto params = nn::ModelParams(nn::ModelConfig::tiny());
  params.values().setConstant(1.0);
  auto state = AdamState::zeros_for(params);
  for (double g : {0.5, -0.25}) {
    auto grads = params.zeros_like();
    grads.values().setConstant(g);
    adam_apply(params, grads, state, 0.01);
  }
  // theta_2 for theta_0 = 1, g = (0.5, -0.25), lr 0.01, betas 0.9 / 0.98, eps 1e-9.
  const double expected = 0.98732892289124211495;
  const double oracle_value = oracle::adam_scalar(1.0, {0.5, -0.25}, 0.01, 0.9, 0.98, 1e-9);
  double worst = 0.0;
  for (Index i = 0; i < params.values().size(); ++i) {
    worst = std::max(worst, std::abs(params.values()[i] - expected));
  }
  const bool ok = worst <= 1e-12 && std::abs(oracle_value - expected) <= 1e-12;
  return {ok, "theta_2 = " + fmt(params.values()[0], 17) + ", max err " + fmt(worst, 3)};
}

// 8. k-of-n alarms against a recounting oracle.
Verdict k_of_n() {
  const auto t0 = Clock::now();
  CounterRng rng(8810);
  auto stream = [](const std::vector<bool>& pos) {
    PredictionStream s;
    s.patient_id = "p";
    for (std::size_t i = 0; i < pos.size(); ++i) {
      s.points.push_back({30.0 * static_cast<double>(i), pos[i] ? 0.9 : 0.1});
    }
    return s;
  };
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto len = 1 + rng.below(1000);
    const double rate = rng.uniform(0.3, 1.0);
    std::vector<bool> pos(len);
    for (std::size_t i = 0; i < len; ++i) pos[i] = rng.uniform() < rate;
    const auto expected = oracle::refractory(oracle::k_of_n(pos, 8, 10), 30.0, 1800.0);
    const auto got = k_of_n_alarms(stream(pos), 8, 10, 1800.0).alarm_times_s;
    bool same = got.size() == expected.size();
    for (std::size_t a = 0; same && a < got.size(); ++a) {
      same = got[a] == 30.0 * static_cast<double>(expected[a] + 1);
    }
    mismatches += same ? 0 : 1;
  }
  const auto single = k_of_n_alarms(stream(std::vector<bool>(10, true)), 8, 10, 1800.0);
  const double secs = seconds_since(t0);
  const bool ok = mismatches == 0 && single.alarm_times_s.size() == 1 && secs < 30.0;
  return {ok, std::to_string(mismatches) + " mismatching streams of 1000, 10 positives fire " +
                  std::to_string(single.alarm_times_s.size()) + "x, " + fmt(secs, 3) + " s"};
}

// 9. Event scoring on hand-built scenarios.
Verdict sop_sph_scoring() {
  int good = 0;
  std::string bad;
  for (const auto& s : scenarios::all()) {
    const auto o = scenarios::run(s);
    if (o.tp == s.tp && o.fp == s.fp && o.fn == s.fn) {
      ++good;
    } else {
      bad += " [" + s.name + "]";
    }
  }
  const int n = static_cast<int>(scenarios::all().size());
  return {good == n && n == 12, std::to_string(good) + "/" + std::to_string(n) + " scenarios" + bad};
}

// 10. Chance probability and its k = 1 complement identity.
Verdict chance_formulas() {
  const double p = chance_probability(0.2373, 0.5);
  const bool value_ok = std::abs(p - 0.111879) <= 1e-6;
  CounterRng rng(1013);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const int L = 1 + static_cast<int>(rng.below(300));
    const double P = rng.uniform();
    worst = std::max(worst, std::abs(chance_significance(1, L, P) - (1.0 - std::pow(1.0 - P, L))));
  }
  const bool identity_ok = worst <= 1e-12;
  return {value_ok && identity_ok,
          "P(0.2373/h, 0.5 h) = " + fmt(p, 12) + " vs 0.111879 (|diff| " +
              fmt(std::abs(p - 0.111879), 3) + ", tol 1e-6); complement max err " +
              fmt(worst, 3)};
}

struct DemoRun {
  EvalReport report;
  int injected_seizures = 0;
  double eeg_hours = 0.0;
  std::int64_t steps = 0;
  double seconds = 0.0;
  fs::path checkpoint;
  fs::path eval_dir;
};

DemoRun run_demo(const fs::path& root) {
  cli::RunConfig cfg;
  cfg.merge_file(fs::path(PREICTAL_SOURCE_DIR) / "configs" / "demo.json");
  const auto t0 = Clock::now();
  DemoRun d;
  const auto files = cli::cmd_synth(cfg, root / "records");
  for (const auto& f : files) {
    const auto rec = read_record(f);
    d.injected_seizures += static_cast<int>(rec.seizures.size());
    d.eeg_hours += rec.record.duration_s() / 3600.0;
  }
  cli::cmd_preprocess(cfg, root / "records", root / "cache");
  d.checkpoint = root / "model.ckpt";
  d.steps = cli::cmd_train(cfg, root / "cache", d.checkpoint, root / "train.log", false).steps;
  d.eval_dir = root / "eval";
  d.report = cli::cmd_evaluate(cfg, d.checkpoint, root / "cache", d.eval_dir);
  d.seconds = seconds_since(t0);
  return d;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return sa == sb;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << v.detail
              << std::endl;
  };

  report(1, "spectrogram shape", default_shape);
  report(2, "STFT oracle", stft_oracle);
  report(3, "band excision", band_excision);
  report(4, "gradient fidelity", gradient_fidelity);
  report(5, "layer shape chain", shape_chain);
  report(6, "Noam schedule", noam_schedule);
  report(7, "Adam oracle", adam_oracle);
  report(8, "k-of-n alarms", k_of_n);
  report(9, "SOP/SPH scoring", sop_sph_scoring);
  report(10, "chance formulas", chance_formulas);

  oracle::TempDir first("demo_a"), second("demo_b");
  std::optional<DemoRun> a;
  report(11, "end-to-end learnability", [&]() -> Verdict {
    a = run_demo(first.path());
    const auto& r = a->report;
    const double sen = r.mean_sensitivity_pct.value_or(0.0);
    const double fpr_h = r.mean_fpr_per_hour.value_or(1e9);
    const bool ok = a->injected_seizures >= 6 && std::abs(a->eeg_hours - 6.0) <= 0.5 &&
                    a->steps <= 2000 && sen >= 80.0 && fpr_h <= 0.5 && a->seconds <= 900.0;
    return {ok, "SEN " + fmt(sen, 5) + "% (>= 80), FPR " + fmt(fpr_h, 4) + "/h (<= 0.5), " +
                    std::to_string(r.total_seizures) + " held-out of " +
                    std::to_string(a->injected_seizures) + " injected seizures, " +
                    fmt(a->eeg_hours, 3) + " h EEG, " + std::to_string(a->steps) +
                    " steps, " + fmt(a->seconds, 4) + " s"};
  });
  report(12, "determinism", [&]() -> Verdict {
    if (!a) return {false, "first demo run did not complete"};
    const auto b = run_demo(second.path());
    bool ok = same_bytes(a->checkpoint, b.checkpoint);
    std::string detail = ok ? "checkpoints identical" : "checkpoints differ";
    for (const char* f : {"report.csv", "report.txt", "predictions.csv", "alarms.csv"}) {
      const bool same = same_bytes(a->eval_dir / f, b.eval_dir / f);
      ok = ok && same;
      detail += std::string(", ") + f + (same ? " identical" : " differs");
    }
    return {ok, detail};
  });

  std::cout << (12 - failures) << "/12 criteria passed" << std::endl;
  return failures;
}
