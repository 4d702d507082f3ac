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

// preictal: synth | import-csv | preprocess | train | evaluate | report.
// Exit codes: 0 ok, 2 config, 3 data, 4 training.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "preictal/cli/config.hpp"
#include "preictal/cli/pipeline.hpp"
#include "preictal/error.hpp"

namespace {

namespace fs = std::filesystem;
using preictal::cli::RunConfig;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const std::string& code, const std::string& what, int exit_code) {
  std::cerr << "error[" << code << "]: " << one_line(what) << std::endl;
  return exit_code;
}

fs::path pick(const std::string& flag, const fs::path& configured) {
  return flag.empty() ? configured : fs::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG seizure prediction pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(preictal::cli::config_help());

  std::string config_path;
  std::optional<std::int64_t> seed;
  std::optional<int> threads;
  bool verbose = false;
  std::vector<std::string> assignments;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--threads", threads, "worker threads (overrides config)");
  app.add_flag("--verbose,-v", verbose, "progress messages on stderr");
  app.add_option("--set", assignments, "override one config key: key=value")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  auto* synth = app.add_subcommand("synth", "write synthetic recordings");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory (default paths.records)");

  auto* import = app.add_subcommand("import-csv", "convert a CSV file into a record");
  std::string csv_path, patient, ann_path, import_out;
  import->add_option("--csv", csv_path, "CSV with a header row of channel labels")->required();
  import->add_option("--patient", patient, "patient id")->required();
  import->add_option("--annotations", ann_path, "onset/offset annotation file");
  import->add_option("--out", import_out, "output directory (default paths.records)");

  auto* prep = app.add_subcommand("preprocess", "label, split, balance and cache spectrograms");
  std::string prep_records, prep_cache;
  prep->add_option("--records", prep_records, "recordings directory (default paths.records)");
  prep->add_option("--cache", prep_cache, "cache directory (default paths.cache)");

  auto* trn = app.add_subcommand("train", "train on the cached training split");
  std::string train_cache, train_ckpt, train_log;
  bool resume = false;
  trn->add_option("--cache", train_cache, "cache directory (default paths.cache)");
  trn->add_option("--checkpoint", train_ckpt, "checkpoint (default paths.checkpoint)");
  trn->add_option("--log", train_log, "training log (default paths.train_log)");
  trn->add_flag("--resume", resume, "continue from the checkpoint");

  auto* eval = app.add_subcommand("evaluate", "predict the test split and score alarms");
  std::string eval_ckpt, eval_cache, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint (default paths.checkpoint)");
  eval->add_option("--cache", eval_cache, "cache directory (default paths.cache)");
  eval->add_option("--out", eval_out, "output directory (default paths.eval_dir)");

  auto* rep = app.add_subcommand("report", "rebuild the report from predictions.csv");
  std::string rep_preds, rep_cache, rep_out;
  rep->add_option("--predictions", rep_preds, "predictions CSV (default <eval_dir>/predictions.csv)");
  rep->add_option("--cache", rep_cache, "cache directory (default paths.cache)");
  rep->add_option("--out", rep_out, "output directory (default paths.eval_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitConfig);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (seed) cfg.set("seed", *seed);
    if (threads) cfg.set("threads", *threads);
    cfg.seed();
    cfg.threads();
    preictal::cli::Logger log;
    if (verbose) log = [](const std::string& m) { std::cerr << m << std::endl; };
    const auto paths = cfg.paths();

    if (synth->parsed()) {
      const auto files = preictal::cli::cmd_synth(cfg, pick(synth_out, paths.records), log);
      std::cout << "wrote " << files.size() << " recordings\n";
    } else if (import->parsed()) {
      const auto out = preictal::cli::cmd_import_csv(cfg, csv_path, patient,
                                                     pick(import_out, paths.records), ann_path, log);
      std::cout << "wrote " << out.string() << "\n";
    } else if (prep->parsed()) {
      const auto s = preictal::cli::cmd_preprocess(cfg, pick(prep_records, paths.records),
                                                   pick(prep_cache, paths.cache), log);
      std::cout << "records " << s.records << ", cached windows " << s.cached_windows
                << " (train " << s.manifest.train.size() << ", test " << s.manifest.test.size()
                << ")\n";
    } else if (trn->parsed()) {
      const auto s = preictal::cli::cmd_train(cfg, pick(train_cache, paths.cache),
                                              pick(train_ckpt, paths.checkpoint),
                                              pick(train_log, paths.train_log), resume, log);
      std::cout << "trained to step " << s.steps;
      if (!s.log.empty()) std::cout << ", final loss " << s.log.back().loss;
      std::cout << "\n";
    } else if (eval->parsed()) {
      const auto r = preictal::cli::cmd_evaluate(cfg, pick(eval_ckpt, paths.checkpoint),
                                                 pick(eval_cache, paths.cache),
                                                 pick(eval_out, paths.eval_dir), log);
      std::cout << preictal::report_table(r);
    } else if (rep->parsed()) {
      const fs::path out = pick(rep_out, paths.eval_dir);
      const fs::path preds = rep_preds.empty() ? out / "predictions.csv" : fs::path(rep_preds);
      const auto r = preictal::cli::cmd_report(cfg, preds, pick(rep_cache, paths.cache), out, log);
      std::cout << preictal::report_table(r);
    }
  } catch (const preictal::Error& e) {
    switch (e.category()) {
      case preictal::ErrorCategory::kConfig:
        return fail(e.code(), e.what(), kExitConfig);
      case preictal::ErrorCategory::kData:
        return fail(e.code(), e.what(), kExitData);
      case preictal::ErrorCategory::kTraining:
        return fail(e.code(), e.what(), kExitTraining);
    }
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), kExitData);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitData);
  }
  return 0;
}
