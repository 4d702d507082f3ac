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

// Run configuration: a fixed registry of dotted keys with defaults. A JSON
// file may set any subset (nested objects flatten to dotted keys); unknown
// keys and mistyped values are config errors.

#ifndef PREICTAL_CLI_CONFIG_HPP_
#define PREICTAL_CLI_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "preictal/dataset.hpp"
#include "preictal/eegio.hpp"
#include "preictal/nn/model.hpp"
#include "preictal/spectral.hpp"
#include "preictal/training.hpp"

namespace preictal::cli {

enum class KeyType { kInt, kReal, kString, kRealList };

struct KeySpec {
  std::string key;
  KeyType type;
  nlohmann::json default_value;
  std::string help;
};

const std::vector<KeySpec>& config_keys();

struct AlarmSettings {
  int k = 8;
  int n = 10;
  double threshold = 0.5;
  double refractory_s = 1800.0;
};

struct PathSettings {
  std::filesystem::path records;
  std::filesystem::path cache;
  std::filesystem::path checkpoint;
  std::filesystem::path train_log;
  std::filesystem::path eval_dir;
};

class RunConfig {
 public:
  RunConfig();

  // Applies the keys of a JSON file; relative paths in it stay relative to
  // the working directory.
  void merge_file(const std::filesystem::path& path);
  void merge_json(const nlohmann::json& object);
  void set(const std::string& key, nlohmann::json value);
  // "key=value"; the value is parsed as JSON when possible, else a string.
  void set_assignment(const std::string& assignment);

  const nlohmann::json& get(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  std::string string(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;

  std::uint64_t seed() const;
  int threads() const;
  LabelingPolicy labeling() const;
  StftConfig stft() const;
  double split_ratio() const;
  // Model for `input` = {channels, frames, bins}.
  nn::ModelConfig model(const Shape& input) const;
  TrainConfig train() const;
  NoamConfig noam() const;
  AlarmSettings alarm() const;
  PathSettings paths() const;
  // Synthesis settings for patient index `p` (0-based).
  SynthConfig synth(int p) const;
  int synth_patients() const;

  // Flat {key: value} object in registry order.
  nlohmann::json to_json() const;

 private:
  std::map<std::string, nlohmann::json> values_;
};

// One line per key: name, type, default, description.
std::string config_help();

}  // namespace preictal::cli

#endif  // PREICTAL_CLI_CONFIG_HPP_
