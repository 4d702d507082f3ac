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

#include "preictal/cli/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "preictal/error.hpp"

namespace preictal::cli {

using nlohmann::json;

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"seed", KeyType::kInt, 0, "master seed for synthesis, initialization and shuffling"},
      {"threads", KeyType::kInt, 1, "worker threads for preprocessing and gradients"},

      {"paths.records", KeyType::kString, "records", "directory of .eegr recordings"},
      {"paths.cache", KeyType::kString, "cache", "spectrogram cache and split manifest"},
      {"paths.checkpoint", KeyType::kString, "model.ckpt", "model checkpoint file"},
      {"paths.train_log", KeyType::kString, "train.log", "training log (step, lr, loss)"},
      {"paths.eval_dir", KeyType::kString, "eval", "evaluation outputs"},

      {"synth.patients", KeyType::kInt, 1, "number of synthetic patients"},
      {"synth.patient_prefix", KeyType::kString, "p", "patient id prefix (ids are prefix01, ...)"},
      {"synth.duration_s", KeyType::kReal, 3600.0, "recording length per patient"},
      {"synth.sample_rate_hz", KeyType::kInt, 256, "sampling rate"},
      {"synth.seizure_onsets_s", KeyType::kRealList, json::array({2400.0}),
       "seizure onsets, relative to recording start"},
      {"synth.seizure_duration_s", KeyType::kReal, 60.0, "length of each injected seizure"},
      {"synth.patient_shift_s", KeyType::kReal, 0.0, "onset shift added per patient index"},
      {"synth.delta_amplitude", KeyType::kReal, 20.0, "delta band amplitude (uV)"},
      {"synth.theta_amplitude", KeyType::kReal, 10.0, "theta band amplitude (uV)"},
      {"synth.alpha_amplitude", KeyType::kReal, 8.0, "alpha band amplitude (uV)"},
      {"synth.beta_amplitude", KeyType::kReal, 3.0, "beta band amplitude (uV)"},
      {"synth.components_per_band", KeyType::kInt, 3, "sinusoids per band and channel"},
      {"synth.noise_amplitude", KeyType::kReal, 2.0, "white noise std-dev (uV)"},
      {"synth.line_noise_amplitude", KeyType::kReal, 0.0, "60 Hz mains amplitude (uV)"},
      {"synth.preictal_gain", KeyType::kReal, 3.0, "relative beta gain reached before onset"},
      {"synth.preictal_lead_s", KeyType::kReal, 1800.0, "signature starts this long before onset"},
      {"synth.ramp_s", KeyType::kReal, 120.0, "signature ramp duration"},

      {"import.sample_rate_hz", KeyType::kInt, 256, "sampling rate of imported CSV files"},
      {"import.start_time_s", KeyType::kReal, 0.0, "start time of imported CSV files"},

      {"labeling.sop_s", KeyType::kReal, 1800.0, "seizure occurrence period"},
      {"labeling.sph_s", KeyType::kReal, 180.0, "seizure prediction horizon"},
      {"labeling.preictal_horizon_s", KeyType::kReal, 1800.0, "preictal label horizon"},
      {"labeling.interictal_margin_s", KeyType::kReal, 14400.0,
       "minimum distance of interictal windows from seizures"},
      {"labeling.window_len_s", KeyType::kReal, 30.0, "window length"},
      {"labeling.merge_gap_s", KeyType::kReal, 1800.0, "seizures closer than this merge"},

      {"stft.window_len_samples", KeyType::kInt, 256, "STFT frame length"},
      {"stft.hop_samples", KeyType::kInt, 128, "STFT hop"},
      {"stft.taper", KeyType::kString, "gaussian", "gaussian, hann or rectangular"},
      {"stft.gaussian_sigma", KeyType::kReal, 0.0, "gaussian sigma in samples (0: frame/6)"},

      {"split.ratio", KeyType::kReal, 0.8, "training fraction of each patient's windows"},

      {"model.conv1_filters", KeyType::kInt, 20, "conv1 filters"},
      {"model.conv2_filters", KeyType::kInt, 40, "conv2 filters"},
      {"model.conv3_filters", KeyType::kInt, 60, "conv3 filters"},
      {"model.lstm_hidden", KeyType::kInt, 512, "LSTM cells"},
      {"model.dense1", KeyType::kInt, 1024, "dense1 width"},
      {"model.dense2", KeyType::kInt, 512, "dense2 width"},

      {"train.batch_size", KeyType::kInt, 50, "sequences per mini-batch"},
      {"train.max_steps", KeyType::kInt, 2000, "optimizer steps"},
      {"train.checkpoint_every", KeyType::kInt, 0, "checkpoint interval (0: final only)"},
      {"train.sequence_len", KeyType::kInt, 10, "windows per training sequence"},

      {"noam.initial_lr_rate", KeyType::kReal, 0.001, "Noam initial rate"},
      {"noam.warmup_steps", KeyType::kInt, 4000, "Noam warmup steps"},

      {"alarm.k", KeyType::kInt, 8, "positives required among the last n windows"},
      {"alarm.n", KeyType::kInt, 10, "trailing windows considered"},
      {"alarm.threshold", KeyType::kReal, 0.5, "preictal probability threshold"},
      {"alarm.refractory_s", KeyType::kReal, 1800.0, "alarm suppression after an alarm"},
  };
  return keys;
}

namespace {

const KeySpec& spec_for(const std::string& key) {
  for (const auto& k : config_keys()) {
    if (k.key == key) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string type_name(KeyType t) {
  switch (t) {
    case KeyType::kInt:
      return "int";
    case KeyType::kReal:
      return "real";
    case KeyType::kString:
      return "string";
    case KeyType::kRealList:
      return "real list";
  }
  return "?";
}

json coerce(const KeySpec& spec, const json& v) {
  auto bad = [&] {
    return ConfigError("config key '" + spec.key + "' expects " + type_name(spec.type) +
                       ", got " + v.dump());
  };
  switch (spec.type) {
    case KeyType::kInt:
      if (v.is_number_integer()) return v;
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d == std::floor(d)) return json(static_cast<std::int64_t>(d));
      }
      throw bad();
    case KeyType::kReal:
      if (v.is_number()) return json(v.get<double>());
      throw bad();
    case KeyType::kString:
      if (v.is_string()) return v;
      throw bad();
    case KeyType::kRealList: {
      if (!v.is_array()) throw bad();
      json out = json::array();
      for (const auto& e : v) {
        if (!e.is_number()) throw bad();
        out.push_back(e.get<double>());
      }
      return out;
    }
  }
  throw bad();
}

void flatten(const json& obj, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      flatten(it.value(), key, out);
    } else {
      out.emplace_back(key, it.value());
    }
  }
}

std::string format_default(const json& v) {
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v.get<double>());
    return buf;
  }
  return v.dump();
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
  merge_json(doc);
}

void RunConfig::merge_json(const json& object) {
  std::vector<std::pair<std::string, json>> flat;
  flatten(object, "", flat);
  for (auto& [k, v] : flat) set(k, std::move(v));
}

void RunConfig::set(const std::string& key, json value) {
  values_[key] = coerce(spec_for(key), value);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  if (spec_for(key).type == KeyType::kString && !value.is_string()) value = text;
  set(key, std::move(value));
}

const json& RunConfig::get(const std::string& key) const {
  spec_for(key);
  return values_.at(key);
}

std::int64_t RunConfig::integer(const std::string& key) const {
  return get(key).get<std::int64_t>();
}
double RunConfig::real(const std::string& key) const { return get(key).get<double>(); }
std::string RunConfig::string(const std::string& key) const {
  return get(key).get<std::string>();
}
std::vector<double> RunConfig::reals(const std::string& key) const {
  return get(key).get<std::vector<double>>();
}

std::uint64_t RunConfig::seed() const {
  const auto s = integer("seed");
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int RunConfig::threads() const {
  const auto t = integer("threads");
  if (t < 1 || t > 1024) throw ConfigError("threads must be in [1, 1024]");
  return static_cast<int>(t);
}

LabelingPolicy RunConfig::labeling() const {
  LabelingPolicy p;
  p.sop_s = real("labeling.sop_s");
  p.sph_s = real("labeling.sph_s");
  p.preictal_horizon_s = real("labeling.preictal_horizon_s");
  p.interictal_margin_s = real("labeling.interictal_margin_s");
  p.window_len_s = real("labeling.window_len_s");
  p.merge_gap_s = real("labeling.merge_gap_s");
  p.validate();
  return p;
}

StftConfig RunConfig::stft() const {
  StftConfig c;
  c.window_len_samples = integer("stft.window_len_samples");
  c.hop_samples = integer("stft.hop_samples");
  c.taper = parse_taper(string("stft.taper"));
  c.gaussian_sigma = real("stft.gaussian_sigma");
  c.validate();
  return c;
}

double RunConfig::split_ratio() const {
  const double r = real("split.ratio");
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("split.ratio must be in (0, 1)");
  return r;
}

nn::ModelConfig RunConfig::model(const Shape& input) const {
  if (input.size() != 3) throw ConfigError("model input must be {channels, frames, bins}");
  nn::ModelConfig c;
  c.input_channels = input[0];
  c.input_height = input[1];
  c.input_width = input[2];
  c.conv_filters = {integer("model.conv1_filters"), integer("model.conv2_filters"),
                    integer("model.conv3_filters")};
  c.lstm_hidden = integer("model.lstm_hidden");
  c.dense1 = integer("model.dense1");
  c.dense2 = integer("model.dense2");
  try {
    c.shape_chain();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.batch_size = integer("train.batch_size");
  c.max_steps = integer("train.max_steps");
  c.seed = seed();
  c.checkpoint_every = integer("train.checkpoint_every");
  c.sequence_len = integer("train.sequence_len");
  c.threads = threads();
  c.validate();
  return c;
}

NoamConfig RunConfig::noam() const {
  NoamConfig c;
  c.initial_lr_rate = real("noam.initial_lr_rate");
  c.warmup_steps = integer("noam.warmup_steps");
  c.validate();
  return c;
}

AlarmSettings RunConfig::alarm() const {
  AlarmSettings a;
  a.k = static_cast<int>(integer("alarm.k"));
  a.n = static_cast<int>(integer("alarm.n"));
  a.threshold = real("alarm.threshold");
  a.refractory_s = real("alarm.refractory_s");
  if (a.n < 1 || a.k < 1 || a.k > a.n) throw ConfigError("alarm.k must be in [1, alarm.n]");
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) {
    throw ConfigError("alarm.threshold must be in [0, 1]");
  }
  if (a.refractory_s < 0.0) throw ConfigError("alarm.refractory_s must be >= 0");
  return a;
}

PathSettings RunConfig::paths() const {
  return {string("paths.records"), string("paths.cache"), string("paths.checkpoint"),
          string("paths.train_log"), string("paths.eval_dir")};
}

int RunConfig::synth_patients() const {
  const auto n = integer("synth.patients");
  if (n < 1 || n > 99) throw ConfigError("synth.patients must be in [1, 99]");
  return static_cast<int>(n);
}

SynthConfig RunConfig::synth(int p) const {
  SynthConfig c;
  char id[16];
  std::snprintf(id, sizeof id, "%02d", p + 1);
  c.patient_id = string("synth.patient_prefix") + id;
  if (c.patient_id.find('_') != std::string::npos) {
    throw ConfigError("synth.patient_prefix must not contain '_'");
  }
  const auto rate = integer("synth.sample_rate_hz");
  if (rate < 1) throw ConfigError("synth.sample_rate_hz must be positive");
  c.sample_rate_hz = static_cast<std::uint32_t>(rate);
  c.duration_s = real("synth.duration_s");
  const double window = real("labeling.window_len_s");
  if (!(c.duration_s >= window)) {
    throw ConfigError("synth.duration_s (" + std::to_string(c.duration_s) +
                      ") is shorter than one window");
  }
  const double shift = real("synth.patient_shift_s") * p;
  const double len = real("synth.seizure_duration_s");
  if (!(len > 0.0)) throw ConfigError("synth.seizure_duration_s must be positive");
  for (double onset : reals("synth.seizure_onsets_s")) {
    c.seizures.push_back({onset + shift, onset + shift + len});
  }
  c.bands.delta = real("synth.delta_amplitude");
  c.bands.theta = real("synth.theta_amplitude");
  c.bands.alpha = real("synth.alpha_amplitude");
  c.bands.beta = real("synth.beta_amplitude");
  c.components_per_band = static_cast<int>(integer("synth.components_per_band"));
  c.noise_amplitude = real("synth.noise_amplitude");
  c.line_noise_amplitude = real("synth.line_noise_amplitude");
  c.preictal_gain = real("synth.preictal_gain");
  c.preictal_lead_s = real("synth.preictal_lead_s");
  c.ramp_s = real("synth.ramp_s");
  return c;
}

json RunConfig::to_json() const {
  json out = json::object();
  for (const auto& k : config_keys()) out[k.key] = values_.at(k.key);
  return out;
}

std::string config_help() {
  std::ostringstream out;
  out << "Config keys (JSON file via --config, or --set key=value; flags win):\n";
  for (const auto& k : config_keys()) {
    std::string left = "  " + k.key + " (" + type_name(k.type) + ", default " +
                       format_default(k.default_value) + ")";
    if (left.size() < 58) left += std::string(58 - left.size(), ' ');
    out << left << "  " << k.help << '\n';
  }
  return out.str();
}

}  // namespace preictal::cli
