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

#include "preictal/eegio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "preictal/error.hpp"
#include "preictal/rng.hpp"

namespace preictal {

namespace {

constexpr char kRecordMagic[4] = {'E', 'E', 'G', 'R'};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string describe(const SeizureEvent& s) {
  std::ostringstream os;
  os << "[" << s.onset_s << ", " << s.offset_s << "]";
  return os.str();
}

}  // namespace

ChannelLabel::ChannelLabel(std::string_view name) : name_(trim(name)) {
  if (name_.empty()) throw IntegrityError("empty channel label");
  std::transform(name_.begin(), name_.end(), name_.begin(), [](unsigned char c) {
    return static_cast<char>(std::toupper(c));
  });
}

const std::vector<ChannelLabel>& canonical_channels() {
  static const std::vector<ChannelLabel> kCanonical = [] {
    std::vector<ChannelLabel> v;
    for (const char* n :
         {"C3-P3", "C4-P4", "CZ-PZ", "F3-C3", "F4-C4", "F7-T7", "F8-T8",
          "FP1-F3", "FP1-F7", "FP2-F4", "FP2-F8", "FZ-CZ", "P3-O1", "P4-O2",
          "P7-O1", "P8-O2", "T7-P7", "T8-P8"}) {
      v.emplace_back(n);
    }
    return v;
  }();
  return kCanonical;
}

void EegRecord::validate() const {
  if (sample_rate_hz == 0) throw IntegrityError("sample rate must be positive");
  if (samples.cols() == 0) throw IntegrityError("record has no samples");
  if (static_cast<std::size_t>(samples.rows()) != channels.size()) {
    throw IntegrityError("sample rows (" + std::to_string(samples.rows()) +
                         ") do not match channel count (" +
                         std::to_string(channels.size()) + ")");
  }
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (!seen.insert(c.name()).second) {
      throw IntegrityError("duplicate channel label " + c.name());
    }
  }
}

bool EegRecord::operator==(const EegRecord& other) const {
  if (patient_id != other.patient_id || sample_rate_hz != other.sample_rate_hz ||
      channels != other.channels || start_time_s != other.start_time_s ||
      samples.rows() != other.samples.rows() ||
      samples.cols() != other.samples.cols()) {
    return false;
  }
  return std::memcmp(samples.data(), other.samples.data(),
                     sizeof(float) * static_cast<std::size_t>(samples.size())) == 0;
}

void AnnotatedRecording::validate() const {
  record.validate();
  const double begin = record.start_time_s;
  const double end = record.end_time_s();
  for (std::size_t i = 0; i < seizures.size(); ++i) {
    const auto& s = seizures[i];
    if (!(s.offset_s > s.onset_s) || s.onset_s < 0.0) {
      throw IntegrityError("invalid seizure interval " + describe(s));
    }
    if (s.onset_s < begin || s.offset_s > end) {
      throw IntegrityError("seizure " + describe(s) + " outside record span");
    }
    if (i > 0 && s.onset_s < seizures[i - 1].offset_s) {
      throw IntegrityError("seizures unsorted or overlapping at " + describe(s));
    }
  }
}

std::filesystem::path annotation_path(const std::filesystem::path& record_path) {
  auto p = record_path;
  p.replace_extension(".ann");
  return p;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<SeizureEvent>& seizures) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "# onset_s\toffset_s\n";
  out.precision(17);
  for (const auto& s : seizures) out << s.onset_s << '\t' << s.offset_s << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<SeizureEvent> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::vector<SeizureEvent> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream is(line);
    SeizureEvent s;
    if (!(is >> s.onset_s >> s.offset_s)) {
      throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                           ": expected onset_s<TAB>offset_s");
    }
    out.push_back(s);
  }
  return out;
}

void write_record(const std::filesystem::path& path,
                  const AnnotatedRecording& rec) {
  rec.validate();
  const auto& r = rec.record;
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kRecordMagic, 4));
  w.put<std::uint16_t>(kRecordFormatVersion);
  w.put<std::uint32_t>(r.sample_rate_hz);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(r.channels.size()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(r.samples.cols()));
  w.put<double>(r.start_time_s);
  for (const auto& c : r.channels) w.put_string16(c.name());
  w.put_array(std::span<const float>(r.samples.data(),
                                     static_cast<std::size_t>(r.samples.size())));
  w.save(path);
  write_annotations(annotation_path(path), rec.seizures);
}

AnnotatedRecording read_record(const std::filesystem::path& path) {
  auto reader = detail::ByteReader::load(path);
  if (reader.get_bytes(4, "magic") != std::string_view(kRecordMagic, 4)) {
    throw FormatError("bad magic, expected EEGR", 0);
  }
  const auto version_offset = reader.position();
  const auto version = reader.get<std::uint16_t>("version");
  if (version != kRecordFormatVersion) {
    throw FormatError("unsupported record version " + std::to_string(version),
                      version_offset);
  }
  AnnotatedRecording rec;
  auto& r = rec.record;
  r.sample_rate_hz = reader.get<std::uint32_t>("sample_rate");
  const auto num_channels = reader.get<std::uint16_t>("channel count");
  const auto num_samples = reader.get<std::uint64_t>("sample count");
  r.start_time_s = reader.get<double>("start_time");
  r.channels.reserve(num_channels);
  for (std::uint16_t c = 0; c < num_channels; ++c) {
    const auto label_offset = reader.position();
    auto label = reader.get_string16("channel label");
    if (trim(label).empty()) throw FormatError("empty channel label", label_offset);
    r.channels.emplace_back(label);
  }
  const std::uint64_t expected =
      std::uint64_t{num_channels} * num_samples * sizeof(float);
  if (reader.remaining() != expected) {
    throw IntegrityError(path.string() + ": header declares " +
                         std::to_string(num_channels) + " x " +
                         std::to_string(num_samples) + " samples (" +
                         std::to_string(expected) + " bytes) but payload has " +
                         std::to_string(reader.remaining()) + " bytes");
  }
  r.samples.resize(num_channels, static_cast<Eigen::Index>(num_samples));
  reader.get_array(std::span<float>(r.samples.data(),
                                    static_cast<std::size_t>(r.samples.size())),
                   "samples");
  // The patient id is the file stem's prefix before "_" when present.
  const auto stem = path.stem().string();
  r.patient_id = stem.substr(0, stem.find('_'));
  rec.seizures = read_annotations(annotation_path(path));
  rec.validate();
  return rec;
}

AnnotatedRecording select_channels(const AnnotatedRecording& rec,
                                   const std::vector<ChannelLabel>& wanted) {
  std::vector<std::string> missing;
  std::vector<Eigen::Index> rows;
  rows.reserve(wanted.size());
  for (const auto& w : wanted) {
    const auto it = std::find(rec.record.channels.begin(), rec.record.channels.end(), w);
    if (it == rec.record.channels.end()) {
      missing.push_back(w.name());
    } else {
      rows.push_back(it - rec.record.channels.begin());
    }
  }
  if (!missing.empty()) throw MissingChannelError(std::move(missing));

  AnnotatedRecording out;
  out.seizures = rec.seizures;
  out.record.patient_id = rec.record.patient_id;
  out.record.sample_rate_hz = rec.record.sample_rate_hz;
  out.record.start_time_s = rec.record.start_time_s;
  out.record.channels = wanted;
  out.record.samples.resize(static_cast<Eigen::Index>(rows.size()),
                            rec.record.samples.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.record.samples.row(static_cast<Eigen::Index>(i)) = rec.record.samples.row(rows[i]);
  }
  return out;
}

EegRecord import_csv(const std::filesystem::path& path, std::string patient_id,
                     std::uint32_t sample_rate_hz, double start_time_s) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IntegrityError(path.string() + ": empty CSV");

  EegRecord rec;
  rec.patient_id = std::move(patient_id);
  rec.sample_rate_hz = sample_rate_hz;
  rec.start_time_s = start_time_s;
  {
    std::istringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) rec.channels.emplace_back(cell);
  }
  const std::size_t width = rec.channels.size();
  std::vector<float> values;
  std::size_t rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(row, cell, ',')) {
      try {
        values.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                             ": not a number: '" + trim(cell) + "'");
      }
      ++n;
    }
    if (n != width) {
      throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                           ": expected " + std::to_string(width) + " columns, got " +
                           std::to_string(n));
    }
    ++rows;
  }
  rec.samples.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows));
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t c = 0; c < width; ++c) {
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          values[t * width + c];
    }
  }
  rec.validate();
  return rec;
}

namespace {

struct Band {
  double lo_hz;
  double hi_hz;
  double amplitude;
  bool preictal_modulated;
};

// Adds amp * env(t) * sin(2 pi f t + phase). Phase is re-anchored from exact
// sin/cos once per second of signal; in between, the phasor is advanced by
// complex rotation.
void add_sinusoid(std::span<double> row, double rate, double amp, double freq,
                  double phase, std::span<const double> envelope) {
  const double w = 2.0 * std::numbers::pi * freq / rate;
  const double cw = std::cos(w);
  const double sw = std::sin(w);
  const std::size_t block = static_cast<std::size_t>(rate);
  for (std::size_t start = 0; start < row.size(); start += block) {
    const double theta = w * static_cast<double>(start) + phase;
    double re = std::cos(theta);
    double im = std::sin(theta);
    const std::size_t end = std::min(row.size(), start + block);
    for (std::size_t t = start; t < end; ++t) {
      const double gain = envelope.empty() ? 1.0 : envelope[t];
      row[t] += amp * gain * im;
      const double next_re = re * cw - im * sw;
      im = re * sw + im * cw;
      re = next_re;
    }
  }
}

}  // namespace

AnnotatedRecording synth_eeg(const SynthConfig& config, std::uint64_t seed) {
  if (config.sample_rate_hz == 0) throw ConfigError("synth: sample_rate_hz must be positive");
  if (!(config.duration_s > 0.0)) throw ConfigError("synth: duration_s must be positive");
  const double begin = config.start_time_s;
  const double end = config.start_time_s + config.duration_s;
  for (std::size_t i = 0; i < config.seizures.size(); ++i) {
    const auto& s = config.seizures[i];
    if (!(s.offset_s > s.onset_s) || s.onset_s < begin || s.offset_s > end) {
      throw ConfigError("synth: seizure " + describe(s) + " outside [" +
                        std::to_string(begin) + ", " + std::to_string(end) + "]");
    }
    if (i > 0 && s.onset_s < config.seizures[i - 1].offset_s) {
      throw ConfigError("synth: seizures must be sorted and non-overlapping");
    }
  }

  const double rate = config.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(config.duration_s * rate));
  if (n == 0) throw ConfigError("synth: duration shorter than one sample");

  // Preictal/ictal envelope, shared by all channels.
  std::vector<double> envelope(n, 1.0);
  if (config.preictal_gain != 0.0) {
    std::vector<double> ramp(n, 0.0);
    for (const auto& s : config.seizures) {
      const double ramp_begin = s.onset_s - config.preictal_lead_s;
      const auto first = static_cast<std::size_t>(
          std::max(0.0, std::ceil((ramp_begin - begin) * rate)));
      const auto last = std::min(
          n, static_cast<std::size_t>(std::ceil((s.offset_s - begin) * rate)));
      for (std::size_t t = first; t < last; ++t) {
        const double time = begin + static_cast<double>(t) / rate;
        const double r = config.ramp_s > 0.0
                             ? std::clamp((time - ramp_begin) / config.ramp_s, 0.0, 1.0)
                             : 1.0;
        ramp[t] = std::max(ramp[t], r);
      }
    }
    for (std::size_t t = 0; t < n; ++t) envelope[t] = 1.0 + config.preictal_gain * ramp[t];
  }

  const std::array<Band, 4> bands = {{
      {0.5, 3.0, config.bands.delta, false},
      {3.5, 7.5, config.bands.theta, false},
      {7.5, 13.0, config.bands.alpha, false},
      {14.0, 30.0, config.bands.beta, true},
  }};

  AnnotatedRecording out;
  auto& r = out.record;
  r.patient_id = config.patient_id;
  r.sample_rate_hz = config.sample_rate_hz;
  r.start_time_s = config.start_time_s;
  r.channels = config.channels;
  r.samples.resize(static_cast<Eigen::Index>(config.channels.size()),
                   static_cast<Eigen::Index>(n));
  out.seizures = config.seizures;

  std::vector<double> row(n);
  for (std::size_t c = 0; c < config.channels.size(); ++c) {
    CounterRng rng(seed, c);
    std::fill(row.begin(), row.end(), 0.0);
    if (config.tones_hz.empty()) {
      const int k = std::max(1, config.components_per_band);
      for (const auto& band : bands) {
        for (int j = 0; j < k; ++j) {
          const double freq = rng.uniform(band.lo_hz, band.hi_hz);
          const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
          const double amp = band.amplitude * rng.uniform(0.5, 1.5) / std::sqrt(k);
          add_sinusoid(row, rate, amp, freq, phase,
                       band.preictal_modulated ? std::span<const double>(envelope)
                                               : std::span<const double>());
        }
      }
    } else {
      for (double tone : config.tones_hz) {
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        add_sinusoid(row, rate, config.tone_amplitude, tone, phase, {});
      }
    }
    if (config.line_noise_amplitude != 0.0) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      add_sinusoid(row, rate, config.line_noise_amplitude, 60.0, phase, {});
    }
    if (config.noise_amplitude != 0.0) {
      CounterRng noise(seed, 0x10000 + c);
      for (auto& v : row) v += config.noise_amplitude * noise.normal();
    }
    for (std::size_t t = 0; t < n; ++t) {
      r.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          static_cast<float>(row[t]);
    }
  }
  out.validate();
  return out;
}

}  // namespace preictal
