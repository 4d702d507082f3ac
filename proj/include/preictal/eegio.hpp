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

// EEG recordings, seizure annotations and their on-disk formats.
//
// Record file (".eegr"), all integers little-endian:
//
//   "EEGR" | version u16 | sample_rate u32 | channels u16 | samples u64 |
//   start_time f64 | channels x (u16 byte length, UTF-8 label) |
//   channels x samples f32, row-major [channel][sample]
//
// The annotation sidecar shares the basename with an ".ann" suffix and holds
// one "onset_s<TAB>offset_s" line per seizure; '#' starts a comment.

#ifndef PREICTAL_EEGIO_HPP_
#define PREICTAL_EEGIO_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace preictal {

inline constexpr std::uint16_t kRecordFormatVersion = 1;

// Sample storage matches the on-disk precision so a read/write round trip
// is bit-exact.
using SampleMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bipolar montage label such as "FP1-F7". Construction uppercases the name
/// and rejects empty strings.
class ChannelLabel {
 public:
  ChannelLabel() = default;
  explicit ChannelLabel(std::string_view name);

  const std::string& name() const { return name_; }
  bool operator==(const ChannelLabel&) const = default;
  auto operator<=>(const ChannelLabel&) const = default;

 private:
  std::string name_;
};

// Channels common to every subject, in the fixed tensor-axis order.
const std::vector<ChannelLabel>& canonical_channels();

struct EegRecord {
  std::string patient_id;
  std::uint32_t sample_rate_hz = 256;
  std::vector<ChannelLabel> channels;
  SampleMatrix samples;  // [channels x samples], microvolts
  double start_time_s = 0.0;

  Eigen::Index num_samples() const { return samples.cols(); }
  double duration_s() const {
    return static_cast<double>(samples.cols()) / sample_rate_hz;
  }
  double end_time_s() const { return start_time_s + duration_s(); }

  // Throws IntegrityError on violated invariants.
  void validate() const;
  bool operator==(const EegRecord& other) const;
};

struct SeizureEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;

  double duration_s() const { return offset_s - onset_s; }
  bool operator==(const SeizureEvent&) const = default;
};

struct AnnotatedRecording {
  EegRecord record;
  std::vector<SeizureEvent> seizures;  // sorted, non-overlapping

  void validate() const;
  bool operator==(const AnnotatedRecording&) const = default;
};

// Path of the annotation sidecar for a record file.
std::filesystem::path annotation_path(const std::filesystem::path& record_path);

void write_record(const std::filesystem::path& path,
                  const AnnotatedRecording& rec);

// A missing sidecar means no seizures.
AnnotatedRecording read_record(const std::filesystem::path& path);

std::vector<SeizureEvent> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<SeizureEvent>& seizures);

/// Reorders rows to `wanted` and drops every other channel. Throws
/// MissingChannelError listing all absent labels.
AnnotatedRecording select_channels(
    const AnnotatedRecording& rec,
    const std::vector<ChannelLabel>& wanted = canonical_channels());

/// CSV fixture import: a header row of channel labels followed by one row
/// per sample.
EegRecord import_csv(const std::filesystem::path& path, std::string patient_id,
                     std::uint32_t sample_rate_hz, double start_time_s = 0.0);

struct BandAmplitudes {
  double delta = 20.0;  // 0.5-3 Hz
  double theta = 10.0;  // 3.5-7.5 Hz
  double alpha = 8.0;   // 7.5-13 Hz
  double beta = 3.0;    // 14-30 Hz
};

struct SynthConfig {
  std::string patient_id = "synth";
  std::uint32_t sample_rate_hz = 256;
  double duration_s = 3600.0;
  double start_time_s = 0.0;
  std::vector<SeizureEvent> seizures;
  std::vector<ChannelLabel> channels = canonical_channels();
  BandAmplitudes bands;
  // Sinusoids drawn per band and channel.
  int components_per_band = 3;
  double noise_amplitude = 2.0;       // std-dev of white noise
  double line_noise_amplitude = 0.0;  // 60 Hz mains
  // Beta amplitude is multiplied by (1 + preictal_gain * ramp) where the
  // ramp rises linearly from 0 at onset - preictal_lead_s to 1 after
  // ramp_s, and stays at 1 through the seizure offset.
  double preictal_gain = 3.0;
  double preictal_lead_s = 1800.0;
  double ramp_s = 120.0;
  // When empty, every band component uses a random frequency. When set, only
  // these pure tones are generated (amplitude from `tone_amplitude`).
  std::vector<double> tones_hz;
  double tone_amplitude = 10.0;
};

/// Deterministic synthetic EEG. Randomness comes from CounterRng streams
/// keyed by (seed, channel), so output does not depend on thread count or
/// platform `<random>` implementations.
AnnotatedRecording synth_eeg(const SynthConfig& config, std::uint64_t seed);

}  // namespace preictal

#endif  // PREICTAL_EEGIO_HPP_
