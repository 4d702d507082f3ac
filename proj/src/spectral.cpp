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

#include "preictal/spectral.hpp"

#include <cmath>

#include "binary_io.hpp"

namespace preictal {

namespace {
constexpr char kSpecMagic[4] = {'S', 'P', 'E', 'C'};
}

Taper parse_taper(const std::string& name) {
  if (name == "gaussian") return Taper::kGaussian;
  if (name == "hann") return Taper::kHann;
  if (name == "rectangular") return Taper::kRectangular;
  throw ConfigError("unknown taper '" + name + "' (gaussian, hann, rectangular)");
}

std::string taper_name(Taper taper) {
  switch (taper) {
    case Taper::kGaussian: return "gaussian";
    case Taper::kHann: return "hann";
    case Taper::kRectangular: return "rectangular";
  }
  return "gaussian";
}

void StftConfig::validate() const {
  if (window_len_samples <= 0) throw ConfigError("stft: window_len_samples must be positive");
  if (hop_samples <= 0) throw ConfigError("stft: hop_samples must be positive");
  if (hop_samples > window_len_samples) {
    throw ConfigError("stft: hop_samples must not exceed window_len_samples");
  }
  if (taper == Taper::kGaussian && gaussian_sigma < 0.0) {
    throw ConfigError("stft: gaussian sigma must be positive");
  }
}

std::vector<double> stft_bin_hz(const StftConfig& cfg, double sample_rate_hz) {
  std::vector<double> hz(static_cast<std::size_t>(cfg.num_bins()));
  for (std::size_t k = 0; k < hz.size(); ++k) {
    hz[k] = static_cast<double>(k) * sample_rate_hz /
            static_cast<double>(cfg.window_len_samples);
  }
  return hz;
}

const std::vector<NoiseBand>& default_noise_bands() {
  static const std::vector<NoiseBand> kBands = {{57.0, 63.0}, {117.0, 123.0}};
  return kBands;
}

std::vector<Index> retained_bins(const std::vector<double>& bin_hz,
                                 const std::vector<NoiseBand>& bands) {
  std::vector<Index> keep;
  for (std::size_t k = 0; k < bin_hz.size(); ++k) {
    const double f = bin_hz[k];
    if (f == 0.0) continue;
    bool excised = false;
    for (const auto& b : bands) excised |= (f >= b.lo_hz && f <= b.hi_hz);
    if (!excised) keep.push_back(static_cast<Index>(k));
  }
  return keep;
}

TimeFrequencyGrid excise_noise_bands(const ComplexMatrix<double>& spec,
                                     const std::vector<double>& bin_hz,
                                     const std::vector<NoiseBand>& bands) {
  if (static_cast<std::size_t>(spec.cols()) != bin_hz.size()) {
    throw ShapeError("excise_noise_bands: spectrum has " + std::to_string(spec.cols()) +
                     " bins but " + std::to_string(bin_hz.size()) + " frequencies given");
  }
  TimeFrequencyGrid grid;
  grid.bin_index = retained_bins(bin_hz, bands);
  grid.frames = spec.rows();
  grid.bins = static_cast<Index>(grid.bin_index.size());
  grid.magnitudes.resize(grid.frames, grid.bins);
  for (Index j = 0; j < grid.bins; ++j) {
    const Index k = grid.bin_index[static_cast<std::size_t>(j)];
    grid.bin_hz.push_back(bin_hz[static_cast<std::size_t>(k)]);
    grid.magnitudes.col(j) = spec.col(k).cwiseAbs();
  }
  return grid;
}

TimeFrequencyGrid standardize(TimeFrequencyGrid grid) {
  if (grid.frames < 2) throw PreconditionError("standardize: need at least 2 frames");
  auto& m = grid.magnitudes;
  m = m.array().log1p().matrix();
  const double count = static_cast<double>(m.size());
  const double mean = m.sum() / count;
  const double var = (m.array() - mean).square().sum() / count;
  const double sd = std::sqrt(var);
  if (!(sd >= 1e-12)) {
    m.setZero();
  } else {
    m = ((m.array() - mean) / sd).matrix();
  }
  return grid;
}

Shape spectrogram_shape(Index channels, double window_len_s, double sample_rate_hz,
                        const StftConfig& cfg) {
  const auto samples = static_cast<Index>(std::llround(window_len_s * sample_rate_hz));
  const auto bins =
      static_cast<Index>(retained_bins(stft_bin_hz(cfg, sample_rate_hz)).size());
  return {channels, cfg.num_frames(samples), bins};
}

Spectrogram build_spectrogram(const EegRecord& record, Index start_sample,
                              double window_len_s, const StftConfig& cfg) {
  cfg.validate();
  const auto len =
      static_cast<Index>(std::llround(window_len_s * record.sample_rate_hz));
  if (start_sample < 0 || start_sample + len > record.num_samples()) {
    throw InputLengthError("build_spectrogram: window [" + std::to_string(start_sample) +
                           ", " + std::to_string(start_sample + len) +
                           ") exceeds record of " + std::to_string(record.num_samples()) +
                           " samples");
  }
  if (len < cfg.window_len_samples) {
    throw InputLengthError("build_spectrogram: window shorter than one STFT frame");
  }
  const auto bin_hz = stft_bin_hz(cfg, record.sample_rate_hz);
  const Index channels = static_cast<Index>(record.channels.size());
  const Index frames = cfg.num_frames(len);
  const Index bins = static_cast<Index>(retained_bins(bin_hz).size());

  Spectrogram out;
  out.channels = record.channels;
  out.values = Tensor<double>({channels, frames, bins});
  Vector<double> signal(len);
  for (Index c = 0; c < channels; ++c) {
    signal = record.samples.row(c).segment(start_sample, len).cast<double>().transpose();
    const auto grid = standardize(excise_noise_bands(stft<double>(signal, cfg), bin_hz));
    Eigen::Map<RowMatrix<double>>(out.values.data() + c * frames * bins, frames, bins) =
        grid.magnitudes;
  }
  return out;
}

Spectrogram build_spectrogram(const EegRecord& window, const StftConfig& cfg,
                              double window_len_s) {
  const auto expected =
      static_cast<Index>(std::llround(window_len_s * window.sample_rate_hz));
  if (window.num_samples() != expected) {
    throw InputLengthError("build_spectrogram: expected " + std::to_string(expected) +
                           " samples per channel, got " +
                           std::to_string(window.num_samples()));
  }
  return build_spectrogram(window, 0, window_len_s, cfg);
}

void write_spectrogram(const std::filesystem::path& path, const Tensor<double>& values) {
  if (values.rank() != 3) throw ShapeError("spectrogram must be rank 3");
  for (Index d = 0; d < 3; ++d) {
    if (values.dim(d) > 0xFFFF) throw ShapeError("spectrogram dimension exceeds u16");
  }
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kSpecMagic, 4));
  w.put<std::uint16_t>(kSpectrogramFormatVersion);
  for (Index d = 0; d < 3; ++d) w.put<std::uint16_t>(static_cast<std::uint16_t>(values.dim(d)));
  const Eigen::VectorXf f = values.values().cast<float>();
  w.put_array(std::span<const float>(f.data(), static_cast<std::size_t>(f.size())));
  w.save(path);
}

Tensor<float> read_spectrogram(const std::filesystem::path& path) {
  auto r = detail::ByteReader::load(path);
  if (r.get_bytes(4, "magic") != std::string_view(kSpecMagic, 4)) {
    throw FormatError(path.string() + ": bad magic, expected SPEC", 0);
  }
  const auto version_at = r.position();
  if (r.get<std::uint16_t>("version") != kSpectrogramFormatVersion) {
    throw FormatError(path.string() + ": unsupported spectrogram version", version_at);
  }
  Shape shape(3);
  for (auto& d : shape) {
    const auto at = r.position();
    d = r.get<std::uint16_t>("dims");
    if (d == 0) throw FormatError(path.string() + ": zero dimension", at);
  }
  const auto expected = static_cast<std::size_t>(shape_size(shape)) * sizeof(float);
  if (r.remaining() != expected) {
    throw IntegrityError(path.string() + ": payload of " + std::to_string(r.remaining()) +
                         " bytes does not match dims " + shape_string(shape));
  }
  Tensor<float> t(shape);
  r.get_array(std::span<float>(t.data(), static_cast<std::size_t>(t.size())), "values");
  return t;
}

}  // namespace preictal
