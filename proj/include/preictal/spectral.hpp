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

// Windowed spectra of EEG channels.
//
// Pipeline per channel: stft -> excise_noise_bands -> standardize. At 256 Hz
// with a 256-sample window and a 128-sample hop a 30 s window gives 59 frames
// and 129 one-sided bins; dropping DC and the 57-63 Hz / 117-123 Hz mains
// bands leaves 114 bins, so a canonical window becomes an 18 x 59 x 114
// tensor laid out [channel][frame][bin].

#ifndef PREICTAL_SPECTRAL_HPP_
#define PREICTAL_SPECTRAL_HPP_

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "preictal/eegio.hpp"
#include "preictal/error.hpp"
#include "preictal/tensor.hpp"

namespace preictal {

enum class Taper { kGaussian, kHann, kRectangular };

Taper parse_taper(const std::string& name);
std::string taper_name(Taper taper);

struct StftConfig {
  Index window_len_samples = 256;
  Index hop_samples = 128;
  Taper taper = Taper::kGaussian;
  // Gaussian standard deviation in samples; 0 selects window_len / 6.
  double gaussian_sigma = 0.0;

  void validate() const;
  double effective_sigma() const {
    return gaussian_sigma > 0.0 ? gaussian_sigma
                                : static_cast<double>(window_len_samples) / 6.0;
  }
  Index num_frames(Index signal_len) const {
    return (signal_len - window_len_samples) / hop_samples + 1;
  }
  Index num_bins() const { return window_len_samples / 2 + 1; }
};

/// Window weights w[n], n = 0..N-1. Gaussian and Hann are symmetric about
/// (N - 1) / 2.
template <typename Scalar>
Vector<Scalar> taper_weights(const StftConfig& cfg) {
  const Index n = cfg.window_len_samples;
  Vector<Scalar> w(n);
  const double center = 0.5 * static_cast<double>(n - 1);
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    switch (cfg.taper) {
      case Taper::kGaussian: {
        const double z = (x - center) / cfg.effective_sigma();
        w[i] = static_cast<Scalar>(std::exp(-0.5 * z * z));
        break;
      }
      case Taper::kHann:
        w[i] = n > 1 ? static_cast<Scalar>(
                           0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * x / (n - 1)))
                     : Scalar(1);
        break;
      case Taper::kRectangular:
        w[i] = Scalar(1);
        break;
    }
  }
  return w;
}

template <typename Scalar>
using ComplexMatrix =
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Center frequency of one-sided bin k is k * sample_rate / window_len.
std::vector<double> stft_bin_hz(const StftConfig& cfg, double sample_rate_hz);

/// One-sided short-time Fourier transform, [frames x (window_len / 2 + 1)].
///
///   X[t, k] = sum_n w[n] x[t * hop + n] exp(-2 pi i k n / N)
///
/// Frame t covers samples [t * hop, t * hop + N).
template <typename Scalar>
ComplexMatrix<Scalar> stft(const Eigen::Ref<const Vector<Scalar>>& signal,
                           const StftConfig& cfg) {
  cfg.validate();
  const Index n = cfg.window_len_samples;
  if (signal.size() < n) {
    throw InputLengthError("stft: signal of " + std::to_string(signal.size()) +
                           " samples is shorter than one window (" +
                           std::to_string(n) + ")");
  }
  const Index frames = cfg.num_frames(signal.size());
  const Index bins = cfg.num_bins();
  const Vector<Scalar> w = taper_weights<Scalar>(cfg);

  Eigen::FFT<Scalar> fft;
  std::vector<Scalar> frame(static_cast<std::size_t>(n));
  std::vector<std::complex<Scalar>> spectrum(static_cast<std::size_t>(n));
  ComplexMatrix<Scalar> out(frames, bins);
  for (Index t = 0; t < frames; ++t) {
    const Index start = t * cfg.hop_samples;
    for (Index i = 0; i < n; ++i) frame[static_cast<std::size_t>(i)] = w[i] * signal[start + i];
    fft.fwd(spectrum.data(), frame.data(), n);
    for (Index k = 0; k < bins; ++k) out(t, k) = spectrum[static_cast<std::size_t>(k)];
  }
  return out;
}

// Closed frequency interval removed from the spectrum.
struct NoiseBand {
  double lo_hz;
  double hi_hz;
};

const std::vector<NoiseBand>& default_noise_bands();

struct TimeFrequencyGrid {
  Index frames = 0;
  Index bins = 0;
  std::vector<double> bin_hz;     // retained bin centers
  std::vector<Index> bin_index;   // positions in the one-sided spectrum
  Eigen::MatrixXd magnitudes;     // [frames x bins]
};

// Indices of one-sided bins kept after dropping DC and every noise band
// (bounds inclusive).
std::vector<Index> retained_bins(const std::vector<double>& bin_hz,
                                 const std::vector<NoiseBand>& bands = default_noise_bands());

TimeFrequencyGrid excise_noise_bands(const ComplexMatrix<double>& spec,
                                     const std::vector<double>& bin_hz,
                                     const std::vector<NoiseBand>& bands = default_noise_bands());

/// z = (log1p(m) - mean) / stddev over the whole grid, population stddev.
/// A grid whose stddev is below 1e-12 maps to all zeros.
TimeFrequencyGrid standardize(TimeFrequencyGrid grid);

struct Spectrogram {
  std::vector<ChannelLabel> channels;
  Tensor<double> values;  // [channels x frames x bins]
};

// Window of `window_len_s` seconds of every channel starting at
// `start_sample`.
Spectrogram build_spectrogram(const EegRecord& record, Index start_sample,
                              double window_len_s = 30.0,
                              const StftConfig& cfg = StftConfig{});

// `window` must hold exactly `window_len_s * sample_rate` samples.
Spectrogram build_spectrogram(const EegRecord& window, const StftConfig& cfg = StftConfig{},
                              double window_len_s = 30.0);

// Output shape of build_spectrogram for a given window.
Shape spectrogram_shape(Index channels, double window_len_s, double sample_rate_hz,
                        const StftConfig& cfg = StftConfig{});

// Spectrogram cache file: "SPEC" | version u16 | channels u16 | frames u16 |
// bins u16 | f32 values, channel-major.
inline constexpr std::uint16_t kSpectrogramFormatVersion = 1;

void write_spectrogram(const std::filesystem::path& path, const Tensor<double>& values);
Tensor<float> read_spectrogram(const std::filesystem::path& path);

}  // namespace preictal

#endif  // PREICTAL_SPECTRAL_HPP_
