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

// Independent reference implementations used as test oracles. They share no
// code with the library beyond plain data types.

#ifndef PREICTAL_TESTS_ORACLES_HPP_
#define PREICTAL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// X[k] = sum_n x[n] exp(-2 pi i k n / N), k = 0..N/2.
inline std::vector<std::complex<double>> dft_onesided(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0.0L;
    long double im = 0.0L;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t phase = (k * t) % n;  // exact argument reduction
      const long double a = -2.0L * std::numbers::pi_v<long double> * phase / n;
      re += x[t] * std::cos(a);
      im += x[t] * std::sin(a);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

// Gaussian taper centred at (N - 1) / 2.
inline std::vector<double> gaussian_taper(std::size_t n, double sigma) {
  std::vector<double> w(n);
  const double c = 0.5 * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (static_cast<double>(i) - c) / sigma;
    w[i] = std::exp(-0.5 * z * z);
  }
  return w;
}

// Frames x bins of a one-sided STFT computed by direct DFT per frame.
inline std::vector<std::vector<std::complex<double>>> stft(const std::vector<double>& x,
                                                           std::size_t win, std::size_t hop,
                                                           const std::vector<double>& taper) {
  std::vector<std::vector<std::complex<double>>> out;
  for (std::size_t s = 0; s + win <= x.size(); s += hop) {
    std::vector<double> frame(win);
    for (std::size_t i = 0; i < win; ++i) frame[i] = x[s + i] * taper[i];
    out.push_back(dft_onesided(frame));
  }
  return out;
}

// Valid cross-correlation, in[c][y][x] flattened row-major.
inline std::vector<double> conv2d(const std::vector<double>& in, int C, int H, int W,
                                  const std::vector<double>& k, const std::vector<double>& b,
                                  int O, int kh, int kw, int sh, int sw, int* Ho, int* Wo) {
  const int oh = (H - kh) / sh + 1;
  const int ow = (W - kw) / sw + 1;
  *Ho = oh;
  *Wo = ow;
  std::vector<double> out(static_cast<std::size_t>(O) * oh * ow);
  for (int o = 0; o < O; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = b[o];
        for (int c = 0; c < C; ++c) {
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              acc += k[((static_cast<std::size_t>(o) * C + c) * kh + i) * kw + j] *
                     in[(static_cast<std::size_t>(c) * H + y * sh + i) * W + x * sw + j];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * oh + y) * ow + x] = acc;
      }
    }
  }
  return out;
}

// y[j] = b[j] + sum_i W[i][j] x[i], W row-major [in x out].
inline std::vector<double> dense(const std::vector<double>& x, const std::vector<double>& w,
                                 const std::vector<double>& b) {
  const std::size_t in = x.size();
  const std::size_t out = b.size();
  std::vector<double> y(out);
  for (std::size_t j = 0; j < out; ++j) {
    double acc = b[j];
    for (std::size_t i = 0; i < in; ++i) acc += w[i * out + j] * x[i];
    y[j] = acc;
  }
  return y;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// One LSTM step with scalar loops. w_x[g]: [in x hidden], w_h[g]: [hidden x
// hidden], gate order i, f, o, c.
struct LstmStep {
  std::vector<double> h;
  std::vector<double> c;
};
inline LstmStep lstm_step(const std::vector<double>& x, const std::vector<double>& h_prev,
                          const std::vector<double>& c_prev,
                          const std::vector<std::vector<double>>& w_x,
                          const std::vector<std::vector<double>>& w_h,
                          const std::vector<std::vector<double>>& b) {
  const std::size_t hidden = h_prev.size();
  std::vector<std::vector<double>> a(4, std::vector<double>(hidden));
  for (int g = 0; g < 4; ++g) {
    for (std::size_t j = 0; j < hidden; ++j) {
      double acc = b[g][j];
      for (std::size_t i = 0; i < x.size(); ++i) acc += w_x[g][i * hidden + j] * x[i];
      for (std::size_t i = 0; i < hidden; ++i) acc += w_h[g][i * hidden + j] * h_prev[i];
      a[g][j] = acc;
    }
  }
  LstmStep s{std::vector<double>(hidden), std::vector<double>(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double ig = sigmoid(a[0][j]);
    const double fg = sigmoid(a[1][j]);
    const double og = sigmoid(a[2][j]);
    const double cg = std::tanh(a[3][j]);
    s.c[j] = fg * c_prev[j] + ig * cg;
    s.h[j] = og * std::tanh(s.c[j]);
  }
  return s;
}

// Alarm indices by recounting the trailing window at every position.
inline std::vector<std::size_t> k_of_n(const std::vector<bool>& pos, int k, int n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (i + 1 < static_cast<std::size_t>(n)) continue;
    int count = 0;
    for (std::size_t j = i + 1 - static_cast<std::size_t>(n); j <= i; ++j) count += pos[j];
    if (count >= k) out.push_back(i);
  }
  return out;
}

// Emitted alarm indices after refractory suppression (alarm times are
// window ends spaced `step` apart).
inline std::vector<std::size_t> refractory(const std::vector<std::size_t>& raw, double step,
                                           double refractory_s) {
  std::vector<std::size_t> out;
  for (std::size_t i : raw) {
    if (!out.empty() && (static_cast<double>(i) - static_cast<double>(out.back())) * step <
                            refractory_s) {
      continue;
    }
    out.push_back(i);
  }
  return out;
}

// Scalar Adam over `steps` gradients.
inline double adam_scalar(double theta, const std::vector<double>& grads, double lr, double b1,
                          double b2, double eps) {
  double m = 0.0;
  double v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    theta = theta - lr * mh / (std::sqrt(vh) + eps);
  }
  return theta;
}

// Binomial tail by direct summation with long double coefficients.
inline double binomial_tail(int k, int L, double P) {
  long double total = 0.0L;
  for (int i = std::max(k, 0); i <= L; ++i) {
    long double c = 1.0L;
    for (int j = 1; j <= i; ++j) c = c * (L - i + j) / j;
    total += c * std::pow(static_cast<long double>(P), i) *
             std::pow(static_cast<long double>(1.0 - P), L - i);
  }
  return static_cast<double>(total);
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("preictal_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// FNV-1a over a file's bytes.
inline std::uint64_t file_hash(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return 0;
  std::uint64_t h = 1469598103934665603ULL;
  int ch;
  while ((ch = std::fgetc(f)) != EOF) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  std::fclose(f);
  return h;
}

}  // namespace oracle

#endif  // PREICTAL_TESTS_ORACLES_HPP_
