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

#ifndef PREICTAL_RNG_HPP_
#define PREICTAL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace preictal {

/// Counter-based SplitMix64 generator.
///
/// Output `i` of a stream is `mix64(key + (i + 1) * 0x9E3779B97F4A7C15)`,
/// where `mix64` is the SplitMix64 finalizer (Steele, Lea & Flood 2014).
/// Because every draw is a pure function of (key, counter) the sequence is
/// identical on every platform and any position can be reached in O(1).
/// Normal variates use the Box-Muller transform on pairs of uniforms so
/// nothing depends on implementation-defined `<random>` distributions.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL))) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t at(std::uint64_t counter) const {
    return mix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  std::uint64_t next_u64() { return at(counter_++); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). Uses rejection to stay unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} / n) * n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fisher-Yates shuffle driven by CounterRng.
template <typename T>
void shuffle(std::vector<T>& items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace preictal

#endif  // PREICTAL_RNG_HPP_
