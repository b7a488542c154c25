// Copyright 2026 The deepgen authors
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

#ifndef DEEPGEN_RANDOM_HPP
#define DEEPGEN_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

#include "deepgen/errors.hpp"

/// \file
/// \brief Splittable counter-based random stream.
///
/// Training touches data points in an order that may depend on the thread
/// schedule, so reproducibility cannot rest on a single shared generator.
/// Instead every logical site (epoch, batch, step, data point, sample index)
/// derives its own child stream from a fixed integer path. Two runs with the
/// same seed consume identical variates at every site regardless of
/// interleaving, which is what makes byte-identical outputs possible.

namespace deepgen {

namespace detail {

/// SplitMix64 output mixer. Bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4B7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// A deterministic random stream identified by a 64-bit key.
///
/// Draws are counter-based: the i-th raw word is a hash of (key, i), so a
/// stream never needs to be advanced to a position and copies are cheap.
/// child(index) derives a statistically independent stream; equal
/// (seed, path) pairs always produce equal draws.
class RandomStream {
 public:
  /// Creates the root stream for a seed.
  explicit RandomStream(std::uint64_t seed) noexcept
      : key_(detail::mix64(seed ^ 0xD1B54A32D192ED03ULL)) {}

  /// Derives the child stream at the given path index.
  ///
  /// Children of distinct indices, and children at distinct depths, have
  /// unrelated keys. The child starts at counter zero.
  [[nodiscard]] RandomStream child(std::uint64_t index) const noexcept {
    RandomStream c(0);
    c.key_ = detail::mix64(detail::mix64(key_ ^ 0xA0761D6478BD642FULL) + index);
    c.counter_ = 0;
    return c;
  }

  /// Next raw 64-bit word.
  std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + (++counter_) * 0x9E3779B97F4B7C15ULL);
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Bernoulli draw. p must lie in [0, 1]; p = 0 and p = 1 are exact.
  bool bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("bernoulli probability must lie in [0, 1]");
    }
    return uniform() < p;
  }

  /// Gaussian draw via the Box-Muller transform. stddev must be >= 0.
  double gaussian(double mean, double stddev) {
    if (!(std::isfinite(mean) && stddev >= 0.0)) {
      throw DomainError("gaussian parameters must be finite with stddev >= 0");
    }
    // u1 in (0, 1] keeps the log argument away from zero.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace deepgen

#endif  // DEEPGEN_RANDOM_HPP
