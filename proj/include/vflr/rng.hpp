// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

#include "vflr/errors.hpp"

namespace vflr {

// Seeded random stream.
//
// The engine is std::mt19937_64, whose output sequence is fully pinned by the
// C++ standard. All conversions to floating point, bounded integers and
// permutations are done here rather than through <random> distributions,
// whose algorithms are implementation-defined. Together this gives identical
// draws for an identical seed on every conforming platform.
//
// A stream is owned by exactly one party; never share one across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1): k + 1/2 over 2^53 for k in [0, 2^53).
  double uniform01() {
    const std::uint64_t k = next_u64() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), rejection sampled (no modulo bias).
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform_below: bound must be positive");
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x < limit) return x % bound;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller (cosine branch only; no cached spare).
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = uniform_below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream purposes. Every random draw in a run comes from
// derive_seed(run_seed, party, purpose), so no two consumers share a stream.
enum class StreamPurpose : std::uint64_t {
  kBatches = 1,
  kKeygen = 2,
  kEncryption = 3,
  kMask = 4,
  kNoise = 5,
  kRandomResponse = 6,
  kDecoys = 7,
  kSplit = 8,
  kSynth = 9,
  kAttackGuess = 10,
};

enum class PartyId : std::uint8_t { kBob = 0, kAlice = 1, kNone = 0xff };

constexpr std::uint64_t derive_seed(std::uint64_t run_seed, PartyId party,
                                    StreamPurpose purpose) {
  return mix64(mix64(mix64(run_seed) ^ static_cast<std::uint64_t>(party)) ^
               static_cast<std::uint64_t>(purpose));
}

inline RngStream derive_stream(std::uint64_t run_seed, PartyId party,
                               StreamPurpose purpose) {
  return RngStream(derive_seed(run_seed, party, purpose));
}

// Inverse CDF of Laplace(0, scale) evaluated at u in (0, 1).
inline double laplace_quantile(double u, double scale) {
  if (!(scale > 0.0)) throw DomainError("laplace: scale must be positive");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("laplace: u must lie in (0,1)");
  const double centered = u - 0.5;
  // log1p keeps precision near the median.
  const double magnitude = -scale * std::log1p(-2.0 * std::fabs(centered));
  return centered < 0.0 ? -magnitude : magnitude;
}

// One draw from Laplace(0, scale) by inverse CDF.
inline double sample_laplace(double scale, RngStream& rng) {
  if (!(scale > 0.0)) throw DomainError("sample_laplace: scale must be positive");
  return laplace_quantile(rng.uniform01(), scale);
}

}  // namespace vflr
