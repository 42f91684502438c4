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

// Residue-protection primitives: additive Laplace noise, multiplicative
// Laplace noise between two clipping steps, and randomized response over
// indicator bits.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vflr/errors.hpp"
#include "vflr/numeric.hpp"
#include "vflr/rng.hpp"

namespace vflr::mechanisms {

// L1 sensitivity of r -> r over residues in (-1, 1).
inline constexpr double kResidueSensitivity = 2.0;

struct AddNoiseParams {
  double epsilon = 1.0;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw ConfigError("additive noise: epsilon must be a positive finite number");
    }
  }
  double laplace_scale() const { return kResidueSensitivity / epsilon; }
};

struct MultNoiseParams {
  double epsilon = 10.0;
  double b1 = 0.1;   // lower clip on |r|
  double b2 = 10.0;  // upper clip on the noised value
  // Literal clipping maps clipped values to the unsigned bound (+b1 / +b2)
  // and drops the sign of the residue. Off by default.
  bool unsigned_clip = false;
  // Location of the Laplace factor. At 0 the factor is symmetric about zero,
  // so E[output] = 0 for every r and the noised residues carry no training
  // signal. 1 gives unit-mean noise. The density-ratio bound holds for any
  // location since it only depends on |z/r_i - z/r_j|.
  double noise_location = 0.0;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw ConfigError("multiplicative noise: epsilon must be a positive finite number");
    }
    if (!(b1 > 0.0 && b1 <= 1.0)) throw ConfigError("multiplicative noise: b1 must lie in (0, 1]");
    if (!(b2 > 0.0) || !std::isfinite(b2)) throw ConfigError("multiplicative noise: b2 must be positive");
    if (!std::isfinite(noise_location)) throw ConfigError("multiplicative noise: location must be finite");
  }
  // Sensitivity of r -> 1/r after clip1 is 2/b1.
  double laplace_scale() const { return 2.0 * b2 / (b1 * epsilon); }
};

struct RRParams {
  double keep_probability = 0.75;

  static RRParams from_epsilon(double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("random response: epsilon must be positive");
    // e^eps / (1 + e^eps), written to stay finite for large eps.
    return RRParams{1.0 / (1.0 + std::exp(-epsilon))};
  }

  void validate() const {
    if (!(keep_probability > 0.5 && keep_probability <= 1.0)) {
      throw ConfigError("random response: keep probability must lie in (1/2, 1]");
    }
  }
  double flip_probability() const { return 1.0 - keep_probability; }
};

inline double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

// |r| <= b1 -> b1 carrying the sign of r; otherwise r. Ensures |1/out| <= 1/b1.
inline double clip1(double r, double b1, bool unsigned_clip = false) {
  if (!(b1 > 0.0)) throw DomainError("clip1: b1 must be positive");
  if (std::fabs(r) <= b1) return unsigned_clip ? b1 : sign_of(r) * b1;
  return r;
}

// |z| >= b2 -> b2 carrying the sign of z; otherwise z. Ensures |out| <= b2.
inline double clip2(double z, double b2, bool unsigned_clip = false) {
  if (!(b2 > 0.0)) throw DomainError("clip2: b2 must be positive");
  if (std::fabs(z) >= b2) return unsigned_clip ? b2 : sign_of(z) * b2;
  return z;
}

// r + noise
inline double add_with_noise(double r, double noise) { return r + noise; }

// clip2(clip1(r) * noise)
inline double mult_with_noise(double r, const MultNoiseParams& params, double noise) {
  const double lower = clip1(r, params.b1, params.unsigned_clip);
  return clip2(lower * noise, params.b2, params.unsigned_clip);
}

inline double m_add(double r, const AddNoiseParams& params, RngStream& rng) {
  return add_with_noise(r, sample_laplace(params.laplace_scale(), rng));
}

inline double m_mult(double r, const MultNoiseParams& params, RngStream& rng) {
  return mult_with_noise(r, params, params.noise_location + sample_laplace(params.laplace_scale(), rng));
}

// Each bit kept with probability p, flipped otherwise.
inline std::vector<std::uint8_t> random_response(std::span<const std::uint8_t> bits,
                                                 const RRParams& params, RngStream& rng) {
  params.validate();
  std::vector<std::uint8_t> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const bool keep = rng.bernoulli(params.keep_probability);
    const std::uint8_t b = bits[i] != 0 ? 1 : 0;
    out[i] = keep ? b : static_cast<std::uint8_t>(1 - b);
  }
  return out;
}

// Elementwise application, index ascending, one fresh draw per element.
template <typename Mechanism>
DenseVector apply_each(const DenseVector& r, Mechanism&& mechanism) {
  DenseVector out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = mechanism(r[i]);
  return out;
}

}  // namespace vflr::mechanisms
