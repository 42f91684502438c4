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
#include <optional>
#include <sstream>
#include <string>

#include "vflr/errors.hpp"
#include "vflr/mechanisms.hpp"
#include "vflr/paillier.hpp"

namespace vflr {

enum class DefenseKind { kNone, kAdd, kMult, kHybrid };

inline const char* to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kAdd: return "add";
    case DefenseKind::kMult: return "mult";
    case DefenseKind::kHybrid: return "hybrid";
  }
  return "?";
}

inline DefenseKind parse_defense_kind(const std::string& s) {
  if (s == "none" || s == "baseline") return DefenseKind::kNone;
  if (s == "add") return DefenseKind::kAdd;
  if (s == "mult") return DefenseKind::kMult;
  if (s == "hybrid") return DefenseKind::kHybrid;
  throw ConfigError("unknown defense '" + s + "' (expected none, add, mult or hybrid)");
}

// Randomized-response plus encryption. Each round the active party picks a
// subset S of s_size samples, of which round(q * s_size) form the intended
// batch (indicator m = 1), and announces RR(m) with the indices of S.
struct HybridParams {
  double epsilon = std::log(3.0);  // RR budget; keep probability e^eps / (1 + e^eps)
  double q = 0.125;
  std::size_t s_size = 128;
  // When false, the parameter-level feasibility checks (bounds on q and p
  // and the expected forwarded count) are skipped. Per-round checks remain.
  bool enforce_feasibility = true;
  // Overrides the epsilon-derived keep probability, e.g. p = 1 in tests.
  std::optional<double> keep_probability;

  mechanisms::RRParams rr() const {
    return keep_probability ? mechanisms::RRParams{*keep_probability}
                            : mechanisms::RRParams::from_epsilon(epsilon);
  }
  std::size_t intended_batch() const {
    return static_cast<std::size_t>(std::llround(q * static_cast<double>(s_size)));
  }
  // E[L_RR] = q|S| p + (1 - q)|S| (1 - p)
  double expected_forwarded() const {
    const double p = rr().keep_probability;
    const double s = static_cast<double>(s_size);
    return q * s * p + (1.0 - q) * s * (1.0 - p);
  }
};

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  mechanisms::AddNoiseParams add;
  mechanisms::MultNoiseParams mult;
  HybridParams hybrid;

  static DefenseConfig none() { return {}; }
  static DefenseConfig additive(double epsilon) {
    DefenseConfig d;
    d.kind = DefenseKind::kAdd;
    d.add.epsilon = epsilon;
    return d;
  }
  static DefenseConfig multiplicative(double epsilon, double b1, double b2) {
    DefenseConfig d;
    d.kind = DefenseKind::kMult;
    d.mult.epsilon = epsilon;
    d.mult.b1 = b1;
    d.mult.b2 = b2;
    return d;
  }
  static DefenseConfig hybrid_rr(double epsilon, double q, std::size_t s_size) {
    DefenseConfig d;
    d.kind = DefenseKind::kHybrid;
    d.hybrid.epsilon = epsilon;
    d.hybrid.q = q;
    d.hybrid.s_size = s_size;
    return d;
  }

  bool uses_encryption() const { return kind == DefenseKind::kNone || kind == DefenseKind::kHybrid; }
};

enum class TransportKind { kInProcess, kSocket };

// Defaults: learning rate 0.1, 30 epochs, batch 16, no regularization.
struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lambda = 0.0;
  std::uint64_t seed = 1;
  DefenseConfig defense;
  std::size_t key_bits = 2048;
  // Hybrid only: divide the gradient by the live count k rather than by the
  // number of forwarded samples.
  bool normalize_by_k = true;
  std::int64_t fixed_point_scale = paillier::kDefaultScale;
  TransportKind transport = TransportKind::kInProcess;
  std::size_t max_redraws = 100;
};

// Checks the hybrid parameters against
//   d_A < E[L_RR] < |S|,   0 < q < 1/2,   1/2 < p < 1.
inline void check_hybrid_feasibility(const HybridParams& h, std::size_t d_alice, std::size_t n_samples) {
  if (h.s_size == 0) throw ConfigError("hybrid: |S| must be positive");
  if (h.s_size > n_samples) {
    throw ConfigError("hybrid: |S| = " + std::to_string(h.s_size) + " exceeds the " +
                      std::to_string(n_samples) + " training samples");
  }
  if (h.intended_batch() < 1) throw ConfigError("hybrid: round(q * |S|) must be at least 1");
  if (h.intended_batch() >= h.s_size) throw ConfigError("hybrid: q * |S| must be below |S|");
  const auto rr = h.rr();
  rr.validate();
  if (!h.enforce_feasibility) return;
  const double p = rr.keep_probability;
  if (!(h.q > 0.0 && h.q < 0.5)) throw ConfigError("hybrid: q must lie in (0, 1/2)");
  if (!(p > 0.5 && p < 1.0)) throw ConfigError("hybrid: keep probability p must lie in (1/2, 1)");
  const double expected = h.expected_forwarded();
  if (!(static_cast<double>(d_alice) < expected && expected < static_cast<double>(h.s_size))) {
    std::ostringstream msg;
    msg << "hybrid: infeasible parameters, need d_A < E[L_RR] < |S| but d_A = " << d_alice
        << ", E[L_RR] = q|S|p + (1-q)|S|(1-p) = " << expected << ", |S| = " << h.s_size
        << "; raise |S| or move p away from 1/2";
    throw ConfigError(msg.str());
  }
}

inline void validate(const TrainConfig& cfg, std::size_t n_samples, std::size_t d_alice) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (n_samples == 0) throw ConfigError("training set is empty");
  if (cfg.fixed_point_scale <= 0) throw ConfigError("fixed-point scale must be positive");
  switch (cfg.defense.kind) {
    case DefenseKind::kAdd: cfg.defense.add.validate(); break;
    case DefenseKind::kMult: cfg.defense.mult.validate(); break;
    case DefenseKind::kHybrid: check_hybrid_feasibility(cfg.defense.hybrid, d_alice, n_samples); break;
    case DefenseKind::kNone: break;
  }
  if (cfg.defense.kind != DefenseKind::kHybrid) {
    if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (cfg.batch_size > n_samples) throw ConfigError("batch size exceeds the number of samples");
  }
  if (cfg.defense.uses_encryption() && !paillier::supported_key_bits(cfg.key_bits)) {
    throw ConfigError("unsupported key length " + std::to_string(cfg.key_bits) + " (expected 512, 1024 or 2048)");
  }
}

}  // namespace vflr
