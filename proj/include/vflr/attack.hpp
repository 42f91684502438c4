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

// Label inference by the passive party. From a round's unmasked gradient
// g = -(1/|B|) X_B^T r she solves X_B^T r = -|B| g for the residues and reads
// labels off their signs.

#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vflr/bytes.hpp"
#include "vflr/data.hpp"
#include "vflr/errors.hpp"
#include "vflr/numeric.hpp"
#include "vflr/paillier.hpp"
#include "vflr/wire.hpp"

namespace vflr::attack {

struct LinearSystem {
  DenseMatrix a;  // d_A x |B|, columns are the batch rows
  DenseVector b;  // -denom * g
};

inline LinearSystem build_system(const DenseMatrix& x_batch, const DenseVector& g, std::size_t denom) {
  vflr::detail::require_same_length(x_batch.cols(), g.size(), "build_system");
  if (denom == 0) throw DomainError("build_system: denominator must be >= 1");
  DenseVector b(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) b[j] = -static_cast<double>(denom) * g[j];
  return LinearSystem{x_batch.transpose(), b};
}

inline SolveReport analyse(const LinearSystem& sys) { return solve_linear(sys.a, sys.b); }

// rank(A) = rank([A|b]) = number of unknowns.
inline bool check_recoverable(const LinearSystem& sys) { return analyse(sys).status == SolveStatus::kUnique; }

// r >= 0 -> 1, else 0. An exact zero goes to 1.
inline std::vector<std::uint8_t> infer_labels(const DenseVector& r) {
  std::vector<std::uint8_t> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i] >= 0.0 ? 1 : 0;
  return out;
}

// L(L+1) 2^(L-2), which equals sum_{k=1..L} k^2 C(L,k).
inline BigInt hybrid_search_cost(std::size_t forwarded) {
  if (forwarded == 0) throw DomainError("hybrid_search_cost: L_RR must be >= 1");
  BigInt v = BigInt(static_cast<unsigned long>(forwarded)) * static_cast<unsigned long>(forwarded + 1);
  mpz_mul_2exp(v.get_mpz_t(), v.get_mpz_t(), forwarded);
  mpz_fdiv_q_2exp(v.get_mpz_t(), v.get_mpz_t(), 2);
  return v;
}

struct RoundAttack {
  std::uint32_t round = 0;
  std::vector<std::size_t> rows;
  bool plaintext = false;  // residues were sent in the clear (noised)
  bool recoverable = false;
  SolveStatus status = SolveStatus::kUnderdetermined;
  std::size_t rank_a = 0;
  std::size_t rank_augmented = 0;
  std::optional<DenseVector> residues;
  std::vector<std::uint8_t> labels;  // empty unless residues are known
};

struct AttackReport {
  wire::ProtocolFlavor flavor = wire::ProtocolFlavor::kEmpty;
  std::vector<RoundAttack> rounds;
  std::vector<std::size_t> samples;   // every sample that appeared, ascending
  std::vector<std::uint8_t> inferred;  // parallel to samples
  std::vector<std::uint8_t> decided;   // 1 if at least one round voted
  std::size_t recoverable_rounds = 0;
  std::optional<double> success_rate;
};

namespace detail {

inline DenseMatrix quantized_rows(const DenseMatrix& x, const std::vector<std::size_t>& rows,
                                  const std::optional<paillier::FixedPointCodec>& codec) {
  DenseMatrix out = x.select_rows(rows);
  if (!codec) return out;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = codec->quantized(out(r, c));
  return out;
}

inline RoundAttack attack_solved(std::uint32_t round, std::vector<std::size_t> rows, const LinearSystem& sys) {
  RoundAttack out;
  out.round = round;
  out.rows = std::move(rows);
  const SolveReport rep = analyse(sys);
  out.status = rep.status;
  out.rank_a = rep.rank_a;
  out.rank_augmented = rep.rank_augmented;
  out.recoverable = rep.status == SolveStatus::kUnique;
  if (out.recoverable) {
    out.residues = rep.solution;
    out.labels = infer_labels(*rep.solution);
  }
  return out;
}

}  // namespace detail

// Runs the attack over every round of a transcript. Alice's features must be
// the rows she trained on. Per sample, labels from all rounds that could be
// solved are combined by majority vote (ties to 1); a sample never solved is
// treated as a zero residue and therefore labelled 1.
inline AttackReport attack_transcript(const wire::Transcript& t, const DenseMatrix& alice_features,
                                      const data::Labels* truth = nullptr) {
  using wire::MessageKind;
  AttackReport report;
  try {
    report.flavor = wire::check_grammar(t);
  } catch (const ProtocolError& e) {
    throw ParseError(std::string("attack: malformed transcript: ") + e.what());
  }
  const auto& m = t.messages;
  std::optional<paillier::FixedPointCodec> codec;
  BigInt scale_sq;
  std::size_t pos = 0;
  if (report.flavor == wire::ProtocolFlavor::kBaseline || report.flavor == wire::ProtocolFlavor::kHybrid) {
    const auto& pk = m[0].as<wire::PublicKeyBody>();
    codec.emplace(pk.n, pk.scale);
    scale_sq = BigInt(pk.scale) * pk.scale;
    pos = 1;
  }
  const std::size_t stride = codec ? 6 : 3;
  const std::size_t d = alice_features.cols();

  std::map<std::size_t, std::pair<std::size_t, std::size_t>> votes;  // sample -> (ones, zeros)
  for (; pos < m.size(); pos += stride) {
    const auto& ba = m[pos].as<wire::BatchAnnounceBody>();
    std::vector<std::size_t> rows = ba.forwarded();
    for (std::size_t r : rows) {
      if (r >= alice_features.rows()) {
        throw ParseError("attack: sample index " + std::to_string(r) + " beyond the supplied features");
      }
      votes.try_emplace(r, 0, 0);
    }
    RoundAttack ra;
    if (!codec) {
      const auto& noised = m[pos + 2].as<wire::RealVectorBody>().values;
      if (noised.size() != rows.size()) throw ParseError("attack: residue count differs from the batch");
      ra.round = m[pos].round;
      ra.rows = rows;
      ra.plaintext = true;
      ra.recoverable = true;
      ra.status = SolveStatus::kUnique;
      ra.residues = DenseVector(noised);
      ra.labels = infer_labels(*ra.residues);
    } else {
      const auto& mask = m[pos + 3].as<wire::IntegerVectorBody>().values;
      const auto& plain = m[pos + 5].as<wire::IntegerVectorBody>().values;
      if (mask.size() != d || plain.size() != d) {
        throw ParseError("attack: gradient length differs from the feature count " + std::to_string(d));
      }
      // Alice's own gradient, as she computed it.
      const std::size_t denom = rows.size();
      const double scale = static_cast<double>(denom) * mpz_get_d(scale_sq.get_mpz_t());
      DenseVector g(d);
      for (std::size_t j = 0; j < d; ++j) {
        const BigInt s = plain[j] - mask[j];
        g[j] = -mpz_get_d(s.get_mpz_t()) / scale;
      }
      const DenseMatrix xq = detail::quantized_rows(alice_features, rows, codec);
      ra = detail::attack_solved(m[pos].round, rows, build_system(xq, g, denom));
    }
    if (ra.recoverable) {
      ++report.recoverable_rounds;
      for (std::size_t i = 0; i < ra.rows.size(); ++i) {
        auto& v = votes[ra.rows[i]];
        (ra.labels[i] ? v.first : v.second) += 1;
      }
    }
    report.rounds.push_back(std::move(ra));
  }

  std::size_t correct = 0;
  for (const auto& [sample, v] : votes) {
    report.samples.push_back(sample);
    report.inferred.push_back(v.first >= v.second ? 1 : 0);
    report.decided.push_back(v.first + v.second > 0 ? 1 : 0);
    if (truth) {
      if (sample >= truth->size()) throw ParseError("attack: sample index beyond the supplied labels");
      if ((*truth)[sample] == report.inferred.back()) ++correct;
    }
  }
  if (truth && !report.samples.empty()) {
    report.success_rate = static_cast<double>(correct) / static_cast<double>(report.samples.size());
  }
  return report;
}

// Exhaustive search against one hybrid round for small L_RR: try every
// candidate live set T of size k, solve X_T^T r_T = -k g, and keep the
// candidates with a unique solution inside (-1, 1).
struct Candidate {
  std::vector<std::size_t> positions;  // into the forwarded rows
  DenseVector residues;
};

struct BruteForceResult {
  std::size_t subsets_tried = 0;
  std::vector<Candidate> consistent;
};

inline constexpr std::size_t kBruteForceLimit = 12;

inline BruteForceResult brute_force_round(const DenseMatrix& x_forwarded, const DenseVector& g) {
  const std::size_t big_l = x_forwarded.rows();
  if (big_l == 0 || big_l > kBruteForceLimit) {
    throw ConfigError("brute force: L_RR must be between 1 and " + std::to_string(kBruteForceLimit));
  }
  BruteForceResult out;
  for (std::uint32_t bits = 1; bits < (1u << big_l); ++bits) {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < big_l; ++i)
      if (bits & (1u << i)) positions.push_back(i);
    ++out.subsets_tried;
    const LinearSystem sys = build_system(x_forwarded.select_rows(positions), g, positions.size());
    const SolveReport rep = analyse(sys);
    if (rep.status != SolveStatus::kUnique) continue;
    bool inside = true;
    for (double r : *rep.solution) inside = inside && std::fabs(r) < 1.0 && r != 0.0;
    if (inside) out.consistent.push_back(Candidate{positions, *rep.solution});
  }
  return out;
}

inline nlohmann::ordered_json to_json(const AttackReport& r) {
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const auto& ra : r.rounds) {
    rounds.push_back({{"round", ra.round},
                      {"rows", ra.rows.size()},
                      {"recoverable", ra.recoverable},
                      {"status", ra.plaintext ? "plaintext" : to_string(ra.status)},
                      {"rank_a", ra.rank_a},
                      {"rank_augmented", ra.rank_augmented}});
  }
  nlohmann::ordered_json j{{"schema_version", 1},
                           {"kind", "attack"},
                           {"protocol", wire::to_string(r.flavor)},
                           {"rounds", r.rounds.size()},
                           {"recoverable_rounds", r.recoverable_rounds},
                           {"samples", r.samples.size()},
                           {"success_rate", nullptr},
                           {"per_round", rounds}};
  if (r.success_rate) j["success_rate"] = *r.success_rate;
  return j;
}

}  // namespace vflr::attack
