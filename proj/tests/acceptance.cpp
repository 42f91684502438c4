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

// Acceptance checks. Prints one PASS or FAIL line per criterion and exits
// nonzero when any fails.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "vflr/vflr.hpp"

namespace vflr {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

data::VerticalSplit synth_split(std::size_t n, std::size_t d, std::size_t d_alice, double sep, std::uint64_t seed) {
  return data::vertical_split(data::standardize(data::synth(n, d, sep, seed)).dataset, d_alice);
}

experiment::DatasetOptions breast_cancer() {
  experiment::DatasetOptions o;
  o.source = std::string(VFLR_DATA_DIR) + "/breast_cancer.csv";
  return o;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Outcome baseline_attack() {
  const auto start = Clock::now();
  const auto split = synth_split(400, 40, 30, 3.0, 21);
  TrainConfig cfg;
  cfg.key_bits = 1024;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  const auto run = protocol::train(split, cfg);
  const auto rep = attack::attack_transcript(run.transcript, split.alice, &split.labels);
  const double secs = seconds_since(start);
  std::ostringstream d;
  d << "rounds=" << rep.rounds.size() << " recoverable=" << rep.recoverable_rounds
    << " success=" << rep.success_rate.value_or(-1.0) << " time=" << secs << "s";
  const bool ok = rep.rounds.size() >= 20 && rep.recoverable_rounds == rep.rounds.size() &&
                  rep.success_rate.value_or(0.0) == 1.0 && secs < 30.0;
  return {ok, d.str()};
}

Outcome paillier_correctness() {
  const auto start = Clock::now();
  RngStream rng(22);
  const auto kp = paillier::keygen(512, rng);
  const auto& pk = kp.pub;
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const BigInt a = paillier::random_below(rng, pk.n);
    const BigInt b = paillier::random_below(rng, pk.n);
    const auto ca = paillier::encrypt(pk, a, rng);
    const auto cb = paillier::encrypt(pk, b, rng);
    if (paillier::decrypt(pk, kp.priv, ca) != a) ++bad;
    if (paillier::decrypt(pk, kp.priv, paillier::add_cipher(pk, ca, cb)) != BigInt((a + b) % pk.n)) ++bad;
    if (paillier::decrypt(pk, kp.priv, paillier::scalar_mult(pk, b, ca)) != BigInt((a * b) % pk.n)) ++bad;
  }
  const double secs = seconds_since(start);
  std::ostringstream d;
  d << "mismatches=" << bad << " time=" << secs << "s";
  return {bad == 0 && secs < 60.0, d.str()};
}

Outcome calibration() {
  constexpr int kDraws = 1000000;
  RngStream rng(23);
  const mechanisms::AddNoiseParams add{1.0};
  double add_abs = 0.0;
  for (int i = 0; i < kDraws; ++i) add_abs += std::abs(mechanisms::m_add(0.0, add, rng));
  add_abs /= kDraws;

  mechanisms::MultNoiseParams mult;
  mult.epsilon = 10.0;
  mult.b1 = 0.1;
  mult.b2 = 10.0;
  double mult_abs = 0.0;
  for (int i = 0; i < kDraws; ++i) mult_abs += std::abs(sample_laplace(mult.laplace_scale(), rng));
  mult_abs /= kDraws;

  const auto rr = mechanisms::RRParams::from_epsilon(std::log(3.0));
  const std::vector<std::uint8_t> bits(kDraws, 1);
  const auto out = mechanisms::random_response(bits, rr, rng);
  std::size_t flips = 0;
  for (auto b : out) flips += b == 0;
  const double flip_rate = static_cast<double>(flips) / kDraws;

  std::ostringstream d;
  d << "add_scale=" << add_abs << " mult_scale=" << mult_abs << " rr_flip=" << flip_rate;
  const bool ok = std::abs(add_abs - 2.0) <= 0.04 && std::abs(mult.laplace_scale() - 20.0) < 1e-12 &&
                  std::abs(mult_abs - 20.0) <= 0.4 && std::abs(flip_rate - 0.25) <= 0.005;
  return {ok, d.str()};
}

Outcome hybrid_lossless() {
  const auto split = synth_split(200, 10, 5, 2.0, 24);
  TrainConfig cfg;
  cfg.key_bits = 512;
  cfg.epochs = 10;
  cfg.defense = DefenseConfig::hybrid_rr(std::log(3.0), 0.125, 64);
  const auto run = protocol::train(split, cfg);
  const auto truth = protocol::true_batch_schedule(run);
  const auto central = protocol::centralized_train(split.pooled(), split.labels, cfg, &truth);
  double worst_round = 0.0;
  for (std::size_t i = 0; i < run.rounds.size(); ++i) {
    const auto g = protocol::detail::concat(run.rounds[i].alice_gradient, run.rounds[i].bob_gradient);
    worst_round = std::max(worst_round, max_abs_diff(g.span(), central.gradients[i].span()));
  }
  const double worst_w = max_abs_diff(run.weights().span(), central.weights.span());
  std::ostringstream d;
  d << "rounds=" << run.rounds.size() << " max_grad_diff=" << worst_round << " max_param_diff=" << worst_w;
  return {worst_round <= 1e-6 && worst_w <= 1e-6, d.str()};
}

Outcome hybrid_resistance() {
  const std::size_t d_alice = 30;
  const auto split = synth_split(600, 40, d_alice, 3.0, 25);
  TrainConfig cfg;
  cfg.key_bits = 512;
  cfg.epochs = 1;
  cfg.defense = DefenseConfig::hybrid_rr(std::log(3.0), 0.125, 128);
  const auto run = protocol::train(split, cfg);
  const auto rep = attack::attack_transcript(run.transcript, split.alice, &split.labels);
  bool wide = true;
  for (const auto& r : run.rounds) wide = wide && r.forwarded.size() > d_alice;
  std::size_t ones = 0;
  for (auto s : rep.samples) ones += split.labels[s];
  const double n = static_cast<double>(rep.samples.size());
  const double ones_rate = static_cast<double>(ones) / n;
  const double majority = std::max(ones_rate, 1.0 - ones_rate);
  const double half_width = 2.5758 * std::sqrt(majority * (1.0 - majority) / n);
  const double success = rep.success_rate.value_or(-1.0);
  std::ostringstream d;
  d << "labels=" << rep.samples.size() << " recoverable_rounds=" << rep.recoverable_rounds << " success=" << success
    << " majority=" << majority << " ci=[" << majority - half_width << ", " << majority + half_width << "]";
  const bool ok = rep.samples.size() >= 500 && wide && rep.recoverable_rounds == 0 &&
                  std::abs(success - majority) <= half_width;
  return {ok, d.str()};
}

Outcome breast_cancer_utility() {
  const auto opts = breast_cancer();
  TrainConfig cfg;
  const auto prepared = experiment::prepare(opts, experiment::kAllFeatures, 1);
  const DenseMatrix train_x = prepared.train.pooled();
  const DenseMatrix test_x = prepared.test.pooled();
  const auto central =
      protocol::centralized_train(train_x, prepared.train.labels, cfg, nullptr, &test_x, &prepared.test.labels);
  const auto& m = central.report.final_metrics;
  std::ostringstream d;
  d << "centralized acc=" << m.accuracy << " auc=" << m.auc << "; add-noise mean acc";
  std::vector<double> means;
  for (double eps : {0.01, 0.1, 1.0, 10.0}) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto p = experiment::prepare(opts, experiment::kAllFeatures, seed);
      TrainConfig c;
      c.seed = seed;
      c.defense = DefenseConfig::additive(eps);
      sum += protocol::train(p.train, c, &p.test).report.final_metrics.accuracy;
    }
    means.push_back(sum / 5.0);
    d << " eps=" << eps << ":" << means.back();
  }
  std::size_t inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] < means[i - 1]) {
      ++inversions;
      small = small && means[i - 1] - means[i] <= 0.01;
    }
  }
  const bool ok = m.accuracy >= 0.94 && m.auc >= 0.97 && inversions <= 1 && small;
  return {ok, d.str()};
}

Outcome search_cost() {
  bool ok = attack::hybrid_search_cost(3) == 24;
  std::size_t checked = 0;
  for (std::size_t l = 1; l <= 20; ++l) {
    // Every non-empty subset of the forwarded rows, weighted by its size squared.
    unsigned long long brute = 0;
    for (std::uint32_t mask = 1; mask < (1u << l); ++mask) {
      const unsigned long long k = static_cast<unsigned long long>(std::popcount(mask));
      brute += k * k;
    }
    ok = ok && attack::hybrid_search_cost(l) == BigInt(std::to_string(brute));
    ++checked;
  }
  std::ostringstream d;
  d << "L=1.." << checked << " matched brute force, cost(3)=" << attack::hybrid_search_cost(3).get_str();
  return {ok, d.str()};
}

Outcome forwarded_count() {
  HybridParams h = DefenseConfig::hybrid_rr(std::log(3.0), 0.125, 128).hybrid;
  const std::size_t ones = h.intended_batch();
  std::vector<std::size_t> subset(h.s_size);
  std::vector<std::uint8_t> intended(h.s_size, 0);
  for (std::size_t i = 0; i < h.s_size; ++i) subset[i] = i;
  for (std::size_t i = 0; i < ones; ++i) intended[i] = 1;
  RngStream rng(26);
  double total = 0.0;
  constexpr int kRounds = 1000;
  for (int i = 0; i < kRounds; ++i) total += protocol::draw_rr(subset, intended, h.rr(), rng).forwarded;
  const double mean = total / kRounds;
  const double expected = h.expected_forwarded();
  std::ostringstream d;
  d << "mean L=" << mean << " expected=" << expected;
  return {std::abs(mean - expected) <= 0.03 * expected, d.str()};
}

Outcome bench_overhead() {
  cli::BenchOptions o;
  o.dataset = breast_cancer();
  o.defenses = "none,hybrid,add,mult";
  o.seeds = 2;
  o.epochs = 3;
  o.key_bits = 1024;
  const auto result = cli::run_bench(o);
  const cli::BenchRow* baseline = nullptr;
  for (const auto& row : result.rows)
    if (row.defense == "baseline") baseline = &row;
  bool ok = baseline != nullptr && result.hybrid_baseline_ratio.has_value();
  std::ostringstream d;
  d << "hybrid/baseline=" << result.hybrid_baseline_ratio.value_or(-1.0);
  for (const auto& row : result.rows) {
    d << " " << row.defense << ":" << row.total_s.mean << "s";
    if (row.defense == "add" || row.defense == "mult") {
      ok = ok && row.crypto_s.mean == 0.0 && baseline && row.total_s.mean < 0.1 * baseline->total_s.mean;
    }
  }
  return {ok, d.str()};
}

}  // namespace
}  // namespace vflr

int main() {
  using vflr::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"baseline-attack-recovers-all-labels", vflr::baseline_attack},
      {"paillier-roundtrip-and-homomorphism", vflr::paillier_correctness},
      {"noise-calibration", vflr::calibration},
      {"hybrid-matches-centralized", vflr::hybrid_lossless},
      {"hybrid-resists-attack", vflr::hybrid_resistance},
      {"breast-cancer-utility", vflr::breast_cancer_utility},
      {"search-cost-formula", vflr::search_cost},
      {"forwarded-count-mean", vflr::forwarded_count},
      {"bench-overhead", vflr::bench_overhead},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o{false, ""};
    try {
      o = check();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
