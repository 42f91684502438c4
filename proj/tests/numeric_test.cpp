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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "vflr/numeric.hpp"
#include "vflr/rng.hpp"

namespace vflr {
namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

DenseVector random_vector(std::size_t n, RngStream& rng) {
  DenseVector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

TEST(SigmoidTest, FixedPoints) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
}

TEST(SigmoidTest, DeepNegativeTailMatchesExtendedPrecision) {
  const double s = sigmoid(-750.0);
  EXPECT_GT(s, 0.0);
  EXPECT_LE(s, 1e-300);
  EXPECT_FALSE(std::isnan(s));
  // exp(-750) underflows double but not long double; the clamp keeps the
  // result at the smallest positive double, within one ulp of the oracle.
  const long double oracle = std::exp(-750.0L) / (1.0L + std::exp(-750.0L));
  EXPECT_GT(oracle, 0.0L);
  EXPECT_LE(std::fabs(static_cast<long double>(s) - oracle),
            static_cast<long double>(std::numeric_limits<double>::denorm_min()));
}

TEST(SigmoidTest, ModerateInputsMatchExtendedPrecision) {
  for (double z = -40.0; z <= 40.0; z += 0.37) {
    const long double oracle = 1.0L / (1.0L + std::exp(-static_cast<long double>(z)));
    EXPECT_NEAR(sigmoid(z), static_cast<double>(oracle), 4e-16 * static_cast<double>(oracle) + 1e-300) << z;
  }
}

TEST(SigmoidTest, SymmetryAndRange) {
  RngStream rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double z = 60.0 * (rng.uniform01() - 0.5);
    EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-12);
    EXPECT_GT(sigmoid(z), 0.0);
    EXPECT_LT(sigmoid(z), 1.0);
  }
  EXPECT_LT(sigmoid(800.0), 1.0);
}

TEST(LogisticLossTest, Examples) {
  EXPECT_NEAR(logistic_loss({0.5}, {1.0}, {}, 0.0), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(logistic_loss({0.9, 0.1}, {1.0, 0.0}, {}, 0.0), 0.105361, 1e-6);
  EXPECT_NEAR(logistic_loss({1.0 - 1e-12, 1e-12}, {1.0, 0.0}, {}, 0.0), 0.0, 1e-11);
}

TEST(LogisticLossTest, Regularizers) {
  const DenseVector w{3.0, -4.0};
  const double base = logistic_loss({0.5}, {1.0}, w, 0.0);
  EXPECT_NEAR(logistic_loss({0.5}, {1.0}, w, 0.1) - base, 0.1 * 25.0, 1e-12);
  EXPECT_NEAR(logistic_loss({0.5}, {1.0}, w, 0.1, Regularizer::kL1) - base, 0.1 * 7.0, 1e-12);
}

TEST(LogisticLossTest, Errors) {
  EXPECT_THROW(logistic_loss({0.5, 0.5}, {1.0}, {}, 0.0), DimensionError);
  EXPECT_THROW(logistic_loss({1.0}, {1.0}, {}, 0.0), DomainError);
  EXPECT_THROW(logistic_loss({0.0}, {0.0}, {}, 0.0), DomainError);
  EXPECT_THROW(logistic_loss({0.5}, {1.0}, {}, -1.0), DomainError);
}

TEST(ResiduesTest, Examples) {
  EXPECT_NEAR(residues({1.0}, {0.73})[0], 0.27, 1e-15);
  EXPECT_DOUBLE_EQ(residues({0.0}, {0.5})[0], -0.5);
  const DenseVector r = residues({1.0, 0.0}, {0.9, 0.1});
  EXPECT_NEAR(r[0], 0.1, 1e-15);
  EXPECT_NEAR(r[1], -0.1, 1e-15);
  EXPECT_THROW(residues({1.0, 0.0}, {0.5}), DimensionError);
}

TEST(ResiduesTest, OpenIntervalAndNonZero) {
  RngStream rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double z = 80.0 * (rng.uniform01() - 0.5);
    const double y = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double r = residues({y}, {sigmoid(z)})[0];
    EXPECT_GT(std::fabs(r), 0.0);
    EXPECT_LT(std::fabs(r), 1.0);
  }
}

TEST(GradientTest, Examples) {
  const DenseVector g = gradient({{1.0, 2.0}, {3.0, 4.0}}, {1.0, -1.0}, 2);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
  const DenseVector zero = gradient({{1.0, 2.0}, {3.0, 4.0}}, {0.0, 0.0}, 2);
  EXPECT_EQ(zero, DenseVector({0.0, 0.0}));
  const DenseVector id = gradient(DenseMatrix::identity(2), {0.25, -0.75}, 1);
  EXPECT_DOUBLE_EQ(id[0], -0.25);
  EXPECT_DOUBLE_EQ(id[1], 0.75);
  EXPECT_THROW(gradient(DenseMatrix::identity(2), {1.0}, 1), DimensionError);
  EXPECT_THROW(gradient(DenseMatrix::identity(2), {1.0, 1.0}, 0), DomainError);
}

TEST(GradientTest, MatchesFiniteDifferenceOfLoss) {
  RngStream rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix x = random_matrix(8, 4, rng);
    const DenseVector w = random_vector(4, rng);
    DenseVector y(8);
    for (std::size_t i = 0; i < 8; ++i) y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const auto loss_at = [&](const DenseVector& wt) {
      return logistic_loss(sigmoid(matvec(x, wt)), y, wt, 0.0);
    };
    const DenseVector g = gradient(x, residues(y, sigmoid(matvec(x, w))), 8);
    for (std::size_t j = 0; j < 4; ++j) {
      constexpr double h = 1e-6;
      DenseVector up = w, down = w;
      up[j] += h;
      down[j] -= h;
      const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
      EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::fabs(fd))) << "trial " << trial << " j " << j;
    }
  }
}

TEST(SolveLinearTest, Identity) {
  const SolveReport rep = solve_linear(DenseMatrix::identity(2), {0.3, -0.2});
  ASSERT_EQ(rep.status, SolveStatus::kUnique);
  EXPECT_NEAR((*rep.solution)[0], 0.3, 1e-15);
  EXPECT_NEAR((*rep.solution)[1], -0.2, 1e-15);
}

TEST(SolveLinearTest, RecoversKnownSolution) {
  RngStream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseMatrix a = random_matrix(3, 2, rng);
    const DenseVector x0 = random_vector(2, rng);
    const SolveReport rep = solve_linear(a, matvec(a, x0));
    ASSERT_EQ(rep.status, SolveStatus::kUnique);
    EXPECT_EQ(rep.rank_a, 2u);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR((*rep.solution)[j], x0[j], 1e-9);
  }
}

TEST(SolveLinearTest, Underdetermined) {
  const SolveReport rep = solve_linear({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}}, {1.0, 2.0});
  EXPECT_EQ(rep.status, SolveStatus::kUnderdetermined);
  EXPECT_FALSE(rep.solution.has_value());
  const SolveReport rank_deficient = solve_linear({{1.0, 2.0}, {2.0, 4.0}, {3.0, 6.0}}, {1.0, 2.0, 3.0});
  EXPECT_EQ(rank_deficient.status, SolveStatus::kUnderdetermined);
  EXPECT_EQ(rank_deficient.rank_a, 1u);
}

TEST(SolveLinearTest, Inconsistent) {
  const SolveReport rep = solve_linear({{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}}, {1.0, 2.0, 3.0});
  EXPECT_EQ(rep.status, SolveStatus::kInconsistent);
  EXPECT_EQ(rep.rank_a, 2u);
  EXPECT_EQ(rep.rank_augmented, 3u);
}

TEST(SolveLinearTest, ReconstructionBound) {
  RngStream rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t cols = 1 + rng.uniform_below(30);
    const std::size_t rows = cols + rng.uniform_below(10);
    const DenseMatrix a = random_matrix(rows, cols, rng);
    const auto sigma = singular_values(a);
    if (sigma.front() / sigma.back() >= 1e6) continue;
    const DenseVector b = matvec(a, random_vector(cols, rng));
    const SolveReport rep = solve_linear(a, b);
    ASSERT_EQ(rep.status, SolveStatus::kUnique);
    DenseVector resid = matvec(a, *rep.solution);
    for (std::size_t i = 0; i < rows; ++i) resid[i] -= b[i];
    EXPECT_LE(norm2(resid), 1e-8 * norm2(b));
  }
}

TEST(SolveLinearTest, RankToleranceIsRelative) {
  const DenseMatrix a{{1.0, 0.0}, {0.0, 1e-12}};
  EXPECT_EQ(numerical_rank(a), 1u);
  const DenseMatrix b{{1.0, 0.0}, {0.0, 1e-9}};
  EXPECT_EQ(numerical_rank(b), 2u);
}

TEST(MetricsTest, Accuracy) {
  EXPECT_DOUBLE_EQ(accuracy({0.9, 0.1}, {1.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy({0.9, 0.1}, {0.0, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(accuracy({0.6, 0.6}, {1.0, 0.0}), 0.5);
  EXPECT_THROW(accuracy({0.6}, {1.0, 0.0}), DimensionError);
}

TEST(MetricsTest, Auc) {
  EXPECT_DOUBLE_EQ(auc({0.2, 0.8}, {0.0, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(auc({0.8, 0.2}, {0.0, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(auc({0.4, 0.4, 0.4, 0.4}, {0.0, 1.0, 1.0, 0.0}), 0.5);
  EXPECT_THROW(auc({0.1, 0.2}, {1.0, 1.0}), DomainError);
}

TEST(MetricsTest, AucMatchesPairCount) {
  RngStream rng(8);
  DenseVector s(60), y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    s[i] = std::round(rng.uniform01() * 10.0) / 10.0;
    y[i] = i % 3 == 0 ? 1.0 : 0.0;
  }
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 60; ++j)
      if (y[i] == 1.0 && y[j] == 0.0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  EXPECT_NEAR(auc(s, y), wins / pairs, 1e-12);
}

TEST(LaplaceTest, MedianMapsToZero) {
  EXPECT_DOUBLE_EQ(laplace_quantile(0.5, 2.0), 0.0);
  EXPECT_THROW(laplace_quantile(0.5, 0.0), DomainError);
  RngStream rng(1);
  EXPECT_THROW(sample_laplace(-1.0, rng), DomainError);
}

TEST(LaplaceTest, MomentsAndMedianAbsoluteDeviation) {
  constexpr int kDraws = 1'000'000;
  for (double scale : {0.5, 2.0}) {
    RngStream rng(99);
    double sum = 0.0, sum_sq = 0.0;
    int inside = 0;
    for (int i = 0; i < kDraws; ++i) {
      const double x = sample_laplace(scale, rng);
      sum += x;
      sum_sq += x * x;
      inside += std::fabs(x) <= scale * std::numbers::ln2;
    }
    const double mean = sum / kDraws;
    const double var = sum_sq / kDraws - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.005 * scale) << scale;
    EXPECT_NEAR(var, 2.0 * scale * scale, 0.02 * 2.0 * scale * scale) << scale;
    EXPECT_NEAR(static_cast<double>(inside) / kDraws, 0.5, 0.005) << scale;
  }
}

}  // namespace
}  // namespace vflr
