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

// Dense linear algebra and logistic-regression primitives shared by every
// other module. Everything here is a pure function of its arguments.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vflr/errors.hpp"

namespace vflr {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace detail

class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  explicit DenseVector(std::vector<double> data) : data_(std::move(data)) {
    detail::require_finite(data_, "DenseVector");
  }
  DenseVector(std::initializer_list<double> init) : DenseVector(std::vector<double>(init)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> span() const { return data_; }
  std::span<double> span() { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("DenseMatrix: data length != rows * cols");
    }
    detail::require_finite(data_, "DenseMatrix");
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("DenseMatrix: ragged rows");
      data_.insert(data_.end(), r.begin(), r.end());
    }
    detail::require_finite(data_, "DenseMatrix");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }
  const std::vector<double>& values() const { return data_; }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  DenseMatrix select_rows(std::span<const std::size_t> indices) const {
    DenseMatrix out(indices.size(), cols_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= rows_) throw DimensionError("select_rows: index out of range");
      std::copy_n(row(indices[k]).begin(), cols_, out.row(k).begin());
    }
    return out;
  }

  // Columns [first, first + count).
  DenseMatrix select_cols(std::size_t first, std::size_t count) const {
    if (first + count > cols_) throw DimensionError("select_cols: range out of bounds");
    DenseMatrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r)
      std::copy_n(row(r).begin() + static_cast<std::ptrdiff_t>(first), count,
                  out.row(r).begin());
    return out;
  }

  // [left | right], same row count.
  static DenseMatrix hconcat(const DenseMatrix& left, const DenseMatrix& right) {
    detail::require_same_length(left.rows(), right.rows(), "hconcat");
    DenseMatrix out(left.rows(), left.cols() + right.cols());
    for (std::size_t r = 0; r < left.rows(); ++r) {
      auto dst = out.row(r);
      std::copy(left.row(r).begin(), left.row(r).end(), dst.begin());
      std::copy(right.row(r).begin(), right.row(r).end(),
                dst.begin() + static_cast<std::ptrdiff_t>(left.cols()));
    }
    return out;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a.size(), b.size(), "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// X w
inline DenseVector matvec(const DenseMatrix& x, const DenseVector& w) {
  detail::require_same_length(x.cols(), w.size(), "matvec");
  DenseVector out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = dot(x.row(r), w.span());
  return out;
}

// X^T v
inline DenseVector transpose_matvec(const DenseMatrix& x, const DenseVector& v) {
  detail::require_same_length(x.rows(), v.size(), "transpose_matvec");
  DenseVector out(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double s = v[r];
    const auto row = x.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += s * row[c];
  }
  return out;
}

inline double norm2(const DenseVector& v) { return std::sqrt(dot(v.span(), v.span())); }

// Logistic function. Output is clamped into the open interval (0, 1) so that
// residues built from it are never exactly 0 or +-1.
inline double sigmoid(double z) {
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - 0x1.0p-53;
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kLow, kHigh);
}

inline DenseVector sigmoid(const DenseVector& z) {
  DenseVector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid(z[i]);
  return out;
}

enum class Regularizer { kL2, kL1 };

// Mean negative log-likelihood plus lambda * Omega(W). Omega is the squared
// L2 norm by default, or the L1 norm.
inline double logistic_loss(const DenseVector& preds, const DenseVector& labels,
                            const DenseVector& weights, double lambda,
                            Regularizer reg = Regularizer::kL2) {
  detail::require_same_length(preds.size(), labels.size(), "logistic_loss");
  if (lambda < 0.0) throw DomainError("logistic_loss: lambda must be >= 0");
  if (preds.empty()) throw DimensionError("logistic_loss: empty input");
  double nll = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = preds[i];
    const double y = labels[i];
    if (!(p > 0.0 && p < 1.0)) throw DomainError("logistic_loss: prediction outside (0,1)");
    if (y != 0.0 && y != 1.0) throw DomainError("logistic_loss: label not in {0,1}");
    nll -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
  }
  double penalty = 0.0;
  if (lambda > 0.0) {
    for (double w : weights) penalty += reg == Regularizer::kL2 ? w * w : std::fabs(w);
  }
  return nll / static_cast<double>(preds.size()) + lambda * penalty;
}

// r_i = y_i - f(x_i)
inline DenseVector residues(const DenseVector& labels, const DenseVector& preds) {
  detail::require_same_length(labels.size(), preds.size(), "residues");
  DenseVector r(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(preds[i] > 0.0 && preds[i] < 1.0)) throw DomainError("residues: prediction outside (0,1)");
    r[i] = labels[i] - preds[i];
    // y = 1 with a prediction below 2^-53 rounds to exactly 1.
    if (std::fabs(r[i]) >= 1.0) r[i] = std::nextafter(r[i], 0.0);
  }
  return r;
}

// -(1/denom) X^T r
inline DenseVector gradient(const DenseMatrix& x_batch, const DenseVector& r,
                            std::size_t denom) {
  detail::require_same_length(x_batch.rows(), r.size(), "gradient");
  if (denom == 0) throw DomainError("gradient: denominator must be >= 1");
  DenseVector g = transpose_matvec(x_batch, r);
  const double factor = -1.0 / static_cast<double>(denom);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] *= factor;
  return g;
}

// ---------------------------------------------------------------------------
// Thin SVD by one-sided Jacobi rotations (Hestenes). Accurate for the small,
// possibly rank-deficient systems the attack solves.

struct ThinSvd {
  DenseMatrix u;         // m x n, orthonormal columns for nonzero sigma
  std::vector<double> sigma;  // n, descending
  DenseMatrix v;         // n x n
};

// Requires rows >= cols.
inline ThinSvd jacobi_svd(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw DimensionError("jacobi_svd: requires rows >= cols");
  DenseMatrix work = a;
  DenseMatrix v = DenseMatrix::identity(n);
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = work(i, p), wq = work(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        if (gamma == 0.0 || std::fabs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = work(i, p), wq = work(i, q);
          work(i, p) = c * wp - s * wq;
          work(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += work(i, j) * work(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return sigma[l] > sigma[r]; });

  ThinSvd out{DenseMatrix(m, n), std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = sigma[j];
    for (std::size_t i = 0; i < m; ++i)
      out.u(i, k) = sigma[j] > 0.0 ? work(i, j) / sigma[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
  }
  return out;
}

inline std::vector<double> singular_values(const DenseMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return {};
  return a.rows() >= a.cols() ? jacobi_svd(a).sigma : jacobi_svd(a.transpose()).sigma;
}

// Singular values at or below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-10;

inline std::size_t numerical_rank(const DenseMatrix& a, double rel_tol = kRankTolerance) {
  const auto sigma = singular_values(a);
  if (sigma.empty() || sigma.front() == 0.0) return 0;
  const double cutoff = rel_tol * sigma.front();
  return static_cast<std::size_t>(
      std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cutoff; }));
}

inline DenseMatrix augment(const DenseMatrix& a, const DenseVector& b) {
  detail::require_same_length(a.rows(), b.size(), "augment");
  DenseMatrix out(a.rows(), a.cols() + 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), out.row(r).begin());
    out(r, a.cols()) = b[r];
  }
  return out;
}

enum class SolveStatus { kUnique, kUnderdetermined, kInconsistent };

struct SolveReport {
  SolveStatus status;
  std::size_t rank_a;
  std::size_t rank_augmented;
  std::optional<DenseVector> solution;  // present iff status == kUnique
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kUnique: return "unique";
    case SolveStatus::kUnderdetermined: return "underdetermined";
    case SolveStatus::kInconsistent: return "inconsistent";
  }
  return "?";
}

// Classifies A x = b by comparing rank(A), rank([A|b]) and the number of
// unknowns, and returns the least-squares solution when it is unique.
inline SolveReport solve_linear(const DenseMatrix& a, const DenseVector& b,
                                double rel_tol = kRankTolerance) {
  detail::require_same_length(a.rows(), b.size(), "solve_linear");
  SolveReport report{SolveStatus::kUnderdetermined, numerical_rank(a, rel_tol),
                     numerical_rank(augment(a, b), rel_tol), std::nullopt};
  if (report.rank_a != report.rank_augmented) {
    report.status = SolveStatus::kInconsistent;
    return report;
  }
  if (report.rank_a < a.cols()) return report;

  // rank == cols implies rows >= cols.
  const ThinSvd svd = jacobi_svd(a);
  DenseVector utb = transpose_matvec(svd.u, b);
  for (std::size_t k = 0; k < utb.size(); ++k) utb[k] /= svd.sigma[k];
  report.solution = matvec(svd.v, utb);
  report.status = SolveStatus::kUnique;
  return report;
}

// ---------------------------------------------------------------------------
// Metrics

inline double accuracy(const DenseVector& preds, const DenseVector& labels,
                       double threshold = 0.5) {
  detail::require_same_length(preds.size(), labels.size(), "accuracy");
  if (preds.empty()) throw DimensionError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double predicted = preds[i] >= threshold ? 1.0 : 0.0;
    hits += predicted == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// Mann-Whitney AUC with average ranks; tied pairs count 1/2.
inline double auc(const DenseVector& scores, const DenseVector& labels) {
  detail::require_same_length(scores.size(), labels.size(), "auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return scores[l] < scores[r]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1.0) {
      pos += 1.0;
      rank_sum += rank[i];
    } else if (labels[i] == 0.0) {
      neg += 1.0;
    } else {
      throw DomainError("auc: label not in {0,1}");
    }
  }
  if (pos == 0.0 || neg == 0.0) throw DomainError("auc: labels must contain both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

struct Metrics {
  double accuracy = 0.0;
  double auc = 0.0;
  double loss = 0.0;
};

}  // namespace vflr
