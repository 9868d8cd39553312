#pragma once

// Linear basic thresholding classifier: one-shot selection of the M atoms most
// correlated with the test vector, a Tikhonov-regularized least-squares code
// over them, and the class with the smallest class-wise reconstruction error.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "btc/data.hpp"
#include "btc/error.hpp"
#include "btc/linalg.hpp"
#include "btc/parallel.hpp"

namespace btc {

/// Coefficients on a selected support; zero everywhere else.
struct SparseCode {
  IndexSet support;
  Vector coefficients;
  Index ambient_size = 0;

  Vector dense() const {
    Vector x = Vector::Zero(ambient_size);
    for (Index k = 0; k < support.size(); ++k) x[support[k]] = coefficients[k];
    return x;
  }
};

/// Per-class reconstruction errors; entry j-1 belongs to class j.
struct ResidualVector {
  Vector values;

  int class_count() const { return static_cast<int>(values.size()); }
  double operator()(int class_id) const { return values[class_id - 1]; }

  /// argmin, ties resolved to the lowest class id.
  int predicted_class() const {
    Index best = 0;
    for (Index j = 1; j < values.size(); ++j)
      if (values[j] < values[best]) best = j;
    return static_cast<int>(best) + 1;
  }
};

struct BtcParams {
  Index M = 1;
  double alpha = 0.01;

  /// 1 <= M < B, M <= N, 0 <= alpha < 1.
  void validate(Index features, Index samples) const {
    if (M < 1 || M >= features)
      throw InvalidArgument("threshold M=" + std::to_string(M) + " must satisfy 1 <= M < B=" + std::to_string(features));
    if (M > samples)
      throw InvalidArgument("threshold M=" + std::to_string(M) + " exceeds dictionary size N=" + std::to_string(samples));
    if (!(alpha >= 0.0 && alpha < 1.0))
      throw InvalidArgument("regularization alpha=" + std::to_string(alpha) + " must lie in [0,1)");
  }
};

struct ClassifyResult {
  ResidualVector residuals;
  SparseCode code;

  int predicted_class() const { return residuals.predicted_class(); }
};

namespace detail {

inline Vector unit_test_vector(const Vector& y) {
  const double norm = y.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidArgument("test vector has zero or non-finite norm");
  return y / norm;
}

inline void require_l2(const Dictionary& dict) {
  if (dict.norm_mode() != NormMode::L2Columns)
    throw InvalidArgument("linear BTC requires an L2-normalized dictionary");
}

/// Gram rows of the selected atoms, appended to a factorization in order.
inline RegularizedCholesky factor_support(const Matrix& atoms, const IndexSet& support, double alpha) {
  RegularizedCholesky chol(alpha, support.size());
  Vector row(support.size());
  for (Index k = 0; k < support.size(); ++k) {
    for (Index j = 0; j <= k; ++j) row[j] = atoms.col(support[k]).dot(atoms.col(support[j]));
    chol.append(row.head(k + 1));
  }
  return chol;
}

/// ||y - A_j x_j||_2 for every class, using the first `k` support entries.
inline ResidualVector linear_residuals(const Dictionary& dict, const Vector& y, const IndexSet& support,
                                       const Vector& coefficients, Index k) {
  Matrix partial = y.replicate(1, dict.class_count());
  for (Index s = 0; s < k; ++s) {
    const Index atom = support[s];
    partial.col(dict.class_of(atom) - 1) -= coefficients[s] * dict.column(atom);
  }
  return {partial.colwise().norm().transpose()};
}

/// eps(i) / min_{j != i} eps(j).
inline double identification_ratio(const ResidualVector& eps, int own_class) {
  double rival = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= eps.class_count(); ++j)
    if (j != own_class) rival = std::min(rival, eps(j));
  const double own = eps(own_class);
  if (rival <= 0.0) return own <= 0.0 ? 1.0 : own / std::numeric_limits<double>::min();
  return own / rival;
}

}  // namespace detail

/// Regularized least-squares code of y over the atoms in `support`.
inline SparseCode regularized_code(const Matrix& atoms, const Vector& y, IndexSet support, double alpha) {
  const auto chol = detail::factor_support(atoms, support, alpha);
  Vector rhs(support.size());
  for (Index k = 0; k < support.size(); ++k) rhs[k] = atoms.col(support[k]).dot(y);
  SparseCode code{std::move(support), chol.solve(rhs), atoms.cols()};
  return code;
}

/// One-shot sparse recovery: correlate, keep the M strongest atoms, solve the
/// regularized normal equations. y is used as given (no normalization).
inline SparseCode threshold_code(const Matrix& atoms, const Vector& y, Index m, double alpha,
                                 SelectionMode mode = SelectionMode::Magnitude) {
  detail::require(atoms.rows() == y.size(), "threshold_code: dimension mismatch");
  const Vector correlations = atoms.transpose() * y;
  return regularized_code(atoms, y, top_m_select(correlations, m, mode), alpha);
}

/// Classifies y against the support given by the caller (y is L2-normalized).
inline ClassifyResult btc_classify_with_support(const Dictionary& dict, const Vector& y, IndexSet support,
                                                double alpha) {
  detail::require_l2(dict);
  detail::require(y.size() == dict.feature_count(), "test vector length differs from dictionary feature count");
  const Vector unit = detail::unit_test_vector(y);
  SparseCode code = regularized_code(dict.columns(), unit, std::move(support), alpha);
  ResidualVector eps = detail::linear_residuals(dict, unit, code.support, code.coefficients, code.support.size());
  return {std::move(eps), std::move(code)};
}

inline ClassifyResult btc_classify(const Dictionary& dict, const Vector& y, const BtcParams& params) {
  detail::require_l2(dict);
  params.validate(dict.feature_count(), dict.sample_count());
  detail::require(y.size() == dict.feature_count(), "test vector length differs from dictionary feature count");
  const Vector unit = detail::unit_test_vector(y);
  const Vector correlations = dict.columns().transpose() * unit;
  return btc_classify_with_support(dict, unit, top_m_select(correlations, params.M, SelectionMode::Magnitude),
                                   params.alpha);
}

/// Identification ratio of one training column, with the column itself left
/// out of the selection. Values below 1 mean the column is identified.
inline double btc_beta_sample(const Dictionary& dict, int class_id, Index sample_idx, const BtcParams& params) {
  detail::require_l2(dict);
  detail::require(dict.class_count() >= 2, "identification ratio needs a competing class");
  detail::require(class_id >= 1 && class_id <= dict.class_count(), "class id out of range");
  const ClassRange& range = dict.class_range(class_id);
  detail::require(sample_idx >= 0 && sample_idx < range.count, "sample index outside class partition");
  detail::require(params.M >= 2, "identification ratio needs M >= 2");
  params.validate(dict.feature_count(), dict.sample_count());
  const Index column = range.start + sample_idx;
  const Vector a = dict.column(column);
  const Vector correlations = dict.columns().transpose() * a;
  const IndexSet support = top_m_select_excluding(correlations, params.M, column, SelectionMode::Magnitude);
  const SparseCode code = regularized_code(dict.columns(), a, support, params.alpha);
  const ResidualVector eps = detail::linear_residuals(dict, a, code.support, code.coefficients, code.support.size());
  return detail::identification_ratio(eps, class_id);
}

/// (M, mean identification ratio) pairs.
struct ThresholdProfile {
  std::vector<Index> thresholds;
  std::vector<double> mean_ratio;

  /// Smallest M attaining the minimum.
  Index argmin() const {
    detail::require(!thresholds.empty(), "empty profile");
    std::size_t best = 0;
    for (std::size_t i = 1; i < mean_ratio.size(); ++i)
      if (mean_ratio[i] < mean_ratio[best]) best = i;
    return thresholds[best];
  }
};

/// Mean identification ratio for every M in [m_lo, m_hi]. Each column is
/// factored once at size m_hi - 1; smaller M reuse the leading block.
inline ThresholdProfile btc_beta_profile(const Dictionary& dict, double alpha, Index m_lo, Index m_hi,
                                         std::size_t threads = 0) {
  detail::require_l2(dict);
  detail::require(dict.class_count() >= 2, "identification ratio needs a competing class");
  detail::require(m_lo <= m_hi, "empty threshold range");
  detail::require(m_lo >= 2, "threshold range must start at M >= 2");
  BtcParams{m_hi, alpha}.validate(dict.feature_count(), dict.sample_count());

  const Index n = dict.sample_count();
  const Index span = m_hi - m_lo + 1;
  Matrix ratios(span, n);
  const Matrix& atoms = dict.columns();
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
    const auto column = static_cast<Index>(idx);
    const Vector a = atoms.col(column);
    const Vector correlations = atoms.transpose() * a;
    const IndexSet support = top_m_select_excluding(correlations, m_hi, column, SelectionMode::Magnitude);
    const auto chol = detail::factor_support(atoms, support, alpha);
    Vector rhs(support.size());
    for (Index k = 0; k < support.size(); ++k) rhs[k] = correlations[support[k]];
    for (Index m = m_lo; m <= m_hi; ++m) {
      const Vector x = chol.solve_prefix(rhs, m - 1);
      const ResidualVector eps = detail::linear_residuals(dict, a, support, x, m - 1);
      ratios(m - m_lo, column) = detail::identification_ratio(eps, dict.class_of(column));
    }
  });
  ThresholdProfile profile;
  for (Index m = m_lo; m <= m_hi; ++m) {
    profile.thresholds.push_back(m);
    profile.mean_ratio.push_back(ratios.row(m - m_lo).sum() / static_cast<double>(n));
  }
  return profile;
}

/// Mean identification ratio over all N columns at a fixed M.
inline double btc_beta_average(const Dictionary& dict, Index m, double alpha, std::size_t threads = 0) {
  return btc_beta_profile(dict, alpha, m, m, threads).mean_ratio.front();
}

struct ThresholdEstimate {
  Index m_hat;
  ThresholdProfile profile;
};

/// Exhaustive scan of the mean identification ratio over [m_lo, m_hi].
inline ThresholdEstimate btc_estimate_threshold(const Dictionary& dict, double alpha, Index m_lo, Index m_hi,
                                                std::size_t threads = 0) {
  if (m_lo > m_hi) throw InvalidArgument("btc_estimate_threshold: empty threshold range");
  ThresholdProfile profile = btc_beta_profile(dict, alpha, m_lo, m_hi, threads);
  const Index best = profile.argmin();
  return {best, std::move(profile)};
}

/// Default scan range 2..min(B-1, N).
inline ThresholdEstimate btc_estimate_threshold(const Dictionary& dict, double alpha, std::size_t threads = 0) {
  return btc_estimate_threshold(dict, alpha, 2, std::min(dict.feature_count() - 1, dict.sample_count()), threads);
}

/// Correlation baseline: keep the M strongest correlations (by magnitude,
/// signed values retained) and pick the class with the largest sum.
inline int corr_classify(const Dictionary& dict, const Vector& y, Index m) {
  detail::require_l2(dict);
  detail::require(m >= 1 && m <= dict.sample_count(), "corr_classify: M out of range");
  detail::require(y.size() == dict.feature_count(), "test vector length differs from dictionary feature count");
  const Vector correlations = dict.columns().transpose() * detail::unit_test_vector(y);
  const IndexSet kept = top_m_select(correlations, m, SelectionMode::Magnitude);
  Vector sums = Vector::Zero(dict.class_count());
  for (Index atom : kept) sums[dict.class_of(atom) - 1] += correlations[atom];
  Index best = 0;
  for (Index j = 1; j < sums.size(); ++j)
    if (sums[j] > sums[best]) best = j;
  return static_cast<int>(best) + 1;
}

}  // namespace btc
