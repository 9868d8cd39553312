#pragma once

// Very sparse random projections, mean-residual fusion of projected linear
// classifiers, residual-margin rejection and ROC sweeps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btc/classifier.hpp"
#include "btc/data.hpp"
#include "btc/error.hpp"

namespace btc {

/// B x m matrix with i.i.d. entries +sqrt(S), 0, -sqrt(S) drawn with
/// probabilities 1/(2S), 1 - 1/S, 1/(2S), scaled by 1/sqrt(m).
struct SparseProjection {
  Index rows = 0;
  Index cols = 0;
  int sparsity = 1;
  std::uint64_t seed = 0;
  Matrix entries;

  Vector apply(const Vector& x) const {
    detail::require(x.size() == cols, "projection input has " + std::to_string(x.size()) + " entries, expected " +
                                          std::to_string(cols));
    return entries * x;
  }
};

inline SparseProjection make_sparse_projection(Index rows, Index cols, int sparsity, std::uint64_t seed) {
  if (rows < 1 || rows >= cols)
    throw InvalidArgument("projection needs 1 <= B < m, got B=" + std::to_string(rows) + ", m=" + std::to_string(cols));
  if (sparsity < 1) throw InvalidArgument("projection sparsity S must be >= 1");
  SparseProjection p{rows, cols, sparsity, seed, Matrix::Zero(rows, cols)};
  std::mt19937_64 rng(seed);
  const double magnitude = std::sqrt(static_cast<double>(sparsity)) / std::sqrt(static_cast<double>(cols));
  const auto buckets = static_cast<unsigned __int128>(2 * sparsity);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      // multiply-shift keeps the draw platform independent
      const auto bucket = static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * buckets) >> 64);
      if (bucket == 0) p.entries(r, c) = magnitude;
      else if (bucket == 1) p.entries(r, c) = -magnitude;
    }
  return p;
}

struct EnsembleResult {
  int predicted_class;
  ResidualVector mean_residuals;
};

/// n linear classifiers, each over its own projection of the raw training
/// samples, fused by the mean of their residual vectors.
class BtcEnsemble {
 public:
  /// `samples` holds one raw m-dimensional sample per row.
  BtcEnsemble(const Matrix& samples, std::span<const int> labels, std::vector<SparseProjection> projections,
              const BtcParams& params)
      : projections_(std::move(projections)), params_(params) {
    detail::require(!projections_.empty(), "ensemble needs at least one classifier");
    detail::require(samples.rows() == static_cast<Index>(labels.size()), "ensemble: label/sample count mismatch");
    layout_ = ClassLayout::group(labels);
    Matrix grouped(samples.cols(), samples.rows());
    for (Index col = 0; col < layout_.size(); ++col)
      grouped.col(col) = samples.row(layout_.source_indices[static_cast<std::size_t>(col)]).transpose();
    dictionaries_.reserve(projections_.size());
    for (const auto& p : projections_) {
      detail::require(p.cols == samples.cols(), "projection width differs from sample dimension");
      dictionaries_.push_back(Dictionary::from_grouped(layout_, p.entries * grouped, NormMode::L2Columns));
      params_.validate(p.rows, samples.rows());
    }
  }

  /// Projections use seeds seed + 1 .. seed + n.
  static BtcEnsemble with_seeds(const Matrix& samples, std::span<const int> labels, int count, Index target_dim,
                                int sparsity, std::uint64_t seed, const BtcParams& params) {
    detail::require(count >= 1, "ensemble size n must be >= 1");
    std::vector<SparseProjection> projections;
    for (int i = 1; i <= count; ++i)
      projections.push_back(make_sparse_projection(target_dim, samples.cols(), sparsity, seed + static_cast<std::uint64_t>(i)));
    return BtcEnsemble(samples, labels, std::move(projections), params);
  }

  EnsembleResult classify(const Vector& y) const {
    const auto n = static_cast<Index>(dictionaries_.size());
    Matrix per_classifier(layout_.class_count(), n);
    for (Index i = 0; i < n; ++i) {
      const auto& p = projections_[static_cast<std::size_t>(i)];
      per_classifier.col(i) = btc_classify(dictionaries_[static_cast<std::size_t>(i)], p.apply(y), params_).residuals.values;
    }
    // sorted summation makes the mean independent of classifier order
    Vector mean(per_classifier.rows());
    for (Index j = 0; j < per_classifier.rows(); ++j) {
      std::vector<double> row(per_classifier.row(j).begin(), per_classifier.row(j).end());
      std::sort(row.begin(), row.end());
      double sum = 0.0;
      for (double v : row) sum += v;
      mean[j] = sum / static_cast<double>(n);
    }
    ResidualVector fused{mean};
    return {fused.predicted_class(), std::move(fused)};
  }

  const ClassLayout& layout() const { return layout_; }
  std::size_t size() const { return dictionaries_.size(); }
  const Dictionary& dictionary(std::size_t i) const { return dictionaries_.at(i); }
  const SparseProjection& projection(std::size_t i) const { return projections_.at(i); }

 private:
  std::vector<SparseProjection> projections_;
  BtcParams params_;
  ClassLayout layout_;
  std::vector<Dictionary> dictionaries_;
};

inline EnsembleResult ensemble_classify(const Matrix& samples, std::span<const int> labels, const Vector& y,
                                        int count, const BtcParams& params, Index target_dim, int sparsity,
                                        std::uint64_t seed) {
  return BtcEnsemble::with_seeds(samples, labels, count, target_dim, sparsity, seed, params).classify(y);
}

// ---------------------------------------------------------------------------
// Rejection

/// 1 - (smallest residual / second smallest residual). Equal residuals give
/// 0; a zero runner-up gives 0; a perfect winner is reported just below 1.
inline double rejection_margin(const ResidualVector& eps) {
  detail::require(eps.class_count() >= 2, "rejection margin needs at least two classes");
  double first = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < eps.values.size(); ++j) {
    const double v = eps.values[j];
    if (v < first) {
      second = first;
      first = v;
    } else if (v < second) {
      second = v;
    }
  }
  if (!(second > 0.0)) return 0.0;
  const double margin = 1.0 - first / second;
  return std::min(margin, 1.0 - 1e-15);
}

struct RejectionDecision {
  double margin;
  bool accepted;
  double tau;
};

inline RejectionDecision decide_rejection(const ResidualVector& eps, double tau) {
  const double margin = rejection_margin(eps);
  return {margin, margin >= tau, tau};
}

struct RocPoint {
  double tau;
  double tpr;
  double fpr;
};

/// k / (count - 1) for k = 0..count-1.
inline std::vector<double> default_tau_grid(std::size_t count = 1001) {
  detail::require(count >= 2, "tau grid needs at least two points");
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = static_cast<double>(k) / static_cast<double>(count - 1);
  return grid;
}

/// Positive = accepted as valid: TPR is the fraction of valid margins >= tau,
/// FPR the fraction of invalid margins >= tau.
inline std::vector<RocPoint> roc_sweep(std::span<const double> valid, std::span<const double> invalid,
                                       const std::vector<double>& tau_grid = default_tau_grid()) {
  if (valid.empty() || invalid.empty()) throw InvalidArgument("roc_sweep needs non-empty valid and invalid margin sets");
  auto fraction_at_least = [](std::span<const double> margins, double tau) {
    std::size_t hits = 0;
    for (double m : margins) hits += m >= tau ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(margins.size());
  };
  std::vector<RocPoint> curve;
  curve.reserve(tau_grid.size());
  for (double tau : tau_grid) curve.push_back({tau, fraction_at_least(valid, tau), fraction_at_least(invalid, tau)});
  return curve;
}

/// Trapezoidal area under (FPR, TPR), closed with the (0,0) and (1,1) corners.
inline double roc_auc(std::vector<RocPoint> curve) {
  curve.push_back({0.0, 1.0, 1.0});
  curve.push_back({1.0, 0.0, 0.0});
  std::sort(curve.begin(), curve.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
  return area;
}

}  // namespace btc
