#pragma once

// Dense kernels shared by the classifiers: regularized SPD solves, top-M
// index selection, the first principal component of a cube, and the mutual
// coherence diagnostic.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "btc/data.hpp"
#include "btc/error.hpp"

namespace btc {

/// Selected column indices in selection order (descending score, ties by
/// ascending index).
struct IndexSet {
  std::vector<Index> indices;

  Index size() const { return static_cast<Index>(indices.size()); }
  bool empty() const { return indices.empty(); }
  Index operator[](Index i) const { return indices[static_cast<std::size_t>(i)]; }
  auto begin() const { return indices.begin(); }
  auto end() const { return indices.end(); }
  bool operator==(const IndexSet&) const = default;
};

enum class SelectionMode { Magnitude, Raw };

namespace detail {

inline IndexSet select_top(const Vector& v, Index count, SelectionMode mode, Index excluded) {
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i)
    if (i != excluded) order.push_back(i);
  auto score = [&](Index i) { return mode == SelectionMode::Magnitude ? std::abs(v[i]) : v[i]; };
  auto better = [&](Index a, Index b) {
    const double sa = score(a), sb = score(b);
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + count, order.end(), better);
  order.resize(static_cast<std::size_t>(count));
  return {std::move(order)};
}

}  // namespace detail

/// Indices of the M largest entries of v (by |v_i| or v_i).
inline IndexSet top_m_select(const Vector& v, Index m, SelectionMode mode = SelectionMode::Magnitude) {
  if (m < 1 || m > v.size())
    throw InvalidArgument("top_m_select: M=" + std::to_string(m) + " outside 1.." + std::to_string(v.size()));
  return detail::select_top(v, m, mode, -1);
}

/// The M-1 best indices other than `excluded` (leave-one-out selection).
inline IndexSet top_m_select_excluding(const Vector& v, Index m, Index excluded,
                                       SelectionMode mode = SelectionMode::Magnitude) {
  if (m < 2 || m > v.size())
    throw InvalidArgument("top_m_select_excluding: M=" + std::to_string(m) + " outside 2.." + std::to_string(v.size()));
  if (excluded < 0 || excluded >= v.size())
    throw InvalidArgument("top_m_select_excluding: excluded index " + std::to_string(excluded) + " out of range");
  return detail::select_top(v, m - 1, mode, excluded);
}

/// Row-by-row Cholesky factor of G + alpha*I that can be grown one row at a
/// time. The leading k x k block of the factor is the factor of the leading
/// k x k block of G + alpha*I, so solves against any prefix are exact.
class RegularizedCholesky {
 public:
  explicit RegularizedCholesky(double alpha, Index capacity = 0) : alpha_(alpha), lower_(capacity, capacity) {
    detail::require(alpha >= 0.0 && std::isfinite(alpha), "regularization must be finite and >= 0");
  }

  Index size() const { return size_; }
  double alpha() const { return alpha_; }

  /// Appends row k = size() of G: entries G(k, 0..k), diagonal last.
  void append(const Eigen::Ref<const Vector>& row) {
    const Index k = size_;
    detail::require(row.size() == k + 1, "cholesky append: expected " + std::to_string(k + 1) + " entries");
    if (k >= lower_.rows()) {
      const Index cap = std::max<Index>(4, 2 * lower_.rows());
      Matrix grown = Matrix::Zero(cap, cap);
      grown.topLeftCorner(k, k) = lower_.topLeftCorner(k, k);
      lower_.swap(grown);
    }
    for (Index j = 0; j < k; ++j) {
      double s = row[j];
      for (Index p = 0; p < j; ++p) s -= lower_(k, p) * lower_(j, p);
      lower_(k, j) = s / lower_(j, j);
    }
    double d = row[k] + alpha_;
    for (Index p = 0; p < k; ++p) d -= lower_(k, p) * lower_(k, p);
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("cholesky: matrix not positive definite at pivot " + std::to_string(k) +
                           " (pivot value " + std::to_string(d) + ")");
    lower_(k, k) = std::sqrt(d);
    ++size_;
  }

  /// Solves the leading `k` x `k` system against b(0..k).
  Vector solve_prefix(const Eigen::Ref<const Vector>& b, Index k) const {
    detail::require(k >= 0 && k <= size_ && b.size() >= k, "cholesky solve: prefix out of range");
    Vector x(k);
    for (Index i = 0; i < k; ++i) {
      double s = b[i];
      for (Index p = 0; p < i; ++p) s -= lower_(i, p) * x[p];
      x[i] = s / lower_(i, i);
    }
    for (Index i = k - 1; i >= 0; --i) {
      double s = x[i];
      for (Index p = i + 1; p < k; ++p) s -= lower_(p, i) * x[p];
      x[i] = s / lower_(i, i);
    }
    return x;
  }

  Vector solve(const Eigen::Ref<const Vector>& b) const { return solve_prefix(b, size_); }

 private:
  double alpha_;
  Matrix lower_;
  Index size_ = 0;
};

/// Solves (G + alpha*I) x = b by symmetric factorization.
inline Vector solve_spd_regularized(const Matrix& gram, const Vector& b, double alpha) {
  detail::require(gram.rows() == gram.cols(), "solve_spd_regularized: matrix is not square");
  detail::require(gram.rows() == b.size(), "solve_spd_regularized: dimension mismatch");
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  detail::require((gram - gram.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                  "solve_spd_regularized: matrix is not symmetric");
  RegularizedCholesky chol(alpha, gram.rows());
  for (Index k = 0; k < gram.rows(); ++k) chol.append(gram.row(k).head(k + 1).transpose());
  return chol.solve(b);
}

/// Projects every pixel's mean-centered spectrum onto the dominant eigenvector
/// of the band covariance, oriented to correlate non-negatively with the
/// band-mean image and min-max normalized to [0,1].
inline Image pca_first_component(const HsiCube& cube, double tolerance = 1e-8, int max_iterations = 1000) {
  detail::require(cube.bands >= 1 && cube.pixel_count() >= 1, "pca_first_component: empty cube");
  const Index px = cube.pixel_count();
  const Index bands = cube.bands;
  Eigen::Map<const Matrix> bsq(cube.values.data(), px, bands);  // column b = band b
  const Vector mean = bsq.colwise().mean().transpose();
  const Matrix centered = bsq.rowwise() - mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(px);

  Image out = Image::Zero(cube.height, cube.width);
  if (cov.diagonal().maxCoeff() <= 0.0) return out;

  // band variances as the start vector keep the iteration permutation-equivariant
  Vector v = cov.diagonal();
  v /= v.norm();
  double lambda = v.dot(cov * v);
  bool converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    Vector w = cov * v;
    const double norm = w.norm();
    if (norm == 0.0) break;
    v = w / norm;
    const double next = v.dot(cov * v);
    const bool done = std::abs(next - lambda) <= tolerance * std::abs(next);
    lambda = next;
    if (done) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    const double residual = (cov * v - lambda * v).norm();
    throw NumericalError("pca_first_component: power iteration did not converge in " +
                         std::to_string(max_iterations) + " iterations (Rayleigh residual " +
                         std::to_string(residual) + ")");
  }

  Vector score = centered * v;
  const Vector band_mean = bsq.rowwise().mean();
  const double corr = score.dot(band_mean.array().matrix() - Vector::Constant(px, band_mean.mean()));
  if (corr < 0.0) score = -score;
  const double lo = score.minCoeff(), hi = score.maxCoeff();
  if (hi > lo) score = (score.array() - lo) / (hi - lo);
  else score.setZero();
  for (Index r = 0; r < cube.height; ++r)
    for (Index c = 0; c < cube.width; ++c) out(r, c) = score[r * cube.width + c];
  return out;
}

/// max_{i != j} |<A(i), A(j)>| over unit-norm columns.
inline double mutual_coherence(const Dictionary& dict) {
  detail::require(dict.norm_mode() == NormMode::L2Columns, "mutual_coherence requires L2-normalized columns");
  const Matrix gram = dict.columns().transpose() * dict.columns();
  double mu = 0.0;
  for (Index j = 0; j < gram.cols(); ++j)
    for (Index i = 0; i < j; ++i) mu = std::max(mu, std::abs(gram(i, j)));
  return std::min(mu, 1.0);
}

}  // namespace btc
