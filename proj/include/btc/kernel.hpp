#pragma once

// Kernel basic thresholding classifier. Selection, coding and residuals are
// all expressed through kernel evaluations, so the classifier works in the
// feature space induced by the kernel without ever forming it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "btc/classifier.hpp"
#include "btc/data.hpp"
#include "btc/error.hpp"
#include "btc/linalg.hpp"
#include "btc/parallel.hpp"

namespace btc {

enum class KernelKind { Rbf, Linear };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 1.0;  // Rbf only

  static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, gamma}; }
  static KernelSpec linear() { return {KernelKind::Linear, 0.0}; }

  void validate() const {
    if (kind == KernelKind::Rbf && !(gamma > 0.0 && std::isfinite(gamma)))
      throw InvalidArgument("RBF gamma must be finite and positive, got " + std::to_string(gamma));
  }

  template <typename A, typename B>
  double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    if (kind == KernelKind::Linear) return x.dot(y);
    return std::exp(-gamma * (x - y).squaredNorm());
  }

  /// Rbf values are positive, so raw ranking is used; linear correlations are
  /// ranked by magnitude as in the linear classifier.
  SelectionMode selection() const { return kind == KernelKind::Rbf ? SelectionMode::Raw : SelectionMode::Magnitude; }

  bool operator==(const KernelSpec&) const = default;
};

inline std::string to_string(const KernelSpec& spec) {
  return spec.kind == KernelKind::Linear ? "linear" : "rbf(gamma=" + std::to_string(spec.gamma) + ")";
}

/// K(A(i), y) for every dictionary column.
inline Vector kernel_vector(const Dictionary& dict, const Vector& y, const KernelSpec& spec) {
  spec.validate();
  detail::require(y.size() == dict.feature_count(), "test vector length differs from dictionary feature count");
  Vector v(dict.sample_count());
  for (Index i = 0; i < dict.sample_count(); ++i) v[i] = spec(dict.column(i), y);
  if (!v.allFinite()) throw NumericalError("kernel vector contains non-finite values");
  return v;
}

/// Full N x N Gram matrix K(A, A), computed once per kernel.
class KernelCache {
 public:
  static KernelCache build(const Dictionary& dict, const KernelSpec& spec, std::size_t threads = 0) {
    spec.validate();
    const Index n = dict.sample_count();
    Matrix gram(n, n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
      const auto i = static_cast<Index>(idx);
      for (Index j = 0; j <= i; ++j) gram(i, j) = spec(dict.column(j), dict.column(i));
    });
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < i; ++j) gram(j, i) = gram(i, j);
    if (!gram.allFinite()) throw NumericalError("kernel cache contains non-finite values");
    return KernelCache(std::move(gram), spec);
  }

  const Matrix& gram() const { return gram_; }
  const KernelSpec& spec() const { return spec_; }
  Index size() const { return gram_.rows(); }
  double operator()(Index i, Index j) const { return gram_(i, j); }

  /// K(D, D) for the selected atoms.
  Matrix extract(const IndexSet& support) const {
    Matrix sub(support.size(), support.size());
    for (Index a = 0; a < support.size(); ++a)
      for (Index b = 0; b < support.size(); ++b) sub(a, b) = gram_(support[a], support[b]);
    return sub;
  }

 private:
  KernelCache(Matrix gram, KernelSpec spec) : gram_(std::move(gram)), spec_(spec) {}

  Matrix gram_;
  KernelSpec spec_;
};

struct KbtcParams {
  Index M = 1;
  double alpha = 1e-9;
  KernelSpec spec;

  void validate(Index features, Index samples) const {
    BtcParams{M, alpha}.validate(features, samples);
    spec.validate();
  }
};

namespace detail {

inline void require_cache(const Dictionary& dict, const KernelCache& cache, const KernelSpec& spec) {
  if (cache.size() != dict.sample_count()) throw InvalidArgument("kernel cache size differs from dictionary size");
  if (!(cache.spec() == spec))
    throw InvalidArgument("kernel cache built for " + to_string(cache.spec()) + ", classifier uses " + to_string(spec));
}

inline RegularizedCholesky factor_kernel_support(const KernelCache& cache, const IndexSet& support, Index count,
                                                 double alpha) {
  RegularizedCholesky chol(alpha, count);
  Vector row(count);
  for (Index k = 0; k < count; ++k) {
    for (Index j = 0; j <= k; ++j) row[j] = cache(support[k], support[j]);
    chol.append(row.head(k + 1));
  }
  return chol;
}

/// sqrt(K(y,y) - 2 x_j' K(A_j,y) + x_j' K(A_j,A_j) x_j) per class over the
/// first `k` support entries. `kv` is the full kernel vector K(A, y).
inline ResidualVector kernel_residuals(const Dictionary& dict, const KernelCache& cache, double kyy,
                                       const Vector& kv, const IndexSet& support, const Vector& x, Index k) {
  const int classes = dict.class_count();
  Vector cross = Vector::Zero(classes);
  Vector quad = Vector::Zero(classes);
  for (Index a = 0; a < k; ++a) {
    const int cls = dict.class_of(support[a]) - 1;
    cross[cls] += x[a] * kv[support[a]];
    for (Index b = 0; b < k; ++b)
      if (dict.class_of(support[b]) - 1 == cls) quad[cls] += x[a] * cache(support[a], support[b]) * x[b];
  }
  const double floor = -1e-8 * std::max(1.0, std::abs(kyy));
  Vector eps(classes);
  for (int j = 0; j < classes; ++j) {
    const double radicand = kyy - 2.0 * cross[j] + quad[j];
    if (radicand < floor)
      throw NumericalError("kernel residual radicand " + std::to_string(radicand) + " for class " +
                           std::to_string(j + 1) + " is negative beyond tolerance");
    eps[j] = std::sqrt(std::max(0.0, radicand));
  }
  return {eps};
}

}  // namespace detail

/// Classifies y against a caller-chosen support. y must already live in the
/// dictionary's feature space (see Dictionary::prepare).
inline ClassifyResult kbtc_classify_with_support(const Dictionary& dict, const Vector& y, IndexSet support,
                                                 double alpha, const KernelCache& cache) {
  detail::require_cache(dict, cache, cache.spec());
  const Vector kv = kernel_vector(dict, y, cache.spec());
  const double kyy = cache.spec()(y, y);
  const auto chol = detail::factor_kernel_support(cache, support, support.size(), alpha);
  Vector rhs(support.size());
  for (Index k = 0; k < support.size(); ++k) rhs[k] = kv[support[k]];
  Vector x = chol.solve(rhs);
  ResidualVector eps = detail::kernel_residuals(dict, cache, kyy, kv, support, x, support.size());
  SparseCode code{std::move(support), std::move(x), dict.sample_count()};
  return {std::move(eps), std::move(code)};
}

inline ClassifyResult kbtc_classify(const Dictionary& dict, const Vector& y, const KbtcParams& params,
                                    const KernelCache& cache) {
  params.validate(dict.feature_count(), dict.sample_count());
  detail::require_cache(dict, cache, params.spec);
  const Vector kv = kernel_vector(dict, y, params.spec);
  return kbtc_classify_with_support(dict, y, top_m_select(kv, params.M, params.spec.selection()), params.alpha,
                                    cache);
}

/// Alternative residual |K(y,y) - x_j' K(A_j, y)| for a code from kbtc_classify.
inline ResidualVector kbtc_residual_alt(const Dictionary& dict, const Vector& y, const SparseCode& code,
                                        const KernelCache& cache) {
  detail::require(code.ambient_size == dict.sample_count(), "sparse code does not match dictionary");
  detail::require(code.support.size() == code.coefficients.size(), "sparse code support/coefficients mismatch");
  const Vector kv = kernel_vector(dict, y, cache.spec());
  const double kyy = cache.spec()(y, y);
  Vector cross = Vector::Zero(dict.class_count());
  for (Index a = 0; a < code.support.size(); ++a)
    cross[dict.class_of(code.support[a]) - 1] += code.coefficients[a] * kv[code.support[a]];
  return {(kyy - cross.array()).abs().matrix()};
}

/// Kernel identification ratio of one training column, left out of its own
/// selection.
inline double kbtc_beta_sample(const Dictionary& dict, int class_id, Index sample_idx, const KbtcParams& params,
                               const KernelCache& cache) {
  detail::require(dict.class_count() >= 2, "identification ratio needs a competing class");
  detail::require(class_id >= 1 && class_id <= dict.class_count(), "class id out of range");
  const ClassRange& range = dict.class_range(class_id);
  detail::require(sample_idx >= 0 && sample_idx < range.count, "sample index outside class partition");
  detail::require(params.M >= 2, "identification ratio needs M >= 2");
  params.validate(dict.feature_count(), dict.sample_count());
  detail::require_cache(dict, cache, params.spec);
  const Index column = range.start + sample_idx;
  const Vector kv = cache.gram().col(column);
  const IndexSet support = top_m_select_excluding(kv, params.M, column, params.spec.selection());
  const auto chol = detail::factor_kernel_support(cache, support, support.size(), params.alpha);
  Vector rhs(support.size());
  for (Index k = 0; k < support.size(); ++k) rhs[k] = kv[support[k]];
  const Vector x = chol.solve(rhs);
  const auto eps = detail::kernel_residuals(dict, cache, cache(column, column), kv, support, x, support.size());
  return detail::identification_ratio(eps, class_id);
}

/// Mean kernel identification ratio for every M in [m_lo, m_hi]. M = 1 leaves
/// an empty support, for which every residual equals sqrt(K(y,y)) and the
/// ratio is 1.
inline ThresholdProfile kbtc_beta_profile(const Dictionary& dict, double alpha, const KernelCache& cache, Index m_lo,
                                          Index m_hi, std::size_t threads = 0, Index m_stride = 1) {
  detail::require(dict.class_count() >= 2, "identification ratio needs a competing class");
  detail::require(m_lo >= 1 && m_lo <= m_hi, "invalid threshold range");
  detail::require(m_stride >= 1, "threshold stride must be >= 1");
  BtcParams{m_hi, alpha}.validate(dict.feature_count(), dict.sample_count());
  detail::require_cache(dict, cache, cache.spec());

  std::vector<Index> thresholds;
  for (Index m = m_lo; m <= m_hi; m += m_stride) thresholds.push_back(m);
  const Index top = thresholds.back();
  const Index n = dict.sample_count();
  const auto selection = cache.spec().selection();
  Matrix ratios(static_cast<Index>(thresholds.size()), n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
    const auto column = static_cast<Index>(idx);
    const Vector kv = cache.gram().col(column);
    const IndexSet support =
        top >= 2 ? top_m_select_excluding(kv, top, column, selection) : IndexSet{};
    const auto chol = detail::factor_kernel_support(cache, support, support.size(), alpha);
    Vector rhs(support.size());
    for (Index k = 0; k < support.size(); ++k) rhs[k] = kv[support[k]];
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const Index k = thresholds[t] - 1;
      const Vector x = chol.solve_prefix(rhs, k);
      const auto eps = detail::kernel_residuals(dict, cache, cache(column, column), kv, support, x, k);
      ratios(static_cast<Index>(t), column) = detail::identification_ratio(eps, dict.class_of(column));
    }
  });
  ThresholdProfile profile;
  profile.thresholds = thresholds;
  for (Index t = 0; t < ratios.rows(); ++t) profile.mean_ratio.push_back(ratios.row(t).sum() / static_cast<double>(n));
  return profile;
}

/// Upper end of the threshold range: min(B - 1, N).
inline Index max_threshold(const Dictionary& dict) {
  return std::min(dict.feature_count() - 1, dict.sample_count());
}

/// Powers of two 2^lo .. 2^hi.
inline std::vector<double> power_of_two_grid(int lo = -10, int hi = 1) {
  std::vector<double> grid;
  for (int e = lo; e <= hi; ++e) grid.push_back(std::ldexp(1.0, e));
  return grid;
}

struct GammaProfileEntry {
  double gamma;
  double mean_ratio;       // averaged over N columns and every scanned M
  ThresholdProfile by_m;   // per-M means at this gamma
};

/// Mean identification ratio per gamma, averaged over M = 1..min(B-1, N)
/// (every m_stride-th M) and all columns.
inline std::vector<GammaProfileEntry> kbtc_gamma_profile(const Dictionary& dict, double alpha,
                                                         const std::vector<double>& gamma_grid,
                                                         std::size_t threads = 0, Index m_stride = 1) {
  if (gamma_grid.empty()) throw InvalidArgument("gamma grid is empty");
  std::vector<GammaProfileEntry> out;
  for (double gamma : gamma_grid) {
    const auto cache = KernelCache::build(dict, KernelSpec::rbf(gamma), threads);
    ThresholdProfile by_m = kbtc_beta_profile(dict, alpha, cache, 1, max_threshold(dict), threads, m_stride);
    double total = 0.0;
    for (double r : by_m.mean_ratio) total += r;
    out.push_back({gamma, total / static_cast<double>(by_m.mean_ratio.size()), std::move(by_m)});
  }
  return out;
}

struct KbtcEstimate {
  double gamma_hat;
  Index m_hat;
  std::vector<GammaProfileEntry> gamma_profile;
  ThresholdProfile m_profile;  // at gamma_hat, M = 2..min(B-1, N)
};

/// gamma_hat = grid argmin of the gamma profile (first on ties); M_hat =
/// smallest M in 2..min(B-1, N) minimizing the per-M profile at gamma_hat.
inline KbtcEstimate kbtc_estimate_params(const Dictionary& dict, double alpha, const std::vector<double>& gamma_grid,
                                         std::size_t threads = 0) {
  auto profile = kbtc_gamma_profile(dict, alpha, gamma_grid, threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < profile.size(); ++i)
    if (profile[i].mean_ratio < profile[best].mean_ratio) best = i;
  const double gamma_hat = profile[best].gamma;
  const Index m_max = max_threshold(dict);
  if (m_max < 2)
    throw InvalidArgument("threshold estimation needs min(B-1, N) >= 2, have " + std::to_string(m_max));
  ThresholdProfile m_profile;
  const auto& by_m = profile[best].by_m;
  for (std::size_t t = 0; t < by_m.thresholds.size(); ++t)
    if (by_m.thresholds[t] >= 2) {
      m_profile.thresholds.push_back(by_m.thresholds[t]);
      m_profile.mean_ratio.push_back(by_m.mean_ratio[t]);
    }
  const Index m_hat = m_profile.argmin();
  return {gamma_hat, m_hat, std::move(profile), std::move(m_profile)};
}

}  // namespace btc
