#pragma once

// Spatial-spectral post-processing: per-pixel residual cubes, class-map
// masking, box and edge-preserving WLS smoothing of each residual layer, and
// the final per-pixel argmin.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "btc/classifier.hpp"
#include "btc/data.hpp"
#include "btc/error.hpp"
#include "btc/kernel.hpp"
#include "btc/linalg.hpp"
#include "btc/parallel.hpp"

namespace btc {

/// height x width x C residuals, one image per class.
struct ResidualCube {
  Index height = 0;
  Index width = 0;
  std::vector<Image> layers;
  bool normalized = false;

  int class_count() const { return static_cast<int>(layers.size()); }
  Image& layer(int class_id) { return layers.at(static_cast<std::size_t>(class_id - 1)); }
  const Image& layer(int class_id) const { return layers.at(static_cast<std::size_t>(class_id - 1)); }
};

enum class CubeNormalization { Global, PerLayer };

/// Min-max scales the cube into [0,1], either over all layers at once or
/// layer by layer. A constant range maps to 0.
inline void normalize_cube(ResidualCube& cube, CubeNormalization mode = CubeNormalization::Global) {
  auto rescale = [](Image& img, double lo, double hi) {
    if (hi > lo) img = (img.array() - lo) / (hi - lo);
    else img.setZero();
  };
  if (mode == CubeNormalization::Global) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& l : cube.layers) {
      lo = std::min(lo, l.minCoeff());
      hi = std::max(hi, l.maxCoeff());
    }
    for (auto& l : cube.layers) rescale(l, lo, hi);
  } else {
    for (auto& l : cube.layers) rescale(l, l.minCoeff(), l.maxCoeff());
  }
  cube.normalized = true;
}

/// A configured per-pixel classifier: linear BTC, or KBTC with a shared cache.
class PixelClassifier {
 public:
  static PixelClassifier btc(const Dictionary& dict, const BtcParams& params) {
    params.validate(dict.feature_count(), dict.sample_count());
    return PixelClassifier(dict, params);
  }

  static PixelClassifier kbtc(const Dictionary& dict, const KbtcParams& params,
                              std::shared_ptr<const KernelCache> cache) {
    params.validate(dict.feature_count(), dict.sample_count());
    detail::require(cache != nullptr, "kbtc classifier needs a kernel cache");
    return PixelClassifier(dict, Kernelized{params, std::move(cache)});
  }

  /// Classifies a raw spectrum (scaling is applied from the dictionary).
  ClassifyResult classify(const Vector& raw) const {
    const Vector y = dict_->prepare(raw);
    if (const auto* p = std::get_if<BtcParams>(&setup_)) return btc_classify(*dict_, y, *p);
    const auto& k = std::get<Kernelized>(setup_);
    return kbtc_classify(*dict_, y, k.params, *k.cache);
  }

  const Dictionary& dictionary() const { return *dict_; }

 private:
  struct Kernelized {
    KbtcParams params;
    std::shared_ptr<const KernelCache> cache;
  };

  PixelClassifier(const Dictionary& dict, std::variant<BtcParams, Kernelized> setup)
      : dict_(&dict), setup_(std::move(setup)) {}

  const Dictionary* dict_;
  std::variant<BtcParams, Kernelized> setup_;
};

struct ResidualCubeResult {
  ResidualCube cube;
  LabelMap pixelwise;
};

/// Classifies every pixel, stacks the residual vectors into a cube and
/// normalizes it to [0,1]. Also returns the pixel-wise class map.
inline ResidualCubeResult build_residual_cube(const HsiCube& cube, const PixelClassifier& classifier,
                                              std::size_t threads = 0,
                                              CubeNormalization normalization = CubeNormalization::Global) {
  const Dictionary& dict = classifier.dictionary();
  detail::require(cube.bands == dict.feature_count(), "cube has " + std::to_string(cube.bands) +
                                                          " bands, dictionary has " +
                                                          std::to_string(dict.feature_count()) + " features");
  const int classes = dict.class_count();
  ResidualCubeResult out;
  out.cube.height = cube.height;
  out.cube.width = cube.width;
  out.cube.layers.assign(static_cast<std::size_t>(classes), Image(cube.height, cube.width));
  out.pixelwise = LabelMap(cube.height, cube.width);
  parallel_for(static_cast<std::size_t>(cube.pixel_count()), threads, [&](std::size_t idx) {
    const auto r = static_cast<Index>(idx) / cube.width;
    const auto c = static_cast<Index>(idx) % cube.width;
    try {
      const auto result = classifier.classify(cube.pixel(r, c));
      for (int j = 1; j <= classes; ++j) out.cube.layer(j)(r, c) = result.residuals(j);
      out.pixelwise.at(r, c) = result.predicted_class();
    } catch (const Error& e) {
      throw NumericalError("pixel (" + std::to_string(r) + "," + std::to_string(c) + "): " + e.what());
    }
  });
  normalize_cube(out.cube, normalization);
  return out;
}

/// Layer i is set to 1 wherever the pixel-wise label differs from i.
inline ResidualCube mask_by_classmap(const ResidualCube& cube, const LabelMap& classmap) {
  detail::require(classmap.height == cube.height && classmap.width == cube.width,
                  "class map dims differ from residual cube");
  ResidualCube out = cube;
  for (int i = 1; i <= out.class_count(); ++i) {
    Image& layer = out.layer(i);
    for (Index r = 0; r < cube.height; ++r)
      for (Index c = 0; c < cube.width; ++c)
        if (classmap.at(r, c) != i) layer(r, c) = 1.0;
  }
  return out;
}

/// Mean over an odd window with replicated borders.
inline Image box_smooth(const Image& img, int window) {
  if (window < 1 || window % 2 == 0)
    throw InvalidArgument("box window must be odd and >= 1, got " + std::to_string(window));
  if (window == 1) return img;
  const Index half = window / 2;
  const Index h = img.rows(), w = img.cols();
  Image out(h, w);
  const double area = static_cast<double>(window) * window;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      double sum = 0.0;
      for (Index dr = -half; dr <= half; ++dr)
        for (Index dc = -half; dc <= half; ++dc)
          sum += img(std::clamp<Index>(r + dr, 0, h - 1), std::clamp<Index>(c + dc, 0, w - 1));
      out(r, c) = sum / area;
    }
  return out;
}

struct WlsParams {
  double lambda = 0.4;       // smoothing degree
  double alpha = 0.9;        // gradient exponent (edge sharpening)
  double epsilon = 1e-4;     // gradient floor
  double cg_tolerance = 1e-5;
  int cg_max_iterations = 2000;

  void validate() const {
    detail::require(lambda >= 0.0, "WLS lambda must be >= 0");
    detail::require(alpha > 0.0, "WLS alpha must be > 0");
    detail::require(epsilon > 0.0, "WLS epsilon must be > 0");
    detail::require(cg_tolerance > 0.0 && cg_max_iterations > 0, "invalid CG settings");
  }
};

/// I + lambda * L_g over 4-neighbour edges of the guidance image, with edge
/// weights 1 / (|grad g|^alpha + epsilon) and natural boundaries.
inline Eigen::SparseMatrix<double> wls_system(const Image& guidance, const WlsParams& params) {
  const Index h = guidance.rows(), w = guidance.cols();
  const Index n = h * w;
  auto id = [w](Index r, Index c) { return r * w + c; };
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(5 * n));
  Vector diag = Vector::Ones(n);
  auto add_edge = [&](Index p, Index q, double gp, double gq) {
    const double weight = params.lambda / (std::pow(std::abs(gp - gq), params.alpha) + params.epsilon);
    triplets.emplace_back(p, q, -weight);
    triplets.emplace_back(q, p, -weight);
    diag[p] += weight;
    diag[q] += weight;
  };
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      if (c + 1 < w) add_edge(id(r, c), id(r, c + 1), guidance(r, c), guidance(r, c + 1));
      if (r + 1 < h) add_edge(id(r, c), id(r + 1, c), guidance(r, c), guidance(r + 1, c));
    }
  for (Index p = 0; p < n; ++p) triplets.emplace_back(p, p, diag[p]);
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  return system;
}

namespace detail {

inline Vector flatten(const Image& img) {
  Vector v(img.size());
  for (Index r = 0; r < img.rows(); ++r)
    for (Index c = 0; c < img.cols(); ++c) v[r * img.cols() + c] = img(r, c);
  return v;
}

inline Image unflatten(const Vector& v, Index h, Index w) {
  Image img(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) img(r, c) = v[r * w + c];
  return img;
}

}  // namespace detail

/// Edge-preserving smoothing: solves (I + lambda L_g) u = map with conjugate
/// gradients preconditioned by an incomplete Cholesky factorization.
inline Image wls_smooth(const Image& map, const Image& guidance, const WlsParams& params = {}) {
  params.validate();
  detail::require(map.rows() == guidance.rows() && map.cols() == guidance.cols(), "WLS map/guidance dims differ");
  if (params.lambda == 0.0) return map;
  const auto system = wls_system(guidance, params);
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(params.cg_tolerance);
  cg.setMaxIterations(params.cg_max_iterations);
  cg.compute(system);
  if (cg.info() != Eigen::Success) throw NumericalError("WLS: preconditioner factorization failed");
  const Vector rhs = detail::flatten(map);
  const Vector u = cg.solve(rhs);
  if (cg.info() != Eigen::Success)
    throw NumericalError("WLS: conjugate gradient did not converge in " + std::to_string(cg.iterations()) +
                         " iterations (relative residual " + std::to_string(cg.error()) + ")");
  return detail::unflatten(u, map.rows(), map.cols());
}

/// Per-pixel argmin over layers, ties to the lowest class id.
inline LabelMap decide_from_cube(const ResidualCube& cube) {
  detail::require(cube.class_count() >= 1, "residual cube has no layers");
  LabelMap out(cube.height, cube.width);
  for (Index r = 0; r < cube.height; ++r)
    for (Index c = 0; c < cube.width; ++c) {
      int best = 1;
      for (int j = 2; j <= cube.class_count(); ++j)
        if (cube.layer(j)(r, c) < cube.layer(best)(r, c)) best = j;
      out.at(r, c) = best;
    }
  return out;
}

enum class SmoothingKind { None, Box, Wls };

struct SmoothingConfig {
  SmoothingKind kind = SmoothingKind::Wls;
  int box_window = 5;
  WlsParams wls;
  bool mask = true;
  CubeNormalization normalization = CubeNormalization::Global;
};

struct SpatialResult {
  LabelMap pixelwise;
  LabelMap smoothed;
  ResidualCube residuals;  // normalized and (optionally) masked, before smoothing
};

/// Pixel-wise classification followed by residual-layer smoothing. WLS uses
/// the cube's first principal component as guidance.
inline SpatialResult spatial_spectral_classify(const HsiCube& cube, const PixelClassifier& classifier,
                                               const SmoothingConfig& config, std::size_t threads = 0) {
  auto [residuals, pixelwise] = build_residual_cube(cube, classifier, threads, config.normalization);
  if (config.mask) residuals = mask_by_classmap(residuals, pixelwise);
  ResidualCube smoothed = residuals;
  if (config.kind != SmoothingKind::None) {
    Image guidance;
    if (config.kind == SmoothingKind::Wls) guidance = pca_first_component(cube);
    parallel_for(smoothed.layers.size(), threads, [&](std::size_t i) {
      smoothed.layers[i] = config.kind == SmoothingKind::Box ? box_smooth(residuals.layers[i], config.box_window)
                                                            : wls_smooth(residuals.layers[i], guidance, config.wls);
    });
  }
  return {std::move(pixelwise), decide_from_cube(smoothed), std::move(residuals)};
}

/// Plain-text PGM (P2) with gray level round(255 * label / classes) plus a
/// "label,gray" mapping file next to it.
inline void write_class_map_pgm(const std::filesystem::path& path, const LabelMap& map, int classes) {
  detail::require(classes >= 1, "class count must be >= 1");
  auto gray = [classes](int label) { return static_cast<int>(std::lround(255.0 * label / classes)); };
  {
    auto out = detail::open_output(path);
    out << "P2\n" << map.width << ' ' << map.height << "\n255\n";
    for (Index r = 0; r < map.height; ++r) {
      for (Index c = 0; c < map.width; ++c) out << (c ? " " : "") << gray(map.at(r, c));
      out << '\n';
    }
  }
  auto legend = detail::open_output(std::filesystem::path(path).concat(".legend.csv"));
  legend << "label,gray\n";
  for (int l = 0; l <= classes; ++l) legend << l << ',' << gray(l) << '\n';
}

}  // namespace btc
