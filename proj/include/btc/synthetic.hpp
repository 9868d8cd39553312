#pragma once

// Seeded synthetic problems: Gaussian sparse recovery, concentric rings,
// Gaussian blobs and a blocky hyperspectral scene.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "btc/data.hpp"
#include "btc/error.hpp"

namespace btc::synthetic {

struct RecoveryProblem {
  Matrix sensing;   // B x N, unit-norm Gaussian columns
  Vector truth;     // K entries of +-1, zero elsewhere
  Vector measurement;
  std::vector<Index> true_support;
};

inline RecoveryProblem gaussian_recovery(Index atoms, Index measurements, Index nonzeros, std::uint64_t seed) {
  detail::require(nonzeros >= 1 && nonzeros <= atoms, "recovery: K must be in 1..N");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  RecoveryProblem p;
  p.sensing.resize(measurements, atoms);
  for (Index c = 0; c < atoms; ++c) {
    for (Index r = 0; r < measurements; ++r) p.sensing(r, c) = normal(rng);
    p.sensing.col(c).normalize();
  }
  std::vector<Index> order(static_cast<std::size_t>(atoms));
  for (Index i = 0; i < atoms; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  p.truth = Vector::Zero(atoms);
  std::bernoulli_distribution coin(0.5);
  for (Index k = 0; k < nonzeros; ++k) {
    const Index idx = order[static_cast<std::size_t>(k)];
    p.truth[idx] = coin(rng) ? 1.0 : -1.0;
    p.true_support.push_back(idx);
  }
  std::sort(p.true_support.begin(), p.true_support.end());
  p.measurement = p.sensing * p.truth;
  return p;
}

struct LabeledSamples {
  Matrix samples;  // rows
  std::vector<int> labels;
};

struct RingsConfig {
  Index per_class = 250;
  double inner_radius = 1.0;
  double outer_radius = 2.0;
  double radial_noise = 0.1;
  Index extra_dims = 4;       // low-variance nuisance features
  double extra_noise = 0.05;
};

/// Two concentric rings in the first two coordinates (class 1 inner, class 2
/// outer), padded with small Gaussian nuisance features.
inline LabeledSamples rings(const RingsConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const Index n = 2 * cfg.per_class;
  LabeledSamples out{Matrix(n, 2 + cfg.extra_dims), std::vector<int>(static_cast<std::size_t>(n))};
  for (Index i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : 2;
    const double radius = (label == 1 ? cfg.inner_radius : cfg.outer_radius) + cfg.radial_noise * normal(rng);
    const double theta = angle(rng);
    out.samples(i, 0) = radius * std::cos(theta);
    out.samples(i, 1) = radius * std::sin(theta);
    for (Index d = 0; d < cfg.extra_dims; ++d) out.samples(i, 2 + d) = cfg.extra_noise * normal(rng);
    out.labels[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

struct BlobsConfig {
  int classes = 5;
  Index per_class = 40;
  Index dims = 200;
  double spread = 1.5;  // within-class standard deviation; centers have unit variance
};

struct BlobCenters {
  Matrix centers;  // classes x dims
};

inline BlobCenters blob_centers(const BlobsConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  BlobCenters c{Matrix(cfg.classes, cfg.dims)};
  for (Index k = 0; k < c.centers.rows(); ++k)
    for (Index d = 0; d < cfg.dims; ++d) c.centers(k, d) = normal(rng);
  return c;
}

/// per_class samples around each center, interleaved by class.
inline LabeledSamples blobs(const BlobsConfig& cfg, const BlobCenters& centers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Index n = cfg.classes * cfg.per_class;
  LabeledSamples out{Matrix(n, cfg.dims), std::vector<int>(static_cast<std::size_t>(n))};
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % cfg.classes) + 1;
    for (Index d = 0; d < cfg.dims; ++d) out.samples(i, d) = centers.centers(label - 1, d) + cfg.spread * normal(rng);
    out.labels[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

struct SceneConfig {
  Index height = 60;
  Index width = 60;
  Index bands = 20;
  int classes = 4;
  Index tile = 15;        // scene is a grid of tile x tile blocks
  double noise = 0.3;     // per-band Gaussian noise
  Index train_block = 3;  // one train_block^2 training patch per tile
};

struct Scene {
  HsiCube cube;
  LabelMap truth;
  LabelMap train_mask;
  Matrix spectra;  // classes x bands, noise-free
};

/// Blocky scene: tiles carry one class each, every class spectrum is a smooth
/// random curve around 0.6. A small patch at each tile's top-left corner is
/// used for training on every other tile.
inline Scene blocky_scene(const SceneConfig& cfg, std::uint64_t seed) {
  detail::require(cfg.classes >= 2 && cfg.tile >= cfg.train_block + 1, "invalid scene config");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene s;
  s.spectra.resize(cfg.classes, cfg.bands);
  for (int k = 0; k < cfg.classes; ++k) {
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double freq = 0.5 + 1.5 * unit(rng);
    const double slope = unit(rng) - 0.5;
    for (Index b = 0; b < cfg.bands; ++b) {
      const double t = static_cast<double>(b) / static_cast<double>(cfg.bands - 1);
      s.spectra(k, b) = 0.6 + 0.25 * std::sin(2.0 * std::numbers::pi * freq * t + phase) + 0.15 * slope * (2 * t - 1);
    }
  }
  s.cube = HsiCube(cfg.height, cfg.width, cfg.bands);
  s.truth = LabelMap(cfg.height, cfg.width);
  s.train_mask = LabelMap(cfg.height, cfg.width);
  const Index tiles_x = (cfg.width + cfg.tile - 1) / cfg.tile;
  std::vector<int> tile_class;
  const Index tiles_y = (cfg.height + cfg.tile - 1) / cfg.tile;
  for (Index t = 0; t < tiles_x * tiles_y; ++t)
    tile_class.push_back(static_cast<int>((t + t / tiles_x) % cfg.classes) + 1);
  for (Index r = 0; r < cfg.height; ++r)
    for (Index c = 0; c < cfg.width; ++c) {
      const Index t = (r / cfg.tile) * tiles_x + c / cfg.tile;
      const int label = tile_class[static_cast<std::size_t>(t)];
      s.truth.at(r, c) = label;
      for (Index b = 0; b < cfg.bands; ++b) s.cube.at(b, r, c) = s.spectra(label - 1, b) + cfg.noise * normal(rng);
      const bool patch = r % cfg.tile < cfg.train_block && c % cfg.tile < cfg.train_block;
      if (patch && t % 2 == 0) s.train_mask.at(r, c) = label;
    }
  return s;
}

}  // namespace btc::synthetic
