#include <gtest/gtest.h>

#include <random>

#include "btc/btc.hpp"
#include "oracles.hpp"

using namespace btc;

namespace {

Image random_image(std::mt19937_64& rng, Index h, Index w) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(h, w);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = unit(rng);
  return img;
}

ResidualCube random_cube(std::mt19937_64& rng, Index h, Index w, int classes) {
  ResidualCube cube{h, w, {}, true};
  for (int c = 0; c < classes; ++c) cube.layers.push_back(random_image(rng, h, w));
  return cube;
}

/// 10 x 10 two-class scene: left half class 1, right half class 2.
struct TinyScene {
  HsiCube cube;
  Dictionary dict;
};

TinyScene tiny_scene() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  HsiCube cube(10, 10, 6);
  Vector s1(6), s2(6);
  s1 << 1, 0.8, 0.6, 0.4, 0.3, 0.2;
  s2 << 0.2, 0.4, 0.5, 0.7, 0.9, 1.0;
  for (Index r = 0; r < 10; ++r)
    for (Index c = 0; c < 10; ++c) cube.set_pixel(r, c, (c < 5 ? s1 : s2) + 0.15 * Vector::NullaryExpr(6, [&](Index) { return normal(rng); }));
  Matrix train(8, 6);
  std::vector<int> labels;
  for (Index i = 0; i < 8; ++i) {
    train.row(i) = cube.pixel(i, i < 4 ? 0 : 9).transpose();
    labels.push_back(i < 4 ? 1 : 2);
  }
  return {std::move(cube), build_dictionary(train, labels, NormMode::L2Columns)};
}

}  // namespace

TEST(ResidualCube, SinglePixel) {
  HsiCube cube(1, 1, 3);
  cube.set_pixel(0, 0, Vector::Constant(3, 1.0));
  Matrix s(3, 3);
  s << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const std::vector<int> labels{1, 2, 3};
  const auto dict = build_dictionary(s, labels, NormMode::L2Columns);
  const auto clf = PixelClassifier::btc(dict, {1, 0.01});
  const auto out = build_residual_cube(cube, clf, 1);
  auto eps = clf.classify(cube.pixel(0, 0)).residuals.values;
  eps = (eps.array() - eps.minCoeff()) / (eps.maxCoeff() - eps.minCoeff());
  for (int j = 1; j <= 3; ++j) EXPECT_NEAR(out.cube.layer(j)(0, 0), eps[j - 1], 1e-15);
}

TEST(ResidualCube, ConstantSpectrumIsPiecewiseConstant) {
  const auto scene = tiny_scene();
  HsiCube cube(4, 5, 6);
  Vector spectrum(6);
  spectrum << 0.3, 0.5, 0.2, 0.9, 0.4, 0.6;
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 5; ++c) cube.set_pixel(r, c, spectrum);
  const auto out = build_residual_cube(cube, PixelClassifier::btc(scene.dict, {3, 0.01}), 2);
  for (int j = 1; j <= 2; ++j) EXPECT_EQ(out.cube.layer(j).maxCoeff(), out.cube.layer(j).minCoeff());
}

TEST(ResidualCube, MatchesDirectClassification) {
  const auto scene = tiny_scene();
  const BtcParams params{3, 0.01};
  const auto out = build_residual_cube(scene.cube, PixelClassifier::btc(scene.dict, params), 3,
                                       CubeNormalization::PerLayer);
  std::vector<Image> raw(2, Image(10, 10));
  for (Index r = 0; r < 10; ++r)
    for (Index c = 0; c < 10; ++c) {
      const auto res = btc_classify(scene.dict, scene.cube.pixel(r, c), params);
      EXPECT_EQ(out.pixelwise.at(r, c), res.predicted_class());
      for (int j = 1; j <= 2; ++j) raw[static_cast<std::size_t>(j - 1)](r, c) = res.residuals(j);
    }
  for (int j = 1; j <= 2; ++j) {
    const Image& l = raw[static_cast<std::size_t>(j - 1)];
    const Image expect = (l.array() - l.minCoeff()) / (l.maxCoeff() - l.minCoeff());
    EXPECT_LE((out.cube.layer(j) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ResidualCube, GlobalNormalizationRange) {
  const auto scene = tiny_scene();
  const auto out = build_residual_cube(scene.cube, PixelClassifier::btc(scene.dict, {3, 0.01}), 1);
  double lo = 1, hi = 0;
  for (const auto& l : out.cube.layers) {
    lo = std::min(lo, l.minCoeff());
    hi = std::max(hi, l.maxCoeff());
  }
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
  EXPECT_TRUE(out.cube.normalized);
}

TEST(ResidualCube, KernelClassifierPath) {
  const auto scene = tiny_scene();
  Matrix train(8, 6);
  std::vector<int> labels;
  for (Index i = 0; i < 8; ++i) {
    train.row(i) = scene.cube.pixel(i, i < 4 ? 0 : 9).transpose();
    labels.push_back(i < 4 ? 1 : 2);
  }
  const auto dict = build_dictionary(train, labels, NormMode::RangeScaled);
  const KbtcParams params{3, 1e-9, KernelSpec::rbf(0.5)};
  auto cache = std::make_shared<const KernelCache>(KernelCache::build(dict, params.spec, 1));
  const auto out = build_residual_cube(scene.cube, PixelClassifier::kbtc(dict, params, cache), 2);
  for (Index r = 0; r < 10; ++r)
    for (Index c = 0; c < 10; ++c)
      EXPECT_EQ(out.pixelwise.at(r, c), kbtc_classify(dict, dict.prepare(scene.cube.pixel(r, c)), params, *cache).predicted_class());
}

TEST(ResidualCube, BandMismatch) {
  const auto scene = tiny_scene();
  HsiCube cube(2, 2, 5);
  EXPECT_THROW(build_residual_cube(cube, PixelClassifier::btc(scene.dict, {3, 0.01}), 1), InvalidArgument);
}

TEST(ResidualCube, FailingPixelReportsCoordinates) {
  const auto scene = tiny_scene();
  HsiCube cube(3, 3, 6);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 3; ++c) cube.set_pixel(r, c, Vector::Ones(6));
  cube.set_pixel(1, 2, Vector::Zero(6));
  try {
    build_residual_cube(cube, PixelClassifier::btc(scene.dict, {3, 0.01}), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pixel (1,2)"), std::string::npos) << e.what();
  }
}

TEST(Mask, SetsForeignLayersToOne) {
  std::mt19937_64 rng(4);
  const auto cube = random_cube(rng, 1, 1, 3);
  LabelMap map(1, 1, 2);
  const auto out = mask_by_classmap(cube, map);
  EXPECT_EQ(out.layer(1)(0, 0), 1.0);
  EXPECT_EQ(out.layer(3)(0, 0), 1.0);
  EXPECT_EQ(out.layer(2)(0, 0), cube.layer(2)(0, 0));
}

TEST(Mask, AllClassOne) {
  std::mt19937_64 rng(5);
  const auto cube = random_cube(rng, 3, 4, 3);
  const auto out = mask_by_classmap(cube, LabelMap(3, 4, 1));
  EXPECT_EQ(out.layer(1), cube.layer(1));
  EXPECT_EQ(out.layer(2), Image::Ones(3, 4));
  EXPECT_EQ(out.layer(3), Image::Ones(3, 4));
}

TEST(Mask, MatchesElementwiseOracleAndNeverDecreases) {
  std::mt19937_64 rng(6);
  const auto cube = random_cube(rng, 6, 7, 4);
  LabelMap map(6, 7);
  for (auto& l : map.labels) l = 1 + static_cast<int>(rng() % 4);
  const auto out = mask_by_classmap(cube, map);
  for (int j = 1; j <= 4; ++j)
    for (Index r = 0; r < 6; ++r)
      for (Index c = 0; c < 7; ++c) {
        const double expect = map.at(r, c) == j ? cube.layer(j)(r, c) : 1.0;
        EXPECT_EQ(out.layer(j)(r, c), expect);
        EXPECT_GE(out.layer(j)(r, c), cube.layer(j)(r, c));
      }
  EXPECT_THROW(mask_by_classmap(cube, LabelMap(6, 6)), InvalidArgument);
}

TEST(Box, ConstantAndIdentity) {
  std::mt19937_64 rng(7);
  EXPECT_LE((box_smooth(Image::Constant(5, 6, 0.7), 5).array() - 0.7).abs().maxCoeff(), 1e-15);
  const Image img = random_image(rng, 5, 5);
  EXPECT_EQ(box_smooth(img, 1), img);
}

TEST(Box, MatchesPaddedOracle) {
  std::mt19937_64 rng(8);
  const Image img = random_image(rng, 5, 5);
  EXPECT_LE((box_smooth(img, 3) - oracle::box_filter(img, 3)).cwiseAbs().maxCoeff(), 1e-14);
  const Image big = random_image(rng, 9, 7);
  EXPECT_LE((box_smooth(big, 5) - oracle::box_filter(big, 5)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Box, EvenWindowRejected) {
  EXPECT_THROW(box_smooth(Image::Zero(3, 3), 4), InvalidArgument);
  EXPECT_THROW(box_smooth(Image::Zero(3, 3), 0), InvalidArgument);
}

TEST(Wls, LambdaZeroIsIdentity) {
  std::mt19937_64 rng(9);
  const Image map = random_image(rng, 8, 8), guide = random_image(rng, 8, 8);
  WlsParams p;
  p.lambda = 0.0;
  EXPECT_LE((wls_smooth(map, guide, p) - map).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Wls, ConstantIsFixedPoint) {
  std::mt19937_64 rng(10);
  const Image guide = random_image(rng, 12, 9);
  WlsParams p;
  p.cg_tolerance = 1e-12;
  const Image out = wls_smooth(Image::Constant(12, 9, 0.35), guide, p);
  EXPECT_LE((out.array() - 0.35).abs().maxCoeff(), 1e-9);
}

TEST(Wls, StepEdgeMatchesDenseSolve) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  Image map(16, 16), guide(16, 16);
  for (Index r = 0; r < 16; ++r)
    for (Index c = 0; c < 16; ++c) {
      guide(r, c) = c < 8 ? 0.1 : 0.9;
      map(r, c) = (c < 8 ? 0.2 : 0.8) + 0.05 * normal(rng);
    }
  WlsParams p;
  p.cg_tolerance = 1e-12;
  const Image out = wls_smooth(map, guide, p);
  EXPECT_LE((out - oracle::wls_dense(map, guide, 0.4, 0.9, 1e-4)).cwiseAbs().maxCoeff(), 1e-6);
  auto variance = [](const Image& img) { return (img.array() - img.mean()).square().mean(); };
  EXPECT_LT(variance(out.leftCols(8)), variance(map.leftCols(8)));
  EXPECT_LT(variance(out.rightCols(8)), variance(map.rightCols(8)));
  const double before = map.rightCols(8).mean() - map.leftCols(8).mean();
  const double after = out.rightCols(8).mean() - out.leftCols(8).mean();
  EXPECT_GE(after, 0.8 * before);
}

TEST(Wls, UniformGuidancePreservesMean) {
  std::mt19937_64 rng(12);
  const Image map = random_image(rng, 10, 10);
  WlsParams p;
  p.cg_tolerance = 1e-12;
  const Image out = wls_smooth(map, Image::Constant(10, 10, 0.5), p);
  EXPECT_NEAR(out.mean(), map.mean(), 1e-8);
}

TEST(Wls, NonConvergenceReported) {
  std::mt19937_64 rng(13);
  const Image map = random_image(rng, 20, 20), guide = random_image(rng, 20, 20);
  WlsParams p;
  p.lambda = 50.0;
  p.cg_tolerance = 1e-14;
  p.cg_max_iterations = 1;
  EXPECT_THROW(wls_smooth(map, guide, p), NumericalError);
}

TEST(Wls, InvalidParams) {
  WlsParams p;
  p.alpha = 0.0;
  EXPECT_THROW(wls_smooth(Image::Zero(2, 2), Image::Zero(2, 2), p), InvalidArgument);
  EXPECT_THROW(wls_smooth(Image::Zero(2, 2), Image::Zero(2, 3)), InvalidArgument);
}

TEST(Decide, ArgminWithTies) {
  ResidualCube single{2, 2, {Image::Random(2, 2)}, true};
  EXPECT_EQ(decide_from_cube(single).labels, std::vector<int>(4, 1));
  ResidualCube three{1, 1, {Image::Constant(1, 1, 0.2), Image::Constant(1, 1, 0.1), Image::Constant(1, 1, 0.9)}, true};
  EXPECT_EQ(decide_from_cube(three).at(0, 0), 2);
  ResidualCube tie{1, 1, {Image::Constant(1, 1, 0.5), Image::Constant(1, 1, 0.5)}, true};
  EXPECT_EQ(decide_from_cube(tie).at(0, 0), 1);
}

TEST(Decide, MatchesElementwiseOracle) {
  std::mt19937_64 rng(14);
  const auto cube = random_cube(rng, 5, 6, 4);
  const auto map = decide_from_cube(cube);
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 6; ++c) {
      std::vector<double> v;
      for (int j = 1; j <= 4; ++j) v.push_back(cube.layer(j)(r, c));
      EXPECT_EQ(map.at(r, c), static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin()) + 1);
    }
}

TEST(Pipeline, WindowOneWithoutMaskReproducesPixelwise) {
  const auto scene = tiny_scene();
  SmoothingConfig cfg;
  cfg.kind = SmoothingKind::Box;
  cfg.box_window = 1;
  cfg.mask = false;
  const auto out = spatial_spectral_classify(scene.cube, PixelClassifier::btc(scene.dict, {3, 0.01}), cfg, 2);
  EXPECT_EQ(out.smoothed, out.pixelwise);
}

TEST(Pipeline, SmoothingHelpsOnBlockyScene) {
  synthetic::SceneConfig cfg;
  cfg.bands = 12;
  const auto scene = synthetic::blocky_scene(cfg, 1);
  const auto split = split_by_mask(scene.cube, scene.truth, scene.train_mask);
  const auto dict = build_dictionary(split.train_samples, split.train_labels, NormMode::L2Columns);
  const auto clf = PixelClassifier::btc(dict, {5, 1e-10});
  const auto out = spatial_spectral_classify(scene.cube, clf, SmoothingConfig{}, 1);
  auto accuracy = [&](const LabelMap& m) {
    int ok = 0;
    for (std::size_t i = 0; i < m.labels.size(); ++i) ok += m.labels[i] == scene.truth.labels[i];
    return ok;
  };
  EXPECT_GE(accuracy(out.smoothed), accuracy(out.pixelwise));
}

TEST(Pgm, WritesMapAndLegend) {
  const auto dir = std::filesystem::temp_directory_path() / "btc_pgm";
  std::filesystem::create_directories(dir);
  LabelMap m(2, 2);
  m.labels = {0, 1, 2, 2};
  write_class_map_pgm(dir / "m.pgm", m, 2);
  std::ifstream in(dir / "m.pgm");
  std::string magic;
  int w, h, maxv, a, b;
  in >> magic >> w >> h >> maxv >> a >> b;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 2);
  EXPECT_EQ(a, 0);
  EXPECT_EQ(b, 128);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pgm.legend.csv"));
}
