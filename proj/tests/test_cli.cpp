#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "btc/btc.hpp"
#include "btc/synthetic.hpp"

using namespace btc;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(BTC_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("btc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " = ");
  if (pos == std::string::npos) return std::nan("");
  return std::stod(text.substr(pos + key.size() + 3));
}

/// Writes a small ring problem and returns its directory.
fs::path ring_files(const std::string& name) {
  const fs::path dir = scratch(name);
  synthetic::RingsConfig cfg;
  cfg.per_class = 40;
  const auto train = synthetic::rings(cfg, 1);
  const auto test = synthetic::rings(cfg, 2);
  write_csv_matrix(dir / "train.csv", train.samples);
  write_labels(dir / "train_labels.csv", train.labels);
  write_csv_matrix(dir / "test.csv", test.samples);
  write_labels(dir / "test_labels.csv", test.labels);
  return dir;
}

std::string dataset_args(const fs::path& d) {
  return "--train " + (d / "train.csv").string() + " --train-labels " + (d / "train_labels.csv").string() +
         " --test " + (d / "test.csv").string() + " --test-labels " + (d / "test_labels.csv").string();
}

}  // namespace

TEST(Cli, RecoveryWritesOneRowPerAtomWithSidecar) {
  const auto dir = scratch("recovery");
  const auto r = run("synth-recovery --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(dir / "recovery.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "true,recovered");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 512);
  const auto side = slurp(dir / "recovery.csv.config");
  EXPECT_NE(side.find("M = 120"), std::string::npos);
  EXPECT_NE(side.find("seed = 0"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = scratch("override");
  std::ofstream(dir / "run.cfg") << "# comment\nM = 7\nalpha = 0.5\nn = 64\n";
  const auto r = run("synth-recovery --config " + (dir / "run.cfg").string() + " --alpha 0.25 --b 40 --k 3 --out-dir " +
                     dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto side = slurp(dir / "recovery.csv.config");
  EXPECT_NE(side.find("M = 7\n"), std::string::npos);
  EXPECT_NE(side.find("alpha = 0.25\n"), std::string::npos);
  EXPECT_NE(side.find("n = 64\n"), std::string::npos);
}

TEST(Cli, SidecarIsAValidConfigFile) {
  const auto dir = scratch("sidecar_roundtrip");
  ASSERT_EQ(run("synth-recovery --M 30 --b 60 --n 100 --k 4 --seed 3 --out-dir " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run("synth-recovery --config " + (dir / "a" / "recovery.csv.config").string() + " --out-dir " +
                (dir / "b").string())
                .code,
            0);
  EXPECT_EQ(slurp(dir / "a" / "recovery.csv"), slurp(dir / "b" / "recovery.csv"));
}

TEST(Cli, UnknownConfigKeyIsConfigError) {
  const auto dir = scratch("badkey");
  std::ofstream(dir / "bad.cfg") << "bogus = 1\n";
  const auto r = run("synth-recovery --config " + (dir / "bad.cfg").string() + " --out-dir " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1) << r.out;
  EXPECT_NE(r.out.find("error[config]"), std::string::npos);
}

TEST(Cli, MalformedConfigLine) {
  const auto dir = scratch("malformed");
  std::ofstream(dir / "bad.cfg") << "M 7\n";
  EXPECT_EQ(run("synth-recovery --config " + (dir / "bad.cfg").string()).code, 2);
}

TEST(Cli, MissingInputIsIoError) {
  const auto r = run("classify --train /nonexistent/a.csv --train-labels /nonexistent/b.csv --test /nonexistent/c.csv");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("error[io]"), std::string::npos);
  EXPECT_EQ(run("synth-recovery --config /nonexistent/x.cfg").code, 3);
}

TEST(Cli, MissingRequiredFlagIsConfigError) {
  EXPECT_EQ(run("roc --valid-margins x").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("classify-hsi --smoothing median --cube-header a --cube-raw b --gt c --train-mask d").code, 2);
}

TEST(Cli, InvalidParameterIsConfigError) {
  const auto d = ring_files("invalid_param");
  const auto r = run("classify " + dataset_args(d) + " --M 6 --alpha 0.01 --out-dir " + (d / "o").string());
  // B = 6 features, so M must stay below 6
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, SingularSystemIsNumericalError) {
  const auto dir = scratch("singular");
  std::ofstream(dir / "train.csv") << "1,0,0\n1,0,0\n0,1,0\n0,0,1\n";
  std::ofstream(dir / "labels.csv") << "1\n1\n2\n2\n";
  std::ofstream(dir / "test.csv") << "1,0.1,0\n";
  const auto r = run("classify --train " + (dir / "train.csv").string() + " --train-labels " +
                     (dir / "labels.csv").string() + " --test " + (dir / "test.csv").string() +
                     " --M 2 --alpha 0 --out-dir " + dir.string());
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.out.find("error[numerical]"), std::string::npos);
}

TEST(Cli, EstimateKbtcMatchesLibrary) {
  const auto d = ring_files("estimate_kbtc");
  const auto r = run("estimate-kbtc --train " + (d / "train.csv").string() + " --train-labels " +
                     (d / "train_labels.csv").string() + " --gamma-grid 2^-6..2^1 --threads 1 --out-dir " +
                     (d / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto ds = load_dense_dataset(d / "train.csv", d / "train_labels.csv");
  const auto dict = build_dictionary(ds.samples, ds.labels, NormMode::RangeScaled, ScaleRange::ZeroOne);
  const auto est = kbtc_estimate_params(dict, 1e-9, power_of_two_grid(-6, 1), 1);
  EXPECT_EQ(value_after(r.out, "gamma_hat"), est.gamma_hat);
  EXPECT_EQ(value_after(r.out, "M_hat"), static_cast<double>(est.m_hat));
  EXPECT_TRUE(fs::exists(d / "o" / "gamma_profile.csv.config"));
  EXPECT_TRUE(fs::exists(d / "o" / "m_profile.csv"));
}

TEST(Cli, EstimateBtcMatchesLibrary) {
  const auto d = ring_files("estimate_btc");
  const auto r = run("estimate-btc --train " + (d / "train.csv").string() + " --train-labels " +
                     (d / "train_labels.csv").string() + " --alpha 0.01 --out-dir " + (d / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto ds = load_dense_dataset(d / "train.csv", d / "train_labels.csv");
  const auto dict = build_dictionary(ds.samples, ds.labels, NormMode::L2Columns);
  EXPECT_EQ(value_after(r.out, "M_hat"), static_cast<double>(btc_estimate_threshold(dict, 0.01, 1).m_hat));
}

TEST(Cli, PredictionsIndependentOfThreadCount) {
  const auto d = ring_files("threads");
  for (const char* kind : {"btc", "kbtc", "corr"}) {
    const std::string base = "classify " + dataset_args(d) + " --classifier " + kind + " --M 3";
    ASSERT_EQ(run(base + " --threads 1 --out-dir " + (d / "t1").string()).code, 0) << kind;
    ASSERT_EQ(run(base + " --threads 3 --out-dir " + (d / "t3").string()).code, 0) << kind;
    EXPECT_EQ(slurp(d / "t1" / "predictions.csv"), slurp(d / "t3" / "predictions.csv")) << kind;
  }
}

TEST(Cli, ClassifyReportMatchesPredictions) {
  const auto d = ring_files("report");
  const auto r = run("classify " + dataset_args(d) + " --classifier kbtc --out-dir " + (d / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto predicted = load_labels(d / "o" / "predictions.csv");
  const auto truth = load_labels(d / "test_labels.csv");
  ASSERT_EQ(predicted.size(), truth.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  EXPECT_NEAR(value_after(r.out, "OA"), static_cast<double>(hits) / static_cast<double>(truth.size()), 1e-6);
  EXPECT_TRUE(fs::exists(d / "o" / "report.json"));
  EXPECT_TRUE(fs::exists(d / "o" / "report.txt.config"));
}

TEST(Cli, OriginalLabelsAreKept) {
  const auto dir = scratch("labels");
  std::ofstream(dir / "train.csv") << "1,0,0\n0.9,0.1,0\n0,1,0\n0,0.9,0.1\n0,0,1\n0.1,0,0.9\n";
  std::ofstream(dir / "labels.csv") << "7\n7\n3\n3\n12\n12\n";
  std::ofstream(dir / "test.csv") << "0.95,0.05,0\n0,0.1,1\n";
  ASSERT_EQ(run("classify --train " + (dir / "train.csv").string() + " --train-labels " + (dir / "labels.csv").string() +
                " --test " + (dir / "test.csv").string() + " --M 2 --out-dir " + dir.string())
                .code,
            0);
  EXPECT_EQ(slurp(dir / "predictions.csv"), "7\n12\n");
}

TEST(Cli, EnsembleDeterministicForSeed) {
  const auto d = ring_files("ensemble");
  const std::string base = "ensemble " + dataset_args(d) + " --n 3 --B 4 --S 1 --M 2 --tau 0.3";
  ASSERT_EQ(run(base + " --seed 5 --out-dir " + (d / "a").string()).code, 0);
  ASSERT_EQ(run(base + " --seed 5 --threads 2 --out-dir " + (d / "b").string()).code, 0);
  EXPECT_EQ(slurp(d / "a" / "predictions.csv"), slurp(d / "b" / "predictions.csv"));
  EXPECT_EQ(slurp(d / "a" / "margins.csv"), slurp(d / "b" / "margins.csv"));
  EXPECT_TRUE(fs::exists(d / "a" / "rejection.csv.config"));
}

TEST(Cli, RocFromMarginFiles) {
  const auto dir = scratch("roc");
  std::ofstream(dir / "valid.csv") << "0.9\n0.8\n0.7\n";
  std::ofstream(dir / "invalid.csv") << "0.1\n0.2\n";
  const auto r = run("roc --valid-margins " + (dir / "valid.csv").string() + " --invalid-margins " +
                     (dir / "invalid.csv").string() + " --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_DOUBLE_EQ(value_after(r.out, "AUC"), 1.0);
  std::ifstream in(dir / "roc.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 1001);
}

TEST(Cli, HyperspectralPipeline) {
  const auto dir = scratch("hsi");
  ASSERT_EQ(run("synth-scene --bands 12 --seed 4 --out-dir " + dir.string()).code, 0);
  const auto r = run("classify-hsi --cube-header " + (dir / "scene.hdr").string() + " --cube-raw " +
                     (dir / "scene.raw").string() + " --gt " + (dir / "gt.csv").string() + " --train-mask " +
                     (dir / "train_mask.csv").string() + " --M 4 --out-dir " + (dir / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_GE(value_after(r.out, "smoothed OA"), value_after(r.out, "pixelwise OA"));
  const auto map = load_label_map(dir / "o" / "smoothed.csv");
  EXPECT_EQ(map.height, 60);
  EXPECT_TRUE(fs::exists(dir / "o" / "pixelwise.pgm.config"));
  EXPECT_TRUE(fs::exists(dir / "o" / "report_smoothed.json"));
}

TEST(Cli, MaskFromBlocks) {
  const auto dir = scratch("mask");
  std::ofstream(dir / "gt.csv") << "1,1,2\n1,0,2\n3,3,2\n";
  ASSERT_EQ(run("make-mask --gt " + (dir / "gt.csv").string() + " --blocks '0,0,2,2;2,1,1,5' --out-dir " + dir.string())
                .code,
            0);
  const auto mask = load_label_map(dir / "train_mask.csv");
  EXPECT_EQ(mask.labels, (std::vector<int>{1, 1, 0, 1, 0, 0, 0, 3, 2}));
  EXPECT_EQ(run("make-mask --gt " + (dir / "gt.csv").string() + " --out-dir " + dir.string()).code, 2);
}

TEST(Cli, CoherenceMatchesLibrary) {
  const auto d = ring_files("coherence");
  const auto r = run("coherence --train " + (d / "train.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto ds = load_dense_dataset(d / "train.csv", d / "train_labels.csv");
  EXPECT_DOUBLE_EQ(value_after(r.out, "mu"),
                   mutual_coherence(build_dictionary(ds.samples, ds.labels, NormMode::L2Columns)));
}
