// Command-line front end: parameter estimation, dense and hyperspectral
// classification, ensembles, ROC sweeps and a few data helpers.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "btc/btc.hpp"

namespace fs = std::filesystem;
using namespace btc;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kNumerical = 4 };

// ---------------------------------------------------------------------------
// Flat key=value config files

std::vector<std::string> read_config_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    const auto key = detail::trim(body.substr(0, eq));
    const auto value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": empty key");
    if (key == "config" || key == "command") continue;
    args.push_back("--" + std::string(key) + "=" + std::string(value));
  }
  return args;
}

/// Moves `--config FILE` out of argv and splices the file's entries in front of
/// the remaining flags, so that flags given on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string file;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw InvalidArgument("--config needs a file");
      file = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].starts_with("--config=")) {
      file = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      continue;
    }
    auto extra = read_config_args(file);
    from_file.insert(from_file.end(), extra.begin(), extra.end());
    --i;
  }
  if (!from_file.empty()) {
    // after the subcommand name
    const auto pos = args.empty() ? args.end() : args.begin() + 1;
    args.insert(pos, from_file.begin(), from_file.end());
  }
  return args;
}

/// Every option of the subcommand with its resolved value.
std::map<std::string, std::string> resolved_config(const CLI::App& sub) {
  std::map<std::string, std::string> out;
  out["command"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      std::string joined;
      for (const auto& r : opt->reduced_results()) joined += (joined.empty() ? "" : ",") + r;
      out[name] = joined;
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

struct Output {
  fs::path dir;
  std::map<std::string, std::string> config;

  fs::path path(const std::string& name) const { return dir / name; }

  /// Writes `<artifact>.config` with the resolved configuration.
  void sidecar(const fs::path& artifact) const {
    auto out = detail::open_output(fs::path(artifact).concat(".config"));
    for (const auto& [k, v] : config) out << k << " = " << v << '\n';
  }

  template <typename Writer>
  void write(const std::string& name, Writer&& writer) const {
    const fs::path p = path(name);
    {
      auto out = detail::open_output(p);
      out.precision(17);
      writer(out);
      if (!out) throw IoError("failed writing " + p.string());
    }
    sidecar(p);
  }

  void report(const std::string& stem, EvalReport r) const {
    r.config = config;
    write_report(r, path(stem));
    sidecar(path(stem + ".txt"));
    sidecar(path(stem + ".json"));
  }
};

void write_profile(std::ostream& out, const ThresholdProfile& p) {
  out << "M,mean_ratio\n";
  for (std::size_t i = 0; i < p.thresholds.size(); ++i) out << p.thresholds[i] << ',' << p.mean_ratio[i] << '\n';
}

// ---------------------------------------------------------------------------
// Parsing helpers

double parse_grid_value(const std::string& token) {
  const auto t = std::string(detail::trim(token));
  if (t.starts_with("2^")) {
    const auto e = detail::parse_int(t.substr(2));
    if (!e) throw InvalidArgument("bad grid value '" + t + "'");
    return std::ldexp(1.0, static_cast<int>(*e));
  }
  const auto v = detail::parse_double(t);
  if (!v) throw InvalidArgument("bad grid value '" + t + "'");
  return *v;
}

/// "2^a..2^b" (powers of two) or a comma-separated list.
std::vector<double> parse_gamma_grid(const std::string& text) {
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = std::string(detail::trim(text.substr(0, dots)));
    const auto hi = std::string(detail::trim(text.substr(dots + 2)));
    if (!lo.starts_with("2^") || !hi.starts_with("2^")) throw InvalidArgument("range grid must read 2^a..2^b");
    const auto a = detail::parse_int(lo.substr(2)), b = detail::parse_int(hi.substr(2));
    if (!a || !b || *a > *b) throw InvalidArgument("bad grid range '" + text + "'");
    return power_of_two_grid(static_cast<int>(*a), static_cast<int>(*b));
  }
  std::vector<double> grid;
  for (auto token : detail::split(text, ',')) grid.push_back(parse_grid_value(std::string(token)));
  return grid;
}

ScaleRange parse_scale(const std::string& s) {
  if (s == "01") return ScaleRange::ZeroOne;
  if (s == "11") return ScaleRange::MinusOneOne;
  throw InvalidArgument("--scale must be 01 or 11, got '" + s + "'");
}

std::vector<int> encode_labels(const ClassLayout& layout, const std::vector<int>& labels, const std::string& what) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    if (l == 0) {
      out.push_back(0);
      continue;
    }
    const int id = layout.encode(l);
    if (id == 0) throw InvalidArgument(what + " label " + std::to_string(l) + " does not occur in the training labels");
    out.push_back(id);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct Common {
  std::string out_dir = ".";
  std::size_t threads = default_thread_count();
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", "flat key=value file; flags given on the command line take precedence");
  sub->add_option("--out-dir", c.out_dir, "directory for artifacts");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "random seed");
}

Output make_output(const CLI::App& sub, const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + c.out_dir + ": " + ec.message());
  return {c.out_dir, resolved_config(sub)};
}

struct ClassifierOptions {
  std::string kind = "btc";
  Index M = 0;  // 0 = estimate
  double alpha = -1.0;  // negative = kind default
  double gamma = 0.0;   // 0 = estimate
  std::string gamma_grid = "2^-10..2^1";
  std::string scale = "01";
};

void add_classifier(CLI::App* sub, ClassifierOptions& o, bool with_corr) {
  sub->add_option("--classifier", o.kind, "btc or kbtc" + std::string(with_corr ? " or corr" : ""))
      ->check(with_corr ? CLI::IsMember({"btc", "kbtc", "corr"}) : CLI::IsMember({"btc", "kbtc"}));
  sub->add_option("--M", o.M, "threshold (number of selected atoms); 0 estimates it");
  sub->add_option("--alpha", o.alpha, "regularization; negative selects the classifier default");
  sub->add_option("--gamma", o.gamma, "RBF width for kbtc; 0 estimates it");
  sub->add_option("--gamma-grid", o.gamma_grid, "grid for gamma estimation: 2^a..2^b or a comma list");
  sub->add_option("--scale", o.scale, "kbtc feature scaling: 01 or 11")->check(CLI::IsMember({"01", "11"}));
}

/// A trained classifier over a dictionary, with parameters resolved.
struct Trained {
  std::unique_ptr<Dictionary> dict;
  std::string kind;
  BtcParams btc;
  KbtcParams kbtc;
  std::shared_ptr<const KernelCache> cache;

  /// Overwrites the sentinel option values with what was actually used.
  void record(Output& out) const {
    std::ostringstream m, a, g;
    m << (kind == "kbtc" ? kbtc.M : btc.M);
    a.precision(17);
    a << (kind == "kbtc" ? kbtc.alpha : btc.alpha);
    out.config["M"] = m.str();
    out.config["alpha"] = a.str();
    if (kind == "kbtc") {
      g.precision(17);
      g << kbtc.spec.gamma;
      out.config["gamma"] = g.str();
    }
  }

  PixelClassifier pixel() const {
    return kind == "kbtc" ? PixelClassifier::kbtc(*dict, kbtc, cache) : PixelClassifier::btc(*dict, btc);
  }
};

Trained train(const Matrix& samples, const std::vector<int>& labels, const ClassifierOptions& o, double default_alpha,
              std::size_t threads) {
  Trained t;
  t.kind = o.kind;
  if (o.kind == "kbtc") {
    t.dict = std::make_unique<Dictionary>(build_dictionary(samples, labels, NormMode::RangeScaled, parse_scale(o.scale)));
    const double alpha = o.alpha < 0 ? 1e-9 : o.alpha;
    double gamma = o.gamma;
    Index m = o.M;
    if (gamma <= 0.0 || m == 0) {
      const auto grid = gamma > 0.0 ? std::vector<double>{gamma} : parse_gamma_grid(o.gamma_grid);
      const auto est = kbtc_estimate_params(*t.dict, alpha, grid, threads);
      gamma = est.gamma_hat;
      if (m == 0) m = est.m_hat;
      std::cout << "estimated gamma = " << gamma << ", M = " << m << '\n';
    }
    t.kbtc = {m, alpha, KernelSpec::rbf(gamma)};
    t.kbtc.validate(t.dict->feature_count(), t.dict->sample_count());
    t.cache = std::make_shared<const KernelCache>(KernelCache::build(*t.dict, t.kbtc.spec, threads));
  } else {
    t.dict = std::make_unique<Dictionary>(build_dictionary(samples, labels, NormMode::L2Columns));
    const double alpha = o.alpha < 0 ? default_alpha : o.alpha;
    Index m = o.M;
    if (m == 0 && o.kind == "btc") {
      m = btc_estimate_threshold(*t.dict, alpha, threads).m_hat;
      std::cout << "estimated M = " << m << '\n';
    }
    if (m == 0) m = 1;  // corr default
    t.btc = {m, alpha};
    if (o.kind == "btc") t.btc.validate(t.dict->feature_count(), t.dict->sample_count());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Subcommands

void run_estimate_btc(const CLI::App& sub, const Common& c, const std::string& train_path, const std::string& labels_path,
                      double alpha, Index m_min, Index m_max) {
  const auto out = make_output(sub, c);
  const auto ds = load_dense_dataset(train_path, labels_path);
  const auto dict = build_dictionary(ds.samples, ds.labels, NormMode::L2Columns);
  const Index hi = m_max > 0 ? m_max : std::min(dict.feature_count() - 1, dict.sample_count());
  const auto est = btc_estimate_threshold(dict, alpha, m_min, hi, c.threads);
  out.write("btc_profile.csv", [&](std::ostream& o) { write_profile(o, est.profile); });
  out.write("btc_estimate.txt", [&](std::ostream& o) { o << "M_hat = " << est.m_hat << '\n'; });
  std::cout << "M_hat = " << est.m_hat << '\n';
}

void run_estimate_kbtc(const CLI::App& sub, const Common& c, const std::string& train_path,
                       const std::string& labels_path, double alpha, const std::string& grid_text,
                       const std::string& scale, Index m_stride) {
  const auto out = make_output(sub, c);
  const auto ds = load_dense_dataset(train_path, labels_path);
  const auto dict = build_dictionary(ds.samples, ds.labels, NormMode::RangeScaled, parse_scale(scale));
  const auto grid = parse_gamma_grid(grid_text);
  if (grid.empty()) throw InvalidArgument("gamma grid is empty");
  // stride only thins the per-gamma average; M_hat is read from a full scan at gamma_hat
  auto profile = kbtc_gamma_profile(dict, alpha, grid, c.threads, m_stride);
  std::size_t best = 0;
  for (std::size_t i = 1; i < profile.size(); ++i)
    if (profile[i].mean_ratio < profile[best].mean_ratio) best = i;
  const double gamma_hat = profile[best].gamma;
  const auto cache = KernelCache::build(dict, KernelSpec::rbf(gamma_hat), c.threads);
  const Index top = max_threshold(dict);
  if (top < 2) throw InvalidArgument("threshold estimation needs min(B-1, N) >= 2");
  const auto m_profile = kbtc_beta_profile(dict, alpha, cache, 2, top, c.threads);
  const Index m_hat = m_profile.argmin();
  out.write("gamma_profile.csv", [&](std::ostream& o) {
    o << "gamma,mean_ratio\n";
    for (const auto& e : profile) o << e.gamma << ',' << e.mean_ratio << '\n';
  });
  out.write("m_profile.csv", [&](std::ostream& o) { write_profile(o, m_profile); });
  out.write("kbtc_estimate.txt", [&](std::ostream& o) { o << "gamma_hat = " << gamma_hat << "\nM_hat = " << m_hat << '\n'; });
  std::printf("gamma_hat = %.17g\nM_hat = %td\n", gamma_hat, static_cast<std::ptrdiff_t>(m_hat));
}

void run_classify(const CLI::App& sub, const Common& c, const std::string& train_path, const std::string& train_labels,
                  const std::string& test_path, const std::string& test_labels, const ClassifierOptions& o) {
  auto out = make_output(sub, c);
  const auto ds = load_dense_dataset(train_path, train_labels);
  const Matrix test = load_csv_matrix(test_path);
  if (test.cols() != ds.samples.cols())
    throw InvalidArgument("test set has " + std::to_string(test.cols()) + " features, training set has " +
                          std::to_string(ds.samples.cols()));
  const auto t0 = std::chrono::steady_clock::now();
  const Trained t = train(ds.samples, ds.labels, o, 0.01, c.threads);
  t.record(out);
  std::vector<int> predicted(static_cast<std::size_t>(test.rows()));
  parallel_for(predicted.size(), c.threads, [&](std::size_t i) {
    const Vector y = test.row(static_cast<Index>(i)).transpose();
    predicted[i] = t.kind == "corr" ? corr_classify(*t.dict, y, t.btc.M) : t.pixel().classify(y).predicted_class();
  });
  const double elapsed = seconds_since(t0);
  out.write("predictions.csv", [&](std::ostream& os) {
    for (int p : predicted) os << t.dict->layout().decode(p) << '\n';
  });
  if (!test_labels.empty()) {
    const auto truth = encode_labels(t.dict->layout(), load_labels(test_labels), "test");
    auto report = evaluate(predicted, truth, t.dict->class_count());
    report.elapsed_seconds = elapsed;
    out.report("report", report);
    std::printf("OA = %.6f\nAA = %.6f\nkappa = %.6f\n", report.oa, report.aa, report.kappa);
  }
}

struct HsiOptions {
  std::string header, raw, gt, mask;
  std::string smoothing = "wls";
  int box_window = 5;
  WlsParams wls;
  bool apply_mask = true;
  std::string normalization = "global";
};

void run_classify_hsi(const CLI::App& sub, const Common& c, const HsiOptions& h, const ClassifierOptions& o) {
  auto out = make_output(sub, c);
  const HsiCube cube = load_hsi_cube(h.header, h.raw);
  const LabelMap gt = load_label_map(h.gt);
  const LabelMap mask = load_label_map(h.mask);
  const auto split = split_by_mask(cube, gt, mask);
  const auto t0 = std::chrono::steady_clock::now();
  const Trained t = train(split.train_samples, split.train_labels, o, 1e-10, c.threads);
  t.record(out);
  SmoothingConfig cfg;
  cfg.kind = h.smoothing == "none" ? SmoothingKind::None : h.smoothing == "box" ? SmoothingKind::Box : SmoothingKind::Wls;
  cfg.box_window = h.box_window;
  cfg.wls = h.wls;
  cfg.mask = h.apply_mask;
  cfg.normalization = h.normalization == "per-layer" ? CubeNormalization::PerLayer : CubeNormalization::Global;
  const auto result = spatial_spectral_classify(cube, t.pixel(), cfg, c.threads);
  const double elapsed = seconds_since(t0);

  const auto& layout = t.dict->layout();
  auto decoded = [&](const LabelMap& m) {
    LabelMap d = m;
    for (auto& l : d.labels) l = layout.decode(l);
    return d;
  };
  auto emit_map = [&](const std::string& stem, const LabelMap& m) {
    const LabelMap d = decoded(m);
    write_label_map(out.path(stem + ".csv"), d);
    out.sidecar(out.path(stem + ".csv"));
    write_class_map_pgm(out.path(stem + ".pgm"), d, std::max(1, d.max_label()));
    out.sidecar(out.path(stem + ".pgm"));
  };
  auto emit_report = [&](const std::string& stem, const LabelMap& m) {
    std::vector<int> predicted, truth;
    for (const auto& px : split.test_pixels) predicted.push_back(m.at(px.row, px.col));
    truth = encode_labels(layout, split.test_labels, "ground-truth");
    auto r = evaluate(predicted, truth, t.dict->class_count());
    r.elapsed_seconds = elapsed;
    out.report(stem, r);
    return r;
  };
  emit_map("pixelwise", result.pixelwise);
  const auto pixel_report = emit_report("report_pixelwise", result.pixelwise);
  std::printf("pixelwise OA = %.6f\n", pixel_report.oa);
  if (cfg.kind != SmoothingKind::None) {
    emit_map("smoothed", result.smoothed);
    const auto smooth_report = emit_report("report_smoothed", result.smoothed);
    std::printf("smoothed OA = %.6f\n", smooth_report.oa);
  }
}

void run_ensemble(const CLI::App& sub, const Common& c, const std::string& train_path, const std::string& train_labels,
                  const std::string& test_path, const std::string& test_labels, int count, Index target_dim,
                  int sparsity, Index m, double alpha, double tau) {
  const auto out = make_output(sub, c);
  const auto ds = load_dense_dataset(train_path, train_labels);
  const Matrix test = load_csv_matrix(test_path);
  if (test.cols() != ds.samples.cols()) throw InvalidArgument("test and training feature counts differ");
  const auto t0 = std::chrono::steady_clock::now();
  const auto ens = BtcEnsemble::with_seeds(ds.samples, ds.labels, count, target_dim, sparsity, c.seed, {m, alpha});
  std::vector<int> predicted(static_cast<std::size_t>(test.rows()));
  std::vector<double> margins(predicted.size());
  parallel_for(predicted.size(), c.threads, [&](std::size_t i) {
    const auto r = ens.classify(test.row(static_cast<Index>(i)).transpose());
    predicted[i] = r.predicted_class;
    margins[i] = rejection_margin(r.mean_residuals);
  });
  const double elapsed = seconds_since(t0);
  out.write("predictions.csv", [&](std::ostream& os) {
    for (int p : predicted) os << ens.layout().decode(p) << '\n';
  });
  out.write("margins.csv", [&](std::ostream& os) {
    for (double v : margins) os << v << '\n';
  });
  if (tau >= 0.0) {
    out.write("rejection.csv", [&](std::ostream& os) {
      os << "margin,accepted\n";
      for (double v : margins) os << v << ',' << (v >= tau ? 1 : 0) << '\n';
    });
  }
  if (!test_labels.empty()) {
    const auto truth = encode_labels(ens.layout(), load_labels(test_labels), "test");
    auto report = evaluate(predicted, truth, ens.layout().class_count());
    report.elapsed_seconds = elapsed;
    out.report("report", report);
    std::printf("OA = %.6f\n", report.oa);
  }
}

std::vector<double> load_margins(const std::string& path) {
  const Matrix m = load_csv_matrix(path);
  if (m.cols() != 1) throw IoError(path + ": expected one margin per line");
  return {m.data(), m.data() + m.size()};
}

void run_roc(const CLI::App& sub, const Common& c, const std::string& valid, const std::string& invalid, int points) {
  const auto out = make_output(sub, c);
  const auto curve = roc_sweep(load_margins(valid), load_margins(invalid), default_tau_grid(static_cast<std::size_t>(points)));
  out.write("roc.csv", [&](std::ostream& os) {
    os << "tau,tpr,fpr\n";
    for (const auto& p : curve) os << p.tau << ',' << p.tpr << ',' << p.fpr << '\n';
  });
  std::printf("AUC = %.6f\n", roc_auc(curve));
}

void run_synth_recovery(const CLI::App& sub, const Common& c, Index n, Index b, Index k, Index m, double alpha) {
  const auto out = make_output(sub, c);
  const auto p = synthetic::gaussian_recovery(n, b, k, c.seed);
  const auto code = threshold_code(p.sensing, p.measurement, m, alpha);
  const Vector x = code.dense();
  out.write("recovery.csv", [&](std::ostream& os) {
    os << "true,recovered\n";
    for (Index i = 0; i < n; ++i) os << p.truth[i] << ',' << x[i] << '\n';
  });
  Index hits = 0;
  for (Index i : p.true_support) hits += std::count(code.support.begin(), code.support.end(), i);
  std::printf("support hits = %td/%td\nrelative error = %.6f\n", static_cast<std::ptrdiff_t>(hits),
              static_cast<std::ptrdiff_t>(k), (x - p.truth).norm() / p.truth.norm());
}

void run_coherence(const std::string& train_path) {
  const Matrix samples = load_csv_matrix(train_path);
  if (samples.rows() < 2) throw InvalidArgument("coherence needs at least two samples");
  // class labels do not affect coherence; alternate them to satisfy the dictionary shape
  std::vector<int> labels(static_cast<std::size_t>(samples.rows()));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2) + 1;
  std::printf("mu = %.17g\n", mutual_coherence(build_dictionary(samples, labels, NormMode::L2Columns)));
}

void run_make_mask(const CLI::App& sub, const Common& c, const std::string& gt_path, const std::string& blocks,
                   int per_class, const std::string& name) {
  const auto out = make_output(sub, c);
  const LabelMap gt = load_label_map(gt_path);
  LabelMap mask(gt.height, gt.width);
  if (!blocks.empty()) {
    // "row,col,height,width;..."
    for (auto spec : detail::split(blocks, ';')) {
      const auto parts = detail::split(spec, ',');
      if (parts.size() != 4) throw InvalidArgument("block '" + std::string(spec) + "' must be row,col,height,width");
      long long v[4];
      for (int i = 0; i < 4; ++i) {
        const auto p = detail::parse_int(parts[static_cast<std::size_t>(i)]);
        if (!p || *p < 0) throw InvalidArgument("bad block value in '" + std::string(spec) + "'");
        v[i] = *p;
      }
      for (Index r = v[0]; r < std::min<Index>(v[0] + v[2], gt.height); ++r)
        for (Index col = v[1]; col < std::min<Index>(v[1] + v[3], gt.width); ++col) mask.at(r, col) = gt.at(r, col);
    }
  }
  if (per_class > 0) {
    std::mt19937_64 rng(c.seed);
    std::map<int, std::vector<std::size_t>> pixels;
    for (std::size_t i = 0; i < gt.labels.size(); ++i)
      if (gt.labels[i] > 0) pixels[gt.labels[i]].push_back(i);
    for (auto& [label, idx] : pixels) {
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t k = 0; k < std::min(idx.size(), static_cast<std::size_t>(per_class)); ++k) mask.labels[idx[k]] = label;
    }
  }
  if (blocks.empty() && per_class <= 0) throw InvalidArgument("make-mask needs --blocks or --per-class");
  write_label_map(out.path(name), mask);
  out.sidecar(out.path(name));
}

void run_synth_scene(const CLI::App& sub, const Common& c, const synthetic::SceneConfig& cfg) {
  const auto out = make_output(sub, c);
  const auto scene = synthetic::blocky_scene(cfg, c.seed);
  write_hsi_cube(scene.cube, out.path("scene.hdr"), out.path("scene.raw"), "f64");
  write_label_map(out.path("gt.csv"), scene.truth);
  write_label_map(out.path("train_mask.csv"), scene.train_mask);
  for (const char* name : {"scene.hdr", "scene.raw", "gt.csv", "train_mask.csv"}) out.sidecar(out.path(name));
}

int fail(ExitCode code, const std::string& kind, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::cerr << "error[" << kind << "]: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thresholding-based sparse representation classifiers"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  std::string train_path, train_labels, test_path, test_labels;
  ClassifierOptions clf;

  // estimate-btc
  double alpha_btc = 0.01;
  Index m_min = 2, m_max = 0;
  auto* est_btc = app.add_subcommand("estimate-btc", "estimate the linear threshold M from the training set");
  add_common(est_btc, common);
  est_btc->add_option("--train", train_path, "training features CSV")->required();
  est_btc->add_option("--train-labels", train_labels, "training labels")->required();
  est_btc->add_option("--alpha", alpha_btc, "regularization");
  est_btc->add_option("--m-min", m_min, "first threshold scanned");
  est_btc->add_option("--m-max", m_max, "last threshold scanned; 0 = min(B-1, N)");

  // estimate-kbtc
  double alpha_kbtc = 1e-9;
  std::string grid_text = "2^-10..2^1", scale = "01";
  Index m_stride = 1;
  auto* est_kbtc = app.add_subcommand("estimate-kbtc", "estimate the kernel width and threshold");
  add_common(est_kbtc, common);
  est_kbtc->add_option("--train", train_path, "training features CSV")->required();
  est_kbtc->add_option("--train-labels", train_labels, "training labels")->required();
  est_kbtc->add_option("--alpha", alpha_kbtc, "regularization");
  est_kbtc->add_option("--gamma-grid", grid_text, "2^a..2^b or a comma list");
  est_kbtc->add_option("--scale", scale, "feature scaling: 01 or 11")->check(CLI::IsMember({"01", "11"}));
  est_kbtc->add_option("--m-stride", m_stride, "scan every k-th threshold in the gamma profile")->check(CLI::PositiveNumber);

  // classify
  auto* classify = app.add_subcommand("classify", "classify a dense test set");
  add_common(classify, common);
  classify->add_option("--train", train_path, "training features CSV")->required();
  classify->add_option("--train-labels", train_labels, "training labels")->required();
  classify->add_option("--test", test_path, "test features CSV")->required();
  classify->add_option("--test-labels", test_labels, "test labels (enables the report)");
  add_classifier(classify, clf, true);

  // classify-hsi
  HsiOptions hsi;
  auto* classify_hsi = app.add_subcommand("classify-hsi", "pixel-wise and smoothed classification of a cube");
  add_common(classify_hsi, common);
  classify_hsi->add_option("--cube-header", hsi.header, "cube header file")->required();
  classify_hsi->add_option("--cube-raw", hsi.raw, "cube payload")->required();
  classify_hsi->add_option("--gt", hsi.gt, "ground-truth label map CSV")->required();
  classify_hsi->add_option("--train-mask", hsi.mask, "training mask label map CSV")->required();
  add_classifier(classify_hsi, clf, false);
  classify_hsi->add_option("--smoothing", hsi.smoothing, "none, box or wls")->check(CLI::IsMember({"none", "box", "wls"}));
  classify_hsi->add_option("--box-window", hsi.box_window, "odd box window");
  classify_hsi->add_option("--wls-lambda", hsi.wls.lambda, "WLS smoothing degree");
  classify_hsi->add_option("--wls-alpha", hsi.wls.alpha, "WLS gradient exponent");
  classify_hsi->add_option("--wls-epsilon", hsi.wls.epsilon, "WLS gradient floor");
  classify_hsi->add_option("--cg-tol", hsi.wls.cg_tolerance, "CG relative tolerance");
  classify_hsi->add_option("--cg-max-iter", hsi.wls.cg_max_iterations, "CG iteration cap");
  classify_hsi->add_option("--mask", hsi.apply_mask, "mask residual layers by the pixel-wise map (true/false)");
  classify_hsi->add_option("--cube-normalization", hsi.normalization, "global or per-layer")
      ->check(CLI::IsMember({"global", "per-layer"}));

  // ensemble
  int count = 5, sparsity = 3;
  Index target_dim = 30, ens_m = 5;
  double ens_alpha = 0.01, tau = -1.0;
  auto* ensemble = app.add_subcommand("ensemble", "random-projection ensemble of linear classifiers");
  add_common(ensemble, common);
  ensemble->add_option("--train", train_path, "training features CSV")->required();
  ensemble->add_option("--train-labels", train_labels, "training labels")->required();
  ensemble->add_option("--test", test_path, "test features CSV")->required();
  ensemble->add_option("--test-labels", test_labels, "test labels (enables the report)");
  ensemble->add_option("--n", count, "number of classifiers")->check(CLI::PositiveNumber);
  ensemble->add_option("--B", target_dim, "projected dimension");
  ensemble->add_option("--S", sparsity, "projection sparsity")->check(CLI::PositiveNumber);
  ensemble->add_option("--M", ens_m, "threshold");
  ensemble->add_option("--alpha", ens_alpha, "regularization");
  ensemble->add_option("--tau", tau, "rejection threshold; negative disables rejection output");

  // roc
  std::string valid_path, invalid_path;
  int points = 1001;
  auto* roc = app.add_subcommand("roc", "ROC curve from rejection margins");
  add_common(roc, common);
  roc->add_option("--valid-margins", valid_path, "margins of valid samples, one per line")->required();
  roc->add_option("--invalid-margins", invalid_path, "margins of invalid samples, one per line")->required();
  roc->add_option("--grid-points", points, "threshold grid size")->check(CLI::Range(2, 1000000));

  // synth-recovery
  Index rec_n = 512, rec_b = 170, rec_k = 15, rec_m = 120;
  double rec_alpha = 1e-4;
  auto* recovery = app.add_subcommand("synth-recovery", "sparse recovery on a Gaussian sensing matrix");
  add_common(recovery, common);
  recovery->add_option("--n", rec_n, "signal length (atoms)");
  recovery->add_option("--b", rec_b, "measurements");
  recovery->add_option("--k", rec_k, "non-zero entries");
  recovery->add_option("--M", rec_m, "threshold");
  recovery->add_option("--alpha", rec_alpha, "regularization");

  // coherence
  auto* coherence = app.add_subcommand("coherence", "mutual coherence of the normalized samples");
  add_common(coherence, common);
  coherence->add_option("--train", train_path, "features CSV")->required();

  // make-mask
  std::string gt_path, blocks, mask_name = "train_mask.csv";
  int per_class = 0;
  auto* make_mask = app.add_subcommand("make-mask", "training mask from blocks or per-class sampling");
  add_common(make_mask, common);
  make_mask->add_option("--gt", gt_path, "ground-truth label map CSV")->required();
  make_mask->add_option("--blocks", blocks, "row,col,height,width;...");
  make_mask->add_option("--per-class", per_class, "random labeled pixels per class");
  make_mask->add_option("--name", mask_name, "output file name");

  // synth-scene
  synthetic::SceneConfig scene;
  auto* synth_scene = app.add_subcommand("synth-scene", "write a synthetic blocky cube with labels and a mask");
  add_common(synth_scene, common);
  synth_scene->add_option("--height", scene.height, "rows");
  synth_scene->add_option("--width", scene.width, "columns");
  synth_scene->add_option("--bands", scene.bands, "bands");
  synth_scene->add_option("--classes", scene.classes, "classes");
  synth_scene->add_option("--noise", scene.noise, "per-band noise level");

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const IoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const Error& e) {
    return fail(kConfig, "config", e.what());
  }

  try {
    if (*est_btc) run_estimate_btc(*est_btc, common, train_path, train_labels, alpha_btc, m_min, m_max);
    else if (*est_kbtc) run_estimate_kbtc(*est_kbtc, common, train_path, train_labels, alpha_kbtc, grid_text, scale, m_stride);
    else if (*classify) run_classify(*classify, common, train_path, train_labels, test_path, test_labels, clf);
    else if (*classify_hsi) run_classify_hsi(*classify_hsi, common, hsi, clf);
    else if (*ensemble)
      run_ensemble(*ensemble, common, train_path, train_labels, test_path, test_labels, count, target_dim, sparsity, ens_m,
                   ens_alpha, tau);
    else if (*roc) run_roc(*roc, common, valid_path, invalid_path, points);
    else if (*recovery) run_synth_recovery(*recovery, common, rec_n, rec_b, rec_k, rec_m, rec_alpha);
    else if (*coherence) run_coherence(train_path);
    else if (*make_mask) run_make_mask(*make_mask, common, gt_path, blocks, per_class, mask_name);
    else if (*synth_scene) run_synth_scene(*synth_scene, common, scene);
  } catch (const IoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const NumericalError& e) {
    return fail(kNumerical, "numerical", e.what());
  } catch (const InvalidArgument& e) {
    return fail(kConfig, "config", e.what());
  } catch (const std::exception& e) {
    return fail(kNumerical, "numerical", e.what());
  }
  return kOk;
}
