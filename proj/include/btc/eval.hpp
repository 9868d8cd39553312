#pragma once

// Confusion matrix, overall/average accuracy and Cohen's kappa, plus report
// serialization.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <algorithm>
#include <map>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "btc/data.hpp"
#include "btc/error.hpp"

namespace btc {

struct EvalReport {
  Eigen::MatrixXi confusion;  // rows = truth, cols = prediction, class j at index j-1
  Vector per_class_accuracy;  // NaN for classes without truth samples
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  double elapsed_seconds = 0.0;
  std::map<std::string, std::string> config;

  Index total() const { return confusion.sum(); }
};

/// Scores predictions against truth; truth entries equal to 0 are skipped.
inline EvalReport evaluate(std::span<const int> predicted, std::span<const int> truth, int classes = 0) {
  if (predicted.size() != truth.size())
    throw InvalidArgument("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(truth.size()) + " truth labels");
  int c_max = classes;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0) continue;
    if (truth[i] < 0 || predicted[i] < 1)
      throw InvalidArgument("evaluate: label outside 1..C at position " + std::to_string(i));
    c_max = std::max({c_max, truth[i], predicted[i]});
  }
  EvalReport report;
  report.confusion = Eigen::MatrixXi::Zero(c_max, c_max);
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] != 0) ++report.confusion(truth[i] - 1, predicted[i] - 1);
  const double total = report.confusion.sum();
  if (total == 0) throw InvalidArgument("evaluate: no labeled samples");

  const Eigen::VectorXd rows = report.confusion.rowwise().sum().cast<double>();
  const Eigen::VectorXd cols = report.confusion.colwise().sum().transpose().cast<double>();
  report.per_class_accuracy = Vector::Constant(c_max, std::nan(""));
  double recall_sum = 0.0;
  int present = 0;
  for (int k = 0; k < c_max; ++k)
    if (rows[k] > 0) {
      report.per_class_accuracy[k] = report.confusion(k, k) / rows[k];
      recall_sum += report.per_class_accuracy[k];
      ++present;
    }
  const double agree = report.confusion.trace() / total;
  const double chance = rows.dot(cols) / (total * total);
  report.oa = agree;
  report.aa = recall_sum / present;
  if (chance >= 1.0) {
    if (agree < 1.0) throw NumericalError("evaluate: kappa undefined (chance agreement is 1)");
    report.kappa = 1.0;
  } else {
    report.kappa = (agree - chance) / (1.0 - chance);
  }
  return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["oa"] = r.oa;
  j["aa"] = r.aa;
  j["kappa"] = r.kappa;
  j["elapsed_s"] = r.elapsed_seconds;
  auto& confusion = j["confusion"] = nlohmann::json::array();
  for (Index i = 0; i < r.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < r.confusion.cols(); ++k) row.push_back(r.confusion(i, k));
    confusion.push_back(row);
  }
  auto& acc = j["per_class_acc"] = nlohmann::json::array();
  for (Index k = 0; k < r.per_class_accuracy.size(); ++k) {
    if (std::isnan(r.per_class_accuracy[k])) acc.push_back(nullptr);
    else acc.push_back(r.per_class_accuracy[k]);
  }
  j["config"] = r.config;
  return j;
}

/// key = value lines; the confusion matrix is written row by row.
inline std::string to_text(const EvalReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "oa = " << r.oa << "\naa = " << r.aa << "\nkappa = " << r.kappa << "\nelapsed_s = " << r.elapsed_seconds
      << '\n';
  for (Index k = 0; k < r.per_class_accuracy.size(); ++k)
    out << "per_class_acc." << k + 1 << " = " << r.per_class_accuracy[k] << '\n';
  for (Index i = 0; i < r.confusion.rows(); ++i) {
    out << "confusion." << i + 1 << " =";
    for (Index k = 0; k < r.confusion.cols(); ++k) out << ' ' << r.confusion(i, k);
    out << '\n';
  }
  for (const auto& [key, value] : r.config) out << "config." << key << " = " << value << '\n';
  return out.str();
}

inline void write_report(const EvalReport& r, const std::filesystem::path& stem) {
  auto text = detail::open_output(std::filesystem::path(stem).concat(".txt"));
  text << to_text(r);
  auto json = detail::open_output(std::filesystem::path(stem).concat(".json"));
  json << to_json(r).dump(2) << '\n';
}

}  // namespace btc
