// biglearn/metrics.hpp
//
// Clustering and density-fit evaluation: posterior-argmax cluster
// assignment, NMI, ARI, and mean test log-likelihood.

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef BIGLEARN_METRICS_HPP_
#define BIGLEARN_METRICS_HPP_

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "biglearn/em.hpp"
#include "biglearn/errors.hpp"
#include "biglearn/gmm.hpp"

#include <json.hpp>

namespace biglearn {

using LabelVector = std::vector<int>;

struct MetricsReport {
  double nmi = 0.0;
  double ari = 0.0;
  double joint_ll = 0.0;  // mean test log-likelihood per sample
  std::optional<double> kl;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["nmi"] = nmi;
    j["ari"] = ari;
    j["joint_ll"] = joint_ll;
    if (kl) j["kl"] = *kl;
    return j;
  }
};

// Posterior argmax per row; ties break toward the smallest component index.
inline LabelVector assign_clusters(const GmmParams& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd logs = detail::weighted_log_densities(model, X);
  LabelVector labels(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < logs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index z = 1; z < logs.cols(); ++z) {
      if (logs(i, z) > logs(i, best)) best = z;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

namespace detail {

struct Contingency {
  std::vector<std::vector<double>> cells;  // rows: truth classes, cols: pred classes
  std::vector<double> row_sums;
  std::vector<double> col_sums;
  double n = 0.0;
};

inline Contingency contingency_table(const LabelVector& truth, const LabelVector& pred) {
  if (truth.size() != pred.size()) {
    throw LengthMismatch("label vectors must have equal length");
  }
  if (truth.empty()) {
    throw LengthMismatch("label vectors must be nonempty");
  }
  int max_t = 0, max_p = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || pred[i] < 0) {
      throw LengthMismatch("labels must be nonnegative");
    }
    max_t = std::max(max_t, truth[i]);
    max_p = std::max(max_p, pred[i]);
  }
  Contingency c;
  c.cells.assign(static_cast<std::size_t>(max_t) + 1,
                 std::vector<double>(static_cast<std::size_t>(max_p) + 1, 0.0));
  c.row_sums.assign(static_cast<std::size_t>(max_t) + 1, 0.0);
  c.col_sums.assign(static_cast<std::size_t>(max_p) + 1, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    c.cells[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])] += 1.0;
    c.row_sums[static_cast<std::size_t>(truth[i])] += 1.0;
    c.col_sums[static_cast<std::size_t>(pred[i])] += 1.0;
  }
  c.n = static_cast<double>(truth.size());
  return c;
}

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace detail

// NMI(truth, pred) = I(truth; pred) / ((H(truth) + H(pred)) / 2), natural
// log. The 0/0 case (both partitions trivial) is defined as 0.
inline double nmi(const LabelVector& truth, const LabelVector& pred) {
  const detail::Contingency c = detail::contingency_table(truth, pred);
  double mi = 0.0;
  for (std::size_t i = 0; i < c.cells.size(); ++i) {
    for (std::size_t j = 0; j < c.cells[i].size(); ++j) {
      const double nij = c.cells[i][j];
      if (nij > 0.0) {
        mi += (nij / c.n) *
              (std::log(nij) + std::log(c.n) - std::log(c.row_sums[i]) - std::log(c.col_sums[j]));
      }
    }
  }
  mi = std::max(mi, 0.0);  // guard rounding just below zero
  const double denom = 0.5 * (detail::entropy(c.row_sums, c.n) + detail::entropy(c.col_sums, c.n));
  if (!(denom > 0.0)) return 0.0;
  return mi / denom;
}

// Adjusted Rand index in the pair-counting form over the contingency table.
// Identical partitions give 1; the expected value under independent random
// labelings is 0. The degenerate case where both partitions are trivial
// (max RI equals its expectation) is defined as 1.
inline double ari(const LabelVector& truth, const LabelVector& pred) {
  const detail::Contingency c = detail::contingency_table(truth, pred);
  if (c.n < 2) {
    throw LengthMismatch("ari requires at least two samples");
  }
  const auto choose2 = [](double m) { return 0.5 * m * (m - 1.0); };
  double index = 0.0;
  for (const auto& row : c.cells)
    for (double cell : row) index += choose2(cell);
  double a = 0.0, b = 0.0;
  for (double r : c.row_sums) a += choose2(r);
  for (double s : c.col_sums) b += choose2(s);
  const double expected = a * b / choose2(c.n);
  const double maximum = 0.5 * (a + b);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

// Mean of log_likelihood over the rows of X_test (the Joint-LL metric).
inline double mean_joint_ll(const GmmParams& model, const Eigen::MatrixXd& X_test) {
  return mean_log_likelihood(model, X_test);
}

}  // namespace biglearn

#endif  // BIGLEARN_METRICS_HPP_
