// biglearn/dataset.hpp
//
// Dataset ingestion (sparse labeled text and dense CSV), min-max scaling,
// splitting, subsampling, and the synthetic grid mixture used by the
// simulation experiments.

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

#ifndef BIGLEARN_DATASET_HPP_
#define BIGLEARN_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "biglearn/errors.hpp"
#include "biglearn/gmm.hpp"
#include "biglearn/metrics.hpp"
#include "biglearn/rng.hpp"

namespace biglearn {

struct Dataset {
  Eigen::MatrixXd X;  // n x d
  std::optional<LabelVector> labels;
  std::optional<std::vector<std::string>> feature_names;
  std::string name;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

// Per-feature (min, max) pairs fitted on training data, applied to both the
// training and the test split so there is no statistics leakage.
using MinMaxScaler = std::vector<std::pair<double, double>>;

// Parses the sparse "label idx:val idx:val ..." format with 1-based feature
// indices; absent indices become 0.0. Labels are remapped to {0..C-1}
// preserving their sorted original order. The width is the largest index
// seen unless override_dim forces a wider matrix.
inline Dataset load_sparse_labeled(const std::string& path, Eigen::Index override_dim = 0) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path, 0, "cannot open file");
  }
  std::vector<double> raw_labels;
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::string line;
  std::size_t line_number = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double label;
    if (!(ls >> label)) {
      throw ParseError(path, line_number, "expected a numeric label");
    }
    std::vector<std::pair<int, double>> entries;
    std::string token;
    while (ls >> token) {
      const std::size_t colon = token.find(':');
      if (colon == std::string::npos) {
        throw ParseError(path, line_number, "expected idx:val, got '" + token + "'");
      }
      int idx = 0;
      double val = 0.0;
      try {
        idx = std::stoi(token.substr(0, colon));
        val = std::stod(token.substr(colon + 1));
      } catch (const std::exception&) {
        throw ParseError(path, line_number, "malformed idx:val token '" + token + "'");
      }
      if (idx < 1) {
        throw ParseError(path, line_number, "feature indices are 1-based");
      }
      max_index = std::max(max_index, idx);
      entries.emplace_back(idx, val);
    }
    raw_labels.push_back(label);
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) {
    throw EmptyFile(path + ": no data lines");
  }
  const Eigen::Index d = std::max<Eigen::Index>(max_index, override_dim);
  if (d < 1) {
    throw ParseError(path, line_number, "no features found");
  }

  std::map<double, int> remap;
  for (double l : raw_labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& [key, value] : remap) value = next++;

  Dataset data;
  data.name = path;
  data.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), d);
  LabelVector labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    labels[i] = remap.at(raw_labels[i]);
    for (const auto& [idx, val] : rows[i]) {
      data.X(static_cast<Eigen::Index>(i), idx - 1) = val;
    }
  }
  data.labels = std::move(labels);
  return data;
}

// Dense CSV with a mandatory header row; a column named "label" (any
// position) holds integer class labels.
inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path, 0, "cannot open file");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw EmptyFile(path + ": missing header row");
  }
  std::size_t line_number = 1;
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  int label_col = -1;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") {
      label_col = static_cast<int>(c);
    } else {
      feature_names.push_back(header[c]);
    }
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    int label = 0;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw ParseError(path, line_number, "non-numeric cell '" + cell + "'");
      }
      if (static_cast<int>(c) == label_col) {
        label = static_cast<int>(std::llround(v));
      } else {
        row.push_back(v);
      }
      ++c;
    }
    if (c != header.size()) {
      throw ParseError(path, line_number, "row width differs from header");
    }
    rows.push_back(std::move(row));
    if (label_col >= 0) labels.push_back(label);
  }
  if (rows.empty()) {
    throw EmptyFile(path + ": no data rows");
  }
  Dataset data;
  data.name = path;
  data.feature_names = std::move(feature_names);
  data.X.resize(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (label_col >= 0) data.labels = std::move(labels);
  return data;
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ParseError(path, 0, "cannot open file for writing");
  }
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    if (j > 0) out << ',';
    if (data.feature_names && static_cast<Eigen::Index>(data.feature_names->size()) == data.dim()) {
      out << (*data.feature_names)[static_cast<std::size_t>(j)];
    } else {
      out << 'f' << j;
    }
  }
  if (data.labels) out << ",label";
  out << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      if (j > 0) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", data.X(i, j));
      out << buf;
    }
    if (data.labels) out << ',' << (*data.labels)[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

// Feature-wise map x -> (x - min) / (max - min) onto [0, 1]; constant
// features map to 0.0. Returns the fitted parameters so test data can be
// transformed with the training statistics.
inline std::pair<Dataset, MinMaxScaler> minmax_scale(const Dataset& data) {
  if (data.size() < 1) {
    throw DimensionMismatch("minmax_scale: dataset must be nonempty");
  }
  MinMaxScaler scaler(static_cast<std::size_t>(data.dim()));
  Dataset out = data;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const double lo = data.X.col(j).minCoeff();
    const double hi = data.X.col(j).maxCoeff();
    scaler[static_cast<std::size_t>(j)] = {lo, hi};
    if (hi > lo) {
      out.X.col(j) = (data.X.col(j).array() - lo) / (hi - lo);
    } else {
      out.X.col(j).setZero();
    }
  }
  return {std::move(out), std::move(scaler)};
}

// Applies a fitted scaler; values outside the fitted range are allowed to
// leave [0, 1] (no clipping).
inline Dataset minmax_apply(const Dataset& data, const MinMaxScaler& scaler) {
  if (static_cast<Eigen::Index>(scaler.size()) != data.dim()) {
    throw DimensionMismatch("minmax_apply: scaler width differs from data");
  }
  Dataset out = data;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const auto [lo, hi] = scaler[static_cast<std::size_t>(j)];
    if (hi > lo) {
      out.X.col(j) = (data.X.col(j).array() - lo) / (hi - lo);
    } else {
      out.X.col(j).setZero();
    }
  }
  return out;
}

namespace detail {

inline Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.name = data.name;
  out.feature_names = data.feature_names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
  if (data.labels) {
    LabelVector labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      labels[i] = (*data.labels)[static_cast<std::size_t>(rows[i])];
    out.labels = std::move(labels);
  }
  return out;
}

}  // namespace detail

// Seeded uniform shuffle, then split at ceil(n * (1 - test_fraction)).
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                                    Rng& rng) {
  if (data.size() < 2) {
    throw DimensionMismatch("train_test_split: need at least two rows");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("train_test_split: test_fraction must lie in (0, 1)");
  }
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  const Eigen::Index n_train =
      static_cast<Eigen::Index>(std::ceil(static_cast<double>(n) * (1.0 - test_fraction)));
  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> test_rows(order.begin() + n_train, order.end());
  return {detail::take_rows(data, train_rows), detail::take_rows(data, test_rows)};
}

// Uniform sample without replacement of max(1, round(keep_fraction * n))
// rows, returned in their original dataset order.
inline Dataset subsample(const Dataset& data, double keep_fraction, Rng& rng) {
  if (data.size() < 1) {
    throw DimensionMismatch("subsample: dataset must be nonempty");
  }
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ConfigError("subsample: keep_fraction must lie in (0, 1]");
  }
  const Eigen::Index n = data.size();
  Eigen::Index m = static_cast<Eigen::Index>(std::llround(keep_fraction * static_cast<double>(n)));
  m = std::max<Eigen::Index>(1, std::min(m, n));
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Eigen::Index> rows(pool.begin(), pool.begin() + m);
  std::sort(rows.begin(), rows.end());
  return detail::take_rows(data, rows);
}

// Equally weighted side x side lattice of 2-D Gaussians: means on the
// centered square grid {(i - (side-1)/2) * spacing}^2, covariances
// sigma^2 I. Stand-in ground truth for the simulation experiments.
inline GmmParams make_grid_gmm(int side, double spacing, double sigma) {
  if (side < 1) {
    throw ConfigError("make_grid_gmm: side must be >= 1");
  }
  if (!(spacing > 0.0) || !(sigma > 0.0)) {
    throw ConfigError("make_grid_gmm: spacing and sigma must be positive");
  }
  const int k = side * side;
  GmmParams model;
  model.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  model.means.resize(k, 2);
  const double offset = 0.5 * static_cast<double>(side - 1);
  int row = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j, ++row) {
      model.means(row, 0) = (static_cast<double>(i) - offset) * spacing;
      model.means(row, 1) = (static_cast<double>(j) - offset) * spacing;
    }
  }
  model.covs.assign(static_cast<std::size_t>(k), SymMatrix::Identity(2, sigma * sigma));
  return model;
}

}  // namespace biglearn

#endif  // BIGLEARN_DATASET_HPP_
