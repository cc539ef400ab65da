// biglearn/gmm.hpp
//
// The Gaussian mixture model object: densities, responsibilities,
// marginal/conditional extraction, sampling, and Monte-Carlo KL estimation.
// All mixture sums run in log space with log-sum-exp so high-dimensional
// densities never underflow.

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

#ifndef BIGLEARN_GMM_HPP_
#define BIGLEARN_GMM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "biglearn/errors.hpp"
#include "biglearn/gaussian.hpp"
#include "biglearn/rng.hpp"

#include <json.hpp>

namespace biglearn {

// Mixture parameters theta = { pi_i, mu_i, Sigma_i }. Immutable by
// convention: the EM steps return new instances instead of mutating.
struct GmmParams {
  Eigen::VectorXd weights;            // length K, strictly positive, sums to 1
  Eigen::MatrixXd means;              // K x d, row i = mu_i
  std::vector<SymMatrix> covs;        // K matrices of dim d

  Eigen::Index num_components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }
};

// Per-sample posterior over components, n x K; every row sums to 1.
using Responsibilities = Eigen::MatrixXd;

// Ordered feature-index subsets over {0..full_dim-1}: T (nonempty) and an
// optional disjoint conditioning set S.
class IndexSubset {
 public:
  IndexSubset(Eigen::Index full_dim, std::vector<int> indices_t,
              std::vector<int> indices_s = {})
      : full_dim_(full_dim), t_(std::move(indices_t)), s_(std::move(indices_s)) {
    check(t_, "T");
    check(s_, "S");
    if (t_.empty()) {
      throw DimensionMismatch("IndexSubset: T must be nonempty");
    }
    for (int i : t_) {
      if (std::binary_search(s_.begin(), s_.end(), i)) {
        throw DimensionMismatch("IndexSubset: T and S must be disjoint");
      }
    }
  }

  static IndexSubset full(Eigen::Index dim) {
    std::vector<int> all(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) all[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return IndexSubset(dim, std::move(all));
  }

  Eigen::Index full_dim() const { return full_dim_; }
  const std::vector<int>& indices_t() const { return t_; }
  const std::vector<int>& indices_s() const { return s_; }
  bool t_is_full() const { return static_cast<Eigen::Index>(t_.size()) == full_dim_; }

 private:
  void check(const std::vector<int>& v, const char* name) const {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0 || v[i] >= full_dim_) {
        throw DimensionMismatch(std::string("IndexSubset: ") + name + " index out of range");
      }
      if (i > 0 && v[i] <= v[i - 1]) {
        throw DimensionMismatch(std::string("IndexSubset: ") + name +
                                " must be strictly increasing");
      }
    }
  }

  Eigen::Index full_dim_;
  std::vector<int> t_;
  std::vector<int> s_;
};

namespace detail {

inline Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& idx) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(idx[j]);
  return out;
}

inline Eigen::MatrixXd select_block(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                                    const std::vector<int>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline Eigen::Index block_rows(Eigen::Index dim) {
  const Eigen::Index budget = 131072 / std::max<Eigen::Index>(dim, 1);
  return std::clamp<Eigen::Index>(budget, 256, 4096);
}

// n x K matrix of log pi_z + log N(x_n | mu_z, Sigma_z). Covariances are
// factorized once; data is processed in row blocks with the component loop
// innermost so each block stays in cache.
inline Eigen::MatrixXd weighted_log_densities(const GmmParams& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.dim()) {
    throw DimensionMismatch("data column count must equal model dim");
  }
  const Eigen::Index n = X.rows();
  const Eigen::Index K = model.num_components();
  const Eigen::Index d = model.dim();
  const Eigen::Index block = block_rows(d);

  std::vector<Eigen::MatrixXd> lowers;
  lowers.reserve(static_cast<std::size_t>(K));
  Eigen::VectorXd log_norms(K);
  for (Eigen::Index z = 0; z < K; ++z) {
    const CholeskyFactor f = cholesky(model.covs[static_cast<std::size_t>(z)].mat());
    lowers.push_back(f.lower);
    log_norms(z) =
        std::log(model.weights(z)) - 0.5 * static_cast<double>(d) * kLog2Pi - f.half_log_det;
  }

  Eigen::MatrixXd out(n, K);
  Eigen::MatrixXd work(block, d);
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index len = std::min(block, n - start);
    const auto rows = X.middleRows(start, len);
    for (Eigen::Index z = 0; z < K; ++z) {
      work.topRows(len) = rows.rowwise() - model.means.row(z);
      // Forward substitution across columns; each step is one contiguous
      // stream, which beats a per-sample triangular solve at small d.
      const Eigen::MatrixXd& lower = lowers[static_cast<std::size_t>(z)];
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < r; ++c) {
          work.col(r).head(len) -= lower(r, c) * work.col(c).head(len);
        }
        work.col(r).head(len) *= 1.0 / lower(r, r);
      }
      out.col(z).segment(start, len) =
          (-0.5 * work.topRows(len).rowwise().squaredNorm().array() + log_norms(z)).matrix();
    }
  }
  return out;
}

inline double log_sum_exp_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  const double mx = m.row(row).maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((m.row(row).array() - mx).exp().sum());
}

// Arguments at or below this floor are treated as exp(x) = 0 exactly. The
// cutoff sits where the true value (< 1e-304) is irrecoverably below the
// round-off of any max-normalized mixture sum, and it keeps the vectorized
// exp away from subnormal outputs, which stall by orders of magnitude.
inline constexpr double kExpArgFloor = -700.0;

// exps[i] = exp(args[i]) with everything at or below the floor flushed to
// exact zero (including -inf from zero mixture weights).
template <typename ArgExpr, typename OutExpr>
inline void exp_flushed(const ArgExpr& args, OutExpr&& out) {
  const Eigen::ArrayXd clamped = args.max(kExpArgFloor);
  out = (clamped > kExpArgFloor).select(clamped.exp(), 0.0);
}

}  // namespace detail

// log p(x) = log sum_i pi_i N(x | mu_i, Sigma_i), via log-sum-exp.
inline double log_likelihood(const GmmParams& model, const Eigen::VectorXd& x) {
  if (x.size() != model.dim()) {
    throw DimensionMismatch("log_likelihood: x length must equal model dim");
  }
  Eigen::MatrixXd logs = detail::weighted_log_densities(model, Eigen::MatrixXd(x.transpose()));
  return detail::log_sum_exp_row(logs, 0);
}

// Row n, entry z = posterior p(z | x_n), normalized per row in log space.
inline Responsibilities responsibilities(const GmmParams& model, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd logs = detail::weighted_log_densities(model, X);
  const Eigen::VectorXd row_max = logs.rowwise().maxCoeff();
  Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(X.rows());
  for (Eigen::Index z = 0; z < logs.cols(); ++z) {
    detail::exp_flushed((logs.col(z) - row_max).array(), logs.col(z).array());
    row_sum += logs.col(z);
  }
  for (Eigen::Index z = 0; z < logs.cols(); ++z) {
    logs.col(z).array() /= row_sum.array();
  }
  return logs;
}

// The exact marginal of the mixture over dimensions T: same weights, means
// restricted to T, covariances restricted to the T x T block.
inline GmmParams marginal_model(const GmmParams& model, const IndexSubset& subset) {
  if (subset.full_dim() != model.dim()) {
    throw DimensionMismatch("marginal_model: subset full_dim must equal model dim");
  }
  const std::vector<int>& t = subset.indices_t();
  GmmParams out;
  out.weights = model.weights;
  out.means = detail::select_columns(model.means, t);
  out.covs.reserve(model.covs.size());
  for (const SymMatrix& cov : model.covs) {
    out.covs.emplace_back(detail::select_block(cov.mat(), t, t));
  }
  return out;
}

// log p(x_T | x_S) for the Gaussian mixture, computed analytically through
// the chain rule: log p(x_{S u T}) - log p(x_S). The conditional mixture has
// reweighted coefficients and Schur-complement component covariances; the
// chain-rule form evaluates the same quantity with one log-sum-exp per term.
inline double conditional_log_likelihood(const GmmParams& model, const Eigen::VectorXd& x,
                                         const IndexSubset& subset) {
  if (x.size() != model.dim()) {
    throw DimensionMismatch("conditional_log_likelihood: x length must equal model dim");
  }
  if (subset.indices_s().empty()) {
    throw DimensionMismatch("conditional_log_likelihood: S must be nonempty");
  }
  const std::vector<int>& s = subset.indices_s();
  const std::vector<int>& t = subset.indices_t();
  const Eigen::Index K = model.num_components();
  const Eigen::VectorXd x_s = detail::select(x, s);
  const Eigen::VectorXd x_t = detail::select(x, t);

  Eigen::VectorXd log_s(K);       // log pi_i + log N(x_S | ...)
  Eigen::VectorXd log_joint(K);   // log pi_i + log N(x_S | ...) + log N(x_T | cond_i)
  for (Eigen::Index i = 0; i < K; ++i) {
    const SymMatrix& cov = model.covs[static_cast<std::size_t>(i)];
    const Eigen::VectorXd mu_s = detail::select(model.means.row(i).transpose(), s);
    const Eigen::VectorXd mu_t = detail::select(model.means.row(i).transpose(), t);
    const SymMatrix cov_ss(detail::select_block(cov.mat(), s, s));
    const Eigen::MatrixXd cov_ts = detail::select_block(cov.mat(), t, s);
    const Eigen::MatrixXd cov_tt = detail::select_block(cov.mat(), t, t);

    const CholeskyFactor f = cholesky(cov_ss.mat());
    // gain = Sigma_TS Sigma_SS^{-1}, via two triangular solves.
    Eigen::MatrixXd tmp = cov_ts.transpose();
    f.lower.triangularView<Eigen::Lower>().solveInPlace(tmp);
    f.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(tmp);
    const Eigen::MatrixXd gain = tmp.transpose();

    const Eigen::VectorXd cond_mean = mu_t + gain * (x_s - mu_s);
    const SymMatrix cond_cov(Eigen::MatrixXd(cov_tt - gain * cov_ts.transpose()));

    log_s(i) = std::log(model.weights(i)) + gaussian_log_pdf(x_s, mu_s, cov_ss);
    log_joint(i) = log_s(i) + gaussian_log_pdf(x_t, cond_mean, cond_cov);
  }

  const auto lse = [](const Eigen::VectorXd& v) {
    const double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
  };
  return lse(log_joint) - lse(log_s);
}

// Draws n samples: component index from Categorical(pi), then
// x = mu_z + L_z u with u standard normal and L_z the Cholesky factor.
inline Eigen::MatrixXd sample(const GmmParams& model, Eigen::Index n, Rng& rng) {
  const Eigen::Index K = model.num_components();
  const Eigen::Index d = model.dim();

  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(static_cast<std::size_t>(K));
  for (const SymMatrix& cov : model.covs) factors.push_back(cholesky(cov.mat()).lower);

  Eigen::VectorXd cumulative(K);
  double acc = 0.0;
  for (Eigen::Index z = 0; z < K; ++z) {
    acc += model.weights(z);
    cumulative(z) = acc;
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd u(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = unif(rng) * acc;
    Eigen::Index z = 0;
    while (z + 1 < K && r > cumulative(z)) ++z;
    for (Eigen::Index j = 0; j < d; ++j) u(j) = normal(rng);
    X.row(i) =
        (model.means.row(z).transpose() + factors[static_cast<std::size_t>(z)] * u).transpose();
  }
  return X;
}

// Unbiased Monte-Carlo estimate of KL[q || p] = E_q[log q(x) - log p(x)].
inline double mc_kl(const GmmParams& q, const GmmParams& p, Eigen::Index n, Rng& rng) {
  if (q.dim() != p.dim()) {
    throw DimensionMismatch("mc_kl: models must share a dimension");
  }
  if (n < 1) {
    throw ConfigError("mc_kl: sample count must be >= 1");
  }
  const Eigen::MatrixXd X = sample(q, n, rng);
  const Eigen::MatrixXd log_q = detail::weighted_log_densities(q, X);
  const Eigen::MatrixXd log_p = detail::weighted_log_densities(p, X);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += detail::log_sum_exp_row(log_q, i) - detail::log_sum_exp_row(log_p, i);
  }
  return total / static_cast<double>(n);
}

// JSON checkpoint format: {"weights":[...], "means":[[...]], "covs":[[[...]]]}.
inline nlohmann::json to_json(const GmmParams& model) {
  nlohmann::json j;
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  nlohmann::json means = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.means.rows(); ++i) {
    means.push_back(std::vector<double>(model.means.row(i).begin(), model.means.row(i).end()));
  }
  j["means"] = std::move(means);
  nlohmann::json covs = nlohmann::json::array();
  for (const SymMatrix& cov : model.covs) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < cov.dim(); ++r) {
      rows.push_back(std::vector<double>(cov.mat().row(r).begin(), cov.mat().row(r).end()));
    }
    covs.push_back(std::move(rows));
  }
  j["covs"] = std::move(covs);
  return j;
}

inline GmmParams gmm_from_json(const nlohmann::json& j) {
  const auto& w = j.at("weights");
  const auto& means = j.at("means");
  const auto& covs = j.at("covs");
  const Eigen::Index K = static_cast<Eigen::Index>(w.size());
  if (K < 1 || means.size() != w.size() || covs.size() != w.size()) {
    throw ParseError("<json>", 0, "weights/means/covs must have equal nonzero length");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(means.at(0).size());
  GmmParams model;
  model.weights.resize(K);
  model.means.resize(K, d);
  model.covs.reserve(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < K; ++i) {
    model.weights(i) = w.at(static_cast<std::size_t>(i)).get<double>();
    const auto& row = means.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != d) {
      throw ParseError("<json>", 0, "ragged means");
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      model.means(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    Eigen::MatrixXd cov(d, d);
    const auto& rows = covs.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(rows.size()) != d) {
      throw ParseError("<json>", 0, "covariance dim mismatch");
    }
    for (Eigen::Index r = 0; r < d; ++r) {
      const auto& cov_row = rows.at(static_cast<std::size_t>(r));
      if (static_cast<Eigen::Index>(cov_row.size()) != d) {
        throw ParseError("<json>", 0, "ragged covariance");
      }
      for (Eigen::Index c = 0; c < d; ++c) {
        cov(r, c) = cov_row.at(static_cast<std::size_t>(c)).get<double>();
      }
    }
    model.covs.emplace_back(cov);
  }
  return model;
}

}  // namespace biglearn

#endif  // BIGLEARN_GMM_HPP_
