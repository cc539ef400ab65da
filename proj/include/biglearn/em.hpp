// biglearn/em.hpp
//
// Parameter-update algorithms for Gaussian mixtures: the classical joint EM
// step, the marginal EM step that updates only a feature subset T, the
// orthogonally transformed marginal step, the MAP mixture-weight update, the
// subset/orthogonal samplers, random initialization, and the outer scheduler
// that mixes all three branches.
//
// Every step is a pure (model, data) -> model function; the scheduler owns
// the only random stream.

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

#ifndef BIGLEARN_EM_HPP_
#define BIGLEARN_EM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "biglearn/errors.hpp"
#include "biglearn/gaussian.hpp"
#include "biglearn/gmm.hpp"
#include "biglearn/rng.hpp"

#include <json.hpp>

namespace biglearn {

// A d x d orthogonal matrix with its transpose cached.
class OrthogonalTransform {
 public:
  explicit OrthogonalTransform(Eigen::MatrixXd a) : a_(std::move(a)), at_(a_.transpose()) {
    if (a_.rows() != a_.cols() || a_.rows() < 1) {
      throw DimensionMismatch("OrthogonalTransform: matrix must be square");
    }
    const double err = (at_ * a_ - Eigen::MatrixXd::Identity(a_.rows(), a_.cols())).norm();
    if (!(err < 1e-10)) {
      throw ConfigError("OrthogonalTransform: A^T A differs from I by " + std::to_string(err));
    }
  }

  static OrthogonalTransform identity(Eigen::Index dim) {
    return OrthogonalTransform(Eigen::MatrixXd::Identity(dim, dim));
  }

  Eigen::Index dim() const { return a_.rows(); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::MatrixXd& transpose() const { return at_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd at_;
};

// Scheduler and regularization hyperparameters.
struct BigLearnConfig {
  int num_components = 25;        // K
  double eta = 0.01;              // MAP pseudo-count for the weight update
  double eps = 1e-3;              // covariance eigenvalue floor
  double p_joint = 1.0 / 3.0;     // P1
  double p_marginal = 1.0 / 3.0;  // P2
  int local_updates = 5;          // W
  double beta1 = 5.0;             // subset-ratio Beta parameters
  double beta2 = 1.0;
  int outer_iters = 400;
  int tail_window = 40;           // metric-averaging window
  std::uint64_t seed = 0;
  double init_mean_std = 1.0;
  double init_cov_scale = 1.0;

  void validate() const {
    if (num_components < 1) throw ConfigError("config: K must be >= 1");
    if (!(eta >= 0.0)) throw ConfigError("config: eta must be nonnegative");
    if (!(eps > 0.0)) throw ConfigError("config: eps must be positive");
    if (p_joint < 0.0 || p_marginal < 0.0 || p_joint + p_marginal > 1.0 + 1e-12) {
      throw ConfigError("config: branch probabilities must satisfy P1 + P2 <= 1");
    }
    if (local_updates < 1) throw ConfigError("config: local_updates must be >= 1");
    if (!(beta1 > 0.0) || !(beta2 > 0.0)) {
      throw ConfigError("config: beta1, beta2 must be positive");
    }
    if (outer_iters < 0) throw ConfigError("config: outer_iters must be >= 0");
    if (tail_window < 1 || (outer_iters > 0 && tail_window > outer_iters)) {
      throw ConfigError("config: tail_window must lie in [1, outer_iters]");
    }
    if (!(init_mean_std > 0.0) || !(init_cov_scale > 0.0)) {
      throw ConfigError("config: init scales must be positive");
    }
  }
};

enum class Branch { kJoint, kMarginal, kTransformed };

inline const char* branch_name(Branch b) {
  switch (b) {
    case Branch::kJoint: return "joint";
    case Branch::kMarginal: return "marginal";
    case Branch::kTransformed: return "transformed";
  }
  return "?";
}

struct TraceRecord {
  int iter = 0;
  Branch branch = Branch::kJoint;
  int subset_size = 0;    // |T|; 0 for the joint branch
  double train_ll = 0.0;  // train joint log-likelihood after the W local updates
  std::vector<double> eval_values;
};

// One record per outer iteration, plus the names of any evaluator columns.
struct TrainTrace {
  std::vector<std::string> eval_columns;
  std::vector<TraceRecord> records;

  std::string to_csv() const {
    std::ostringstream out;
    out << "iter,branch,subset_size,train_ll";
    for (const std::string& c : eval_columns) out << ',' << c;
    out << '\n';
    char buf[40];
    const auto num = [&buf](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    for (const TraceRecord& r : records) {
      out << r.iter << ',' << branch_name(r.branch) << ',' << r.subset_size << ','
          << num(r.train_ll);
      for (double v : r.eval_values) out << ',' << num(v);
      out << '\n';
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const TraceRecord& r : records) {
      nlohmann::json rec;
      rec["iter"] = r.iter;
      rec["branch"] = branch_name(r.branch);
      rec["subset_size"] = r.subset_size;
      rec["train_ll"] = r.train_ll;
      for (std::size_t i = 0; i < eval_columns.size(); ++i) {
        rec[eval_columns[i]] = r.eval_values[i];
      }
      arr.push_back(std::move(rec));
    }
    return arr;
  }
};

// A step failure aborts training; the partial trace rides along for
// postmortems.
struct TrainingAborted : Error {
  TrainingAborted(const std::string& what, TrainTrace partial)
      : Error(what), trace(std::move(partial)) {}
  TrainTrace trace;
};

// MAP estimate of the mixture weights under a symmetric Dirichlet prior:
// pi_z = (soft_count_z + eta) / (1 + K eta). Keeps every weight strictly
// positive for eta > 0, so empty components can be revived later.
inline Eigen::VectorXd map_weight_update(const Eigen::VectorXd& soft_counts, double eta) {
  const Eigen::Index K = soft_counts.size();
  return (soft_counts.array() + eta) / (1.0 + static_cast<double>(K) * eta);
}

namespace detail {

// E-step plus moment M-step of one (possibly partial) EM update, in the
// coordinate system of `model`. With subset == nullptr (or T = full) this is
// a full joint update; otherwise only the T-indexed mean entries and the
// T x T covariance block are overwritten. Components whose responsibility
// mass is zero are reported dead and keep their parameters bitwise.
// Eigenvalue flooring and the weight update are left to the caller, because
// the transformed branch floors only after rotating back.
struct PartialUpdate {
  Eigen::VectorXd soft_counts;      // responsibility means, length K
  std::vector<bool> live;          // component had positive responsibility mass
  Eigen::MatrixXd means;           // K x d, T entries overwritten for live components
  std::vector<Eigen::MatrixXd> covs;  // unfloored, T x T block overwritten for live components
};

// Blocked two-pass moments for every component at once: weighted means from
// one GEMM per block, then centered weighted scatters with a reusable
// workspace. Equivalent to calling weighted_moments per component, with the
// data read once per pass instead of once per component.
struct ComponentMoments {
  Eigen::VectorXd totals;              // responsibility mass per component
  Eigen::MatrixXd means;               // K x d, rows of dead components are garbage
  std::vector<Eigen::MatrixXd> scatters;
};

inline ComponentMoments all_component_moments(const Eigen::MatrixXd& X,
                                              const Responsibilities& resp) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index K = resp.cols();
  const Eigen::Index block = block_rows(d);

  ComponentMoments m;
  m.totals = resp.colwise().sum();
  m.means = Eigen::MatrixXd::Zero(K, d);
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index len = std::min(block, n - start);
    m.means.noalias() += resp.middleRows(start, len).transpose() * X.middleRows(start, len);
  }
  for (Eigen::Index z = 0; z < K; ++z) {
    if (m.totals(z) > 0.0) m.means.row(z) /= m.totals(z);
  }

  m.scatters.assign(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(d, d));
  Eigen::MatrixXd centered(block, d);
  Eigen::MatrixXd weighted(block, d);
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index len = std::min(block, n - start);
    const auto rows = X.middleRows(start, len);
    for (Eigen::Index z = 0; z < K; ++z) {
      if (!(m.totals(z) > 0.0)) continue;
      centered.topRows(len) = rows.rowwise() - m.means.row(z);
      weighted.topRows(len) =
          centered.topRows(len).array().colwise() * resp.col(z).segment(start, len).array();
      m.scatters[static_cast<std::size_t>(z)].noalias() +=
          weighted.topRows(len).transpose() * centered.topRows(len);
    }
  }
  for (Eigen::Index z = 0; z < K; ++z) {
    if (m.totals(z) > 0.0) m.scatters[static_cast<std::size_t>(z)] /= m.totals(z);
  }
  return m;
}

inline PartialUpdate partial_em_update(const GmmParams& model, const Eigen::MatrixXd& X,
                                       const IndexSubset* subset) {
  if (X.rows() < 1) {
    throw DimensionMismatch("em step: data must be nonempty");
  }
  const bool full = subset == nullptr || subset->t_is_full();
  const Eigen::MatrixXd* data = &X;
  Eigen::MatrixXd restricted;
  GmmParams working;
  const GmmParams* e_model = &model;
  if (!full) {
    restricted = select_columns(X, subset->indices_t());
    data = &restricted;
    working = marginal_model(model, *subset);
    e_model = &working;
  }

  const Responsibilities resp = responsibilities(*e_model, *data);
  const ComponentMoments moments = all_component_moments(*data, resp);

  PartialUpdate out;
  out.soft_counts = moments.totals / static_cast<double>(X.rows());
  const Eigen::Index K = model.num_components();
  out.live.assign(static_cast<std::size_t>(K), false);
  out.means = model.means;
  out.covs.reserve(static_cast<std::size_t>(K));
  for (const SymMatrix& cov : model.covs) out.covs.push_back(cov.mat());

  for (Eigen::Index z = 0; z < K; ++z) {
    if (!(moments.totals(z) > 0.0)) continue;
    out.live[static_cast<std::size_t>(z)] = true;
    const Eigen::MatrixXd& scatter = moments.scatters[static_cast<std::size_t>(z)];
    if (full) {
      out.means.row(z) = moments.means.row(z);
      out.covs[static_cast<std::size_t>(z)] = 0.5 * (scatter + scatter.transpose());
    } else {
      const std::vector<int>& t = subset->indices_t();
      Eigen::MatrixXd& cov = out.covs[static_cast<std::size_t>(z)];
      for (std::size_t i = 0; i < t.size(); ++i) {
        out.means(z, t[i]) = moments.means(z, static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < t.size(); ++j) {
          const double sym = 0.5 * (scatter(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                    scatter(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
          cov(t[i], t[j]) = sym;
        }
      }
    }
  }
  return out;
}

inline GmmParams conjugate_model(const GmmParams& model, const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& at) {
  GmmParams out;
  out.weights = model.weights;
  out.means = model.means * at;  // row i becomes (A mu_i)^T
  out.covs.reserve(model.covs.size());
  for (const SymMatrix& cov : model.covs) {
    out.covs.emplace_back(Eigen::MatrixXd(a * cov.mat() * at));
  }
  return out;
}

inline GmmParams finish_step(const GmmParams& model, const PartialUpdate& update,
                             const BigLearnConfig& cfg) {
  GmmParams next = model;
  next.means = update.means;
  for (Eigen::Index z = 0; z < model.num_components(); ++z) {
    const std::size_t zi = static_cast<std::size_t>(z);
    if (update.live[zi]) {
      next.covs[zi] = eigen_floor(SymMatrix(update.covs[zi]), cfg.eps);
    }
  }
  next.weights = map_weight_update(update.soft_counts, cfg.eta);
  return next;
}

}  // namespace detail

// One full E-step + M-step of the joint EM with the MAP weight update.
inline GmmParams joint_em_step(const GmmParams& model, const Eigen::MatrixXd& X,
                               const BigLearnConfig& cfg) {
  if (X.cols() != model.dim()) {
    throw DimensionMismatch("joint_em_step: data columns must equal model dim");
  }
  return detail::finish_step(model, detail::partial_em_update(model, X, nullptr), cfg);
}

// Marginal EM over the feature subset T: the E-step uses the marginal
// mixture on T, the M-step overwrites only the T entries of each mean and
// the T x T block of each covariance, and the full covariance is then
// eigen-floored. All non-T entries are preserved exactly before flooring.
inline GmmParams marginal_em_step(const GmmParams& model, const Eigen::MatrixXd& X,
                                  const IndexSubset& subset, const BigLearnConfig& cfg) {
  if (X.cols() != model.dim() || subset.full_dim() != model.dim()) {
    throw DimensionMismatch("marginal_em_step: data/subset dims must equal model dim");
  }
  if (!subset.indices_s().empty()) {
    throw DimensionMismatch("marginal_em_step: S must be empty");
  }
  return detail::finish_step(model, detail::partial_em_update(model, X, &subset), cfg);
}

// Marginal EM in the rotated coordinate system y = A x: map data and model
// into y-space, run one marginal E/M step there, and map the T-partially
// updated parameters back via mu = A^T mu', Sigma = A^T Sigma' A before
// flooring. Dead components keep their original parameters bitwise instead
// of round-tripping through the rotation.
inline GmmParams transformed_marginal_em_step(const GmmParams& model, const Eigen::MatrixXd& X,
                                              const OrthogonalTransform& transform,
                                              const IndexSubset& subset,
                                              const BigLearnConfig& cfg) {
  if (transform.dim() != model.dim()) {
    throw DimensionMismatch("transformed_marginal_em_step: transform dim must equal model dim");
  }
  if (X.cols() != model.dim() || subset.full_dim() != model.dim()) {
    throw DimensionMismatch("transformed_marginal_em_step: data/subset dims must equal model dim");
  }
  const Eigen::MatrixXd& a = transform.matrix();
  const Eigen::MatrixXd& at = transform.transpose();

  const Eigen::MatrixXd Y = X * at;  // row-wise y = A x
  const GmmParams mapped = detail::conjugate_model(model, a, at);
  const detail::PartialUpdate update = detail::partial_em_update(mapped, Y, &subset);

  GmmParams next = model;
  for (Eigen::Index z = 0; z < model.num_components(); ++z) {
    const std::size_t zi = static_cast<std::size_t>(z);
    if (!update.live[zi]) continue;
    next.means.row(z) = update.means.row(z) * a;  // (A^T mu')^T
    next.covs[zi] = eigen_floor(SymMatrix(Eigen::MatrixXd(at * update.covs[zi] * a)), cfg.eps);
  }
  next.weights = map_weight_update(update.soft_counts, cfg.eta);
  return next;
}

// T sampler: ratio r ~ Beta(beta1, beta2), size m = max(1, round(r L)),
// then m distinct indices uniformly without replacement, sorted. S is empty.
inline IndexSubset sample_subset(Eigen::Index full_dim, double beta1, double beta2, Rng& rng) {
  if (full_dim < 1) {
    throw DimensionMismatch("sample_subset: full_dim must be >= 1");
  }
  std::gamma_distribution<double> ga(beta1, 1.0);
  std::gamma_distribution<double> gb(beta2, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double r = (x + y > 0.0) ? x / (x + y) : 0.5;

  Eigen::Index m = static_cast<Eigen::Index>(std::llround(r * static_cast<double>(full_dim)));
  m = std::max<Eigen::Index>(1, std::min(m, full_dim));

  std::vector<int> pool(static_cast<std::size_t>(full_dim));
  std::iota(pool.begin(), pool.end(), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, full_dim - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + m);
  std::sort(chosen.begin(), chosen.end());
  return IndexSubset(full_dim, std::move(chosen));
}

// Haar-distributed orthogonal matrix: QR of a standard-normal matrix with
// each column of Q flipped to the sign of the matching diagonal of R.
inline OrthogonalTransform sample_orthogonal(Eigen::Index dim, Rng& rng) {
  if (dim < 1) {
    throw DimensionMismatch("sample_orthogonal: dim must be >= 1");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = normal(rng);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& qrmat = qr.matrixQR();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (qrmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return OrthogonalTransform(std::move(q));
}

// Gaussian random initialization: means i.i.d. N(0, init_mean_std^2 I),
// covariances init_cov_scale * I (floored), weights uniform.
inline GmmParams init_model(const BigLearnConfig& cfg, Eigen::Index dim, Rng& rng) {
  cfg.validate();
  const Eigen::Index K = cfg.num_components;
  std::normal_distribution<double> normal(0.0, 1.0);
  GmmParams model;
  model.weights = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  model.means.resize(K, dim);
  for (Eigen::Index z = 0; z < K; ++z)
    for (Eigen::Index j = 0; j < dim; ++j) model.means(z, j) = cfg.init_mean_std * normal(rng);
  const SymMatrix cov = eigen_floor(SymMatrix::Identity(dim, cfg.init_cov_scale), cfg.eps);
  model.covs.assign(static_cast<std::size_t>(K), cov);
  return model;
}

// Mean joint log-likelihood over the rows of X.
inline double mean_log_likelihood(const GmmParams& model, const Eigen::MatrixXd& X) {
  if (X.rows() < 1) {
    throw DimensionMismatch("mean_log_likelihood: data must be nonempty");
  }
  const Eigen::MatrixXd logs = detail::weighted_log_densities(model, X);
  const Eigen::VectorXd row_max = logs.rowwise().maxCoeff();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(X.rows());
  Eigen::ArrayXd term(X.rows());
  for (Eigen::Index z = 0; z < logs.cols(); ++z) {
    detail::exp_flushed((logs.col(z) - row_max).array(), term);
    acc.array() += term;
  }
  return (row_max.array() + acc.array().log()).mean();
}

// Penalized objectives used by the monotonicity checks:
// (1/n) sum_n log p(x_n) + eta sum_z log pi_z.
inline double penalized_joint_objective(const GmmParams& model, const Eigen::MatrixXd& X,
                                        double eta) {
  return mean_log_likelihood(model, X) + eta * model.weights.array().log().sum();
}

inline double penalized_marginal_objective(const GmmParams& model, const Eigen::MatrixXd& X,
                                           const IndexSubset& subset, double eta) {
  const GmmParams marg = marginal_model(model, subset);
  const Eigen::MatrixXd x_t = detail::select_columns(X, subset.indices_t());
  return mean_log_likelihood(marg, x_t) + eta * marg.weights.array().log().sum();
}

using Evaluator = std::function<std::vector<double>(const GmmParams&)>;

// Scheduler. Each outer iteration draws one branch:
//   u < P1        -> W joint steps
//   u < P1 + P2   -> sample T once, W marginal steps on that T
//   otherwise     -> sample A and T once, W transformed-marginal steps
// The trace records the branch, |T|, and the train joint log-likelihood
// after the W local updates, plus any evaluator columns.
inline std::pair<GmmParams, TrainTrace> run_biglearn_em(
    const Eigen::MatrixXd& X, const BigLearnConfig& cfg, Rng& rng,
    const Evaluator& evaluator = nullptr, const std::vector<std::string>& eval_columns = {}) {
  cfg.validate();
  if (X.rows() < 1) {
    throw DimensionMismatch("run_biglearn_em: data must be nonempty");
  }
  const Eigen::Index dim = X.cols();
  GmmParams model = init_model(cfg, dim, rng);

  TrainTrace trace;
  trace.eval_columns = eval_columns;
  trace.records.reserve(static_cast<std::size_t>(cfg.outer_iters));

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int iter = 0; iter < cfg.outer_iters; ++iter) {
    TraceRecord rec;
    rec.iter = iter;
    try {
      const double u = unif(rng);
      if (u < cfg.p_joint) {
        rec.branch = Branch::kJoint;
        for (int w = 0; w < cfg.local_updates; ++w) model = joint_em_step(model, X, cfg);
      } else if (u < cfg.p_joint + cfg.p_marginal) {
        rec.branch = Branch::kMarginal;
        const IndexSubset subset = sample_subset(dim, cfg.beta1, cfg.beta2, rng);
        rec.subset_size = static_cast<int>(subset.indices_t().size());
        for (int w = 0; w < cfg.local_updates; ++w) model = marginal_em_step(model, X, subset, cfg);
      } else {
        rec.branch = Branch::kTransformed;
        const OrthogonalTransform transform = sample_orthogonal(dim, rng);
        const IndexSubset subset = sample_subset(dim, cfg.beta1, cfg.beta2, rng);
        rec.subset_size = static_cast<int>(subset.indices_t().size());
        for (int w = 0; w < cfg.local_updates; ++w)
          model = transformed_marginal_em_step(model, X, transform, subset, cfg);
      }
      rec.train_ll = mean_log_likelihood(model, X);
      if (evaluator) rec.eval_values = evaluator(model);
    } catch (const Error& e) {
      throw TrainingAborted(std::string("training aborted at outer iteration ") +
                                std::to_string(iter) + ": " + e.what(),
                            std::move(trace));
    }
    trace.records.push_back(std::move(rec));
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace biglearn

#endif  // BIGLEARN_EM_HPP_
