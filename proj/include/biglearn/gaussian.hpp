// biglearn/gaussian.hpp
//
// Multivariate Gaussian primitives and covariance conditioning. Everything
// here is a pure function; log densities go through a Cholesky factorization
// so they stay finite up to d in the hundreds.

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

#ifndef BIGLEARN_GAUSSIAN_HPP_
#define BIGLEARN_GAUSSIAN_HPP_

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "biglearn/errors.hpp"

namespace biglearn {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Dense symmetric matrix, symmetrized on construction so that
// entries(i,j) == entries(j,i) holds exactly.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw DimensionMismatch("SymMatrix requires a square matrix of dim >= 1");
    }
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix Identity(Eigen::Index dim, double scale = 1.0) {
    return SymMatrix(Eigen::MatrixXd(scale * Eigen::MatrixXd::Identity(dim, dim)));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
};

// Lower Cholesky factor of an SPD matrix together with its half log
// determinant. Shared by the density, sampling, and conditioning code so the
// factorization happens once per covariance.
struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double half_log_det = 0.0;
};

inline CholeskyFactor cholesky(const Eigen::MatrixXd& spd) {
  Eigen::LLT<Eigen::MatrixXd> llt(spd);
  if (llt.info() != Eigen::Success) {
    throw FactorizationFailure("covariance is not positive definite at working precision");
  }
  CholeskyFactor f;
  f.lower = llt.matrixL();
  double hld = 0.0;
  for (Eigen::Index i = 0; i < f.lower.rows(); ++i) {
    const double d = f.lower(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw FactorizationFailure("covariance factorization produced a nonpositive pivot");
    }
    hld += std::log(d);
  }
  f.half_log_det = hld;
  return f;
}

// log N(x | mean, cov) via the triangular factor:
// -1/2 [ d log(2 pi) + log det(cov) + (x-mean)^T cov^{-1} (x-mean) ].
inline double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                               const SymMatrix& cov) {
  if (x.size() != cov.dim() || mean.size() != cov.dim()) {
    throw DimensionMismatch("gaussian_log_pdf: x/mean length must equal cov dim");
  }
  const CholeskyFactor f = cholesky(cov.mat());
  Eigen::VectorXd v = x - mean;
  f.lower.triangularView<Eigen::Lower>().solveInPlace(v);
  return -0.5 * (static_cast<double>(cov.dim()) * kLog2Pi + v.squaredNorm()) - f.half_log_det;
}

// Clamps the eigenvalues of a symmetric matrix to be at least eps, keeping
// the eigenvectors. Output is SPD with lambda_min >= eps up to working
// precision; inputs already above the floor come back unchanged up to
// reconstruction round-off.
inline SymMatrix eigen_floor(const SymMatrix& cov, double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("eigen_floor: eps must be positive");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov.mat());
  if (solver.info() != Eigen::Success) {
    throw FactorizationFailure("eigen_floor: eigendecomposition failed");
  }
  Eigen::VectorXd lambda = solver.eigenvalues().cwiseMax(eps);
  Eigen::MatrixXd rebuilt =
      solver.eigenvectors() * lambda.asDiagonal() * solver.eigenvectors().transpose();
  return SymMatrix(rebuilt);
}

// Weighted mean and maximum-likelihood scatter (normalized by sum(w), not
// sum(w)-1). X is n x d with one sample per row.
inline std::pair<Eigen::VectorXd, SymMatrix> weighted_moments(const Eigen::MatrixXd& X,
                                                              const Eigen::VectorXd& w) {
  if (X.rows() != w.size()) {
    throw DimensionMismatch("weighted_moments: weight length must equal row count");
  }
  const double sw = w.sum();
  if (!(sw > 0.0)) {
    throw DegenerateWeights("weighted_moments: weights sum to zero");
  }
  Eigen::VectorXd mean = X.transpose() * w / sw;
  Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
  Eigen::MatrixXd scatter =
      centered.transpose() * (centered.array().colwise() * w.array()).matrix() / sw;
  return {std::move(mean), SymMatrix(scatter)};
}

}  // namespace biglearn

#endif  // BIGLEARN_GAUSSIAN_HPP_
