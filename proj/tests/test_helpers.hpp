// tests/test_helpers.hpp

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

#ifndef BIGLEARN_TESTS_TEST_HELPERS_HPP_
#define BIGLEARN_TESTS_TEST_HELPERS_HPP_

#include <random>
#include <vector>

#include <Eigen/Core>

#include "biglearn/gaussian.hpp"
#include "biglearn/gmm.hpp"
#include "biglearn/rng.hpp"

namespace biglearn::testing {

// Random SPD matrix B B^T + jitter I with entries of B standard normal.
inline SymMatrix random_spd(Eigen::Index dim, Rng& rng, double jitter = 0.1) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd b(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) b(i, j) = normal(rng);
  return SymMatrix(Eigen::MatrixXd(b * b.transpose() + jitter * Eigen::MatrixXd::Identity(dim, dim)));
}

inline GmmParams random_model(Eigen::Index k, Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  GmmParams model;
  model.weights.resize(k);
  for (Eigen::Index z = 0; z < k; ++z) model.weights(z) = unif(rng);
  model.weights /= model.weights.sum();
  model.means.resize(k, dim);
  for (Eigen::Index z = 0; z < k; ++z)
    for (Eigen::Index j = 0; j < dim; ++j) model.means(z, j) = 2.0 * normal(rng);
  model.covs.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index z = 0; z < k; ++z) model.covs.push_back(random_spd(dim, rng));
  return model;
}

inline bool models_equal(const GmmParams& a, const GmmParams& b, double tol) {
  if (a.num_components() != b.num_components() || a.dim() != b.dim()) return false;
  if (((a.weights - b.weights).array().abs() > tol).any()) return false;
  if (((a.means - b.means).array().abs() > tol).any()) return false;
  for (std::size_t z = 0; z < a.covs.size(); ++z) {
    if (((a.covs[z].mat() - b.covs[z].mat()).array().abs() > tol).any()) return false;
  }
  return true;
}

}  // namespace biglearn::testing

#endif  // BIGLEARN_TESTS_TEST_HELPERS_HPP_
