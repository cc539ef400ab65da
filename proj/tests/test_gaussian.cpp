// tests/test_gaussian.cpp

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

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "biglearn/gaussian.hpp"
#include "test_helpers.hpp"

using namespace biglearn;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("gaussian_log_pdf matches the scalar formula") {
  const SymMatrix unit(Eigen::MatrixXd::Identity(1, 1));
  CHECK_THAT(gaussian_log_pdf(vec({0.0}), vec({0.0}), unit),
             Catch::Matchers::WithinAbs(-0.5 * kLog2Pi, 1e-12));
  CHECK_THAT(gaussian_log_pdf(vec({0.0}), vec({0.0}), unit),
             Catch::Matchers::WithinAbs(-0.9189385, 1e-7));

  const SymMatrix eye2(Eigen::MatrixXd::Identity(2, 2));
  CHECK_THAT(gaussian_log_pdf(vec({1.0, 1.0}), vec({1.0, 1.0}), eye2),
             Catch::Matchers::WithinAbs(-kLog2Pi, 1e-12));

  // Scalar case evaluated by hand: -1/2 (log 2pi + log 4 + (2-0)^2 / 4).
  const SymMatrix four(Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, 4.0)));
  CHECK_THAT(gaussian_log_pdf(vec({2.0}), vec({0.0}), four),
             Catch::Matchers::WithinAbs(-0.5 * (kLog2Pi + std::log(4.0) + 1.0), 1e-12));
}

TEST_CASE("gaussian_log_pdf rejects bad inputs") {
  const SymMatrix indefinite(mat2(1.0, 2.0, 2.0, 1.0));  // eigenvalues 3, -1
  CHECK_THROWS_AS(gaussian_log_pdf(vec({0.0, 0.0}), vec({0.0, 0.0}), indefinite),
                  FactorizationFailure);
  const SymMatrix unit(Eigen::MatrixXd::Identity(1, 1));
  CHECK_THROWS_AS(gaussian_log_pdf(vec({0.0, 1.0}), vec({0.0}), unit), DimensionMismatch);
}

TEST_CASE("gaussian density integrates to one") {
  SECTION("d = 1") {
    const SymMatrix cov(Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, 0.7)));
    const Eigen::VectorXd mean = vec({0.3});
    const double h = 1e-3;
    const int steps = 16000;
    double total = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double t = mean(0) - 8.0 + (i + 0.5) * h;
      total += std::exp(gaussian_log_pdf(vec({t}), mean, cov)) * h;
    }
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-3));
  }
  SECTION("d = 2, random SPD") {
    Rng rng = make_rng({42});
    const SymMatrix cov = testing::random_spd(2, rng);
    const Eigen::VectorXd mean = vec({-0.4, 0.9});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.mat());
    const double radius = 7.0 * std::sqrt(es.eigenvalues().maxCoeff());
    const int steps = 400;
    const double h = 2.0 * radius / steps;
    double total = 0.0;
    Eigen::VectorXd x(2);
    for (int i = 0; i < steps; ++i) {
      for (int j = 0; j < steps; ++j) {
        x(0) = mean(0) - radius + (i + 0.5) * h;
        x(1) = mean(1) - radius + (j + 0.5) * h;
        total += std::exp(gaussian_log_pdf(x, mean, cov)) * h * h;
      }
    }
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-3));
  }
}

TEST_CASE("eigen_floor clamps eigenvalues and keeps eigenvectors") {
  const SymMatrix eye(Eigen::MatrixXd::Identity(2, 2));
  CHECK((eigen_floor(eye, 0.01).mat() - eye.mat()).norm() < 1e-12);

  Eigen::MatrixXd d(2, 2);
  d << 1e-6, 0.0, 0.0, 1.0;
  const SymMatrix floored = eigen_floor(SymMatrix(d), 0.01);
  CHECK_THAT(floored(0, 0), Catch::Matchers::WithinAbs(0.01, 1e-12));
  CHECK_THAT(floored(1, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(std::abs(floored(0, 1)) < 1e-12);

  const SymMatrix zero(Eigen::MatrixXd::Zero(2, 2));
  CHECK((eigen_floor(zero, 0.01).mat() - 0.01 * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("eigen_floor is idempotent") {
  Rng rng = make_rng({7});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = normal(rng);
    const SymMatrix sym(m);
    const SymMatrix once = eigen_floor(sym, 0.05);
    const SymMatrix twice = eigen_floor(once, 0.05);
    CHECK((once.mat() - twice.mat()).norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(once.mat());
    CHECK(solver.eigenvalues().minCoeff() >= 0.05 - 1e-12);
  }
}

TEST_CASE("weighted_moments") {
  SECTION("two symmetric points") {
    Eigen::MatrixXd x(2, 1);
    x << 0.0, 2.0;
    const auto [mean, scatter] = weighted_moments(x, vec({1.0, 1.0}));
    CHECK_THAT(mean(0), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THAT(scatter(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-15));
  }
  SECTION("single point has zero scatter") {
    Eigen::MatrixXd x(1, 2);
    x << 5.0, 5.0;
    const auto [mean, scatter] = weighted_moments(x, vec({3.0}));
    CHECK_THAT(mean(0), Catch::Matchers::WithinAbs(5.0, 1e-15));
    CHECK_THAT(mean(1), Catch::Matchers::WithinAbs(5.0, 1e-15));
    CHECK(scatter.mat().norm() < 1e-15);
  }
  SECTION("zero-weight point is ignored") {
    Eigen::MatrixXd x(3, 1);
    x << 0.0, 1.0, 2.0;
    const auto [mean, scatter] = weighted_moments(x, vec({1.0, 0.0, 1.0}));
    CHECK_THAT(mean(0), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THAT(scatter(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-15));
  }
  SECTION("degenerate weights throw") {
    Eigen::MatrixXd x(2, 1);
    x << 0.0, 2.0;
    CHECK_THROWS_AS(weighted_moments(x, vec({0.0, 0.0})), DegenerateWeights);
  }
  SECTION("uniform weights equal maximum-likelihood sample moments") {
    Rng rng = make_rng({11});
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(40, 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = normal(rng);
    const auto [mean, scatter] = weighted_moments(x, Eigen::VectorXd::Constant(40, 1.0));
    const Eigen::VectorXd sample_mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - sample_mean.transpose();
    const Eigen::MatrixXd sample_cov = centered.transpose() * centered / 40.0;
    CHECK((mean - sample_mean).norm() < 1e-12);
    CHECK((scatter.mat() - sample_cov).norm() < 1e-12);
  }
}
