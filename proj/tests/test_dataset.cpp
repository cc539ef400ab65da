// tests/test_dataset.cpp

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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "biglearn/dataset.hpp"
#include "test_helpers.hpp"

using namespace biglearn;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& contents) {
  const std::filesystem::path path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

}  // namespace

TEST_CASE("load_sparse_labeled") {
  SECTION("basic parsing with implicit zeros") {
    const auto path = write_temp("biglearn_sparse_basic.txt",
                                 "2 1:0.5 3:1.0\n"
                                 "1 2:-2.0\n");
    const Dataset data = load_sparse_labeled(path.string());
    REQUIRE(data.size() == 2);
    REQUIRE(data.dim() == 3);
    CHECK(data.X(0, 0) == 0.5);
    CHECK(data.X(0, 1) == 0.0);
    CHECK(data.X(0, 2) == 1.0);
    CHECK(data.X(1, 1) == -2.0);
    REQUIRE(data.labels.has_value());
    CHECK((*data.labels) == LabelVector{1, 0});  // sorted original order 1 < 2
  }
  SECTION("labels -1/+1 remap to 0/1") {
    const auto path = write_temp("biglearn_sparse_pm1.txt",
                                 "-1 1:1.0\n"
                                 "+1 1:2.0\n"
                                 "-1 1:3.0\n");
    const Dataset data = load_sparse_labeled(path.string());
    CHECK((*data.labels) == LabelVector{0, 1, 0});
  }
  SECTION("override widens the matrix") {
    const auto path = write_temp("biglearn_sparse_wide.txt", "1 1:1.0\n");
    const Dataset data = load_sparse_labeled(path.string(), 5);
    CHECK(data.dim() == 5);
    CHECK(data.X(0, 4) == 0.0);
  }
  SECTION("parse errors carry the line number") {
    const auto path = write_temp("biglearn_sparse_bad.txt",
                                 "1 1:1.0\n"
                                 "2 nonsense\n");
    try {
      load_sparse_labeled(path.string());
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line_number == 2);
    }
  }
  SECTION("empty file") {
    const auto path = write_temp("biglearn_sparse_empty.txt", "\n\n");
    CHECK_THROWS_AS(load_sparse_labeled(path.string()), EmptyFile);
  }
}

TEST_CASE("csv round trip") {
  Rng rng = make_rng({211});
  const GmmParams truth = make_grid_gmm(2, 3.0, 0.3);
  Dataset data;
  data.X = sample(truth, 40, rng);
  data.name = "toy";
  LabelVector labels(40);
  for (int i = 0; i < 40; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  data.labels = labels;

  const auto path = std::filesystem::temp_directory_path() / "biglearn_roundtrip.csv";
  save_csv(data, path.string());
  const Dataset back = load_csv(path.string());
  REQUIRE(back.size() == 40);
  REQUIRE(back.dim() == 2);
  CHECK((back.X - data.X).norm() == 0.0);  // %.17g round-trips doubles
  CHECK(*back.labels == labels);
}

TEST_CASE("minmax_scale") {
  Dataset data;
  data.X.resize(3, 2);
  data.X << 0.0, 3.0, 5.0, 3.0, 10.0, 3.0;

  const auto [scaled, scaler] = minmax_scale(data);
  CHECK(scaled.X(0, 0) == 0.0);
  CHECK(scaled.X(1, 0) == 0.5);
  CHECK(scaled.X(2, 0) == 1.0);
  // Constant feature maps to zero.
  CHECK(scaled.X.col(1).norm() == 0.0);

  SECTION("train statistics apply to test data without clipping") {
    Dataset test;
    test.X.resize(1, 2);
    test.X << 20.0, 7.0;
    const Dataset mapped = minmax_apply(test, scaler);
    CHECK(mapped.X(0, 0) == 2.0);  // beyond the train max
    CHECK(mapped.X(0, 1) == 0.0);
  }
  SECTION("non-constant train columns span [0, 1]") {
    Rng rng = make_rng({212});
    std::normal_distribution<double> normal(0.0, 2.5);
    Dataset wide;
    wide.X.resize(30, 4);
    for (Eigen::Index i = 0; i < 30; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) wide.X(i, j) = normal(rng);
    const auto [s, params] = minmax_scale(wide);
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(std::abs(s.X.col(j).minCoeff()) < 1e-12);
      CHECK(std::abs(s.X.col(j).maxCoeff() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("train_test_split") {
  Dataset data;
  data.X.resize(10, 1);
  for (int i = 0; i < 10; ++i) data.X(i, 0) = static_cast<double>(i);
  LabelVector labels(10);
  for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(i)] = i;
  data.labels = labels;

  Rng rng = make_rng({221});
  const auto [train, test] = train_test_split(data, 0.2, rng);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);

  SECTION("labels stay aligned with rows") {
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      CHECK(train.X(i, 0) == static_cast<double>((*train.labels)[static_cast<std::size_t>(i)]));
    }
    for (Eigen::Index i = 0; i < test.size(); ++i) {
      CHECK(test.X(i, 0) == static_cast<double>((*test.labels)[static_cast<std::size_t>(i)]));
    }
  }
  SECTION("the union of the splits is the original multiset") {
    std::vector<double> seen;
    for (Eigen::Index i = 0; i < train.size(); ++i) seen.push_back(train.X(i, 0));
    for (Eigen::Index i = 0; i < test.size(); ++i) seen.push_back(test.X(i, 0));
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 10; ++i) CHECK(seen[static_cast<std::size_t>(i)] == static_cast<double>(i));
  }
  SECTION("deterministic given the seed") {
    Rng rng1 = make_rng({222});
    Rng rng2 = make_rng({222});
    const auto [a_train, a_test] = train_test_split(data, 0.2, rng1);
    const auto [b_train, b_test] = train_test_split(data, 0.2, rng2);
    CHECK((a_train.X - b_train.X).norm() == 0.0);
    CHECK((a_test.X - b_test.X).norm() == 0.0);
  }
}

TEST_CASE("subsample") {
  Dataset data;
  data.X.resize(1000, 1);
  for (int i = 0; i < 1000; ++i) data.X(i, 0) = static_cast<double>(i);

  SECTION("five percent of 1000 rows is 50 rows") {
    Rng rng = make_rng({231});
    CHECK(subsample(data, 0.05, rng).size() == 50);
  }
  SECTION("full fraction returns the identity permutation") {
    Rng rng = make_rng({232});
    const Dataset sub = subsample(data, 1.0, rng);
    REQUIRE(sub.size() == 1000);
    CHECK((sub.X - data.X).norm() == 0.0);
  }
  SECTION("rows keep their original order and are distinct") {
    Rng rng = make_rng({233});
    const Dataset sub = subsample(data, 0.3, rng);
    REQUIRE(sub.size() == 300);
    for (Eigen::Index i = 1; i < sub.size(); ++i) CHECK(sub.X(i, 0) > sub.X(i - 1, 0));
  }
  SECTION("deterministic given the seed") {
    Rng rng1 = make_rng({234});
    Rng rng2 = make_rng({234});
    CHECK((subsample(data, 0.4, rng1).X - subsample(data, 0.4, rng2).X).norm() == 0.0);
  }
}

TEST_CASE("make_grid_gmm") {
  SECTION("single cell sits at the origin") {
    const GmmParams one = make_grid_gmm(1, 2.0, 0.1);
    CHECK(one.num_components() == 1);
    CHECK(one.means.norm() == 0.0);
  }
  SECTION("5 x 5 lattice with spacing 2 spans [-4, 4]^2") {
    const GmmParams grid = make_grid_gmm(5, 2.0, 0.1);
    REQUIRE(grid.num_components() == 25);
    CHECK(std::abs(grid.weights.sum() - 1.0) <= 1e-15);
    // Lattice enumeration oracle.
    int row = 0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j, ++row) {
        CHECK(grid.means(row, 0) == (i - 2) * 2.0);
        CHECK(grid.means(row, 1) == (j - 2) * 2.0);
      }
    }
    CHECK(grid.means.minCoeff() == -4.0);
    CHECK(grid.means.maxCoeff() == 4.0);
    for (const SymMatrix& cov : grid.covs) {
      CHECK(cov(0, 0) == 0.1 * 0.1);
      CHECK(cov(0, 1) == 0.0);
    }
    CHECK(grid.weights(0) == 1.0 / 25.0);
  }
  SECTION("mc_kl of the grid against itself is zero") {
    const GmmParams grid = make_grid_gmm(3, 2.0, 0.2);
    Rng rng = make_rng({241});
    CHECK(mc_kl(grid, grid, 200, rng) == 0.0);
  }
}

TEST_CASE("load, scale, split round trip keeps labels aligned") {
  // Feature 0 encodes the label so alignment survives shuffling.
  Dataset data;
  data.X.resize(25, 2);
  LabelVector labels(25);
  Rng rng = make_rng({251});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 25; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 5;
    data.X(i, 0) = static_cast<double>(i % 5);
    data.X(i, 1) = normal(rng);
  }
  data.labels = labels;
  const auto path = std::filesystem::temp_directory_path() / "biglearn_pipeline.csv";
  save_csv(data, path.string());

  const Dataset loaded = load_csv(path.string());
  Rng split_rng = make_rng({252});
  const auto [train_raw, test_raw] = train_test_split(loaded, 0.2, split_rng);
  const auto [train, scaler] = minmax_scale(train_raw);
  const Dataset test = minmax_apply(test_raw, scaler);
  CHECK(train.size() + test.size() == 25);
  // Scaled feature 0 is label / 4 whenever all five classes appear in train.
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    const int label = (*train.labels)[static_cast<std::size_t>(i)];
    CHECK_THAT(train.X(i, 0), Catch::Matchers::WithinAbs(label / 4.0, 1e-12));
  }
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const int label = (*test.labels)[static_cast<std::size_t>(i)];
    CHECK_THAT(test.X(i, 0), Catch::Matchers::WithinAbs(label / 4.0, 1e-12));
  }
}
