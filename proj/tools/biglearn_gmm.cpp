// tools/biglearn_gmm.cpp
//
// Command-line front end. Options come from a JSON config document; flags
// given on the command line override file values.

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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "biglearn/biglearn.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const std::size_t sep = text.find("..");
  if (sep == std::string::npos) {
    return {std::stoull(text)};
  }
  const std::uint64_t lo = std::stoull(text.substr(0, sep));
  const std::uint64_t hi = std::stoull(text.substr(sep + 2));
  if (hi < lo) {
    throw biglearn::ConfigError("--seeds range must be nondecreasing");
  }
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  return seeds;
}

struct CliOptions {
  std::string config_path;
  std::string data_path;
  std::string test_path;
  std::string model_path;
  std::string out_dir;
  std::string method;
  std::string seed_range;
  std::int64_t seed = -1;
  bool paper_scale = false;
  int threads = -1;
};

void add_common_options(CLI::App* cmd, CliOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "single seed");
  cmd->add_option("--seeds", opts.seed_range, "seed range N..M (inclusive)");
  cmd->add_option("--method", opts.method, "biglearn-em | joint-em");
  cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
  cmd->add_flag("--paper-scale", opts.paper_scale,
                "use the 10000-iteration / 200-window protocol");
}

biglearn::ExperimentSpec build_spec(const std::string& command, const CliOptions& opts) {
  biglearn::ExperimentSpec spec;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) {
      throw biglearn::ConfigError("cannot open config file " + opts.config_path);
    }
    nlohmann::json j;
    in >> j;
    spec = biglearn::spec_from_json(j);
  }
  spec.command = command;
  if (!opts.data_path.empty()) spec.data_path = opts.data_path;
  if (!opts.test_path.empty()) spec.test_path = opts.test_path;
  if (!opts.model_path.empty()) spec.model_path = opts.model_path;
  if (!opts.out_dir.empty()) spec.out_dir = opts.out_dir;
  if (!opts.method.empty()) spec.method = opts.method;
  if (opts.seed >= 0) {
    spec.seeds = {static_cast<std::uint64_t>(opts.seed)};
  } else if (!opts.seed_range.empty()) {
    spec.seeds = parse_seed_range(opts.seed_range);
  }
  if (opts.threads >= 0) spec.threads = opts.threads;
  if (opts.paper_scale) {
    spec.config.outer_iters = 10000;
    spec.config.tail_window = 200;
  }
  spec.validate();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-mixture training and benchmark toolkit"};
  app.require_subcommand(1);

  CliOptions opts;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "grid-GMM simulation: joint-em vs biglearn-em test KL");
  CLI::App* train = app.add_subcommand("train", "train one model on a dataset");
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a saved model on a dataset");
  CLI::App* ablate = app.add_subcommand("ablate", "configuration-lattice ablation on grid data");
  CLI::App* scarcity = app.add_subcommand("scarcity", "training-set scarcity sweep");
  for (CLI::App* cmd : {simulate, train, evaluate, ablate, scarcity}) {
    add_common_options(cmd, opts);
  }
  for (CLI::App* cmd : {train, evaluate, scarcity}) {
    cmd->add_option("--data", opts.data_path, "dataset file (.csv or sparse label idx:val)");
    cmd->add_option("--test", opts.test_path, "official test file (optional)");
  }
  evaluate->add_option("--model", opts.model_path, "model checkpoint (model.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const biglearn::ExperimentSpec spec = build_spec(command, opts);
    if (command == "simulate") {
      biglearn::run_simulate(spec);
    } else if (command == "train") {
      biglearn::run_train(spec);
    } else if (command == "evaluate") {
      biglearn::run_evaluate(spec);
    } else if (command == "ablate") {
      biglearn::run_ablate(spec);
    } else if (command == "scarcity") {
      biglearn::run_scarcity(spec);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
