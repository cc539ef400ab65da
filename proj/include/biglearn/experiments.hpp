// biglearn/experiments.hpp
//
// Experiment orchestration behind the CLI: the simulation study, benchmark
// training/evaluation, the ablation lattice, and the scarcity sweep. Each
// command is a pure function of (input files, spec, seeds); outputs are
// written with fixed formatting so reruns are byte-identical. Seeds run on a
// small worker pool; every seed derives its own random streams, so results
// do not depend on scheduling.

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

#ifndef BIGLEARN_EXPERIMENTS_HPP_
#define BIGLEARN_EXPERIMENTS_HPP_

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "biglearn/dataset.hpp"
#include "biglearn/em.hpp"
#include "biglearn/errors.hpp"
#include "biglearn/gmm.hpp"
#include "biglearn/metrics.hpp"
#include "biglearn/rng.hpp"

#include <json.hpp>

namespace biglearn {

struct SyntheticSpec {
  int grid_side = 5;
  double grid_spacing = 2.0;
  double grid_sigma = 0.1;
  Eigen::Index n_train = 10000;
};

struct ExperimentSpec {
  std::string command;  // simulate | train | evaluate | ablate | scarcity
  std::string data_path;
  std::string test_path;   // optional official test file
  std::string model_path;  // for evaluate
  std::string out_dir = ".";
  std::string method = "biglearn-em";  // biglearn-em | joint-em
  std::vector<std::uint64_t> seeds{0};
  BigLearnConfig config;
  SyntheticSpec synthetic;
  Eigen::Index mc_samples = 100000;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::vector<double> fractions{0.8, 0.6, 0.4, 0.2, 0.1, 0.05};
  int threads = 0;  // 0 = hardware concurrency

  void validate() const {
    config.validate();
    if (seeds.empty()) throw ConfigError("spec: seed list must be nonempty");
    if (out_dir.empty()) throw ConfigError("spec: output directory must be set");
    if (mc_samples < 1) throw ConfigError("spec: mc_samples must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ConfigError("spec: test_fraction must lie in (0, 1)");
    }
    for (double f : fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("spec: fractions must lie in (0, 1]");
    }
  }
};

// Loads a spec from the JSON config document; missing keys keep defaults.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  const auto get = [&j](const char* key, auto& into) {
    if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
  };
  get("data", spec.data_path);
  get("test", spec.test_path);
  get("model", spec.model_path);
  get("out", spec.out_dir);
  get("method", spec.method);
  get("seeds", spec.seeds);
  get("test_fraction", spec.test_fraction);
  get("split_seed", spec.split_seed);
  get("fractions", spec.fractions);
  get("threads", spec.threads);
  if (j.contains("mc_samples")) spec.mc_samples = j.at("mc_samples").get<long>();
  if (j.contains("config")) {
    const auto& c = j.at("config");
    const auto getc = [&c](const char* key, auto& into) {
      if (c.contains(key)) into = c.at(key).get<std::decay_t<decltype(into)>>();
    };
    getc("K", spec.config.num_components);
    getc("eta", spec.config.eta);
    getc("eps", spec.config.eps);
    getc("p_joint", spec.config.p_joint);
    getc("p_marginal", spec.config.p_marginal);
    getc("local_updates", spec.config.local_updates);
    getc("beta1", spec.config.beta1);
    getc("beta2", spec.config.beta2);
    getc("outer_iters", spec.config.outer_iters);
    getc("tail_window", spec.config.tail_window);
    getc("init_mean_std", spec.config.init_mean_std);
    getc("init_cov_scale", spec.config.init_cov_scale);
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    const auto gets = [&s](const char* key, auto& into) {
      if (s.contains(key)) into = s.at(key).get<std::decay_t<decltype(into)>>();
    };
    gets("grid_side", spec.synthetic.grid_side);
    gets("grid_spacing", spec.synthetic.grid_spacing);
    gets("grid_sigma", spec.synthetic.grid_sigma);
    if (s.contains("n_train")) spec.synthetic.n_train = s.at("n_train").get<long>();
  }
  return spec;
}

// Baseline projection: the joint-em method is the classical EM, i.e. always
// the joint branch and no weight prior.
inline BigLearnConfig project_method(BigLearnConfig cfg, const std::string& method) {
  if (method == "joint-em") {
    cfg.p_joint = 1.0;
    cfg.p_marginal = 0.0;
    cfg.eta = 0.0;
  } else if (method != "biglearn-em") {
    throw ConfigError("unknown method '" + method + "' (expected biglearn-em or joint-em)");
  }
  return cfg;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write " + path.string());
  }
  out << contents;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

// Runs `count` independent jobs on a worker pool; the first exception wins
// and is rethrown after all workers stop.
inline void parallel_for_jobs(int count, int threads, const std::function<void(int)>& job) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

// Column means over the last `window` trace records. Falls back to a direct
// evaluation of the final model when the trace is empty (outer_iters = 0).
inline std::vector<double> tail_means(const TrainTrace& trace, int window, const GmmParams& model,
                                      const Evaluator& evaluator) {
  if (trace.records.empty()) {
    return evaluator(model);
  }
  const std::size_t cols = trace.eval_columns.size();
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(window), trace.records.size());
  std::vector<double> sums(cols, 0.0);
  for (std::size_t i = trace.records.size() - take; i < trace.records.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) sums[c] += trace.records[i].eval_values[c];
  }
  for (double& s : sums) s /= static_cast<double>(take);
  return sums;
}

struct PreparedData {
  Dataset train;
  Dataset test;
  MinMaxScaler scaler;
};

inline Dataset load_any(const std::string& path, Eigen::Index override_dim = 0) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return load_csv(path);
  }
  return load_sparse_labeled(path, override_dim);
}

// Shared ingestion pipeline: load, split (official test file when given,
// otherwise a seeded split), then min-max scale with train statistics only.
inline PreparedData prepare_data(const ExperimentSpec& spec) {
  PreparedData out;
  Dataset train_raw;
  Dataset test_raw;
  if (!spec.test_path.empty()) {
    train_raw = load_any(spec.data_path);
    test_raw = load_any(spec.test_path, train_raw.dim());
    if (test_raw.dim() != train_raw.dim()) {
      throw ConfigError("test file dimension differs from training file");
    }
  } else {
    const Dataset all = load_any(spec.data_path);
    Rng split_rng = make_rng(spec.split_seed, RngStream::kSplit);
    std::tie(train_raw, test_raw) = train_test_split(all, spec.test_fraction, split_rng);
  }
  auto [train_scaled, scaler] = minmax_scale(train_raw);
  out.train = std::move(train_scaled);
  out.scaler = scaler;
  out.test = minmax_apply(test_raw, scaler);
  return out;
}

// Per-iteration test metrics for the trace: nmi + ari when labels exist,
// joint_ll always.
inline std::pair<std::vector<std::string>, Evaluator> make_test_evaluator(const Dataset& test) {
  std::vector<std::string> columns;
  const bool labeled = test.labels.has_value();
  if (labeled) {
    columns = {"nmi", "ari", "joint_ll"};
  } else {
    columns = {"joint_ll"};
  }
  const Eigen::MatrixXd X = test.X;
  const std::optional<LabelVector> truth = test.labels;
  Evaluator eval = [X, truth, labeled](const GmmParams& model) {
    std::vector<double> values;
    if (labeled) {
      const LabelVector pred = assign_clusters(model, X);
      values.push_back(nmi(*truth, pred));
      values.push_back(ari(*truth, pred));
    }
    values.push_back(mean_joint_ll(model, X));
    return values;
  };
  return {columns, eval};
}

}  // namespace detail

inline std::uint64_t method_salt(const std::string& method) {
  return method == "joint-em" ? 1 : 2;
}

// ---------------------------------------------------------------------------
// simulate: per seed, draw grid-GMM data, train both methods with identical
// budgets, and estimate the test joint KL against the ground truth.

struct SimulateResult {
  std::vector<std::string> methods;
  // kl[m][s] = KL of method m on seed s
  std::vector<std::vector<double>> kl;
};

inline SimulateResult run_simulate(const ExperimentSpec& spec, bool write_models = true) {
  spec.validate();
  const GmmParams truth =
      make_grid_gmm(spec.synthetic.grid_side, spec.synthetic.grid_spacing,
                    spec.synthetic.grid_sigma);
  std::filesystem::create_directories(spec.out_dir);

  SimulateResult result;
  result.methods = {"joint-em", "biglearn-em"};
  result.kl.assign(result.methods.size(), std::vector<double>(spec.seeds.size(), 0.0));

  const int jobs = static_cast<int>(spec.seeds.size());
  detail::parallel_for_jobs(jobs, spec.threads, [&](int s) {
    const std::uint64_t seed = spec.seeds[static_cast<std::size_t>(s)];
    Rng data_rng = make_rng(seed, RngStream::kData);
    const Eigen::MatrixXd X = sample(truth, spec.synthetic.n_train, data_rng);
    for (std::size_t m = 0; m < result.methods.size(); ++m) {
      const std::string& method = result.methods[m];
      const BigLearnConfig cfg = project_method(spec.config, method);
      Rng train_rng = make_rng(seed, RngStream::kTrain, method_salt(method));
      auto [model, trace] = run_biglearn_em(X, cfg, train_rng);
      Rng kl_rng = make_rng(seed, RngStream::kKl);
      result.kl[m][static_cast<std::size_t>(s)] = mc_kl(truth, model, spec.mc_samples, kl_rng);
      if (write_models) {
        detail::write_json(std::filesystem::path(spec.out_dir) /
                               ("model_" + method + "_seed" + std::to_string(seed) + ".json"),
                           to_json(model));
      }
    }
  });

  std::ostringstream csv;
  csv << "seed,method,kl\n";
  for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
    for (std::size_t m = 0; m < result.methods.size(); ++m) {
      csv << spec.seeds[s] << ',' << result.methods[m] << ','
          << detail::format_double(result.kl[m][s]) << '\n';
    }
  }
  detail::write_file(std::filesystem::path(spec.out_dir) / "per_seed.csv", csv.str());

  nlohmann::json aggregate;
  for (std::size_t m = 0; m < result.methods.size(); ++m) {
    const auto [mean, sd] = detail::mean_and_std(result.kl[m]);
    aggregate[result.methods[m]] = {{"mean", mean}, {"std", sd}, {"num_seeds", spec.seeds.size()}};
  }
  detail::write_json(std::filesystem::path(spec.out_dir) / "aggregate.json", aggregate);
  return result;
}

// ---------------------------------------------------------------------------
// train / evaluate

struct TrainResult {
  GmmParams model;
  TrainTrace trace;
  MetricsReport metrics;  // tail-window means
};

// Trains one model (first seed of the list) on a real dataset and reports
// tail-window-averaged test metrics.
inline TrainResult run_train(const ExperimentSpec& spec, bool write_outputs = true) {
  spec.validate();
  if (spec.data_path.empty()) throw ConfigError("train: data path must be set");
  const detail::PreparedData data = detail::prepare_data(spec);
  const BigLearnConfig cfg = project_method(spec.config, spec.method);
  const std::uint64_t seed = spec.seeds.front();

  auto [columns, evaluator] = detail::make_test_evaluator(data.test);
  Rng rng = make_rng(seed, RngStream::kTrain, method_salt(spec.method));
  auto [model, trace] = run_biglearn_em(data.train.X, cfg, rng, evaluator, columns);

  const std::vector<double> tail = detail::tail_means(trace, cfg.tail_window, model, evaluator);
  TrainResult result{std::move(model), std::move(trace), {}};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "nmi") result.metrics.nmi = tail[c];
    if (columns[c] == "ari") result.metrics.ari = tail[c];
    if (columns[c] == "joint_ll") result.metrics.joint_ll = tail[c];
  }

  if (write_outputs) {
    std::filesystem::create_directories(spec.out_dir);
    detail::write_json(std::filesystem::path(spec.out_dir) / "model.json", to_json(result.model));
    detail::write_file(std::filesystem::path(spec.out_dir) / "trace.csv", result.trace.to_csv());
    detail::write_json(std::filesystem::path(spec.out_dir) / "metrics.json",
                       result.metrics.to_json());
  }
  return result;
}

// Evaluates a saved model checkpoint on the dataset's test split.
inline MetricsReport run_evaluate(const ExperimentSpec& spec, bool write_outputs = true) {
  spec.validate();
  if (spec.data_path.empty()) throw ConfigError("evaluate: data path must be set");
  if (spec.model_path.empty()) throw ConfigError("evaluate: model path must be set");
  const detail::PreparedData data = detail::prepare_data(spec);
  std::ifstream in(spec.model_path);
  if (!in) throw ConfigError("evaluate: cannot open model file " + spec.model_path);
  nlohmann::json j;
  in >> j;
  const GmmParams model = gmm_from_json(j);

  MetricsReport report;
  report.joint_ll = mean_joint_ll(model, data.test.X);
  if (data.test.labels) {
    const LabelVector pred = assign_clusters(model, data.test.X);
    report.nmi = nmi(*data.test.labels, pred);
    report.ari = ari(*data.test.labels, pred);
  }
  if (write_outputs) {
    std::filesystem::create_directories(spec.out_dir);
    detail::write_json(std::filesystem::path(spec.out_dir) / "metrics.json", report.to_json());
  }
  return report;
}

// ---------------------------------------------------------------------------
// ablate: the configuration lattice of Table-1 style rows on the grid data.

struct AblationRow {
  std::string label;
  BigLearnConfig cfg;
};

inline std::vector<AblationRow> ablation_lattice(const BigLearnConfig& base) {
  std::vector<AblationRow> rows;
  {
    BigLearnConfig c = base;  // classical EM: joint branch only, no prior
    c.p_joint = 1.0;
    c.p_marginal = 0.0;
    c.eta = 0.0;
    rows.push_back({"joint-em", c});
  }
  {
    BigLearnConfig c = base;  // + MAP prior on the weights
    c.p_joint = 1.0;
    c.p_marginal = 0.0;
    rows.push_back({"+pr", c});
  }
  {
    BigLearnConfig c = base;  // + marginal matching, transformed branch off
    c.p_joint = 0.5;
    c.p_marginal = 0.5;
    rows.push_back({"+pr+mm", c});
  }
  for (int w : {1, 5, 10}) {
    BigLearnConfig c = base;
    c.p_joint = 1.0 / 3.0;
    c.p_marginal = 1.0 / 3.0;
    c.local_updates = w;
    rows.push_back({"+pr+mm+rtmm+w" + std::to_string(w), c});
  }
  return rows;
}

struct AblateResult {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> kl;  // kl[row][seed]
};

inline AblateResult run_ablate(const ExperimentSpec& spec) {
  spec.validate();
  const GmmParams truth =
      make_grid_gmm(spec.synthetic.grid_side, spec.synthetic.grid_spacing,
                    spec.synthetic.grid_sigma);
  const std::vector<AblationRow> rows = ablation_lattice(spec.config);

  AblateResult result;
  for (const AblationRow& row : rows) result.labels.push_back(row.label);
  result.kl.assign(rows.size(), std::vector<double>(spec.seeds.size(), 0.0));

  const int num_seeds = static_cast<int>(spec.seeds.size());
  const int jobs = static_cast<int>(rows.size()) * num_seeds;
  detail::parallel_for_jobs(jobs, spec.threads, [&](int job) {
    const std::size_t r = static_cast<std::size_t>(job / num_seeds);
    const std::size_t s = static_cast<std::size_t>(job % num_seeds);
    const std::uint64_t seed = spec.seeds[s];
    Rng data_rng = make_rng(seed, RngStream::kData);
    const Eigen::MatrixXd X = sample(truth, spec.synthetic.n_train, data_rng);

    const BigLearnConfig& cfg = rows[r].cfg;
    Evaluator evaluator = nullptr;
    std::vector<std::string> columns;
    if (cfg.eta == 0.0) {
      // With no weight prior a dead component must stay dead; assert it.
      auto dead = std::make_shared<std::vector<bool>>(
          static_cast<std::size_t>(cfg.num_components), false);
      evaluator = [dead](const GmmParams& model) {
        for (Eigen::Index z = 0; z < model.num_components(); ++z) {
          const std::size_t zi = static_cast<std::size_t>(z);
          if ((*dead)[zi] && model.weights(z) != 0.0) {
            throw Error("dead component revived under eta = 0");
          }
          if (model.weights(z) == 0.0) (*dead)[zi] = true;
        }
        return std::vector<double>{};
      };
    }
    Rng train_rng = make_rng(seed, RngStream::kTrain, 100 + r);
    auto [model, trace] = run_biglearn_em(X, cfg, train_rng, evaluator, columns);
    Rng kl_rng = make_rng(seed, RngStream::kKl);
    result.kl[r][s] = mc_kl(truth, model, spec.mc_samples, kl_rng);
  });

  std::filesystem::create_directories(spec.out_dir);
  std::ostringstream csv;
  csv << "config,mean_kl,std_kl,num_seeds\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto [mean, sd] = detail::mean_and_std(result.kl[r]);
    csv << rows[r].label << ',' << detail::format_double(mean) << ','
        << detail::format_double(sd) << ',' << spec.seeds.size() << '\n';
  }
  detail::write_file(std::filesystem::path(spec.out_dir) / "ablation.csv", csv.str());
  return result;
}

// ---------------------------------------------------------------------------
// scarcity: shrink the training split and track NMI/ARI on the fixed test
// split for both methods.

struct ScarcityRow {
  double fraction;
  std::uint64_t seed;
  std::string method;
  double nmi;
  double ari;
};

inline std::vector<ScarcityRow> run_scarcity(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.data_path.empty()) throw ConfigError("scarcity: data path must be set");
  const detail::PreparedData data = detail::prepare_data(spec);
  if (!data.test.labels) throw ConfigError("scarcity: dataset must have labels");

  const std::vector<std::string> methods = {"joint-em", "biglearn-em"};
  const int num_seeds = static_cast<int>(spec.seeds.size());
  const int num_fractions = static_cast<int>(spec.fractions.size());
  const int jobs = num_fractions * num_seeds * static_cast<int>(methods.size());
  std::vector<ScarcityRow> rows(static_cast<std::size_t>(jobs));

  detail::parallel_for_jobs(jobs, spec.threads, [&](int job) {
    const int f = job / (num_seeds * static_cast<int>(methods.size()));
    const int rest = job % (num_seeds * static_cast<int>(methods.size()));
    const int s = rest / static_cast<int>(methods.size());
    const int m = rest % static_cast<int>(methods.size());
    const double fraction = spec.fractions[static_cast<std::size_t>(f)];
    const std::uint64_t seed = spec.seeds[static_cast<std::size_t>(s)];
    const std::string& method = methods[static_cast<std::size_t>(m)];

    Rng sub_rng = make_rng(seed, RngStream::kSubsample, static_cast<std::uint64_t>(f));
    const Dataset sub = subsample(data.train, fraction, sub_rng);

    const BigLearnConfig cfg = project_method(spec.config, method);
    auto [columns, evaluator] = detail::make_test_evaluator(data.test);
    Rng train_rng = make_rng(seed, RngStream::kTrain, method_salt(method));
    auto [model, trace] = run_biglearn_em(sub.X, cfg, train_rng, evaluator, columns);
    const std::vector<double> tail = detail::tail_means(trace, cfg.tail_window, model, evaluator);

    ScarcityRow row{fraction, seed, method, 0.0, 0.0};
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == "nmi") row.nmi = tail[c];
      if (columns[c] == "ari") row.ari = tail[c];
    }
    rows[static_cast<std::size_t>(job)] = std::move(row);
  });

  std::filesystem::create_directories(spec.out_dir);
  std::ostringstream csv;
  csv << "fraction,seed,method,nmi,ari\n";
  for (const ScarcityRow& row : rows) {
    csv << detail::format_double(row.fraction) << ',' << row.seed << ',' << row.method << ','
        << detail::format_double(row.nmi) << ',' << detail::format_double(row.ari) << '\n';
  }
  detail::write_file(std::filesystem::path(spec.out_dir) / "scarcity.csv", csv.str());
  return rows;
}

}  // namespace biglearn

#endif  // BIGLEARN_EXPERIMENTS_HPP_
