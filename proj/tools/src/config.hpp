#pragma once

#include "io.hpp"

#include "glmfunk/family.hpp"
#include "glmfunk/infer.hpp"
#include "glmfunk/sim.hpp"
#include "glmfunk/solver.hpp"
#include "glmfunk/tune.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glmfunk::cli {

struct AlrSpec {
  std::vector<std::string> columns;
  std::string reference;
  double pseudo_count = 0.0;
};

// Tuning block of a run config. Empty grids fall back to default_grids.
struct TuneConfig {
  std::vector<double> lambda;
  std::vector<double> gamma_n;
  std::vector<double> gamma_p;
  int grid_points = 8;
  int k = 10;
  int max_cycles = 5;
  Score score = Score::neg_log_lik;
  bool adjacency_constraint = true;
};

enum class TuningMode { per_replicate, pilot, fixed };

struct ExperimentConfig {
  std::vector<std::string> methods{"glm-funk-l1", "glm-funk-l2", "rnc-lasso", "lasso"};
  int replicates = 100;
  TuningMode tuning = TuningMode::per_replicate;
  int pilot_replicates = 3;
  // per-method penalties for TuningMode::fixed, keyed by method name
  std::vector<std::pair<std::string, Hyperparams>> fixed;
  double alpha_level = 0.05;
};

struct RunConfig {
  fs::path base_dir;  // relative paths resolve against the config file location

  Family family = Family::gaussian();
  Fusion fusion = Fusion::l2;
  std::optional<Hyperparams> hyperparams;
  std::optional<TuneConfig> tune;
  std::optional<InterceptMode> intercept;
  double delta = 0.01;
  double q = 0.001;
  SolverOptions solver;

  std::optional<fs::path> design;
  std::optional<fs::path> outcomes;
  std::optional<fs::path> test_design;
  std::optional<fs::path> test_outcomes;
  std::optional<fs::path> unit_graph;
  std::optional<fs::path> feature_graph;
  std::optional<fs::path> fit_dir;

  bool standardize = true;
  std::optional<AlrSpec> alr;
  InferenceOptions inference;

  std::optional<SimConfig> simulation;
  ExperimentConfig experiment;

  std::uint64_t seed = 1;
  int threads = 1;
  fs::path out_dir = "out";
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<fs::path> out_dir;
};

RunConfig parse_config(const json& j, const fs::path& base_dir);
RunConfig load_config(const fs::path& path, const CliOverrides& overrides);

json hyperparams_json(const Hyperparams& h);
std::string_view intercept_name(InterceptMode m) noexcept;
std::string_view tuning_mode_name(TuningMode m) noexcept;

}  // namespace glmfunk::cli
