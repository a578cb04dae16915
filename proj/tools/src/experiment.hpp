#pragma once

#include "config.hpp"

#include <string>
#include <vector>

namespace glmfunk::cli {

struct MethodSpec {
  std::string name;
  Fusion fusion = Fusion::l2;
  bool unit_graph = false;     // per-unit intercepts fused over the unit graph
  bool feature_graph = false;  // gamma_p tuned over the feature graph
};

// glm-funk-l1, glm-funk-l2, rnc-lasso, lasso, grace-l1, grace-l2.
MethodSpec method_spec(const std::string& name);

struct ReplicateMetrics {
  int replicate = 0;
  std::string method;
  std::string status = "ok";
  double power = 0.0;       // NaN without active coefficients
  double type1_error = 0.0;
  double coverage = 0.0;
  double test_error = 0.0;  // RMSE, or mean deviance for binomial outcomes
  Hyperparams h;
  int iterations = 0;
  bool converged = false;
};

struct SummaryRow {
  std::string method;
  std::string metric;
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  int count = 0;
};

struct ExperimentSettings {
  SimConfig simulation;
  ExperimentConfig experiment;
  TuneConfig tune;
  SolverOptions solver;
  InferenceOptions inference;
  double delta = 0.01;
  double q = 0.001;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct ExperimentResult {
  std::vector<ReplicateMetrics> rows;  // replicate-major, methods in the configured order
  std::vector<SummaryRow> summary;
  std::vector<std::pair<std::string, Hyperparams>> shared_penalties;  // pilot or fixed modes
};

ExperimentSettings experiment_settings(const RunConfig& c);
ExperimentResult run_experiment(const ExperimentSettings& s);
void cmd_experiment(const RunConfig& c);

std::string_view test_metric_name(const Family& f) noexcept;

}  // namespace glmfunk::cli
