#pragma once

#include "config.hpp"

#include "glmfunk/graph.hpp"
#include "glmfunk/solver.hpp"
#include "glmfunk/tune.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glmfunk::cli {

// Column centring and scaling from training data (1/n variance). Constant
// columns keep scale 1.
struct Standardization {
  Vector center;
  Vector scale;
  std::vector<std::string> constant_columns;

  static Standardization identity(Index p);
  static Standardization from_training(const Matrix& X, const std::vector<std::string>& names);
  Matrix apply(const Matrix& X) const;
};

// Replaces the composition columns by log-ratios against the reference, in
// place of the first composition column; the reference column is dropped.
Design apply_alr(const Design& d, const AlrSpec& spec);

struct TrainingSet {
  std::vector<Index> units;  // row order of the model data
  std::vector<std::string> feature_names;
  ModelData data;            // standardized when enabled
  Family family = Family::gaussian();
  std::optional<Graph> full_graph;
  std::optional<Graph> unit_graph;  // induced on `units`
  std::optional<Graph> feature_graph;
  Standardization standardization;
};

std::optional<Graph> load_unit_graph(const RunConfig& c, Index min_nodes);

// Design rows with an outcome (restricted to split == "train" when the
// outcome file has a split column).
TrainingSet load_training(const RunConfig& c);

// Test rows: the test design file when given, else design rows with
// split == "test".
struct TestSet {
  std::vector<Index> units;
  Matrix X;  // raw scale, after ALR
  Vector offsets;
  Vector y;
  bool has_y = false;
};
TestSet load_test(const RunConfig& c);

// glm-funk-l1/l2, rnc-lasso, rnc, grace-l1/l2 or lasso.
std::string method_label(const Hyperparams& h, InterceptMode intercept);

InterceptMode resolve_intercept(const RunConfig& c, const Hyperparams& h, bool has_unit_graph);

Problem make_problem(const TrainingSet& t, InterceptMode intercept);

TuneSpec make_tune_spec(const TuneConfig& tc, const RunConfig& c, const TrainingSet& t);
TuneData make_tune_data(const TrainingSet& t);

// Tunes when the config has a tune block, otherwise returns the fixed penalties.
struct ChosenPenalties {
  Hyperparams h;
  std::optional<TuneResult> tuning;
};
ChosenPenalties choose_penalties(const RunConfig& c, const TrainingSet& t);

json tuning_json(const TuneResult& r);
json standardization_json(const Standardization& s, const std::vector<std::string>& names);

}  // namespace glmfunk::cli
