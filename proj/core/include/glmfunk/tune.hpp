#pragma once

#include "glmfunk/family.hpp"
#include "glmfunk/graph.hpp"
#include "glmfunk/solver.hpp"
#include "glmfunk/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace glmfunk {

enum class Score { neg_log_lik, rmse };

Score score_from_name(std::string_view name);
std::string_view score_name(Score s) noexcept;

struct Grids {
  std::vector<double> lambda;
  std::vector<double> gamma_n;
  std::vector<double> gamma_p;
};

// `points` log-spaced values between lo and hi inclusive.
std::vector<double> log_grid(double lo, double hi, int points);

// lambda and gamma_p over [1e-4, 10] * |X'y|_inf, gamma_n over [1e-2, 1e2].
Grids default_grids(const ModelData& data, int points = 8);

struct TuneData {
  ModelData data;
  std::optional<Graph> unit_graph;     // over the rows of data
  std::optional<Graph> feature_graph;
  Family family = Family::gaussian();
};

struct TuneSpec {
  Grids grids;
  int k = 10;
  int max_cycles = 5;
  std::uint64_t seed = 1;
  Score score = Score::neg_log_lik;
  bool adjacency_constraint = true;
  Hyperparams base;                     // delta, q and fusion; penalties come from the grids
  std::optional<Hyperparams> initial;   // defaults to the middle of each grid
  std::optional<InterceptMode> intercept;
  SolverOptions solver;
  int threads = 1;

  void validate(Index n, Index p) const;
};

// Held-out linear predictor offset + alpha_test + X beta, with alpha_test
// from harmonic extension over `full_graph` (per-unit fits) or the common
// intercept.
struct HeldOutPrediction {
  Vector eta;
  std::vector<Index> unanchored;  // test units with no path to a training unit
};

HeldOutPrediction predict_held_out(const FitResult& fit, const std::optional<Graph>& full_graph,
                                   std::span<const Index> train_nodes, std::span<const Index> test_nodes,
                                   const Matrix& X_test, const Vector& offsets_test);

// Mean per-observation negative log-likelihood or RMSE on held-out data.
// Poisson means are floored at 1e-10; `floored` counts those events.
double held_out_score(const Family& f, Score score, const Vector& y, const Vector& eta, int* floored = nullptr);

struct CvResult {
  double score = 0.0;                 // mean over scored folds, +inf if none
  std::vector<double> fold_scores;    // NaN for skipped folds
  int skipped = 0;
  int floored = 0;
  std::vector<std::string> warnings;
};

using WarmStarts = std::vector<std::optional<Vector>>;

// K-fold score of one hyperparameter setting. When `warm` is given, each
// fold starts from (and then stores) its previous solution.
CvResult cv_score(const Hyperparams& h, const FoldAssignment& folds, const TuneData& data, const TuneSpec& spec,
                  WarmStarts* warm = nullptr);

struct TuneEvaluation {
  int cycle = 0;
  std::string parameter;  // "lambda", "gamma_n" or "gamma_p"
  Hyperparams h;
  CvResult cv;
};

struct TuneResult {
  Hyperparams best;
  double best_score = 0.0;
  double initial_score = 0.0;
  std::vector<TuneEvaluation> evaluations;
  int cycles = 0;
  bool converged = false;  // a full cycle changed nothing
  FoldAssignment folds;
  std::vector<std::string> warnings;
};

// Cycles lambda -> gamma_n -> gamma_p, each a 1-D grid search over every
// candidate, until a cycle changes nothing or max_cycles is reached. Scores
// within a relative 1e-6 of the best count as ties and go to the larger penalty.
TuneResult coordinate_descent_tune(const TuneSpec& spec, const TuneData& data);

}  // namespace glmfunk
