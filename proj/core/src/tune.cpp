#include "glmfunk/tune.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glmfunk {

namespace {

constexpr double kPoissonMeanFloor = 1e-10;
constexpr double kTieTolerance = 1e-6;

bool degenerate_outcomes(const Family& f, const Vector& y) {
  if (y.size() == 0) return true;
  switch (f.kind) {
    case FamilyKind::poisson: return y.maxCoeff() <= 0.0;
    case FamilyKind::binomial: return y.maxCoeff() == y.minCoeff() && (y[0] == 0.0 || y[0] == 1.0);
    case FamilyKind::gaussian: return false;
  }
  return false;
}

Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

Vector select(const Vector& v, std::span<const Index> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Index>(r)] = v[rows[r]];
  return out;
}

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw ConfigError(std::string("tuning grid for ") + name + " is empty");
  for (double v : grid) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("tuning grid for ") + name + " has a negative or non-finite value");
    }
  }
}

double middle(const std::vector<double>& grid) {
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  return sorted[sorted.size() / 2];
}

}  // namespace

Score score_from_name(std::string_view name) {
  if (name == "neg_log_lik") return Score::neg_log_lik;
  if (name == "rmse") return Score::rmse;
  throw ConfigError("unknown score `" + std::string(name) + "` (expected neg_log_lik or rmse)");
}

std::string_view score_name(Score s) noexcept { return s == Score::rmse ? "rmse" : "neg_log_lik"; }

std::vector<double> log_grid(double lo, double hi, int points) {
  if (points < 1) throw ConfigError("grid needs at least one point");
  if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("log grid bounds must satisfy 0 < lo <= hi");
  std::vector<double> out(static_cast<std::size_t>(points));
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k < points; ++k) out[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (points - 1));
  out.back() = hi;
  return out;
}

Grids default_grids(const ModelData& data, int points) {
  double scale = data.X.cols() > 0 ? (data.X.transpose() * data.y).lpNorm<Eigen::Infinity>() : 1.0;
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  Grids g;
  g.lambda = log_grid(1e-4 * scale, 10.0 * scale, points);
  g.gamma_p = g.lambda;
  g.gamma_n = log_grid(1e-2, 1e2, points);
  return g;
}

void TuneSpec::validate(Index n, Index p) const {
  check_grid(grids.lambda, "lambda");
  check_grid(grids.gamma_n, "gamma_n");
  check_grid(grids.gamma_p, "gamma_p");
  if (p >= n && std::find(grids.lambda.begin(), grids.lambda.end(), 0.0) != grids.lambda.end()) {
    throw ConfigError("lambda grid must exclude 0 when p >= n");
  }
  if (k < 2) throw ConfigError("cross-validation needs k >= 2 folds");
  if (k > n) throw ConfigError("more folds than observations");
  if (max_cycles < 1) throw ConfigError("max_cycles must be at least 1");
  base.validate();
}

HeldOutPrediction predict_held_out(const FitResult& fit, const std::optional<Graph>& full_graph,
                                   std::span<const Index> train_nodes, std::span<const Index> test_nodes,
                                   const Matrix& X_test, const Vector& offsets_test) {
  const auto m = static_cast<Index>(test_nodes.size());
  if (X_test.rows() != m || offsets_test.size() != m) throw DataError("prediction: test dimensions differ");
  if (X_test.cols() != fit.beta_hat.size()) throw DataError("prediction: feature count differs from the fit");
  HeldOutPrediction out;
  Vector alpha(m);
  if (fit.intercept == InterceptMode::common || !full_graph) {
    alpha.setConstant(fit.alpha_hat.size() > 0 ? fit.alpha_hat[0] : 0.0);
    if (fit.intercept == InterceptMode::per_unit) {
      // no graph to extend over: every test unit is unanchored
      alpha.setZero();
      out.unanchored.assign(test_nodes.begin(), test_nodes.end());
    }
  } else {
    if (static_cast<Index>(train_nodes.size()) != fit.alpha_hat.size()) {
      throw DataError("prediction: training node count differs from the fitted intercepts");
    }
    const HarmonicExtension ext = harmonic_extend(*full_graph, train_nodes, fit.alpha_hat);
    for (Index r = 0; r < m; ++r) {
      const Index node = test_nodes[static_cast<std::size_t>(r)];
      const auto it = std::lower_bound(ext.test_nodes.begin(), ext.test_nodes.end(), node);
      if (it == ext.test_nodes.end() || *it != node) {
        throw DataError("prediction: unit " + std::to_string(node) + " is a training unit or out of range");
      }
      alpha[r] = ext.alpha_test[it - ext.test_nodes.begin()];
    }
    for (Index u : ext.unanchored) {
      if (std::find(test_nodes.begin(), test_nodes.end(), u) != test_nodes.end()) out.unanchored.push_back(u);
    }
  }
  out.eta = offsets_test + alpha + X_test * fit.beta_hat;
  return out;
}

double held_out_score(const Family& f, Score score, const Vector& y, const Vector& eta, int* floored) {
  if (y.size() != eta.size()) throw DataError("held-out score: length mismatch");
  if (y.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  Vector e = eta;
  if (f.kind == FamilyKind::poisson) {
    const double floor_eta = std::log(kPoissonMeanFloor);
    for (Index i = 0; i < e.size(); ++i) {
      if (e[i] < floor_eta) {
        e[i] = floor_eta;
        if (floored) ++*floored;
      }
    }
  }
  if (score == Score::rmse) return std::sqrt((y - mean(f, e)).squaredNorm() / static_cast<double>(y.size()));
  return loss(f, y, e) / static_cast<double>(y.size());
}

CvResult cv_score(const Hyperparams& h, const FoldAssignment& folds, const TuneData& data, const TuneSpec& spec,
                  WarmStarts* warm) {
  const Index n = data.data.X.rows();
  if (static_cast<Index>(folds.fold.size()) != n) throw DataError("cv: fold assignment does not cover the data");
  const int k = folds.fold.empty() ? 0 : *std::max_element(folds.fold.begin(), folds.fold.end()) + 1;
  if (warm && static_cast<int>(warm->size()) < k) warm->resize(static_cast<std::size_t>(k));
  const Vector offsets = data.data.offsets.size() == n ? data.data.offsets : Vector::Zero(n);
  const InterceptMode mode = spec.intercept.value_or(default_intercept(h, data.unit_graph.has_value()));

  CvResult out;
  out.fold_scores.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  std::vector<int> floored(static_cast<std::size_t>(k), 0);
  std::vector<std::string> notes(static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(k), spec.threads, [&](std::size_t f) {
    std::vector<Index> train;
    std::vector<Index> test;
    for (Index i = 0; i < n; ++i) (folds.fold[i] == static_cast<int>(f) ? test : train).push_back(i);
    if (train.empty() || test.empty()) {
      notes[f] = "fold " + std::to_string(f) + " skipped: empty training or test set";
      return;
    }
    ModelData d{select(data.data.y, train), select_rows(data.data.X, train), select(offsets, train)};
    if (degenerate_outcomes(data.family, d.y)) {
      notes[f] = "fold " + std::to_string(f) + " skipped: degenerate training outcomes";
      return;
    }
    std::optional<Graph> unit;
    if (data.unit_graph && mode == InterceptMode::per_unit) unit = data.unit_graph->induced_subgraph(train);
    const Problem problem(std::move(d), data.family, unit, data.feature_graph, mode);
    SolverOptions opts = spec.solver;
    if (warm && (*warm)[f] && (*warm)[f]->size() == problem.theta_size()) opts.initial_theta = (*warm)[f];
    opts.record_trace = false;
    const FitResult fit = glmfunk::fit(problem, h, opts);
    if (warm) (*warm)[f] = fit.theta();
    const HeldOutPrediction pred = predict_held_out(fit, data.unit_graph, train, test, select_rows(data.data.X, test),
                                                    select(offsets, test));
    out.fold_scores[f] =
        held_out_score(data.family, spec.score, select(data.data.y, test), pred.eta, &floored[f]);
  });

  double total = 0.0;
  int scored = 0;
  for (int f = 0; f < k; ++f) {
    const auto fs = static_cast<std::size_t>(f);
    if (!notes[fs].empty()) out.warnings.push_back(notes[fs]);
    out.floored += floored[fs];
    if (std::isnan(out.fold_scores[fs])) {
      ++out.skipped;
    } else {
      total += out.fold_scores[fs];
      ++scored;
    }
  }
  if (out.floored > 0) {
    out.warnings.push_back("poisson held-out means floored at 1e-10 for " + std::to_string(out.floored) +
                           " observations");
  }
  out.score = scored > 0 ? total / scored : std::numeric_limits<double>::infinity();
  return out;
}

TuneResult coordinate_descent_tune(const TuneSpec& spec, const TuneData& data) {
  const Index n = data.data.X.rows();
  spec.validate(n, data.data.X.cols());
  TuneResult out;
  const Graph fold_graph = data.unit_graph ? *data.unit_graph : Graph(n);
  out.folds = constrained_folds(fold_graph, spec.k, spec.seed, spec.adjacency_constraint && data.unit_graph);
  if (!out.folds.warning.empty()) out.warnings.push_back(out.folds.warning);

  Hyperparams current = spec.base;
  if (spec.initial) {
    current = *spec.initial;
  } else {
    current.lambda = middle(spec.grids.lambda);
    current.gamma_n = middle(spec.grids.gamma_n);
    current.gamma_p = middle(spec.grids.gamma_p);
  }
  WarmStarts warm(static_cast<std::size_t>(spec.k));
  CvResult first = cv_score(current, out.folds, data, spec, &warm);
  out.initial_score = first.score;
  double current_score = first.score;
  out.evaluations.push_back({0, "initial", current, std::move(first)});

  struct Axis {
    const char* name;
    double Hyperparams::*field;
    const std::vector<double>* grid;
  };
  const Axis axes[] = {{"lambda", &Hyperparams::lambda, &spec.grids.lambda},
                       {"gamma_n", &Hyperparams::gamma_n, &spec.grids.gamma_n},
                       {"gamma_p", &Hyperparams::gamma_p, &spec.grids.gamma_p}};

  for (int cycle = 1; cycle <= spec.max_cycles; ++cycle) {
    out.cycles = cycle;
    bool changed = false;
    for (const Axis& axis : axes) {
      std::vector<double> scores;
      scores.reserve(axis.grid->size());
      for (double value : *axis.grid) {
        Hyperparams h = current;
        h.*axis.field = value;
        CvResult cv = cv_score(h, out.folds, data, spec, &warm);
        scores.push_back(cv.score);
        out.evaluations.push_back({cycle, axis.name, h, std::move(cv)});
      }
      double best = std::numeric_limits<double>::infinity();
      for (double s : scores) best = std::min(best, s);
      if (!std::isfinite(best)) continue;
      const double slack = kTieTolerance * std::max(std::abs(best), 1e-12);
      std::size_t pick = 0;
      bool found = false;
      for (std::size_t c = 0; c < scores.size(); ++c) {
        if (scores[c] <= best + slack && (!found || (*axis.grid)[c] > (*axis.grid)[pick])) {
          pick = c;
          found = true;
        }
      }
      const double chosen = (*axis.grid)[pick];
      if (chosen != current.*axis.field) changed = true;
      current.*axis.field = chosen;
      current_score = scores[pick];
    }
    if (!changed) {
      out.converged = true;
      break;
    }
  }
  out.best = current;
  out.best_score = current_score;
  for (const auto& ev : out.evaluations) {
    for (const auto& w : ev.cv.warnings) {
      if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
    }
  }
  return out;
}

}  // namespace glmfunk
