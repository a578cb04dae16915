#include "doctest.h"
#include "oracles.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/tune.hpp"

#include <cmath>

using namespace glmfunk;

namespace {

SolverOptions quick_solver() {
  SolverOptions o;
  o.step_rule = StepRule::backtracking;
  o.step_size = 1.0;
  o.tol = 1e-9;
  return o;
}

TuneData poisson_signal(Index n, Index p, std::mt19937_64& rng, double signal) {
  TuneData td;
  td.family = Family::poisson();
  td.data.X = oracle::random_matrix(n, p, rng);
  Vector beta = Vector::Zero(p);
  beta.head(std::min<Index>(p, 3)).setConstant(signal);
  const Vector eta = td.data.X * beta;
  td.data.y.resize(n);
  for (Index i = 0; i < n; ++i) td.data.y[i] = std::poisson_distribution<int>(std::exp(0.5 + eta[i]))(rng);
  td.data.offsets = Vector::Zero(n);
  td.unit_graph = oracle::random_graph(n, 3.0 / n, rng);
  td.feature_graph = oracle::path_graph(p);
  return td;
}

}  // namespace

TEST_CASE("grids") {
  const auto g = log_grid(1e-2, 1e2, 5);
  REQUIRE(g.size() == 5);
  CHECK(g[0] == doctest::Approx(1e-2));
  CHECK(g[2] == doctest::Approx(1.0));
  CHECK(g[4] == 1e2);
  CHECK(log_grid(3.0, 3.0, 1) == std::vector<double>{3.0});
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), ConfigError);

  ModelData d{Vector::Ones(3), Matrix::Identity(3, 2), Vector()};
  d.y << 1, -4, 2;
  const Grids dg = default_grids(d);
  CHECK(dg.lambda.size() == 8);
  CHECK(dg.lambda.back() == doctest::Approx(40.0));
  CHECK(dg.lambda.front() == doctest::Approx(4e-4));
  CHECK(dg.gamma_n.front() == doctest::Approx(1e-2));
  CHECK(dg.gamma_n.back() == doctest::Approx(1e2));
}

TEST_CASE("spec validation") {
  TuneSpec s;
  s.grids = {{0.0, 1.0}, {1.0}, {1.0}};
  CHECK_NOTHROW(s.validate(20, 5));
  CHECK_THROWS_AS(s.validate(5, 20), ConfigError);
  s.grids.lambda = {};
  CHECK_THROWS_AS(s.validate(20, 5), ConfigError);
  s.grids.lambda = {-1.0};
  CHECK_THROWS_AS(s.validate(20, 5), ConfigError);
  s.grids.lambda = {1.0};
  s.k = 1;
  CHECK_THROWS_AS(s.validate(20, 5), ConfigError);
}

TEST_CASE("held-out prediction") {
  SUBCASE("isolated gaussian test unit") {
    FitResult fit;
    fit.alpha_hat = Vector::Constant(2, 3.0);
    fit.beta_hat = Vector::Zero(1);
    fit.intercept = InterceptMode::per_unit;
    const Graph full(3, {{0, 1, 1.0}});
    const std::vector<Index> train{0, 1};
    const std::vector<Index> test{2};
    const auto pred = predict_held_out(fit, full, train, test, Matrix::Ones(1, 1), Vector::Constant(1, 0.7));
    CHECK(pred.eta[0] == doctest::Approx(0.7));
    CHECK(pred.unanchored == std::vector<Index>{2});
  }
  SUBCASE("poisson offset arithmetic") {
    FitResult fit;
    fit.alpha_hat = Vector::Zero(1);
    fit.beta_hat = Vector::Zero(2);
    fit.intercept = InterceptMode::common;
    const std::vector<Index> test{0};
    const auto pred = predict_held_out(fit, std::nullopt, {}, test, Matrix::Ones(1, 2),
                                       Vector::Constant(1, std::log(1000.0)));
    CHECK(mean(Family::poisson(), pred.eta)[0] == doctest::Approx(1000.0));
  }
  SUBCASE("harmonic values for anchored units") {
    FitResult fit;
    fit.alpha_hat = Vector(2);
    fit.alpha_hat << 1.0, 3.0;
    fit.beta_hat = Vector::Zero(0);
    fit.intercept = InterceptMode::per_unit;
    const Graph path = oracle::path_graph(3);  // 0 - 1 - 2, train {0, 2}
    const std::vector<Index> train{0, 2};
    const std::vector<Index> test{1};
    const auto pred = predict_held_out(fit, path, train, test, Matrix(1, 0), Vector::Zero(1));
    CHECK(pred.eta[0] == doctest::Approx(2.0));
    CHECK(pred.unanchored.empty());
  }
}

TEST_CASE("held-out score") {
  Vector y(2);
  y << 0, 3;
  Vector eta(2);
  eta << -40.0, std::log(3.0);
  int floored = 0;
  const double s = held_out_score(Family::poisson(), Score::neg_log_lik, y, eta, &floored);
  CHECK(floored == 1);
  CHECK(std::isfinite(s));
  CHECK(held_out_score(Family::gaussian(), Score::rmse, y, y) == 0.0);
  CHECK(held_out_score(Family::gaussian(), Score::rmse, y, Vector::Zero(2)) == doctest::Approx(std::sqrt(4.5)));
}

TEST_CASE("noiseless linear outcome scores near zero") {
  std::mt19937_64 rng(1);
  TuneData td;
  td.family = Family::gaussian();
  td.data.X = oracle::random_matrix(60, 4, rng);
  td.data.y = 2.0 * td.data.X.col(1);
  td.data.offsets = Vector::Zero(60);
  TuneSpec spec;
  spec.k = 5;
  spec.score = Score::rmse;
  spec.solver = quick_solver();
  spec.solver.tol = 1e-14;
  spec.solver.grad_tol = 1e-10;
  const FoldAssignment folds = constrained_folds(Graph(60), 5, 3, false);
  const CvResult cv = cv_score(Hyperparams{0.0, 0.0, 1e-6}, folds, td, spec);
  CHECK(cv.score <= 1e-5);
  CHECK(cv.skipped == 0);
}

TEST_CASE("symmetric halves give equal fold scores") {
  std::mt19937_64 rng(2);
  const Index m = 15;
  const Matrix Xh = oracle::random_matrix(m, 3, rng);
  Vector yh(m);
  for (Index i = 0; i < m; ++i) yh[i] = std::poisson_distribution<int>(2.0)(rng);
  const Graph gh = oracle::random_graph(m, 0.2, rng);
  TuneData td;
  td.family = Family::poisson();
  td.data.X.resize(2 * m, 3);
  td.data.X << Xh, Xh;
  td.data.y.resize(2 * m);
  td.data.y << yh, yh;
  td.data.offsets = Vector::Zero(2 * m);
  std::vector<Edge> edges;
  for (const auto& e : gh.edges()) {
    edges.push_back(e);
    edges.push_back({e.i + m, e.j + m, e.w});
  }
  td.unit_graph = Graph(2 * m, edges);
  FoldAssignment folds;
  for (Index i = 0; i < 2 * m; ++i) folds.fold.push_back(i < m ? 0 : 1);
  TuneSpec spec;
  spec.k = 2;
  spec.solver = quick_solver();
  spec.solver.tol = 1e-14;
  spec.solver.grad_tol = 1e-10;
  const CvResult cv = cv_score(Hyperparams{1.0, 0.0, 0.5}, folds, td, spec);
  CHECK(cv.fold_scores[0] == doctest::Approx(cv.fold_scores[1]).epsilon(1e-9));
}

TEST_CASE("degenerate training folds are skipped") {
  TuneData td;
  td.family = Family::poisson();
  td.data.X = Matrix::Ones(6, 1);
  td.data.y = Vector::Zero(6);
  td.data.y[0] = 2.0;
  td.data.offsets = Vector::Zero(6);
  FoldAssignment folds;
  folds.fold = {0, 1, 1, 2, 2, 0};
  TuneSpec spec;
  spec.k = 3;
  spec.solver = quick_solver();
  const CvResult cv = cv_score(Hyperparams{0.0, 0.0, 0.1}, folds, td, spec);
  CHECK(cv.skipped == 1);
  CHECK(std::isnan(cv.fold_scores[0]));
  CHECK(std::isfinite(cv.score));
  REQUIRE_FALSE(cv.warnings.empty());
  CHECK(cv.warnings[0].find("degenerate") != std::string::npos);
}

TEST_CASE("singleton grids") {
  std::mt19937_64 rng(3);
  const TuneData td = poisson_signal(40, 5, rng, 0.3);
  TuneSpec spec;
  spec.grids = {{0.5}, {2.0}, {0.1}};
  spec.k = 4;
  spec.solver = quick_solver();
  const TuneResult r = coordinate_descent_tune(spec, td);
  CHECK(r.best.lambda == 0.5);
  CHECK(r.best.gamma_n == 2.0);
  CHECK(r.best.gamma_p == 0.1);
  CHECK(r.cycles == 1);
  CHECK(r.converged);
}

TEST_CASE("coordinate descent accounting, monotonicity and determinism") {
  std::mt19937_64 rng(4);
  const TuneData td = poisson_signal(60, 8, rng, 0.4);
  TuneSpec spec;
  spec.grids = default_grids(td.data, 4);
  spec.k = 4;
  spec.max_cycles = 3;
  spec.seed = 9;
  spec.solver = quick_solver();
  const TuneResult a = coordinate_descent_tune(spec, td);
  const std::size_t per_cycle = spec.grids.lambda.size() + spec.grids.gamma_n.size() + spec.grids.gamma_p.size();
  CHECK(a.evaluations.size() == 1 + per_cycle * static_cast<std::size_t>(a.cycles));
  for (int c = 1; c <= a.cycles; ++c) {
    for (const char* name : {"lambda", "gamma_n", "gamma_p"}) {
      std::vector<double> seen;
      for (const auto& ev : a.evaluations) {
        if (ev.cycle != c || ev.parameter != name) continue;
        const double v = std::string(name) == "lambda" ? ev.h.lambda
                         : std::string(name) == "gamma_n" ? ev.h.gamma_n
                                                          : ev.h.gamma_p;
        seen.push_back(v);
      }
      const auto& grid = std::string(name) == "lambda" ? spec.grids.lambda
                         : std::string(name) == "gamma_n" ? spec.grids.gamma_n
                                                          : spec.grids.gamma_p;
      CHECK(seen == grid);
    }
  }
  CHECK(a.best_score <= a.initial_score * (1 + 1e-6) + 1e-12);

  const TuneResult b = coordinate_descent_tune(spec, td);
  CHECK(a.best.lambda == b.best.lambda);
  CHECK(a.best.gamma_n == b.best.gamma_n);
  CHECK(a.best.gamma_p == b.best.gamma_p);
  CHECK(a.best_score == b.best_score);

  spec.threads = 3;
  const TuneResult c = coordinate_descent_tune(spec, td);
  CHECK(c.best.lambda == a.best.lambda);
  CHECK(c.best_score == a.best_score);

  // a huge lambda scores no better than the tuned one
  Hyperparams huge = a.best;
  huge.lambda = 1e6;
  const CvResult tuned_cv = cv_score(a.best, a.folds, td, spec);
  const CvResult huge_cv = cv_score(huge, a.folds, td, spec);
  CHECK(huge_cv.score >= tuned_cv.score);
}

TEST_CASE("pure noise selects the largest lambda") {
  int votes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    TuneData td = poisson_signal(50, 10, rng, 0.0);
    TuneSpec spec;
    spec.grids = default_grids(td.data, 5);
    spec.grids.gamma_n = {1.0};
    spec.grids.gamma_p = {0.1};
    spec.k = 5;
    spec.max_cycles = 1;
    spec.seed = seed;
    spec.solver = quick_solver();
    const TuneResult r = coordinate_descent_tune(spec, td);
    if (r.best.lambda == spec.grids.lambda.back()) ++votes;
  }
  CHECK(votes >= 6);
}
