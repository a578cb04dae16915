#include "doctest.h"
#include "oracles.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/infer.hpp"

#include <cmath>

using namespace glmfunk;

namespace {

// Poisson MLE with an intercept column by plain Newton iterations.
Vector poisson_mle(const Matrix& X, const Vector& y) {
  const Index n = X.rows();
  Matrix Z(n, X.cols() + 1);
  Z << Vector::Ones(n), X;
  Vector b = Vector::Zero(Z.cols());
  b[0] = std::log(y.mean());
  for (int it = 0; it < 100; ++it) {
    const Vector mu = (Z * b).array().exp();
    const Vector g = Z.transpose() * (y - mu);
    const Matrix H = Z.transpose() * mu.asDiagonal() * Z;
    const Vector step = H.ldlt().solve(g);
    b += step;
    if (step.norm() < 1e-13) break;
  }
  return b;
}

Matrix centered(Matrix X) {
  for (Index j = 0; j < X.cols(); ++j) X.col(j).array() -= X.col(j).mean();
  return X;
}

}  // namespace

TEST_CASE("normal distribution helpers") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
  CHECK(normal_quantile(0.999) == doctest::Approx(3.090232306167813).epsilon(1e-12));
  for (double p = 1e-6; p < 1.0; p += 0.013) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12 * std::max(p, 1e-3));
  }
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK_THROWS_AS(normal_quantile(1.5), ConfigError);
}

TEST_CASE("sigma_hat") {
  std::mt19937_64 rng(1);
  SUBCASE("orthonormal gaussian design") {
    const Index n = 40;
    Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(n, 3, rng));
    const Matrix X = std::sqrt(static_cast<double>(n)) * Matrix(qr.householderQ() * Matrix::Identity(n, 3));
    const Matrix S = sigma_hat(Family::gaussian(), X, oracle::random_vector(n, rng), 2.5);
    CHECK((S - Matrix::Identity(3, 3) / 2.5).norm() <= 1e-12);
  }
  SUBCASE("poisson at eta = 0") {
    const Matrix X = oracle::random_matrix(20, 4, rng);
    const Matrix S = sigma_hat(Family::poisson(), X, Vector::Zero(20));
    CHECK((S - X.transpose() * X / 20.0).norm() <= 1e-12);
  }
  SUBCASE("finite-difference Hessian of the loss") {
    for (const Family& f : {Family::binomial(), Family::poisson(), Family::gaussian()}) {
      const Matrix X = oracle::random_matrix(5, 3, rng);
      const Vector alpha = oracle::random_vector(5, rng, 0.3);
      const Vector beta = oracle::random_vector(3, rng, 0.3);
      Vector y(5);
      y << 1, 0, 1, 1, 0;
      const Matrix S = sigma_hat(f, X, alpha + X * beta);
      const double h = 1e-4;
      for (Index a = 0; a < 3; ++a) {
        for (Index b = 0; b < 3; ++b) {
          auto lossb = [&](double da, double db) {
            Vector bb = beta;
            bb[a] += da;
            bb[b] += db;
            return loss(f, y, alpha + X * bb);
          };
          const double fd = (lossb(h, h) - lossb(h, -h) - lossb(-h, h) + lossb(-h, -h)) / (4 * h * h) / 5.0;
          CHECK(std::abs(fd - S(a, b)) <= 1e-5 * std::max(1.0, std::abs(S(a, b))));
        }
      }
    }
  }
}

TEST_CASE("m_matrix examples") {
  SUBCASE("identity through the inverse path") {
    const auto r = m_matrix(Matrix::Identity(4, 4), 0.3);
    CHECK(r.used_inverse);
    CHECK((r.M - Matrix::Identity(4, 4)).norm() <= 1e-7);
  }
  SUBCASE("identity through the constrained program") {
    // the program itself shrinks the diagonal to 1 - q
    MMatrixOptions o;
    o.allow_inverse = false;
    const auto r = m_matrix(Matrix::Identity(4, 4), 0.3, o);
    CHECK_FALSE(r.used_inverse);
    CHECK((r.M - 0.7 * Matrix::Identity(4, 4)).norm() <= 1e-10);
  }
  SUBCASE("diagonal, q tending to zero") {
    Matrix S = Matrix::Zero(2, 2);
    S.diagonal() << 2.0, 4.0;
    for (bool inverse : {true, false}) {
      MMatrixOptions o;
      o.allow_inverse = inverse;
      const auto r = m_matrix(S, 1e-9, o);
      CHECK(r.M(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
      CHECK(r.M(1, 1) == doctest::Approx(0.25).epsilon(1e-8));
      CHECK(std::abs(r.M(0, 1)) <= 1e-12);
    }
  }
  SUBCASE("well-conditioned random Sigma") {
    std::mt19937_64 rng(2);
    const Matrix X = oracle::random_matrix(50, 5, rng);
    const Matrix S = X.transpose() * X / 50.0;
    const Matrix inverse = S.inverse();
    MMatrixOptions o;
    o.allow_inverse = false;
    const auto r = m_matrix(S, 1e-6, o);
    CHECK((r.M - inverse).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK((m_matrix(S, 1e-6).M - inverse).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("m_matrix constraint holds for singular Sigma") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix X = oracle::random_matrix(15, 25, rng);
    const Matrix S = X.transpose() * X / 15.0;
    const double q = default_q_constraint(15, 25);
    const auto r = m_matrix(S, q, MMatrixOptions{15});
    CHECK_FALSE(r.used_inverse);
    for (Index j = 0; j < 25; ++j) {
      Vector res = S * r.M.row(j).transpose();
      res[j] -= 1.0;
      CHECK(res.lpNorm<Eigen::Infinity>() <= r.q_used + 1e-8);
    }
  }
}

TEST_CASE("m_matrix doubles q until feasible") {
  Matrix S = Matrix::Zero(2, 2);
  S(0, 0) = 1.0;
  MMatrixOptions o;
  o.allow_inverse = false;
  const auto r = m_matrix(S, 0.1, o);
  CHECK(r.doublings == 4);
  CHECK(r.q_used == doctest::Approx(1.6));
  o.max_doublings = 2;
  CHECK_THROWS_AS(m_matrix(S, 0.1, o), NumericalError);
}

TEST_CASE("scaled lasso noise estimate") {
  SUBCASE("pure noise Monte Carlo") {
    std::mt19937_64 rng(4);
    int within = 0;
    for (int rep = 0; rep < 20; ++rep) {
      const double sigma = 0.5 + rep * 0.1;
      const Matrix X = oracle::random_matrix(500, 50, rng);
      const Vector y = oracle::random_vector(500, rng, sigma);
      const double est = scaled_lasso_sigma(y, X, Vector::Zero(500));
      if (std::abs(est - sigma) <= 0.15 * sigma) ++within;
    }
    CHECK(within >= 18);
  }
  SUBCASE("zero outcomes") {
    try {
      scaled_lasso_sigma(Vector::Zero(10), Matrix::Ones(10, 2), Vector::Zero(10));
      FAIL("expected an error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("degenerate noise estimate") != std::string::npos);
    }
  }
  SUBCASE("scale equivariance") {
    std::mt19937_64 rng(5);
    const Matrix X = oracle::random_matrix(100, 20, rng);
    Vector beta = Vector::Zero(20);
    beta.head(3) << 1.0, -0.5, 0.8;
    const Vector y = X * beta + oracle::random_vector(100, rng);
    const Vector off = oracle::random_vector(100, rng, 0.1);
    const double a = scaled_lasso_sigma(y, X, off);
    const double b = scaled_lasso_sigma(2.0 * y, X, 2.0 * off);
    CHECK(b == doctest::Approx(2.0 * a).epsilon(1e-6));
  }
}

TEST_CASE("debias examples") {
  std::mt19937_64 rng(6);
  const Matrix X = oracle::random_matrix(30, 4, rng);
  const Vector beta = oracle::random_vector(4, rng);
  const Matrix M = oracle::random_matrix(4, 4, rng);
  SUBCASE("zero score returns beta") {
    const Vector eta = X * beta;
    const Debiased d = debias(Family::gaussian(), X, eta, eta, beta, M, Matrix::Identity(4, 4));
    CHECK(d.b_hat == beta);
  }
  SUBCASE("identity M in the gaussian case") {
    const Vector eta = X * beta;
    const Vector y = eta + oracle::random_vector(30, rng);
    const Debiased d = debias(Family::gaussian(), X, y, eta, beta, Matrix::Identity(4, 4), Matrix::Identity(4, 4));
    CHECK((d.b_hat - (beta + X.transpose() * (y - eta) / 30.0)).norm() <= 1e-13);
    CHECK((d.covariance - Matrix::Identity(4, 4) / 30.0).norm() <= 1e-15);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(debias(Family::gaussian(), X, Vector::Zero(30), Vector::Zero(30), Vector::Zero(3), M,
                           Matrix::Identity(4, 4)),
                    DataError);
  }
}

TEST_CASE("debiased estimate matches the unpenalised MLE in low dimension") {
  std::mt19937_64 rng(7);
  const Index n = 200;
  const Matrix X = centered(oracle::random_matrix(n, 5, rng));
  Vector beta(5);
  beta << 0.3, -0.2, 0.0, 0.1, 0.25;
  Vector y(n);
  const Vector eta = X * beta;
  for (Index i = 0; i < n; ++i) y[i] = std::poisson_distribution<int>(std::exp(0.5 + eta[i]))(rng);
  const Vector mle = poisson_mle(X, y);

  ModelData d{y, X, Vector()};
  const Problem pr(d, Family::poisson(), std::nullopt, std::nullopt, InterceptMode::common);
  SolverOptions o;
  o.step_rule = StepRule::backtracking;
  o.step_size = 1.0;
  o.tol = 1e-12;
  const FitResult fit = fit_l2(pr, Hyperparams{0.0, 0.0, 1.0}, o);
  const InferenceResult inf = run_inference(pr, fit, {});
  CHECK((inf.debiased.b_hat - mle.tail(5)).lpNorm<Eigen::Infinity>() <= 1e-2);
  CHECK(inf.noise_sd == 1.0);
  // the penalised estimate itself is visibly shrunk
  CHECK((fit.beta_hat - mle.tail(5)).lpNorm<Eigen::Infinity>() > 1e-3);
}

TEST_CASE("inference table") {
  SUBCASE("arithmetic example") {
    Vector b(1);
    b << 0.5;
    const auto rows = inference_table(b, Matrix::Identity(1, 1), Matrix::Identity(1, 1), 100, 0.95);
    CHECK(rows[0].se == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(rows[0].ci_low == doctest::Approx(0.304).epsilon(1e-3));
    CHECK(rows[0].ci_high == doctest::Approx(0.696).epsilon(1e-3));
    CHECK(rows[0].t_stat == doctest::Approx(5.0).epsilon(1e-14));
  }
  SUBCASE("zero estimate") {
    const auto rows = inference_table(Vector::Zero(2), Matrix::Identity(2, 2) * 0.3, 0.95);
    CHECK(rows[0].p_value == 1.0);
  }
  SUBCASE("zero variance is flagged") {
    Matrix cov = Matrix::Identity(2, 2);
    cov(1, 1) = 0.0;
    const auto rows = inference_table(Vector::Ones(2), cov, 0.9);
    CHECK(rows[0].testable);
    CHECK_FALSE(rows[1].testable);
  }
  SUBCASE("interval properties") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 100; ++rep) {
      const Vector b = oracle::random_vector(6, rng, 2.0);
      const Matrix A = oracle::random_matrix(6, 6, rng);
      const Matrix cov = A * A.transpose() + 0.01 * Matrix::Identity(6, 6);
      const double level = 0.5 + 0.49 * (rep / 100.0);
      const double z = normal_quantile(1 - (1 - level) / 2);
      for (const auto& row : inference_table(b, cov, level)) {
        CHECK(row.ci_low < row.b_hat);
        CHECK(row.b_hat < row.ci_high);
        CHECK(row.p_value >= 0.0);
        CHECK(row.p_value <= 1.0);
        CHECK(row.ci_high - row.ci_low == doctest::Approx(2 * z * row.se).epsilon(1e-12));
        const RateRatio rr = rate_ratio(row);
        CHECK(rr.ci_low < rr.estimate);
        CHECK(rr.estimate < rr.ci_high);
      }
    }
  }
  SUBCASE("one-sided alternatives") {
    Vector b(1);
    b << 0.2;
    const auto two = inference_table(b, Matrix::Identity(1, 1) * 0.01, 0.95);
    const auto up = inference_table(b, Matrix::Identity(1, 1) * 0.01, 0.95, Alternative::greater);
    const auto down = inference_table(b, Matrix::Identity(1, 1) * 0.01, 0.95, Alternative::less);
    CHECK(up[0].p_value == doctest::Approx(two[0].p_value / 2));
    CHECK(up[0].p_value + down[0].p_value == doctest::Approx(1.0));
  }
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.04) == "*");
  CHECK(significance_stars(0.2) == "");
  CHECK(significance_stars(std::nan("")) == "");
}

TEST_CASE("gaussian null coverage") {
  std::mt19937_64 rng(9);
  const Index n = 300;
  const Index p = 10;
  const int reps = 200;
  int covered = 0;
  int rejected = 0;
  for (int rep = 0; rep < reps; ++rep) {
    ModelData d{oracle::random_vector(n, rng), centered(oracle::random_matrix(n, p, rng)), Vector()};
    const Problem pr(d, Family::gaussian(), std::nullopt, std::nullopt, InterceptMode::common);
    SolverOptions o;
    o.step_rule = StepRule::backtracking;
    o.step_size = 1.0;
    const FitResult fit = fit_l2(pr, Hyperparams{0.0, 0.0, 0.5 * std::sqrt(2.0 * n * std::log(p))}, o);
    const InferenceResult inf = run_inference(pr, fit, {});
    for (const auto& row : inf.rows) {
      if (row.ci_low <= 0.0 && 0.0 <= row.ci_high) ++covered;
      if (row.p_value < 0.05) ++rejected;
    }
  }
  const double coverage = covered / static_cast<double>(reps * p);
  const double type1 = rejected / static_cast<double>(reps * p);
  CHECK(coverage >= 0.92);
  CHECK(coverage <= 0.98);
  CHECK(type1 >= 0.02);
  CHECK(type1 <= 0.09);
}

TEST_CASE("sandwich variance") {
  std::mt19937_64 rng(10);
  const Index n = 400;
  ModelData d{Vector(n), centered(oracle::random_matrix(n, 3, rng)), Vector()};
  for (Index i = 0; i < n; ++i) d.y[i] = std::poisson_distribution<int>(2.0)(rng);
  const Problem pr(d, Family::poisson(), std::nullopt, std::nullopt, InterceptMode::common);
  SolverOptions o;
  o.step_rule = StepRule::backtracking;
  o.step_size = 1.0;
  const FitResult fit = fit_l2(pr, Hyperparams{0.0, 0.0, 0.1}, o);
  InferenceOptions io;
  const InferenceResult model = run_inference(pr, fit, io);
  io.variance = Variance::sandwich;
  const InferenceResult sandwich = run_inference(pr, fit, io);
  // correctly specified model: both variance forms agree roughly
  for (Index j = 0; j < 3; ++j) {
    CHECK(sandwich.rows[j].se == doctest::Approx(model.rows[j].se).epsilon(0.2));
  }
  CHECK(sandwich.debiased.b_hat == model.debiased.b_hat);
}
