#include "doctest.h"
#include "oracles.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/family.hpp"

#include <cmath>

using namespace glmfunk;

namespace {

const Family kFamilies[] = {Family::gaussian(), Family::binomial(), Family::poisson()};

Vector outcomes_for(const Family& f, Index n, std::mt19937_64& rng) {
  Vector y(n);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.4);
  std::poisson_distribution<int> counts(2.5);
  for (Index i = 0; i < n; ++i) {
    switch (f.kind) {
      case FamilyKind::gaussian: y[i] = normal(rng); break;
      case FamilyKind::binomial: y[i] = coin(rng) ? 1.0 : 0.0; break;
      case FamilyKind::poisson: y[i] = counts(rng); break;
    }
  }
  return y;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("family names") {
  CHECK(Family::from_name("poisson").kind == FamilyKind::poisson);
  CHECK(Family::from_name("binomial").name() == "binomial");
  CHECK_THROWS_AS(Family::from_name("gamma"), ConfigError);
}

TEST_CASE("loss examples") {
  CHECK(loss(Family::gaussian(), vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(loss(Family::poisson(), vec({0}), vec({0})) == doctest::Approx(1.0));
  CHECK(loss(Family::binomial(), vec({1}), vec({0})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // overflow-safe binomial
  CHECK(std::isfinite(loss(Family::binomial(), vec({0}), vec({800}))));
  CHECK(loss(Family::binomial(), vec({0}), vec({800})) == doctest::Approx(800.0));
  CHECK(std::isfinite(loss(Family::poisson(), vec({1}), vec({900}))));
  CHECK(exponent_clipped(Family::poisson(), vec({900})));
  CHECK_FALSE(exponent_clipped(Family::poisson(), vec({699})));
  const Vector y = vec({0, 1, 3});
  const Vector eta = vec({0.1, -0.2, 1.3});
  CHECK(loss_terms(Family::poisson(), y, eta).sum() == doctest::Approx(loss(Family::poisson(), y, eta)));
}

TEST_CASE("outcome domains") {
  CHECK_THROWS_AS(validate_outcomes(Family::binomial(), vec({0, 2})), DataError);
  CHECK_THROWS_AS(validate_outcomes(Family::poisson(), vec({1.5})), DataError);
  CHECK_THROWS_AS(validate_outcomes(Family::poisson(), vec({-1})), DataError);
  CHECK_THROWS_AS(validate_outcomes(Family::gaussian(), vec({NAN})), DataError);
  CHECK_NOTHROW(validate_outcomes(Family::binomial(), vec({0, 0.25, 1})));
}

TEST_CASE("gradient examples") {
  CHECK(gradient_eta(Family::gaussian(), vec({3}), vec({1}))[0] == -2.0);
  CHECK(gradient_eta(Family::poisson(), vec({1}), vec({0}))[0] == 0.0);
}

TEST_CASE("curvature examples") {
  CHECK(curvature_weights(Family::gaussian(), vec({-4, 0, 9})) == Vector::Ones(3));
  CHECK(curvature_weights(Family::binomial(), vec({0}))[0] == doctest::Approx(0.25));
  CHECK(curvature_weights(Family::poisson(), vec({std::log(2.0)}))[0] == doctest::Approx(2.0));
}

TEST_CASE("gradient matches central differences of the loss") {
  std::mt19937_64 rng(7);
  for (const Family& f : kFamilies) {
    CAPTURE(f.name());
    for (int rep = 0; rep < 20; ++rep) {
      const Index n = 5;
      const Vector y = outcomes_for(f, n, rng);
      const Vector eta = oracle::random_vector(n, rng, 1.5);
      const Vector g = gradient_eta(f, y, eta);
      auto fn = [&](const Vector& e) { return loss(f, y, e); };
      for (Index i = 0; i < n; ++i) {
        const double fd = oracle::central_difference(fn, eta, i, 1e-5);
        CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
      }
    }
  }
}

TEST_CASE("curvature matches central differences of the gradient") {
  std::mt19937_64 rng(8);
  for (const Family& f : kFamilies) {
    CAPTURE(f.name());
    for (int rep = 0; rep < 20; ++rep) {
      const Index n = 4;
      const Vector y = outcomes_for(f, n, rng);
      const Vector eta = oracle::random_vector(n, rng, 1.5);
      const Vector w = curvature_weights(f, eta);
      for (Index i = 0; i < n; ++i) {
        auto gi = [&](const Vector& e) { return gradient_eta(f, y, e)[i]; };
        const double fd = oracle::central_difference(gi, eta, i, 1e-5);
        CHECK(std::abs(fd - w[i]) <= 1e-5 * std::max(1.0, std::abs(w[i])));
      }
    }
  }
}

TEST_CASE("loss is convex in eta") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const Family& f : kFamilies) {
    for (int rep = 0; rep < 200; ++rep) {
      const Vector y = outcomes_for(f, 6, rng);
      const Vector e1 = oracle::random_vector(6, rng, 3.0);
      const Vector e2 = oracle::random_vector(6, rng, 3.0);
      const double t = unit(rng);
      const double mixed = loss(f, y, t * e1 + (1 - t) * e2);
      CHECK(mixed <= t * loss(f, y, e1) + (1 - t) * loss(f, y, e2) + 1e-10);
    }
  }
}

TEST_CASE("deviance") {
  // Poisson deviance is zero at the saturated fit
  const Vector y = vec({1, 4, 7});
  const Vector eta = y.array().log();
  CHECK(deviance(Family::poisson(), y, eta) == doctest::Approx(0.0));
  CHECK(deviance(Family::binomial(), vec({1}), vec({0})) == doctest::Approx(2 * std::log(2.0)));
  CHECK(deviance(Family::gaussian(), vec({1, 2}), vec({0, 0})) == doctest::Approx(5.0));
}

TEST_CASE("linear predictor composition") {
  Matrix X(2, 1);
  X << 1, 2;
  const auto lp = LinearPredictor::compose(vec({1, 1}), vec({0.5, -0.5}), X, vec({2}));
  CHECK(lp.eta[0] == 3.5);
  CHECK(lp.eta[1] == 4.5);
  CHECK_THROWS_AS(LinearPredictor::compose(vec({1}), vec({0.5, -0.5}), X, vec({2})), DataError);
}

TEST_CASE("additive log-ratio transform") {
  Matrix c(2, 3);
  c << 0.2, 0.3, 0.5, 1.0 / 3, 1.0 / 3, 1.0 / 3;
  const Matrix z = alr_transform(c, 2);
  CHECK(z.cols() == 2);
  CHECK(z(0, 0) == doctest::Approx(std::log(0.4)));
  CHECK(z(0, 1) == doctest::Approx(std::log(0.6)));
  CHECK(z(1, 0) == doctest::Approx(0.0));
  CHECK(z(1, 1) == doctest::Approx(0.0));

  Matrix zero(1, 3);
  zero << 0.0, 0.5, 0.5;
  CHECK_THROWS_AS(alr_transform(zero, 2), DataError);
  const Matrix adj = alr_transform(zero, 2, 1e-6);
  CHECK(adj.allFinite());
  // recomputed from the adjusted composition
  CHECK(adj(0, 0) == doctest::Approx(std::log(1e-6 / (0.5 + 1e-6))));
  CHECK(adj(0, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(alr_transform(c, 3), ConfigError);
}
