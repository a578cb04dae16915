#pragma once

#include "glmfunk/family.hpp"
#include "glmfunk/solver.hpp"
#include "glmfunk/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glmfunk {

// Standard normal distribution function and its inverse (rational
// approximation with one Halley refinement step, |error| < 1e-12).
double normal_cdf(double x) noexcept;
double normal_quantile(double p);

/**
 * Curvature of the loss in beta at the fitted linear predictor,
 * (1/n) X' W X with W = diag(mu'(eta)), divided by `dispersion`
 * (the Gaussian noise variance; 1 for the other families).
 */
Matrix sigma_hat(const Family& f, const Matrix& X, const Vector& eta, double dispersion = 1.0);

struct MMatrixOptions {
  // Observation count behind Sigma; enables the dense inverse when
  // p <= n / 2. 0 means unknown, in which case only conditioning decides.
  Index n = 0;
  bool allow_inverse = true;
  double min_condition = 1e-6;  // lambda_min / lambda_max required for the inverse
  int max_doublings = 10;
  double tol = 1e-10;           // coordinate change at which a column is accepted
  int max_sweeps = 100000;
  int threads = 1;
};

struct MMatrixResult {
  Matrix M;
  double q_used = 0.0;
  bool used_inverse = false;
  int doublings = 0;
};

/**
 * Approximate inverse of Sigma, column j solving
 *   min m' Sigma m  subject to  |Sigma m - e_j|_inf <= q.
 * Each column is obtained from the equivalent problem
 *   min 0.5 v' Sigma v - v_j + q |v|_1
 * by cyclic coordinate descent. q is doubled when a column is infeasible.
 */
MMatrixResult m_matrix(const Matrix& sigma, double q_constraint, const MMatrixOptions& opts = {});

// sqrt(log p / n)
double default_q_constraint(Index n, Index p);

/**
 * Scaled lasso noise level: alternates a coordinate-descent lasso on
 * y - offsets with penalty sigma * sqrt(2 log p / n) and sigma^2 = RSS / n
 * until sigma changes by less than `tol` (relative).
 */
double scaled_lasso_sigma(const Vector& y, const Matrix& X, const Vector& offsets, double tol = 1e-6,
                          int max_iter = 1000);

enum class Variance { model, sandwich };

struct Debiased {
  Vector b_hat;
  Matrix covariance;  // variance of b_hat: n^{-1} M S M
};

/**
 * b = beta - n^{-1} M X' (mu(eta) - y) / dispersion, where eta is the fitted
 * linear predictor. S is Sigma (model) or the empirical score outer product
 * (1/n) sum_i g_i g_i' (sandwich).
 */
Debiased debias(const Family& f, const Matrix& X, const Vector& y, const Vector& eta, const Vector& beta_hat,
                const Matrix& M, const Matrix& sigma, double dispersion = 1.0,
                Variance variance = Variance::model);

enum class Alternative { two_sided, greater, less };

struct InferenceRow {
  Index j = 0;
  double b_hat = 0.0;
  double se = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool testable = true;  // false when the variance diagonal is zero
};

// Rows from the variance of b_hat (n^{-1} M Sigma M or the sandwich form)
// at confidence level `level` (e.g. 0.95).
std::vector<InferenceRow> inference_table(const Vector& b_hat, const Matrix& covariance, double level,
                                          Alternative alt = Alternative::two_sided);

// Convenience form: covariance = n^{-1} M Sigma M.
std::vector<InferenceRow> inference_table(const Vector& b_hat, const Matrix& M, const Matrix& sigma, Index n,
                                          double level, Alternative alt = Alternative::two_sided);

// "***" below 0.001, "**" below 0.01, "*" below 0.05.
std::string significance_stars(double p_value);

struct RateRatio {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

RateRatio rate_ratio(const InferenceRow& row);

struct InferenceOptions {
  double level = 0.95;
  std::optional<double> q_constraint;  // default_q_constraint when unset
  Variance variance = Variance::model;
  Alternative alternative = Alternative::two_sided;
  MMatrixOptions m_options;
};

struct InferenceResult {
  std::vector<InferenceRow> rows;
  Debiased debiased;
  Matrix sigma;
  MMatrixResult m;
  double noise_sd = 1.0;  // scaled lasso estimate for Gaussian models
};

// Full pipeline for a fitted problem, treating the fitted intercepts as fixed.
InferenceResult run_inference(const Problem& problem, const FitResult& fit, const InferenceOptions& opts = {});

}  // namespace glmfunk
