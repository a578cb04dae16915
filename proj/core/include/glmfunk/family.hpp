#pragma once

#include "glmfunk/types.hpp"

#include <string>
#include <string_view>

namespace glmfunk {

enum class FamilyKind { gaussian, binomial, poisson };

/**
 * Canonical-link GLM family.
 *
 * Losses are negative log-likelihoods up to additive constants, summed over
 * observations:
 *   gaussian  0.5 * (y - eta)^2
 *   binomial  log(1 + exp(eta)) - y * eta
 *   poisson   exp(eta) - y * eta
 *
 * `dispersion` is the Gaussian noise variance. The fitting routines always
 * work with dispersion 1; inference plugs in a noise estimate.
 */
struct Family {
  FamilyKind kind = FamilyKind::gaussian;
  double dispersion = 1.0;

  static Family gaussian(double dispersion = 1.0) { return {FamilyKind::gaussian, dispersion}; }
  static Family binomial() { return {FamilyKind::binomial, 1.0}; }
  static Family poisson() { return {FamilyKind::poisson, 1.0}; }

  // "gaussian" | "binomial" | "poisson"
  static Family from_name(std::string_view name);
  std::string_view name() const noexcept;
};

// Exponents above this are clipped when evaluating exp(eta) for Poisson.
inline constexpr double kPoissonExpClip = 700.0;

/// eta = offset + alpha + X beta.
struct LinearPredictor {
  Vector eta;
  Vector offset;

  static LinearPredictor compose(const Eigen::Ref<const Vector>& offset,
                                 const Eigen::Ref<const Vector>& alpha, const Matrix& X,
                                 const Eigen::Ref<const Vector>& beta);
};

// Throws DataError for outcomes outside the family's support.
void validate_outcomes(const Family& f, const Eigen::Ref<const Vector>& y);

double loss(const Family& f, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& eta);

// Per-observation loss terms; sum equals loss().
Vector loss_terms(const Family& f, const Eigen::Ref<const Vector>& y,
                  const Eigen::Ref<const Vector>& eta);

// d loss / d eta = mu(eta) - y.
Vector gradient_eta(const Family& f, const Eigen::Ref<const Vector>& y,
                    const Eigen::Ref<const Vector>& eta);

// mu'(eta), the diagonal of the loss Hessian in eta.
Vector curvature_weights(const Family& f, const Eigen::Ref<const Vector>& eta);

// Inverse link.
Vector mean(const Family& f, const Eigen::Ref<const Vector>& eta);
double mean(const Family& f, double eta);

// True when some eta would be clipped by the Poisson overflow guard.
bool exponent_clipped(const Family& f, const Eigen::Ref<const Vector>& eta);

// Deviance 2 * (loglik(saturated) - loglik(eta)), summed.
double deviance(const Family& f, const Eigen::Ref<const Vector>& y,
                const Eigen::Ref<const Vector>& eta);

// Canonical link.
double link(const Family& f, double mu);

/**
 * Additive log-ratio transform of a composition matrix (rows are
 * compositions). Returns log(x_j / x_ref) for every column except `reference`.
 * A positive `pseudo_count` is added to every entry first; otherwise zero or
 * negative entries are a DataError.
 */
Matrix alr_transform(const Matrix& composition, Index reference, double pseudo_count = 0.0);

}  // namespace glmfunk
