#include "glmfunk/family.hpp"

#include "glmfunk/error.hpp"

#include <algorithm>
#include <cmath>

namespace glmfunk {

namespace {

double clipped_exp(double eta) { return std::exp(std::min(eta, kPoissonExpClip)); }

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

void check_sizes(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& eta,
                 const char* what) {
  if (y.size() != eta.size()) {
    throw DataError(std::string(what) + ": " + std::to_string(y.size()) + " outcomes but " +
                    std::to_string(eta.size()) + " linear predictors");
  }
}

}  // namespace

Family Family::from_name(std::string_view name) {
  if (name == "gaussian") return gaussian();
  if (name == "binomial") return binomial();
  if (name == "poisson") return poisson();
  throw ConfigError("unknown family `" + std::string(name) +
                    "` (expected gaussian, binomial or poisson)");
}

std::string_view Family::name() const noexcept {
  switch (kind) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::binomial: return "binomial";
    case FamilyKind::poisson: return "poisson";
  }
  return "unknown";
}

LinearPredictor LinearPredictor::compose(const Eigen::Ref<const Vector>& offset,
                                         const Eigen::Ref<const Vector>& alpha, const Matrix& X,
                                         const Eigen::Ref<const Vector>& beta) {
  if (offset.size() != X.rows() || alpha.size() != X.rows() || beta.size() != X.cols()) {
    throw DataError("linear predictor: inconsistent dimensions");
  }
  LinearPredictor lp;
  lp.offset = offset;
  lp.eta = offset + alpha;
  if (X.cols() > 0) lp.eta.noalias() += X * beta;
  return lp;
}

void validate_outcomes(const Family& f, const Eigen::Ref<const Vector>& y) {
  for (Index i = 0; i < y.size(); ++i) {
    const double v = y[i];
    if (!std::isfinite(v)) {
      throw DataError("outcome " + std::to_string(i) + " is not finite");
    }
    switch (f.kind) {
      case FamilyKind::gaussian: break;
      case FamilyKind::binomial:
        if (v < 0.0 || v > 1.0) {
          throw DataError("binomial outcome " + std::to_string(i) + " = " + std::to_string(v) +
                          " outside [0, 1]");
        }
        break;
      case FamilyKind::poisson:
        if (v < 0.0 || v != std::floor(v)) {
          throw DataError("poisson outcome " + std::to_string(i) + " = " + std::to_string(v) +
                          " is not a non-negative integer");
        }
        break;
    }
  }
}

Vector loss_terms(const Family& f, const Eigen::Ref<const Vector>& y,
                  const Eigen::Ref<const Vector>& eta) {
  check_sizes(y, eta, "loss");
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    switch (f.kind) {
      case FamilyKind::gaussian: {
        const double r = y[i] - eta[i];
        out[i] = 0.5 * r * r;
        break;
      }
      case FamilyKind::binomial: out[i] = softplus(eta[i]) - y[i] * eta[i]; break;
      case FamilyKind::poisson: out[i] = clipped_exp(eta[i]) - y[i] * eta[i]; break;
    }
  }
  return out;
}

double loss(const Family& f, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& eta) {
  check_sizes(y, eta, "loss");
  double total = 0.0;
  switch (f.kind) {
    case FamilyKind::gaussian:
      total = 0.5 * (y - eta).squaredNorm();
      break;
    case FamilyKind::binomial:
      for (Index i = 0; i < y.size(); ++i) total += softplus(eta[i]) - y[i] * eta[i];
      break;
    case FamilyKind::poisson:
      for (Index i = 0; i < y.size(); ++i) total += clipped_exp(eta[i]) - y[i] * eta[i];
      break;
  }
  return total;
}

double mean(const Family& f, double eta) {
  switch (f.kind) {
    case FamilyKind::gaussian: return eta;
    case FamilyKind::binomial: return expit(eta);
    case FamilyKind::poisson: return clipped_exp(eta);
  }
  return eta;
}

Vector mean(const Family& f, const Eigen::Ref<const Vector>& eta) {
  if (f.kind == FamilyKind::gaussian) return eta;
  Vector mu(eta.size());
  for (Index i = 0; i < eta.size(); ++i) mu[i] = mean(f, eta[i]);
  return mu;
}

Vector gradient_eta(const Family& f, const Eigen::Ref<const Vector>& y,
                    const Eigen::Ref<const Vector>& eta) {
  check_sizes(y, eta, "gradient");
  return mean(f, eta) - y;
}

Vector curvature_weights(const Family& f, const Eigen::Ref<const Vector>& eta) {
  switch (f.kind) {
    case FamilyKind::gaussian: return Vector::Ones(eta.size());
    case FamilyKind::binomial: {
      Vector w(eta.size());
      for (Index i = 0; i < eta.size(); ++i) {
        const double p = expit(eta[i]);
        w[i] = p * (1.0 - p);
      }
      return w;
    }
    case FamilyKind::poisson: {
      Vector w(eta.size());
      for (Index i = 0; i < eta.size(); ++i) w[i] = clipped_exp(eta[i]);
      return w;
    }
  }
  return Vector::Ones(eta.size());
}

bool exponent_clipped(const Family& f, const Eigen::Ref<const Vector>& eta) {
  return f.kind == FamilyKind::poisson && eta.size() > 0 && eta.maxCoeff() > kPoissonExpClip;
}

double deviance(const Family& f, const Eigen::Ref<const Vector>& y,
                const Eigen::Ref<const Vector>& eta) {
  check_sizes(y, eta, "deviance");
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double yi = y[i];
    switch (f.kind) {
      case FamilyKind::gaussian: {
        const double r = yi - eta[i];
        total += r * r;
        break;
      }
      case FamilyKind::binomial: {
        // saturated log-likelihood is y log y + (1-y) log(1-y), zero for 0/1 data
        double sat = 0.0;
        if (yi > 0.0 && yi < 1.0) sat = yi * std::log(yi) + (1.0 - yi) * std::log1p(-yi);
        total += 2.0 * (sat - (yi * eta[i] - softplus(eta[i])));
        break;
      }
      case FamilyKind::poisson: {
        const double sat = yi > 0.0 ? yi * std::log(yi) - yi : 0.0;
        total += 2.0 * (sat - (yi * eta[i] - clipped_exp(eta[i])));
        break;
      }
    }
  }
  return total;
}

double link(const Family& f, double mu) {
  switch (f.kind) {
    case FamilyKind::gaussian: return mu;
    case FamilyKind::binomial: return std::log(mu / (1.0 - mu));
    case FamilyKind::poisson: return std::log(mu);
  }
  return mu;
}

Matrix alr_transform(const Matrix& composition, Index reference, double pseudo_count) {
  const Index cols = composition.cols();
  if (reference < 0 || reference >= cols) {
    throw ConfigError("alr_transform: reference column " + std::to_string(reference) +
                      " out of range for " + std::to_string(cols) + " columns");
  }
  if (pseudo_count < 0.0) throw ConfigError("alr_transform: negative pseudo-count");
  Matrix out(composition.rows(), cols - 1);
  for (Index i = 0; i < composition.rows(); ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double v = composition(i, j) + pseudo_count;
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw DataError("alr_transform: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") is not strictly positive; set a pseudo-count");
      }
    }
    // ratios are invariant to renormalising the row
    const double ref = composition(i, reference) + pseudo_count;
    Index c = 0;
    for (Index j = 0; j < cols; ++j) {
      if (j == reference) continue;
      out(i, c++) = std::log((composition(i, j) + pseudo_count) / ref);
    }
  }
  return out;
}

}  // namespace glmfunk
