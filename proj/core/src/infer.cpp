#include "glmfunk/infer.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace glmfunk {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

double soft(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Acklam's rational approximation to the normal quantile.
double acklam(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

enum class ColumnStatus { ok, infeasible };

// Coordinate descent on 0.5 v' S v - v_j + q |v|_1.
ColumnStatus solve_column(const Matrix& S, Index j, double q, const MMatrixOptions& opts, Vector& v) {
  const Index p = S.rows();
  v.setZero(p);
  Vector g = Vector::Zero(p);  // S v
  double scale = 0.0;
  for (Index k = 0; k < p; ++k) scale = std::max(scale, S(k, k));
  const double blowup = 1e12 / std::max(scale, std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index k = 0; k < p; ++k) {
      const double target = (k == j ? 1.0 : 0.0) - (g[k] - S(k, k) * v[k]);
      double next = 0.0;
      if (S(k, k) > 0.0) {
        next = soft(target, q) / S(k, k);
      } else if (std::abs(target) > q) {
        return ColumnStatus::infeasible;  // linear and unbounded along v_k
      }
      const double change = next - v[k];
      if (change != 0.0) {
        g.noalias() += change * S.col(k);
        v[k] = next;
        max_change = std::max(max_change, std::abs(change) * std::sqrt(std::max(S(k, k), 0.0)));
      }
    }
    if (!v.allFinite() || v.lpNorm<Eigen::Infinity>() > blowup) return ColumnStatus::infeasible;
    if (max_change <= opts.tol) {
      Vector residual = g;
      residual[j] -= 1.0;
      if (residual.lpNorm<Eigen::Infinity>() <= q + 1e-9) return ColumnStatus::ok;
    }
  }
  return ColumnStatus::infeasible;
}

void lasso_cd(const Matrix& X, const Vector& col_scale, double lambda, double tol, Vector& beta, Vector& r) {
  const Index n = X.rows();
  const Index p = X.cols();
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double max_change = 0.0;
    for (Index k = 0; k < p; ++k) {
      if (col_scale[k] <= 0.0) continue;
      const double z = X.col(k).dot(r) / static_cast<double>(n) + col_scale[k] * beta[k];
      const double next = soft(z, lambda) / col_scale[k];
      const double change = next - beta[k];
      if (change != 0.0) {
        r.noalias() -= change * X.col(k);
        beta[k] = next;
        max_change = std::max(max_change, std::abs(change) * std::sqrt(col_scale[k]));
      }
    }
    if (max_change <= tol) return;
  }
}

}  // namespace

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw ConfigError("normal_quantile: probability must lie in [0, 1]");
  }
  double x = acklam(p);
  const double e = normal_cdf(x) - p;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

Matrix sigma_hat(const Family& f, const Matrix& X, const Vector& eta, double dispersion) {
  if (eta.size() != X.rows()) throw DataError("sigma_hat: eta length differs from design rows");
  if (!(dispersion > 0.0) || !std::isfinite(dispersion)) throw NumericalError("sigma_hat: dispersion must be positive");
  const Vector w = curvature_weights(f, eta);
  if (!w.allFinite()) throw NumericalError("sigma_hat: non-finite curvature weights");
  const Matrix WX = w.asDiagonal() * X;
  Matrix S = X.transpose() * WX / (static_cast<double>(X.rows()) * dispersion);
  return 0.5 * (S + S.transpose());
}

double default_q_constraint(Index n, Index p) {
  if (n <= 0 || p <= 1) return 1e-3;
  return std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

MMatrixResult m_matrix(const Matrix& sigma, double q_constraint, const MMatrixOptions& opts) {
  const Index p = sigma.rows();
  if (sigma.cols() != p) throw DataError("m_matrix: Sigma must be square");
  if (!(q_constraint > 0.0)) throw ConfigError("m_matrix: q_constraint must be positive");
  if (!sigma.allFinite()) throw NumericalError("m_matrix: Sigma has non-finite entries");
  MMatrixResult out;
  out.q_used = q_constraint;
  if (p == 0) {
    out.M.resize(0, 0);
    return out;
  }

  if (opts.allow_inverse && (opts.n == 0 || 2 * p <= opts.n)) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (hi > 0.0 && lo / hi >= opts.min_condition) {
      const Matrix reg = sigma + 1e-8 * Matrix::Identity(p, p);
      out.M = reg.ldlt().solve(Matrix::Identity(p, p));
      out.used_inverse = true;
      return out;
    }
  }

  double q = q_constraint;
  for (int attempt = 0; attempt <= opts.max_doublings; ++attempt) {
    Matrix M(p, p);
    std::vector<char> feasible(static_cast<std::size_t>(p), 1);
    parallel_for(static_cast<std::size_t>(p), opts.threads, [&](std::size_t jj) {
      const Index j = static_cast<Index>(jj);
      Vector v;
      if (solve_column(sigma, j, q, opts, v) == ColumnStatus::ok) {
        M.row(j) = v.transpose();
      } else {
        feasible[jj] = 0;
      }
    });
    if (std::all_of(feasible.begin(), feasible.end(), [](char c) { return c != 0; })) {
      out.M = std::move(M);
      out.q_used = q;
      out.doublings = attempt;
      return out;
    }
    q *= 2.0;
  }
  throw NumericalError("m_matrix: constraint infeasible after " + std::to_string(opts.max_doublings) +
                       " doublings of q_constraint");
}

double scaled_lasso_sigma(const Vector& y, const Matrix& X, const Vector& offsets, double tol, int max_iter) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (y.size() != n || offsets.size() != n) throw DataError("scaled_lasso_sigma: dimension mismatch");
  if (n == 0) throw DataError("scaled_lasso_sigma: no observations");
  const Vector target = y - offsets;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  double sigma = target.norm() / sqrt_n;
  if (!(sigma > 0.0)) throw NumericalError("scaled lasso: degenerate noise estimate (zero residuals)");
  if (p == 0) return sigma;

  const double lambda0 = std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
  Vector col_scale(p);
  for (Index k = 0; k < p; ++k) col_scale[k] = X.col(k).squaredNorm() / static_cast<double>(n);
  Vector beta = Vector::Zero(p);
  Vector r = target;
  for (int it = 0; it < max_iter; ++it) {
    lasso_cd(X, col_scale, sigma * lambda0, 1e-12 * sigma, beta, r);
    const double next = r.norm() / sqrt_n;
    if (!(next > 0.0)) throw NumericalError("scaled lasso: degenerate noise estimate (zero residuals)");
    const bool done = std::abs(next - sigma) <= tol * sigma;
    sigma = next;
    if (done) return sigma;
  }
  throw NumericalError("scaled lasso: noise estimate did not converge");
}

Debiased debias(const Family& f, const Matrix& X, const Vector& y, const Vector& eta, const Vector& beta_hat,
                const Matrix& M, const Matrix& sigma, double dispersion, Variance variance) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (y.size() != n || eta.size() != n || beta_hat.size() != p || M.rows() != p || M.cols() != p ||
      sigma.rows() != p || sigma.cols() != p) {
    throw DataError("debias: dimension mismatch");
  }
  if (!(dispersion > 0.0)) throw NumericalError("debias: dispersion must be positive");
  const double nn = static_cast<double>(n);
  const Vector resid = (mean(f, eta) - y) / dispersion;
  Debiased out;
  out.b_hat = beta_hat - M * (X.transpose() * resid) / nn;
  if (variance == Variance::model) {
    out.covariance = M * sigma * M.transpose() / nn;
  } else {
    const Matrix G = resid.asDiagonal() * X;  // rows are per-observation scores
    const Matrix S = G.transpose() * G / nn;
    out.covariance = M * S * M.transpose() / nn;
  }
  return out;
}

std::vector<InferenceRow> inference_table(const Vector& b_hat, const Matrix& covariance, double level,
                                          Alternative alt) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("inference level must lie in (0, 1)");
  if (covariance.rows() != b_hat.size() || covariance.cols() != b_hat.size()) {
    throw DataError("inference_table: covariance dimension mismatch");
  }
  const double z = normal_quantile(1.0 - 0.5 * (1.0 - level));
  std::vector<InferenceRow> rows;
  rows.reserve(static_cast<std::size_t>(b_hat.size()));
  for (Index j = 0; j < b_hat.size(); ++j) {
    InferenceRow row;
    row.j = j;
    row.b_hat = b_hat[j];
    const double var = covariance(j, j);
    if (!(var > 0.0) || !std::isfinite(var)) {
      row.testable = false;
      row.se = 0.0;
      row.t_stat = std::numeric_limits<double>::quiet_NaN();
      row.p_value = std::numeric_limits<double>::quiet_NaN();
      row.ci_low = row.ci_high = std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
      continue;
    }
    row.se = std::sqrt(var);
    row.t_stat = row.b_hat / row.se;
    switch (alt) {
      case Alternative::two_sided: row.p_value = std::erfc(std::abs(row.t_stat) / kSqrt2); break;
      case Alternative::greater: row.p_value = normal_cdf(-row.t_stat); break;
      case Alternative::less: row.p_value = normal_cdf(row.t_stat); break;
    }
    row.p_value = std::clamp(row.p_value, 0.0, 1.0);
    row.ci_low = row.b_hat - z * row.se;
    row.ci_high = row.b_hat + z * row.se;
    rows.push_back(row);
  }
  return rows;
}

std::vector<InferenceRow> inference_table(const Vector& b_hat, const Matrix& M, const Matrix& sigma, Index n,
                                          double level, Alternative alt) {
  if (n <= 0) throw DataError("inference_table: n must be positive");
  return inference_table(b_hat, Matrix(M * sigma * M.transpose() / static_cast<double>(n)), level, alt);
}

std::string significance_stars(double p_value) {
  if (!(p_value < 0.05)) return "";
  if (p_value < 0.001) return "***";
  if (p_value < 0.01) return "**";
  return "*";
}

RateRatio rate_ratio(const InferenceRow& row) {
  return {std::exp(row.b_hat), std::exp(row.ci_low), std::exp(row.ci_high)};
}

InferenceResult run_inference(const Problem& problem, const FitResult& fit, const InferenceOptions& opts) {
  const Index n = problem.n();
  const Index p = problem.p();
  if (fit.beta_hat.size() != p || fit.alpha_hat.size() != n) {
    throw DataError("run_inference: fit does not match the problem dimensions");
  }
  const Vector fixed = problem.offsets() + fit.alpha_hat;
  const Vector eta = fixed + problem.X() * fit.beta_hat;

  InferenceResult out;
  double dispersion = 1.0;
  if (problem.family().kind == FamilyKind::gaussian) {
    out.noise_sd = scaled_lasso_sigma(problem.y(), problem.X(), fixed);
    dispersion = out.noise_sd * out.noise_sd;
  }
  out.sigma = sigma_hat(problem.family(), problem.X(), eta, dispersion);
  MMatrixOptions mopts = opts.m_options;
  if (mopts.n == 0) mopts.n = n;
  out.m = m_matrix(out.sigma, opts.q_constraint.value_or(default_q_constraint(n, p)), mopts);
  out.debiased = debias(problem.family(), problem.X(), problem.y(), eta, fit.beta_hat, out.m.M, out.sigma,
                        dispersion, opts.variance);
  out.rows = inference_table(out.debiased.b_hat, out.debiased.covariance, opts.level, opts.alternative);
  return out;
}

}  // namespace glmfunk
