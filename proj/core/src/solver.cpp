#include "glmfunk/solver.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace glmfunk {

Fusion fusion_from_name(std::string_view name) {
  if (name == "l1") return Fusion::l1;
  if (name == "l2") return Fusion::l2;
  throw ConfigError("unknown fusion `" + std::string(name) + "` (expected l1 or l2)");
}

std::string_view fusion_name(Fusion f) noexcept { return f == Fusion::l1 ? "l1" : "l2"; }

void Hyperparams::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be a finite non-negative number");
    }
  };
  nonneg(gamma_n, "gamma_n");
  nonneg(gamma_p, "gamma_p");
  nonneg(lambda, "lambda");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be positive");
  if (!(q > 0.0) || !std::isfinite(q)) throw ConfigError("q must be positive");
}

InterceptMode default_intercept(const Hyperparams& h, bool has_unit_graph) noexcept {
  return has_unit_graph && h.gamma_n > 0.0 ? InterceptMode::per_unit : InterceptMode::common;
}

Problem::Problem(ModelData data, Family family, std::optional<Graph> unit_graph,
                 std::optional<Graph> feature_graph, InterceptMode intercept)
    : data_(std::move(data)),
      family_(family),
      unit_graph_(std::move(unit_graph)),
      feature_graph_(std::move(feature_graph)),
      intercept_(intercept) {
  const Index n = data_.X.rows();
  const Index p = data_.X.cols();
  if (data_.y.size() != n) {
    throw DataError("problem: " + std::to_string(data_.y.size()) + " outcomes for " +
                    std::to_string(n) + " design rows");
  }
  if (data_.offsets.size() == 0) data_.offsets = Vector::Zero(n);
  if (data_.offsets.size() != n) throw DataError("problem: offsets length differs from n");
  if (!data_.X.allFinite()) throw DataError("problem: design matrix has non-finite entries");
  if (!data_.offsets.allFinite()) throw DataError("problem: offsets have non-finite entries");
  validate_outcomes(family_, data_.y);

  if (unit_graph_) {
    if (unit_graph_->node_count() != n) {
      throw DataError("problem: unit graph has " + std::to_string(unit_graph_->node_count()) +
                      " nodes for " + std::to_string(n) + " observations");
    }
    unit_laplacian_ = laplacian(*unit_graph_).matrix;
  } else {
    unit_laplacian_.resize(n, n);
  }
  if (intercept_ == InterceptMode::per_unit && !unit_graph_) {
    // an edgeless graph: intercepts shrunk towards zero only
    unit_graph_ = Graph(n);
    unit_laplacian_.resize(n, n);
  }
  if (feature_graph_) {
    if (feature_graph_->node_count() != p) {
      throw DataError("problem: feature graph has " + std::to_string(feature_graph_->node_count()) +
                      " nodes for " + std::to_string(p) + " features");
    }
    feature_laplacian_ = laplacian(*feature_graph_).matrix;
    feature_incidence_ = incidence(*feature_graph_).matrix;
  } else {
    feature_laplacian_.resize(p, p);
    feature_incidence_.resize(0, p);
  }
}

Vector Problem::eta(const Vector& theta) const {
  Vector out = data_.offsets;
  if (intercept_ == InterceptMode::per_unit) {
    out += theta.head(n());
  } else {
    out.array() += theta[0];
  }
  if (p() > 0) out.noalias() += data_.X * theta.tail(p());
  return out;
}

Vector Problem::alpha_of(const Vector& theta) const {
  if (intercept_ == InterceptMode::per_unit) return theta.head(n());
  return Vector::Constant(n(), theta[0]);
}

Vector FitResult::theta() const {
  if (intercept == InterceptMode::common) {
    Vector out(1 + beta_hat.size());
    out[0] = alpha_hat.size() > 0 ? alpha_hat[0] : 0.0;
    out.tail(beta_hat.size()) = beta_hat;
    return out;
  }
  Vector out(alpha_hat.size() + beta_hat.size());
  out << alpha_hat, beta_hat;
  return out;
}

double soft_threshold(double x, double t) noexcept {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double linf_project(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

SmoothedFusion smoothed_fusion(const Eigen::Ref<const Vector>& beta, const SparseMatrix& incidence,
                               double q) {
  if (!(q > 0.0)) throw ConfigError("smoothed_fusion: q must be positive");
  if (incidence.cols() != beta.size()) throw DataError("smoothed_fusion: dimension mismatch");
  SmoothedFusion out;
  if (incidence.rows() == 0) {
    out.gradient = Vector::Zero(beta.size());
    return out;
  }
  const Vector z = incidence * beta;
  Vector nu(z.size());
  double value = 0.0;
  for (Index e = 0; e < z.size(); ++e) {
    const double a = std::abs(z[e]);
    value += a <= q ? z[e] * z[e] / (2.0 * q) : a - 0.5 * q;
    nu[e] = linf_project(z[e] / q);
  }
  out.value = value;
  out.gradient = incidence.transpose() * nu;
  return out;
}

namespace {

double fusion_l1_exact(const Problem& pr, const Vector& beta) {
  if (pr.feature_incidence().rows() == 0) return 0.0;
  return (pr.feature_incidence() * beta).lpNorm<1>();
}

// Differentiable part of the solver objective, evaluated from a precomputed
// linear predictor so that iterates can reuse eta between value and gradient.
class SmoothPart {
 public:
  SmoothPart(const Problem& pr, const Hyperparams& h) : pr_(pr), h_(h) {}

  double value(const Vector& theta, const Vector& eta) const {
    double v = loss(pr_.family(), pr_.y(), eta);
    if (pr_.intercept() == InterceptMode::per_unit && h_.gamma_n > 0.0) {
      const auto alpha = theta.head(pr_.n());
      v += 0.5 * h_.gamma_n * (alpha.dot(pr_.unit_laplacian() * alpha) + h_.delta * alpha.squaredNorm());
    }
    if (h_.gamma_p > 0.0 && pr_.p() > 0) {
      const auto beta = theta.tail(pr_.p());
      if (h_.fusion == Fusion::l2) {
        v += 0.5 * h_.gamma_p * beta.dot(pr_.feature_laplacian() * beta);
      } else {
        v += h_.gamma_p * smoothed_fusion(beta, pr_.feature_incidence(), h_.q).value;
      }
    }
    return v;
  }

  Vector gradient(const Vector& theta, const Vector& eta) const {
    const Vector r = gradient_eta(pr_.family(), pr_.y(), eta);
    const Index a = pr_.alpha_size();
    const Index p = pr_.p();
    Vector g(a + p);
    if (pr_.intercept() == InterceptMode::per_unit) {
      g.head(a) = r;
      if (h_.gamma_n > 0.0) {
        const auto alpha = theta.head(a);
        g.head(a) += h_.gamma_n * (pr_.unit_laplacian() * alpha + h_.delta * alpha);
      }
    } else {
      g[0] = r.sum();
    }
    if (p > 0) {
      g.tail(p).noalias() = pr_.X().transpose() * r;
      if (h_.gamma_p > 0.0) {
        const auto beta = theta.tail(p);
        if (h_.fusion == Fusion::l2) {
          g.tail(p) += h_.gamma_p * (pr_.feature_laplacian() * beta);
        } else {
          g.tail(p) += h_.gamma_p * smoothed_fusion(beta, pr_.feature_incidence(), h_.q).gradient;
        }
      }
    }
    return g;
  }

 private:
  const Problem& pr_;
  const Hyperparams& h_;
};

double l1_norm_beta(const Vector& theta, Index p) { return p > 0 ? theta.tail(p).lpNorm<1>() : 0.0; }

// Majorisation test f1 <= f0 + g0'd + c/2 |d|^2 for the step d from x0.
// Once the value difference is lost in rounding the curvature along d is read
// off the gradients instead; a step below the resolution of x0 is accepted.
template <class GradAtCandidate>
bool majorized(double f0, double f1, const Vector& g0, const Vector& d, const Vector& x0, double c,
               GradAtCandidate&& grad_at_candidate) {
  if (!std::isfinite(f1)) return false;
  if (d.lpNorm<Eigen::Infinity>() <= 4.0 * std::numeric_limits<double>::epsilon() *
                                         std::max(1.0, x0.lpNorm<Eigen::Infinity>())) {
    return true;
  }
  const double dd = d.squaredNorm();
  const double excess = f1 - f0 - g0.dot(d);
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(f0), std::abs(f1));
  if (std::abs(excess - 0.5 * c * dd) > noise) return excess <= 0.5 * c * dd;
  return (grad_at_candidate() - g0).dot(d) <= c * dd;
}

void prox_beta(Vector& theta, Index p, double threshold) {
  if (threshold <= 0.0) return;
  for (Index j = theta.size() - p; j < theta.size(); ++j) theta[j] = soft_threshold(theta[j], threshold);
}

void check_problem(const Problem& pr, const Hyperparams& h) {
  h.validate();
  if (pr.intercept() == InterceptMode::per_unit && !(h.gamma_n > 0.0)) {
    throw ConfigError("per-unit intercepts need gamma_n > 0 (use a common intercept instead)");
  }
}

Vector starting_point(const Problem& pr, const SolverOptions& opts) {
  if (opts.initial_theta) {
    if (opts.initial_theta->size() != pr.theta_size()) {
      throw DataError("initial theta has length " + std::to_string(opts.initial_theta->size()) +
                      ", expected " + std::to_string(pr.theta_size()));
    }
    return *opts.initial_theta;
  }
  return default_initial_theta(pr);
}

FitResult make_result(const Problem& pr, const Hyperparams& h, const Vector& theta) {
  FitResult out;
  out.alpha_hat = pr.alpha_of(theta);
  out.beta_hat = pr.p() > 0 ? Vector(theta.tail(pr.p())) : Vector();
  out.hyperparams = h;
  out.intercept = pr.intercept();
  return out;
}

std::string step_text(double step) {
  std::ostringstream os;
  os << step;
  return os.str();
}

double largest_eigenvalue(const std::function<Vector(const Vector&)>& apply, Index dim, int iterations) {
  if (dim == 0) return 0.0;
  Engine rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = normal(rng);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = apply(v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    estimate = v.dot(w);
    v = w / norm;
  }
  return std::max(estimate, 0.0);
}

}  // namespace

double spectral_norm_sq(const SparseMatrix& a, int iterations) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return largest_eigenvalue([&](const Vector& v) -> Vector { return a.transpose() * (a * v); },
                            a.cols(), iterations);
}

double objective(const Vector& theta, const Problem& pr, const Hyperparams& h) {
  if (theta.size() != pr.theta_size()) throw DataError("objective: theta has wrong length");
  Hyperparams smooth_only = h;
  double fusion = 0.0;
  if (h.fusion == Fusion::l1) {
    smooth_only.gamma_p = 0.0;
    if (h.gamma_p > 0.0 && pr.p() > 0) fusion = h.gamma_p * fusion_l1_exact(pr, theta.tail(pr.p()));
  }
  SmoothPart part(pr, smooth_only);
  return part.value(theta, pr.eta(theta)) + fusion + h.lambda * l1_norm_beta(theta, pr.p());
}

double solver_objective(const Vector& theta, const Problem& pr, const Hyperparams& h) {
  if (theta.size() != pr.theta_size()) throw DataError("objective: theta has wrong length");
  SmoothPart part(pr, h);
  return part.value(theta, pr.eta(theta)) + h.lambda * l1_norm_beta(theta, pr.p());
}

Vector smooth_gradient(const Vector& theta, const Problem& pr, const Hyperparams& h) {
  if (theta.size() != pr.theta_size()) throw DataError("gradient: theta has wrong length");
  SmoothPart part(pr, h);
  return part.gradient(theta, pr.eta(theta));
}

double KktReport::max_violation() const noexcept {
  return std::max({alpha_residual, zero_violation, active_residual});
}

KktReport kkt_check(const Vector& theta, const Problem& pr, const Hyperparams& h) {
  const Vector g = smooth_gradient(theta, pr, h);
  KktReport out;
  const Index a = pr.alpha_size();
  out.alpha_residual = a > 0 ? g.head(a).lpNorm<Eigen::Infinity>() : 0.0;
  for (Index j = 0; j < pr.p(); ++j) {
    const double b = theta[a + j];
    const double gj = g[a + j];
    if (b == 0.0) {
      out.zero_violation = std::max(out.zero_violation, std::abs(gj) - h.lambda);
    } else {
      out.active_residual = std::max(out.active_residual, std::abs(gj + h.lambda * (b > 0 ? 1.0 : -1.0)));
    }
  }
  out.zero_violation = std::max(out.zero_violation, 0.0);
  return out;
}

double common_intercept_mle(const Family& f, const Eigen::Ref<const Vector>& y,
                            const Eigen::Ref<const Vector>& offsets) {
  const Index n = y.size();
  if (n == 0) return 0.0;
  if (offsets.size() != n) throw DataError("common intercept: offsets length mismatch");
  constexpr double kBound = 30.0;
  if (f.kind == FamilyKind::gaussian) return (y - offsets).mean();
  if (f.kind == FamilyKind::poisson) {
    const double total = y.sum();
    if (total <= 0.0) return -kBound;
    double scale = 0.0;
    for (Index i = 0; i < n; ++i) scale += std::exp(std::min(offsets[i], kPoissonExpClip));
    return std::clamp(std::log(total / scale), -kBound, kBound);
  }
  // binomial: Newton on the score sum(mu(offset + a) - y) = 0
  const double ybar = y.mean();
  if (ybar <= 0.0) return -kBound;
  if (ybar >= 1.0) return kBound;
  double a = std::log(ybar / (1.0 - ybar)) - offsets.mean();
  for (int it = 0; it < 100; ++it) {
    const Vector eta = offsets.array() + a;
    const double score = (mean(f, eta) - y).sum();
    const double curv = curvature_weights(f, eta).sum();
    if (curv <= 0.0) break;
    const double step = score / curv;
    a = std::clamp(a - step, -kBound, kBound);
    if (std::abs(step) < 1e-12) break;
  }
  return a;
}

Vector default_initial_theta(const Problem& pr) {
  Vector theta = Vector::Zero(pr.theta_size());
  theta.head(pr.alpha_size()).setConstant(common_intercept_mle(pr.family(), pr.y(), pr.offsets()));
  return theta;
}

namespace {

FitResult fit_l2_accelerated(const Problem& pr, const Hyperparams& h, const SolverOptions& opts) {
  SmoothPart part(pr, h);
  const Index p = pr.p();
  Vector theta = starting_point(pr, opts);
  Vector eta = pr.eta(theta);
  double obj = part.value(theta, eta) + h.lambda * l1_norm_beta(theta, p);
  if (!std::isfinite(obj)) throw NumericalError("fit_l2: objective is not finite at the start point");

  std::vector<double> trace;
  if (opts.record_trace) trace.push_back(obj);
  double step = opts.step_size;
  double t_k = 1.0;
  bool converged = false;
  int iter = 0;
  double gmap = std::numeric_limits<double>::infinity();
  Vector w = theta;
  Vector w_eta = eta;
  bool momentum = false;  // w differs from theta
  Vector cand;
  Vector cand_eta;

  for (iter = 1; iter <= opts.max_iter; ++iter) {
    const double w_smooth = part.value(w, w_eta);
    const Vector grad = part.gradient(w, w_eta);
    double cand_smooth = 0.0;
    for (;;) {
      cand = w - step * grad;
      prox_beta(cand, p, step * h.lambda);
      cand_eta = pr.eta(cand);
      cand_smooth = part.value(cand, cand_eta);
      if (opts.step_rule == StepRule::fixed) {
        if (!std::isfinite(cand_smooth)) {
          throw NumericalError("fit_l2: objective became non-finite at iteration " + std::to_string(iter) +
                               "; step size " + step_text(step) + " is too large");
        }
        break;
      }
      const Vector d = cand - w;
      if (majorized(w_smooth, cand_smooth, grad, d, w, 1.0 / step,
                    [&]() { return part.gradient(cand, cand_eta); })) {
        break;
      }
      step *= 0.5;
      if (step < 1e-300) throw NumericalError("fit_l2: backtracking step underflow");
    }
    gmap = (w - cand).lpNorm<Eigen::Infinity>() / step;
    const double cand_obj = cand_smooth + h.lambda * l1_norm_beta(cand, p);
    if (!(cand_obj <= obj)) {
      if (!momentum) {
        // a plain step from theta failed to descend: only rounding is left
        converged = true;
        break;
      }
      w = theta;
      w_eta = eta;
      t_k = 1.0;
      momentum = false;
      continue;
    }
    const double change = std::abs(obj - cand_obj) / std::max(std::abs(obj), 1.0);
    const bool uphill = (w - cand).dot(cand - theta) > 0.0;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
    const double beta_k = uphill ? 0.0 : (t_k - 1.0) / t_next;
    t_k = uphill ? 1.0 : t_next;
    w = cand + beta_k * (cand - theta);
    w_eta = cand_eta + beta_k * (cand_eta - eta);
    momentum = beta_k != 0.0;
    theta.swap(cand);
    eta.swap(cand_eta);
    obj = cand_obj;
    if (opts.record_trace) trace.push_back(obj);
    if (change < opts.tol && (opts.grad_tol <= 0.0 || gmap <= opts.grad_tol)) {
      converged = true;
      break;
    }
    if (opts.step_rule == StepRule::backtracking) step *= 1.25;
  }

  FitResult out = make_result(pr, h, theta);
  out.objective_trace = std::move(trace);
  out.iterations = std::min(iter, opts.max_iter);
  out.converged = converged;
  out.final_step = step;
  out.gradient_map_norm = gmap;
  if (exponent_clipped(pr.family(), eta)) out.warnings.push_back("poisson linear predictor exceeded the exponent clip");
  if (!converged) out.warnings.push_back("fit_l2: reached max_iter without converging");
  return out;
}

}  // namespace

FitResult fit_l2(const Problem& pr, const Hyperparams& h, const SolverOptions& opts) {
  check_problem(pr, h);
  if (h.fusion != Fusion::l2) throw ConfigError("fit_l2 requires l2 fusion");
  if (!(opts.step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (opts.accelerate) return fit_l2_accelerated(pr, h, opts);

  SmoothPart part(pr, h);
  const Index p = pr.p();
  Vector theta = starting_point(pr, opts);
  Vector eta = pr.eta(theta);
  double smooth = part.value(theta, eta);
  double obj = smooth + h.lambda * l1_norm_beta(theta, p);
  if (!std::isfinite(obj)) throw NumericalError("fit_l2: objective is not finite at the start point");

  FitResult out;
  std::vector<double> trace;
  if (opts.record_trace) trace.push_back(obj);
  double step = opts.step_size;
  bool converged = false;
  int iter = 0;
  double gmap = std::numeric_limits<double>::infinity();
  Vector cand;
  Vector cand_eta;

  Vector grad = part.gradient(theta, eta);
  Vector cand_grad;
  for (iter = 1; iter <= opts.max_iter; ++iter) {
    double cand_smooth = 0.0;
    bool have_cand_grad = false;
    for (;;) {
      cand = theta - step * grad;
      prox_beta(cand, p, step * h.lambda);
      cand_eta = pr.eta(cand);
      cand_smooth = part.value(cand, cand_eta);
      have_cand_grad = false;
      if (opts.step_rule == StepRule::fixed) {
        if (!std::isfinite(cand_smooth)) {
          throw NumericalError("fit_l2: objective became non-finite at iteration " +
                               std::to_string(iter) + "; step size " + step_text(step) +
                               " is too large");
        }
        break;
      }
      const Vector d = cand - theta;
      const bool ok = majorized(smooth, cand_smooth, grad, d, theta, 1.0 / step, [&]() -> const Vector& {
        cand_grad = part.gradient(cand, cand_eta);
        have_cand_grad = true;
        return cand_grad;
      });
      if (ok) break;
      step *= 0.5;
      if (step < 1e-300) throw NumericalError("fit_l2: backtracking step underflow");
    }
    const double cand_obj = cand_smooth + h.lambda * l1_norm_beta(cand, p);
    gmap = (theta - cand).lpNorm<Eigen::Infinity>() / step;
    const double change = std::abs(obj - cand_obj) / std::max(std::abs(obj), 1.0);
    theta.swap(cand);
    eta.swap(cand_eta);
    smooth = cand_smooth;
    if (have_cand_grad) {
      grad.swap(cand_grad);
    } else {
      grad = part.gradient(theta, eta);
    }
    obj = cand_obj;
    if (opts.record_trace) trace.push_back(obj);
    if (change < opts.tol && (opts.grad_tol <= 0.0 || gmap <= opts.grad_tol)) {
      converged = true;
      break;
    }
    if (opts.step_rule == StepRule::backtracking) step *= 1.25;
  }

  out = make_result(pr, h, theta);
  out.objective_trace = std::move(trace);
  out.iterations = std::min(iter, opts.max_iter);
  out.converged = converged;
  out.final_step = step;
  out.gradient_map_norm = gmap;
  if (exponent_clipped(pr.family(), eta)) {
    out.warnings.push_back("poisson linear predictor exceeded the exponent clip");
  }
  if (!converged) out.warnings.push_back("fit_l2: reached max_iter without converging");
  return out;
}

FitResult fit_l1(const Problem& pr, const Hyperparams& h, const SolverOptions& opts) {
  check_problem(pr, h);
  if (h.fusion != Fusion::l1) throw ConfigError("fit_l1 requires l1 fusion");

  SmoothPart part(pr, h);
  const Index n = pr.n();
  const Index p = pr.p();

  // Fixed pieces of the curvature bound C_L.
  double design_norm_sq = 0.0;
  if (pr.intercept() == InterceptMode::per_unit) {
    // ||[I X]||^2 = 1 + ||X||^2
    const Matrix& X = pr.X();
    design_norm_sq = 1.0 + (p > 0 ? largest_eigenvalue(
                                        [&](const Vector& v) -> Vector {
                                          return X.transpose() * (X * v);
                                        },
                                        p, opts.power_iterations)
                                  : 0.0);
  } else {
    const Matrix& X = pr.X();
    design_norm_sq = largest_eigenvalue(
        [&](const Vector& v) -> Vector {
          Vector u = Vector::Constant(n, v[0]);
          if (p > 0) u.noalias() += X * v.tail(p);
          Vector out(1 + p);
          out[0] = u.sum();
          if (p > 0) out.tail(p).noalias() = X.transpose() * u;
          return out;
        },
        1 + p, opts.power_iterations);
  }
  const double unit_term =
      pr.intercept() == InterceptMode::per_unit
          ? h.gamma_n * (std::sqrt(spectral_norm_sq(pr.unit_laplacian(), opts.power_iterations)) + h.delta)
          : 0.0;
  const double fusion_term =
      h.gamma_p > 0.0 ? h.gamma_p * spectral_norm_sq(pr.feature_incidence(), opts.power_iterations) / h.q
                      : 0.0;
  // power iteration approaches from below; pad slightly and let the
  // majorisation check below catch any remaining shortfall
  auto curvature_bound = [&](const Vector& eta) {
    const double mu_max = curvature_weights(pr.family(), eta).maxCoeff();
    double c = 1.01 * (design_norm_sq * mu_max + unit_term + fusion_term);
    if (!(c > 0.0) || !std::isfinite(c)) c = 0.0;
    return c;
  };

  Vector theta = starting_point(pr, opts);
  Vector w = theta;
  Vector w_eta = pr.eta(w);
  Vector theta_eta = w_eta;
  double s = 1.0;

  FitResult out;
  std::vector<double> trace;
  {
    const double obj0 = part.value(theta, w_eta) + h.lambda * l1_norm_beta(theta, p);
    if (!std::isfinite(obj0)) throw NumericalError("fit_l1: objective is not finite at the start point");
    if (opts.record_trace) trace.push_back(obj0);
  }

  // backtracking: probe a smaller C_L every iteration (the bound still caps
  // it) and restart the momentum when it points uphill
  const bool adaptive = opts.step_rule == StepRule::backtracking;
  double c_l = 0.0;
  bool converged = false;
  int iter = 0;
  int k = 0;  // iterations since the last momentum restart
  double gmap = std::numeric_limits<double>::infinity();
  Vector cand;
  Vector cand_eta;
  for (int t = 0; t < opts.max_iter; ++t, ++k) {
    iter = t + 1;
    if (t % std::max(opts.lipschitz_refresh, 1) == 0) {
      if (t > 0) w_eta = pr.eta(w);
      double bound = curvature_bound(w_eta);
      if (bound == 0.0) bound = 1.0 / 0.001;
      c_l = adaptive && t > 0 ? std::min(c_l, bound) : bound;
    }
    if (adaptive && t > 0) c_l *= 0.8;
    const double w_smooth = part.value(w, w_eta);
    const Vector grad = part.gradient(w, w_eta);
    double cand_smooth = 0.0;
    for (;;) {
      cand = w - grad / c_l;
      prox_beta(cand, p, h.lambda / c_l);
      cand_eta = pr.eta(cand);
      cand_smooth = part.value(cand, cand_eta);
      const Vector d = cand - w;
      if (majorized(w_smooth, cand_smooth, grad, d, w, c_l, [&]() { return part.gradient(cand, cand_eta); })) break;
      c_l *= 2.0;
      if (c_l > 1e300) throw NumericalError("fit_l1: curvature bound overflow");
    }
    gmap = (w - cand).lpNorm<Eigen::Infinity>() * c_l;
    if (adaptive && (w - cand).dot(cand - theta) > 0.0) {
      k = 0;
      s = 1.0;
    }
    const double s_next = 2.0 / (k + 3.0);
    const double momentum = (1.0 - s) / s * s_next;
    const double change = (cand - theta).norm() / std::max(theta.norm(), 1.0);
    w = cand + momentum * (cand - theta);
    theta.swap(cand);
    s = s_next;
    if (opts.record_trace) trace.push_back(cand_smooth + h.lambda * l1_norm_beta(theta, p));
    if (change < opts.tol && (opts.grad_tol <= 0.0 || gmap <= opts.grad_tol)) {
      converged = true;
      break;
    }
    // eta is affine in theta with unit weight on the offset
    w_eta = cand_eta + momentum * (cand_eta - theta_eta);
    theta_eta.swap(cand_eta);
  }

  out = make_result(pr, h, theta);
  out.objective_trace = std::move(trace);
  out.iterations = iter;
  out.converged = converged;
  out.final_step = 1.0 / c_l;
  out.gradient_map_norm = gmap;
  if (exponent_clipped(pr.family(), theta_eta)) {
    out.warnings.push_back("poisson linear predictor exceeded the exponent clip");
  }
  if (!converged) out.warnings.push_back("fit_l1: reached max_iter without converging");
  return out;
}

FitResult fit(const Problem& problem, const Hyperparams& h, const SolverOptions& opts) {
  return h.fusion == Fusion::l1 ? fit_l1(problem, h, opts) : fit_l2(problem, h, opts);
}

}  // namespace glmfunk
