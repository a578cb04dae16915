#pragma once

#include "glmfunk/family.hpp"
#include "glmfunk/graph.hpp"
#include "glmfunk/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glmfunk {

enum class Fusion { l1, l2 };

Fusion fusion_from_name(std::string_view name);
std::string_view fusion_name(Fusion f) noexcept;

/**
 * Penalty levels of the doubly regularised objective
 *
 *   loss(y; offset + alpha + X beta) + 0.5 gamma_n alpha' (L_n + delta I) alpha
 *     + gamma_p P(G_p, beta) + lambda |beta|_1
 *
 * with P = 0.5 beta' L_p beta (l2 fusion) or |J_p beta|_1 (l1 fusion). The l1
 * fusion is fitted through its smoothed surrogate with parameter q.
 */
struct Hyperparams {
  double gamma_n = 0.0;
  double gamma_p = 0.0;
  double lambda = 0.0;
  double delta = 0.01;
  Fusion fusion = Fusion::l2;
  double q = 0.001;

  void validate() const;
};

// per_unit: one intercept per observation, penalised by gamma_n (L_n + delta I).
// common: a single unpenalised intercept shared by every observation
// (lasso / Grace-style models, and the default initialisation).
enum class InterceptMode { per_unit, common };

struct ModelData {
  Vector y;
  Matrix X;
  Vector offsets;  // empty means all zero
};

/**
 * Immutable fitting problem: data, family, graphs and intercept layout.
 * Parameters are packed as theta = (alpha, beta) where alpha has length n
 * (per_unit) or 1 (common).
 */
class Problem {
 public:
  Problem(ModelData data, Family family, std::optional<Graph> unit_graph,
          std::optional<Graph> feature_graph, InterceptMode intercept);

  Index n() const noexcept { return data_.X.rows(); }
  Index p() const noexcept { return data_.X.cols(); }
  Index alpha_size() const noexcept { return intercept_ == InterceptMode::per_unit ? n() : 1; }
  Index theta_size() const noexcept { return alpha_size() + p(); }

  const Vector& y() const noexcept { return data_.y; }
  const Matrix& X() const noexcept { return data_.X; }
  const Vector& offsets() const noexcept { return data_.offsets; }
  const ModelData& data() const noexcept { return data_; }
  const Family& family() const noexcept { return family_; }
  InterceptMode intercept() const noexcept { return intercept_; }

  const std::optional<Graph>& unit_graph() const noexcept { return unit_graph_; }
  const std::optional<Graph>& feature_graph() const noexcept { return feature_graph_; }
  const SparseMatrix& unit_laplacian() const noexcept { return unit_laplacian_; }
  const SparseMatrix& feature_laplacian() const noexcept { return feature_laplacian_; }
  const SparseMatrix& feature_incidence() const noexcept { return feature_incidence_; }

  // offset + alpha + X beta
  Vector eta(const Vector& theta) const;
  // alpha expanded to length n
  Vector alpha_of(const Vector& theta) const;

 private:
  ModelData data_;
  Family family_;
  std::optional<Graph> unit_graph_;
  std::optional<Graph> feature_graph_;
  InterceptMode intercept_;
  SparseMatrix unit_laplacian_;
  SparseMatrix feature_laplacian_;
  SparseMatrix feature_incidence_;
};

// per_unit when a unit graph is available and gamma_n > 0, common otherwise.
InterceptMode default_intercept(const Hyperparams& h, bool has_unit_graph) noexcept;

enum class StepRule { fixed, backtracking };

struct SolverOptions {
  double step_size = 0.001;  // fixed step for fit_l2; initial step when backtracking
  // fit_l1 with backtracking lets C_L fall below the curvature bound and
  // restarts its momentum
  StepRule step_rule = StepRule::fixed;
  int max_iter = 50000;
  double tol = 1e-7;       // relative objective change (l2) / relative theta change (l1)
  double grad_tol = 0.0;   // optional bound on the proximal-gradient mapping, 0 disables
  std::optional<Vector> initial_theta;
  bool record_trace = true;
  int lipschitz_refresh = 25;
  int power_iterations = 50;
  // fit_l2 only: monotone accelerated proximal gradient with momentum
  // restarts; the objective trace stays non-increasing
  bool accelerate = false;
};

struct FitResult {
  Vector alpha_hat;  // length n
  Vector beta_hat;   // length p
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  Hyperparams hyperparams;
  InterceptMode intercept = InterceptMode::per_unit;
  double final_step = 0.0;        // step (l2) or 1 / C_L (l1) used last
  double gradient_map_norm = 0.0;  // |theta_t - theta_{t+1}|_inf / step at exit
  std::vector<std::string> warnings;

  // Packed (alpha, beta) in the layout of the problem it came from.
  Vector theta() const;
};

double soft_threshold(double x, double t) noexcept;
double linf_project(double x) noexcept;

struct SmoothedFusion {
  double value = 0.0;
  Vector gradient;
};

// Smoothed |J beta|_1: per edge z^2 / (2q) when |z| <= q, |z| - q/2 otherwise,
// gradient J' clamp(J beta / q, -1, 1).
SmoothedFusion smoothed_fusion(const Eigen::Ref<const Vector>& beta, const SparseMatrix& incidence,
                               double q);

// Exact objective with the l1 or l2 feature penalty (no smoothing).
double objective(const Vector& theta, const Problem& problem, const Hyperparams& h);

// Objective minimised by the solvers: identical to objective() for l2
// fusion, with f_q in place of |J beta|_1 for l1 fusion.
double solver_objective(const Vector& theta, const Problem& problem, const Hyperparams& h);

// Gradient of the differentiable part of solver_objective().
Vector smooth_gradient(const Vector& theta, const Problem& problem, const Hyperparams& h);

struct KktReport {
  double alpha_residual = 0.0;    // max |gradient| over intercepts
  double zero_violation = 0.0;    // max (|g_j| - lambda)_+ over zero beta_j
  double active_residual = 0.0;   // max |g_j + lambda sign(beta_j)| over nonzero beta_j

  double max_violation() const noexcept;
};

KktReport kkt_check(const Vector& theta, const Problem& problem, const Hyperparams& h);

// Maximum-likelihood common intercept with fixed offsets (Newton iterations;
// clamped to [-30, 30] for degenerate outcomes such as all zeros).
double common_intercept_mle(const Family& f, const Eigen::Ref<const Vector>& y,
                            const Eigen::Ref<const Vector>& offsets);

// alpha = common intercept MLE in every slot, beta = 0.
Vector default_initial_theta(const Problem& problem);

// Proximal gradient descent for l2 feature fusion.
FitResult fit_l2(const Problem& problem, const Hyperparams& h, const SolverOptions& opts = {});

// Accelerated proximal gradient with the smoothed l1 fusion penalty.
FitResult fit_l1(const Problem& problem, const Hyperparams& h, const SolverOptions& opts = {});

// Dispatch on h.fusion.
FitResult fit(const Problem& problem, const Hyperparams& h, const SolverOptions& opts = {});

// Largest eigenvalue of a symmetric PSD sparse matrix by power iteration.
double spectral_norm_sq(const SparseMatrix& a, int iterations);

}  // namespace glmfunk
