#include "glmfunk/sim.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace glmfunk {

namespace {

void check_hub_layout(Index p, Index s) {
  if (s < 2 || s % 2 != 0) throw ConfigError("sparsity s must be a positive even number");
  if (s > p) throw ConfigError("sparsity s cannot exceed p");
  if (p % (s / 2) != 0) throw ConfigError("s/2 must divide p for the hub feature graph");
}

enum SeedStream : std::uint64_t { kUnitGraph = 1, kIntercepts, kDesign, kOutcomes, kPerturb, kSplit };

}  // namespace

Vector sample_icar(const Graph& g, double tau, std::uint64_t seed) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("sample_icar: tau must be positive");
  const Index n = g.node_count();
  Vector alpha = Vector::Zero(n);
  if (n == 0 || g.edge_count() == 0) return alpha;
  const Matrix L = Matrix(laplacian(g).matrix);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(L);
  const Vector& lambda = eig.eigenvalues();
  const double cutoff = 1e-9 * std::max(lambda.maxCoeff(), 1.0);
  Engine rng = make_engine(seed);
  std::normal_distribution<double> normal;
  for (Index k = 0; k < n; ++k) {
    const double z = normal(rng);
    if (lambda[k] > cutoff) alpha.noalias() += (tau / std::sqrt(lambda[k]) * z) * eig.eigenvectors().col(k);
  }
  return alpha;
}

BlockGraph sbm_graph(Index n, int blocks, std::uint64_t seed) {
  if (blocks < 1) throw ConfigError("sbm_graph: blocks must be at least 1");
  if (n < 0) throw ConfigError("sbm_graph: n must be non-negative");
  Engine rng = make_engine(seed);
  std::uniform_int_distribution<int> pick(0, blocks - 1);
  BlockGraph out;
  out.labels.resize(static_cast<std::size_t>(n));
  for (auto& l : out.labels) l = pick(rng);
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (out.labels[i] == out.labels[j]) edges.push_back({i, j, 1.0});
    }
  }
  out.graph = Graph(n, std::move(edges));
  return out;
}

Graph hub_feature_graph(Index p, Index s) {
  check_hub_layout(p, s);
  const Index size = s / 2;
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(p - p / size));
  for (Index hub = 0; hub < p; hub += size) {
    for (Index k = 1; k < size; ++k) edges.push_back({hub, hub + k, 1.0});
  }
  return Graph(p, std::move(edges));
}

Vector coefficient_pattern(Index p, Index s, double rho) {
  if (!(rho >= 0.0)) throw ConfigError("rho must be non-negative");
  if (s < 0 || s % 2 != 0 || s > p) throw ConfigError("sparsity s must be even and at most p");
  Vector beta = Vector::Zero(p);
  beta.head(s / 2).setConstant(rho);
  beta.segment(s / 2, s / 2).setConstant(-rho);
  return beta;
}

std::vector<Index> active_features(Index s) {
  std::vector<Index> out(static_cast<std::size_t>(std::max<Index>(s, 0)));
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

Matrix gen_design(const Graph& feature_graph, Index n, std::uint64_t seed) {
  const Index p = feature_graph.node_count();
  const std::vector<Index> comp = feature_graph.components();
  std::vector<Index> hub_of_component;
  std::vector<Index> hub(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const auto c = static_cast<std::size_t>(comp[j]);
    if (c >= hub_of_component.size()) hub_of_component.resize(c + 1, -1);
    if (hub_of_component[c] < 0) hub_of_component[c] = j;  // lowest index comes first
    hub[j] = hub_of_component[c];
  }
  Engine rng = make_engine(seed);
  std::normal_distribution<double> normal;
  Matrix X(n, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) X(i, j) = normal(rng);
  }
  for (Index j = 0; j < p; ++j) {
    if (hub[j] != j) X.col(j) += 0.35 * X.col(hub[j]);
  }
  const double nn = static_cast<double>(n);
  for (Index j = 0; j < p && n > 1; ++j) {
    X.col(j).array() -= X.col(j).mean();
    const double sd = std::sqrt(X.col(j).squaredNorm() / nn);
    if (sd > 0.0) X.col(j) /= sd;
  }
  return X;
}

Vector gen_outcomes(const Family& f, const Vector& alpha, const Matrix& X, const Vector& beta,
                    const Vector& offsets, std::uint64_t seed) {
  const Index n = X.rows();
  if (alpha.size() != n || beta.size() != X.cols() || (offsets.size() != 0 && offsets.size() != n)) {
    throw DataError("gen_outcomes: dimension mismatch");
  }
  Vector eta = alpha + X * beta;
  if (offsets.size() == n) eta += offsets;
  Engine rng = make_engine(seed);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    switch (f.kind) {
      case FamilyKind::gaussian: y[i] = eta[i] + std::normal_distribution<double>()(rng); break;
      case FamilyKind::binomial: y[i] = std::bernoulli_distribution(mean(f, eta[i]))(rng) ? 1.0 : 0.0; break;
      case FamilyKind::poisson: {
        const double mu = std::exp(eta[i]);
        if (!(mu <= 1e9)) {
          throw NumericalError("gen_outcomes: Poisson mean " + std::to_string(mu) + " for unit " +
                               std::to_string(i) + " exceeds 1e9");
        }
        y[i] = static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
        break;
      }
    }
  }
  return y;
}

Graph perturb_graph(const Graph& g, PerturbMode mode, double param, const std::vector<Index>& active,
                    std::uint64_t seed, AddScope scope) {
  const Index p = g.node_count();
  if (mode == PerturbMode::delete_active) {
    std::vector<char> is_active(static_cast<std::size_t>(p), 0);
    for (Index a : active) {
      if (a < 0 || a >= p) throw DataError("perturb_graph: active index out of range");
      is_active[static_cast<std::size_t>(a)] = 1;
    }
    std::vector<Edge> kept;
    for (const auto& e : g.edges()) {
      if (!(is_active[e.i] && is_active[e.j])) kept.push_back(e);
    }
    return Graph(p, std::move(kept));
  }

  if (!(param >= 0.0 && param <= 1.0)) throw ConfigError("perturb_graph: add probability must lie in [0, 1]");
  if (param == 0.0) return g;
  std::vector<Index> comp;
  if (scope == AddScope::intra_component) comp = g.components();
  std::vector<char> present(static_cast<std::size_t>(p * p), 0);
  for (const auto& e : g.edges()) present[static_cast<std::size_t>(e.i * p + e.j)] = 1;

  // Bernoulli(param) per candidate pair, drawn as geometric gaps between successes.
  Engine rng = make_engine(seed);
  const bool every = param >= 1.0;
  std::geometric_distribution<long long> gap(every ? 0.5 : param);
  long long skip = every ? 0 : gap(rng);
  std::vector<Edge> edges = g.edges();
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      if (present[static_cast<std::size_t>(i * p + j)]) continue;
      if (scope == AddScope::intra_component && comp[i] != comp[j]) continue;
      if (skip == 0) {
        edges.push_back({i, j, 1.0});
        if (!every) skip = gap(rng);
      } else {
        --skip;
      }
    }
  }
  return Graph(p, std::move(edges));
}

void SimConfig::validate() const {
  if (n < 2) throw ConfigError("simulation needs n >= 2");
  check_hub_layout(p, s);
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be a finite non-negative number");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (unit_graph == UnitGraphKind::sbm) {
    if (sbm_blocks < 1) throw ConfigError("sbm_blocks must be at least 1");
    if (static_cast<int>(sbm_means.size()) != sbm_blocks) {
      throw ConfigError("sbm_means must list one mean per block");
    }
  } else if (!lattice && lattice_path.empty()) {
    throw ConfigError("lattice unit graph requires a lattice edge-list path");
  }
  if (!(sbm_sd >= 0.0) || !(iid_sd >= 0.0)) throw ConfigError("intercept standard deviations must be >= 0");
  if (perturb && !(perturb->add_prob >= 0.0 && perturb->add_prob <= 1.0)) {
    throw ConfigError("perturb.add_prob must lie in [0, 1]");
  }
}

SimDataset simulate_dataset(const SimConfig& config) {
  config.validate();
  const std::uint64_t seed = config.seed;
  SimDataset out;

  if (config.unit_graph == UnitGraphKind::sbm) {
    BlockGraph bg = sbm_graph(config.n, config.sbm_blocks, derive_seed(seed, kUnitGraph));
    out.unit_graph = std::move(bg.graph);
    out.blocks = std::move(bg.labels);
  } else {
    out.unit_graph = config.lattice ? *config.lattice : read_edge_list_file(config.lattice_path);
    if (out.unit_graph.node_count() != config.n) {
      throw ConfigError("lattice has " + std::to_string(out.unit_graph.node_count()) + " nodes but n = " +
                        std::to_string(config.n));
    }
  }

  const InterceptKind kind = config.intercepts.value_or(
      config.unit_graph == UnitGraphKind::sbm ? InterceptKind::sbm : InterceptKind::icar);
  const std::uint64_t alpha_seed = derive_seed(seed, kIntercepts);
  switch (kind) {
    case InterceptKind::icar: out.alpha = sample_icar(out.unit_graph, config.tau, alpha_seed); break;
    case InterceptKind::sbm: {
      if (out.blocks.empty()) throw ConfigError("sbm intercepts require an sbm unit graph");
      Engine rng = make_engine(alpha_seed);
      std::normal_distribution<double> normal;
      out.alpha.resize(config.n);
      for (Index i = 0; i < config.n; ++i) {
        out.alpha[i] = config.sbm_means[static_cast<std::size_t>(out.blocks[i])] + config.sbm_sd * normal(rng);
      }
      break;
    }
    case InterceptKind::iid: {
      Engine rng = make_engine(alpha_seed);
      std::normal_distribution<double> normal;
      out.alpha.resize(config.n);
      for (Index i = 0; i < config.n; ++i) out.alpha[i] = config.iid_sd * normal(rng);
      break;
    }
  }

  out.true_feature_graph = hub_feature_graph(config.p, config.s);
  out.X = gen_design(out.true_feature_graph, config.n, derive_seed(seed, kDesign));
  out.beta = coefficient_pattern(config.p, config.s, config.rho);
  out.offsets = Vector::Zero(config.n);
  out.y = gen_outcomes(config.family, out.alpha, out.X, out.beta, out.offsets, derive_seed(seed, kOutcomes));

  out.feature_graph = out.true_feature_graph;
  if (config.perturb) {
    const std::uint64_t ps = derive_seed(seed, kPerturb);
    if (config.perturb->delete_active_edges) {
      out.feature_graph =
          perturb_graph(out.feature_graph, PerturbMode::delete_active, 0.0, active_features(config.s), ps);
    }
    if (config.perturb->add_prob > 0.0) {
      out.feature_graph = perturb_graph(out.feature_graph, PerturbMode::add, config.perturb->add_prob, {}, ps,
                                        config.perturb->add_scope);
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(config.n));
  std::iota(order.begin(), order.end(), Index{0});
  Engine split = make_engine(derive_seed(seed, kSplit));
  std::shuffle(order.begin(), order.end(), split);
  const auto n_train = static_cast<std::size_t>(
      std::clamp<Index>(static_cast<Index>(std::llround(config.train_fraction * static_cast<double>(config.n))),
                        1, config.n - 1));
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace glmfunk
