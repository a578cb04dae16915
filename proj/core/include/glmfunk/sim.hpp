#pragma once

#include "glmfunk/family.hpp"
#include "glmfunk/graph.hpp"
#include "glmfunk/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glmfunk {

// Intrinsic CAR draw with precision L / tau^2, summing to zero on every
// connected component: alpha = sum over positive eigenpairs of
// (tau / sqrt(lambda_k)) z_k v_k.
Vector sample_icar(const Graph& g, double tau, std::uint64_t seed);

struct BlockGraph {
  Graph graph;
  std::vector<int> labels;
};

// Nodes assigned uniformly at random to `blocks` cliques; no cross-block edges.
BlockGraph sbm_graph(Index n, int blocks, std::uint64_t seed);

// 2p/s star components of s/2 features each; the hub of a component is its
// lowest feature index.
Graph hub_feature_graph(Index p, Index s);

// beta_1..beta_{s/2} = rho, beta_{s/2+1}..beta_s = -rho, the rest zero.
Vector coefficient_pattern(Index p, Index s, double rho);

// Hub features N(0, 1), every other feature 0.35 x_hub + N(0, 1) where the
// hub is the lowest index of its component; columns are then centred and
// scaled to unit (1/n) variance.
Matrix gen_design(const Graph& feature_graph, Index n, std::uint64_t seed);

// Draws y with mean mu(offsets + alpha + X beta). Gaussian noise has unit variance.
Vector gen_outcomes(const Family& f, const Vector& alpha, const Matrix& X, const Vector& beta,
                    const Vector& offsets, std::uint64_t seed);

enum class PerturbMode { add, delete_active };
enum class AddScope { all_pairs, intra_component };

// add: every absent pair (or absent pair within a component) joins with
// probability `param`. delete_active: edges joining two active features are removed.
Graph perturb_graph(const Graph& g, PerturbMode mode, double param, const std::vector<Index>& active,
                    std::uint64_t seed, AddScope scope = AddScope::all_pairs);

enum class UnitGraphKind { lattice_file, sbm };
enum class InterceptKind { icar, sbm, iid };

struct PerturbConfig {
  double add_prob = 0.0;
  AddScope add_scope = AddScope::all_pairs;
  bool delete_active_edges = false;
};

struct SimConfig {
  Index n = 204;
  Index p = 300;
  Index s = 20;
  double rho = 0.4;
  double tau = 1.0;
  UnitGraphKind unit_graph = UnitGraphKind::lattice_file;
  std::string lattice_path;
  std::optional<Graph> lattice;  // takes precedence over lattice_path
  int sbm_blocks = 5;
  std::vector<double> sbm_means{-4.0, -2.0, 0.0, 2.0, 4.0};
  double sbm_sd = 0.2;
  // icar for lattices and sbm for block graphs unless set
  std::optional<InterceptKind> intercepts;
  double iid_sd = 0.24;
  Family family = Family::poisson();
  double train_fraction = 0.5;
  std::uint64_t seed = 1;
  std::optional<PerturbConfig> perturb;

  void validate() const;
};

struct SimDataset {
  Graph unit_graph;            // over all n units
  Graph feature_graph;         // graph handed to the estimators (perturbed if requested)
  Graph true_feature_graph;
  Matrix X;
  Vector y;
  Vector offsets;
  Vector alpha;
  Vector beta;
  std::vector<Index> train;    // ascending unit indices
  std::vector<Index> test;
  std::vector<int> blocks;     // SBM labels, empty otherwise
};

SimDataset simulate_dataset(const SimConfig& config);

// Indices of the nonzero entries of coefficient_pattern.
std::vector<Index> active_features(Index s);

}  // namespace glmfunk
