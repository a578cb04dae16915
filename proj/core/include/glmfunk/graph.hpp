#pragma once

#include "glmfunk/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace glmfunk {

struct Edge {
  Index i = 0;
  Index j = 0;
  double w = 1.0;
};

/**
 * Weighted undirected graph over nodes 0..node_count-1.
 *
 * Edges are stored canonically with i < j, sorted lexicographically. The
 * constructor rejects self-loops, out-of-range indices, non-positive or
 * non-finite weights and repeated unordered pairs.
 */
class Graph {
 public:
  Graph() = default;
  explicit Graph(Index node_count, std::vector<Edge> edges = {});

  Index node_count() const noexcept { return node_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool has_edge(Index i, Index j) const;

  // Neighbour lists with weights, indexed by node.
  std::vector<std::vector<std::pair<Index, double>>> adjacency() const;

  // Subgraph induced on `nodes`; node k of the result is nodes[k].
  Graph induced_subgraph(std::span<const Index> nodes) const;

  // Connected-component label per node, labels numbered 0.. in order of
  // the smallest node they contain.
  std::vector<Index> components() const;

 private:
  Index node_count_ = 0;
  std::vector<Edge> edges_;
};

struct LaplacianView {
  SparseMatrix matrix;  // L = D - A
  Vector degree;        // weighted degrees d_i
};

struct IncidenceView {
  // |E| x node_count; row e holds +w at the lower endpoint and -w at the
  // higher one, rows in Graph::edges() order.
  SparseMatrix matrix;
};

LaplacianView laplacian(const Graph& g);
IncidenceView incidence(const Graph& g);

// Sum over edges of w * (x_i - x_j)^2, i.e. x' L x by direct summation.
double laplacian_quadratic(const Graph& g, const Eigen::Ref<const Vector>& x);

/**
 * Result of extending node values from a training set to the remaining
 * nodes by minimising the Laplacian quadratic form.
 */
struct HarmonicExtension {
  std::vector<Index> test_nodes;    // ascending node indices not in train
  Vector alpha_test;                // aligned with test_nodes
  std::vector<Index> unanchored;    // test nodes with no path to any train node
};

// Solves L22 x = -L21 alpha_train per connected component of the test
// subgraph. Components that touch no training node receive 0.
HarmonicExtension harmonic_extend(const Graph& full,
                                  std::span<const Index> train_nodes,
                                  const Eigen::Ref<const Vector>& alpha_train);

struct FoldAssignment {
  std::vector<int> fold;            // fold id in [0, k) per node
  bool constrained = false;         // adjacency constraint satisfied
  int attempts = 0;                 // coloring attempts used
  std::string warning;              // non-empty when the constraint was dropped
};

inline constexpr int kFoldRestartBudget = 100;

// Random k-fold partition of the nodes. With `adjacency_constraint`, no two
// adjacent nodes share a fold (randomised greedy colouring, balanced by fold
// size); after kFoldRestartBudget failed attempts, falls back to plain
// random folds and sets `warning`.
FoldAssignment constrained_folds(const Graph& g, int k, std::uint64_t seed,
                                 bool adjacency_constraint = true);

// Edge-list text format: `i<TAB>j[<TAB>w]`, 0-based, `#` comments.
// Spaces are accepted as separators too. node_count is max(min_nodes,
// largest index + 1).
Graph read_edge_list(std::istream& in, Index min_nodes = 0);
Graph read_edge_list_file(const std::string& path, Index min_nodes = 0);
void write_edge_list(std::ostream& out, const Graph& g);

}  // namespace glmfunk
