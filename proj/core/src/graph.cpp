#include "glmfunk/graph.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/random.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace glmfunk {

Graph::Graph(Index node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ < 0) throw DataError("graph: negative node count");
  for (auto& e : edges_) {
    if (e.i < 0 || e.j < 0 || e.i >= node_count_ || e.j >= node_count_) {
      throw DataError("graph: edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                      ") out of range for " + std::to_string(node_count_) + " nodes");
    }
    if (e.i == e.j) throw DataError("graph: self-loop at node " + std::to_string(e.i));
    if (!(e.w > 0.0) || !std::isfinite(e.w)) {
      throw DataError("graph: edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                      ") has non-positive weight");
    }
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
      throw DataError("graph: duplicate edge (" + std::to_string(edges_[k].i) + ", " +
                      std::to_string(edges_[k].j) + ")");
    }
  }
}

bool Graph::has_edge(Index i, Index j) const {
  if (i > j) std::swap(i, j);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{i, j, 0.0},
                             [](const Edge& a, const Edge& b) {
                               return a.i != b.i ? a.i < b.i : a.j < b.j;
                             });
  return it != edges_.end() && it->i == i && it->j == j;
}

std::vector<std::vector<std::pair<Index, double>>> Graph::adjacency() const {
  std::vector<std::vector<std::pair<Index, double>>> adj(static_cast<std::size_t>(node_count_));
  for (const auto& e : edges_) {
    adj[e.i].emplace_back(e.j, e.w);
    adj[e.j].emplace_back(e.i, e.w);
  }
  return adj;
}

Graph Graph::induced_subgraph(std::span<const Index> nodes) const {
  std::vector<Index> position(static_cast<std::size_t>(node_count_), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Index v = nodes[k];
    if (v < 0 || v >= node_count_) {
      throw DataError("graph: induced subgraph node " + std::to_string(v) + " out of range");
    }
    if (position[v] >= 0) {
      throw DataError("graph: induced subgraph node " + std::to_string(v) + " repeated");
    }
    position[v] = static_cast<Index>(k);
  }
  std::vector<Edge> kept;
  for (const auto& e : edges_) {
    const Index a = position[e.i];
    const Index b = position[e.j];
    if (a >= 0 && b >= 0) kept.push_back({a, b, e.w});
  }
  return Graph(static_cast<Index>(nodes.size()), std::move(kept));
}

std::vector<Index> Graph::components() const {
  // union-find
  std::vector<Index> parent(static_cast<std::size_t>(node_count_));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& e : edges_) {
    const Index a = find(e.i);
    const Index b = find(e.j);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<Index> label(static_cast<std::size_t>(node_count_), -1);
  std::vector<Index> root_label(static_cast<std::size_t>(node_count_), -1);
  Index next = 0;
  for (Index v = 0; v < node_count_; ++v) {
    const Index r = find(v);
    if (root_label[r] < 0) root_label[r] = next++;
    label[v] = root_label[r];
  }
  return label;
}

LaplacianView laplacian(const Graph& g) {
  const Index n = g.node_count();
  LaplacianView view;
  view.degree = Vector::Zero(n);
  std::vector<Triplet> triplets;
  triplets.reserve(4 * g.edge_count() + static_cast<std::size_t>(n));
  for (const auto& e : g.edges()) {
    triplets.emplace_back(e.i, e.j, -e.w);
    triplets.emplace_back(e.j, e.i, -e.w);
    view.degree[e.i] += e.w;
    view.degree[e.j] += e.w;
  }
  for (Index v = 0; v < n; ++v) triplets.emplace_back(v, v, view.degree[v]);
  view.matrix.resize(n, n);
  view.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return view;
}

IncidenceView incidence(const Graph& g) {
  IncidenceView view;
  std::vector<Triplet> triplets;
  triplets.reserve(2 * g.edge_count());
  Index row = 0;
  for (const auto& e : g.edges()) {
    triplets.emplace_back(row, e.i, e.w);
    triplets.emplace_back(row, e.j, -e.w);
    ++row;
  }
  view.matrix.resize(static_cast<Index>(g.edge_count()), g.node_count());
  view.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return view;
}

double laplacian_quadratic(const Graph& g, const Eigen::Ref<const Vector>& x) {
  if (x.size() != g.node_count()) throw DataError("laplacian_quadratic: length mismatch");
  double total = 0.0;
  for (const auto& e : g.edges()) {
    const double d = x[e.i] - x[e.j];
    total += e.w * d * d;
  }
  return total;
}

HarmonicExtension harmonic_extend(const Graph& full, std::span<const Index> train_nodes,
                                  const Eigen::Ref<const Vector>& alpha_train) {
  const Index n = full.node_count();
  if (alpha_train.size() != static_cast<Index>(train_nodes.size())) {
    throw DataError("harmonic_extend: " + std::to_string(alpha_train.size()) +
                    " train values for " + std::to_string(train_nodes.size()) + " train nodes");
  }
  // train_pos[v] = position in train_nodes, or -1
  std::vector<Index> train_pos(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < train_nodes.size(); ++k) {
    const Index v = train_nodes[k];
    if (v < 0 || v >= n) {
      throw DataError("harmonic_extend: unknown node " + std::to_string(v));
    }
    if (train_pos[v] >= 0) {
      throw DataError("harmonic_extend: train node " + std::to_string(v) + " repeated");
    }
    train_pos[v] = static_cast<Index>(k);
  }

  HarmonicExtension out;
  std::vector<Index> test_pos(static_cast<std::size_t>(n), -1);
  for (Index v = 0; v < n; ++v) {
    if (train_pos[v] < 0) {
      test_pos[v] = static_cast<Index>(out.test_nodes.size());
      out.test_nodes.push_back(v);
    }
  }
  const Index m = static_cast<Index>(out.test_nodes.size());
  out.alpha_test = Vector::Zero(m);
  if (m == 0) return out;

  // A test component is anchored when one of its nodes touches a train node.
  const Graph test_graph = full.induced_subgraph(out.test_nodes);
  const std::vector<Index> comp = test_graph.components();
  const Index n_comp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<char> anchored(static_cast<std::size_t>(n_comp), 0);

  Vector rhs = Vector::Zero(m);
  Vector diag = Vector::Zero(m);
  for (const auto& e : full.edges()) {
    const bool ti = test_pos[e.i] >= 0;
    const bool tj = test_pos[e.j] >= 0;
    if (ti) diag[test_pos[e.i]] += e.w;
    if (tj) diag[test_pos[e.j]] += e.w;
    if (ti && !tj) {
      rhs[test_pos[e.i]] += e.w * alpha_train[train_pos[e.j]];
      anchored[comp[test_pos[e.i]]] = 1;
    } else if (tj && !ti) {
      rhs[test_pos[e.j]] += e.w * alpha_train[train_pos[e.i]];
      anchored[comp[test_pos[e.j]]] = 1;
    }
  }

  // Reduced system over anchored test nodes; it is symmetric positive
  // definite because every component is connected to a fixed value.
  std::vector<Index> solve_pos(static_cast<std::size_t>(m), -1);
  Index n_solve = 0;
  for (Index t = 0; t < m; ++t) {
    if (anchored[comp[t]]) {
      solve_pos[t] = n_solve++;
    } else {
      out.unanchored.push_back(out.test_nodes[t]);
    }
  }
  if (n_solve == 0) return out;

  std::vector<Triplet> triplets;
  Vector b(n_solve);
  for (Index t = 0; t < m; ++t) {
    if (solve_pos[t] < 0) continue;
    triplets.emplace_back(solve_pos[t], solve_pos[t], diag[t]);
    b[solve_pos[t]] = rhs[t];
  }
  for (const auto& e : test_graph.edges()) {
    if (solve_pos[e.i] < 0) continue;  // same component as e.j
    triplets.emplace_back(solve_pos[e.i], solve_pos[e.j], -e.w);
    triplets.emplace_back(solve_pos[e.j], solve_pos[e.i], -e.w);
  }
  SparseMatrix l22(n_solve, n_solve);
  l22.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<SparseMatrix> solver(l22);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("harmonic_extend: factorisation of the test-block Laplacian failed");
  }
  const Vector x = solver.solve(b);
  for (Index t = 0; t < m; ++t) {
    if (solve_pos[t] >= 0) out.alpha_test[t] = x[solve_pos[t]];
  }
  return out;
}

namespace {

bool try_coloring(const std::vector<std::vector<std::pair<Index, double>>>& adj, int k,
                  Engine& rng, std::vector<int>& fold) {
  const Index n = static_cast<Index>(adj.size());
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::fill(fold.begin(), fold.end(), -1);
  std::vector<Index> size(static_cast<std::size_t>(k), 0);
  std::vector<char> blocked(static_cast<std::size_t>(k));
  std::vector<int> candidates;
  for (const Index v : order) {
    std::fill(blocked.begin(), blocked.end(), 0);
    for (const auto& [u, w] : adj[v]) {
      if (fold[u] >= 0) blocked[fold[u]] = 1;
    }
    Index best_size = n + 1;
    candidates.clear();
    for (int f = 0; f < k; ++f) {
      if (blocked[f]) continue;
      if (size[f] < best_size) {
        best_size = size[f];
        candidates.assign(1, f);
      } else if (size[f] == best_size) {
        candidates.push_back(f);
      }
    }
    if (candidates.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const int f = candidates[pick(rng)];
    fold[v] = f;
    ++size[f];
  }
  return true;
}

}  // namespace

FoldAssignment constrained_folds(const Graph& g, int k, std::uint64_t seed,
                                 bool adjacency_constraint) {
  const Index n = g.node_count();
  if (k < 2) throw ConfigError("constrained_folds: need at least 2 folds, got " + std::to_string(k));
  if (k > n) {
    throw ConfigError("constrained_folds: " + std::to_string(k) + " folds for " +
                      std::to_string(n) + " nodes");
  }
  Engine rng = make_engine(seed);
  FoldAssignment out;
  out.fold.assign(static_cast<std::size_t>(n), -1);

  if (adjacency_constraint) {
    const auto adj = g.adjacency();
    for (int attempt = 1; attempt <= kFoldRestartBudget; ++attempt) {
      out.attempts = attempt;
      if (try_coloring(adj, k, rng, out.fold)) {
        out.constrained = true;
        return out;
      }
    }
    out.warning = "constrained_folds: no adjacency-respecting " + std::to_string(k) +
                  "-fold assignment found after " + std::to_string(kFoldRestartBudget) +
                  " attempts; using unconstrained random folds";
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (Index pos = 0; pos < n; ++pos) out.fold[order[pos]] = static_cast<int>(pos % k);
  out.constrained = !adjacency_constraint;
  if (!adjacency_constraint) out.attempts = 1;
  return out;
}

Graph read_edge_list(std::istream& in, Index min_nodes) {
  std::vector<Edge> edges;
  Index max_index = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      // "# nodes N" records the node count, which may exceed the largest index
      std::istringstream header(line.substr(first + 1));
      std::string key;
      long long count = 0;
      if (header >> key >> count && key == "nodes" && count >= 0) {
        min_nodes = std::max(min_nodes, static_cast<Index>(count));
      }
      continue;
    }
    std::istringstream fields(line);
    long long i = 0;
    long long j = 0;
    double w = 1.0;
    if (!(fields >> i >> j)) {
      throw DataError("edge list line " + std::to_string(line_no) + ": expected `i<TAB>j[<TAB>w]`");
    }
    if (!(fields >> w)) {
      if (!fields.eof()) {
        throw DataError("edge list line " + std::to_string(line_no) + ": unreadable weight");
      }
      w = 1.0;
    }
    std::string rest;
    if (fields >> rest) {
      throw DataError("edge list line " + std::to_string(line_no) + ": trailing fields");
    }
    if (i < 0 || j < 0) {
      throw DataError("edge list line " + std::to_string(line_no) + ": negative node index");
    }
    edges.push_back({static_cast<Index>(i), static_cast<Index>(j), w});
    max_index = std::max<Index>(max_index, static_cast<Index>(std::max(i, j)));
  }
  try {
    return Graph(std::max(min_nodes, max_index + 1), std::move(edges));
  } catch (const DataError& e) {
    throw DataError(std::string("edge list: ") + e.what());
  }
}

Graph read_edge_list_file(const std::string& path, Index min_nodes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list `" + path + "`");
  try {
    return read_edge_list(in, min_nodes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# nodes " << g.node_count() << '\n';
  char buf[64];
  for (const auto& e : g.edges()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.w);
    out << e.i << '\t' << e.j << '\t' << buf << '\n';
  }
}

}  // namespace glmfunk
