#include "doctest.h"
#include "oracles.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/graph.hpp"

#include <set>
#include <sstream>

using namespace glmfunk;

TEST_CASE("graph rejects invalid edges") {
  CHECK_THROWS_AS(Graph(3, {{0, 0, 1.0}}), DataError);
  CHECK_THROWS_AS(Graph(3, {{0, 3, 1.0}}), DataError);
  CHECK_THROWS_AS(Graph(3, {{0, 1, 0.0}}), DataError);
  CHECK_THROWS_AS(Graph(3, {{0, 1, -2.0}}), DataError);
  CHECK_THROWS_AS(Graph(3, {{0, 1, 1.0}, {1, 0, 1.0}}), DataError);
  const Graph g(3, {{2, 0, 1.5}});
  CHECK(g.edges()[0].i == 0);
  CHECK(g.edges()[0].j == 2);
  CHECK(g.has_edge(2, 0));
  CHECK_FALSE(g.has_edge(1, 2));
}

TEST_CASE("laplacian examples") {
  SUBCASE("path 0-1-2") {
    const Matrix L = Matrix(laplacian(oracle::path_graph(3)).matrix);
    Matrix expected(3, 3);
    expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    CHECK((L - expected).norm() == 0.0);
  }
  SUBCASE("single node") {
    const Matrix L = Matrix(laplacian(Graph(1)).matrix);
    CHECK(L.rows() == 1);
    CHECK(L(0, 0) == 0.0);
  }
  SUBCASE("weighted edge") {
    const Matrix L = Matrix(laplacian(Graph(2, {{0, 1, 2.0}})).matrix);
    Matrix expected(2, 2);
    expected << 2, -2, -2, 2;
    CHECK((L - expected).norm() == 0.0);
  }
}

TEST_CASE("laplacian row sums vanish and quadratic form is the edge sum") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    const Graph g = oracle::random_graph(3 + rep, 0.3, rng, rep % 2 == 1);
    const auto view = laplacian(g);
    const Matrix L = Matrix(view.matrix);
    CHECK((L - oracle::dense_laplacian(g)).norm() == doctest::Approx(0.0));
    CHECK(L.rowwise().sum().lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((L - L.transpose()).norm() == 0.0);
    const Vector x = oracle::random_vector(g.node_count(), rng);
    double direct = 0.0;
    for (const auto& e : g.edges()) direct += e.w * (x[e.i] - x[e.j]) * (x[e.i] - x[e.j]);
    CHECK(x.dot(L * x) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(laplacian_quadratic(g, x) == doctest::Approx(direct).epsilon(1e-12));
    // positive semi-definite
    Eigen::SelfAdjointEigenSolver<Matrix> eig(L);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("incidence examples") {
  SUBCASE("single unit edge") {
    const Matrix J = Matrix(incidence(Graph(2, {{0, 1, 1.0}})).matrix);
    CHECK(J.rows() == 1);
    CHECK(J(0, 0) == 1.0);
    CHECK(J(0, 1) == -1.0);
  }
  SUBCASE("triangle: J'J equals the laplacian") {
    const Graph tri(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
    const Matrix J = Matrix(incidence(tri).matrix);
    // direct product, entry by entry
    Matrix jtj = Matrix::Zero(3, 3);
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b)
        for (Index e = 0; e < J.rows(); ++e) jtj(a, b) += J(e, a) * J(e, b);
    CHECK((jtj - Matrix(laplacian(tri).matrix)).norm() == 0.0);
  }
  SUBCASE("weighted edge deviates from the laplacian") {
    const Graph g(2, {{0, 1, 3.0}});
    const Matrix J = Matrix(incidence(g).matrix);
    CHECK(J(0, 0) == 3.0);
    CHECK(J(0, 1) == -3.0);
    const Matrix jtj = J.transpose() * J;
    CHECK(jtj(0, 0) == 9.0);
    CHECK(jtj(0, 1) == -9.0);
    CHECK(Matrix(laplacian(g).matrix)(0, 0) == 3.0);
  }
  SUBCASE("rows have two entries summing to zero") {
    std::mt19937_64 rng(5);
    const Graph g = oracle::random_graph(12, 0.4, rng, true);
    const Matrix J = Matrix(incidence(g).matrix);
    for (Index e = 0; e < J.rows(); ++e) {
      CHECK((J.row(e).array() != 0.0).count() == 2);
      CHECK(J.row(e).sum() == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("harmonic extension examples") {
  SUBCASE("test node between two train nodes averages them") {
    const Graph g(3, {{0, 2, 1.0}, {1, 2, 1.0}});
    const std::vector<Index> train{0, 1};
    Vector a(2);
    a << 0.2, 0.4;
    const auto ext = harmonic_extend(g, train, a);
    REQUIRE(ext.test_nodes.size() == 1);
    CHECK(ext.test_nodes[0] == 2);
    CHECK(ext.alpha_test[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(ext.unanchored.empty());
  }
  SUBCASE("isolated test node gets zero") {
    const Graph g(3, {{0, 1, 1.0}});
    const std::vector<Index> train{0, 1};
    const auto ext = harmonic_extend(g, train, Vector::Constant(2, 5.0));
    CHECK(ext.alpha_test[0] == 0.0);
    REQUIRE(ext.unanchored.size() == 1);
    CHECK(ext.unanchored[0] == 2);
  }
  SUBCASE("chain train - a - b") {
    const Graph g(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const std::vector<Index> train{0};
    const auto ext = harmonic_extend(g, train, Vector::Constant(1, 1.0));
    // [[2,-1],[-1,1]] x = [1, 0]
    Matrix A(2, 2);
    A << 2, -1, -1, 1;
    Vector b(2);
    b << 1, 0;
    const Vector x = A.fullPivLu().solve(b);
    CHECK(ext.alpha_test[0] == doctest::Approx(x[0]));
    CHECK(ext.alpha_test[1] == doctest::Approx(x[1]));
    CHECK(x[0] == doctest::Approx(1.0));
  }
  SUBCASE("test-only component is unanchored and zero") {
    const Graph g(5, {{0, 1, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}});
    const std::vector<Index> train{0};
    const auto ext = harmonic_extend(g, train, Vector::Constant(1, 2.0));
    CHECK(ext.alpha_test[0] == doctest::Approx(2.0));
    CHECK(ext.unanchored == std::vector<Index>{2, 3, 4});
    CHECK(ext.alpha_test.tail(3).norm() == 0.0);
  }
  SUBCASE("errors") {
    const Graph g = oracle::path_graph(4);
    const std::vector<Index> train{0, 1};
    CHECK_THROWS_AS(harmonic_extend(g, train, Vector::Zero(3)), DataError);
    const std::vector<Index> bad{0, 7};
    CHECK_THROWS_AS(harmonic_extend(g, bad, Vector::Zero(2)), DataError);
  }
}

TEST_CASE("harmonic extension solves the first-order condition") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 10 + rep;
    const Graph g = oracle::random_graph(n, 0.2, rng, rep % 3 == 0);
    std::vector<Index> train;
    std::vector<Index> test;
    std::bernoulli_distribution coin(0.6);
    for (Index v = 0; v < n; ++v) (coin(rng) ? train : test).push_back(v);
    const Vector a = oracle::random_vector(static_cast<Index>(train.size()), rng);
    const auto ext = harmonic_extend(g, train, a);
    CHECK(ext.test_nodes == test);
    const Matrix L = oracle::dense_laplacian(g);
    const std::set<Index> unanchored(ext.unanchored.begin(), ext.unanchored.end());
    for (std::size_t r = 0; r < test.size(); ++r) {
      if (unanchored.count(test[r])) continue;
      double grad = 0.0;
      for (std::size_t c = 0; c < test.size(); ++c) grad += L(test[r], test[c]) * ext.alpha_test[c];
      for (std::size_t c = 0; c < train.size(); ++c) grad += L(test[r], train[c]) * a[c];
      CHECK(std::abs(grad) <= 1e-8);
    }
  }
}

TEST_CASE("constrained folds") {
  SUBCASE("no edges: balanced and reproducible") {
    const Graph g(4);
    const auto a = constrained_folds(g, 2, 99);
    const auto b = constrained_folds(g, 2, 99);
    CHECK(a.fold == b.fold);
    CHECK(a.constrained);
    CHECK(std::count(a.fold.begin(), a.fold.end(), 0) == 2);
    CHECK(std::count(a.fold.begin(), a.fold.end(), 1) == 2);
  }
  SUBCASE("triangle with three folds") {
    const Graph tri(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
    const auto f = constrained_folds(tri, 3, 1);
    CHECK(f.constrained);
    CHECK(std::set<int>(f.fold.begin(), f.fold.end()).size() == 3);
    CHECK(f.warning.empty());
  }
  SUBCASE("triangle with two folds falls back") {
    const Graph tri(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
    const auto f = constrained_folds(tri, 2, 1);
    CHECK_FALSE(f.constrained);
    CHECK(f.attempts == kFoldRestartBudget);
    CHECK_FALSE(f.warning.empty());
    for (int v : f.fold) CHECK((v == 0 || v == 1));
  }
  SUBCASE("grid: adjacent nodes never share a fold") {
    const Graph g = oracle::grid_graph(8, 9);
    const auto f = constrained_folds(g, 5, 3);
    REQUIRE(f.constrained);
    for (const auto& e : g.edges()) CHECK(f.fold[e.i] != f.fold[e.j]);
    CHECK(f.fold == constrained_folds(g, 5, 3).fold);
    CHECK(f.fold != constrained_folds(g, 5, 4).fold);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(constrained_folds(Graph(3), 4, 0), ConfigError);
    CHECK_THROWS_AS(constrained_folds(Graph(3), 1, 0), ConfigError);
  }
}

TEST_CASE("edge list format") {
  std::istringstream in("# unit graph\n0\t1\t2.5\n1\t2\n\n  # indented comment\n3 0 1\n");
  const Graph g = read_edge_list(in);
  CHECK(g.node_count() == 4);
  CHECK(g.edge_count() == 3);
  CHECK(g.edges()[0].w == 2.5);
  CHECK(g.edges()[2].w == 1.0);

  std::ostringstream out;
  write_edge_list(out, Graph(6, {{0, 1, 0.1}}));
  std::istringstream back(out.str());
  const Graph h = read_edge_list(back);
  CHECK(h.node_count() == 6);
  CHECK(h.edges()[0].w == 0.1);

  std::istringstream bad("0\t1\n1\tx\n");
  try {
    read_edge_list(bad);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream loop("2\t2\n");
  CHECK_THROWS_AS(read_edge_list(loop), DataError);
}

TEST_CASE("induced subgraph and components") {
  const Graph g(5, {{0, 1, 1.0}, {1, 2, 2.0}, {3, 4, 1.0}});
  const std::vector<Index> keep{2, 1, 4};
  const Graph sub = g.induced_subgraph(keep);
  CHECK(sub.node_count() == 3);
  REQUIRE(sub.edge_count() == 1);
  CHECK(sub.edges()[0].i == 0);
  CHECK(sub.edges()[0].j == 1);
  CHECK(sub.edges()[0].w == 2.0);
  CHECK(g.components() == std::vector<Index>{0, 0, 0, 1, 1});
}
