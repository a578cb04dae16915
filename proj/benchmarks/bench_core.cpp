#include "glmfunk/graph.hpp"
#include "glmfunk/infer.hpp"
#include "glmfunk/sim.hpp"
#include "glmfunk/solver.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace glmfunk;

namespace {

Graph grid(Index rows, Index cols) {
  std::vector<Edge> edges;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index v = r * cols + c;
      if (c + 1 < cols) edges.push_back({v, v + 1, 1.0});
      if (r + 1 < rows) edges.push_back({v, v + cols, 1.0});
    }
  }
  return Graph(rows * cols, std::move(edges));
}

struct Fixture {
  Problem problem;
  Hyperparams h;
};

// Poisson problem on a 12 x 17 lattice with a hub feature graph.
Fixture poisson_fixture(Index p, Fusion fusion) {
  SimConfig c;
  c.n = 204;
  c.p = p;
  c.s = 20;
  c.tau = 0.27;
  c.lattice = grid(12, 17);
  const SimDataset d = simulate_dataset(c);
  ModelData data{d.y, d.X, Vector()};
  Hyperparams h{10.0, 50.0, 1.0};
  h.fusion = fusion;
  return {Problem(data, Family::poisson(), d.unit_graph, d.feature_graph, InterceptMode::per_unit), h};
}

SolverOptions options(bool accelerate) {
  SolverOptions o;
  o.step_rule = StepRule::backtracking;
  o.step_size = 1.0;
  o.accelerate = accelerate;
  o.tol = 1e-9;
  o.grad_tol = 0.01;
  o.max_iter = 100000;
  o.record_trace = false;
  return o;
}

void BM_fit_l2(benchmark::State& state) {
  const Fixture f = poisson_fixture(state.range(0), Fusion::l2);
  const SolverOptions o = options(state.range(1) != 0);
  int iterations = 0;
  for (auto _ : state) {
    const FitResult r = fit_l2(f.problem, f.h, o);
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.beta_hat.data());
  }
  state.counters["solver_iterations"] = iterations;
}
BENCHMARK(BM_fit_l2)->Args({150, 0})->Args({150, 1})->Args({300, 1})->Unit(benchmark::kMillisecond);

void BM_fit_l1(benchmark::State& state) {
  const Fixture f = poisson_fixture(state.range(0), Fusion::l1);
  const SolverOptions o = options(false);
  int iterations = 0;
  for (auto _ : state) {
    const FitResult r = fit_l1(f.problem, f.h, o);
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.beta_hat.data());
  }
  state.counters["solver_iterations"] = iterations;
}
BENCHMARK(BM_fit_l1)->Arg(150)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_harmonic_extend(benchmark::State& state) {
  const Index side = state.range(0);
  const Graph g = grid(side, side);
  std::vector<Index> train;
  for (Index i = 0; i < g.node_count(); i += 2) train.push_back(i);
  const Vector alpha = Vector::LinSpaced(static_cast<Index>(train.size()), -1.0, 1.0);
  for (auto _ : state) {
    const HarmonicExtension e = harmonic_extend(g, train, alpha);
    benchmark::DoNotOptimize(e.alpha_test.data());
  }
}
BENCHMARK(BM_harmonic_extend)->Arg(15)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_m_matrix(benchmark::State& state) {
  const Index p = state.range(0);
  const Index n = 102;
  const Matrix X = gen_design(hub_feature_graph(p, 20), n, 7);
  const Matrix sigma = X.transpose() * X / static_cast<double>(n);
  MMatrixOptions o;
  o.n = n;
  for (auto _ : state) {
    const MMatrixResult m = m_matrix(sigma, default_q_constraint(n, p), o);
    benchmark::DoNotOptimize(m.M.data());
  }
}
BENCHMARK(BM_m_matrix)->Arg(40)->Arg(150)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
