#include "experiment.hpp"

#include "pipeline.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/infer.hpp"
#include "glmfunk/parallel.hpp"
#include "glmfunk/random.hpp"
#include "glmfunk/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace glmfunk::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kPilotStream = 1'000'000;

struct Replicate {
  SimDataset sim;
  TrainingSet train;
  Matrix X_test;  // standardized with training statistics
  Vector y_test;
  Vector offsets_test;
};

Replicate make_replicate(const ExperimentSettings& s, std::uint64_t stream) {
  SimConfig sc = s.simulation;
  sc.seed = derive_seed(s.seed, stream);
  Replicate r;
  r.sim = simulate_dataset(sc);
  const auto& d = r.sim;
  const auto n_train = static_cast<Index>(d.train.size());
  const auto n_test = static_cast<Index>(d.test.size());
  Matrix X_train(n_train, d.X.cols());
  r.train.data.y.resize(n_train);
  r.train.data.offsets.resize(n_train);
  for (Index i = 0; i < n_train; ++i) {
    const Index u = d.train[static_cast<std::size_t>(i)];
    X_train.row(i) = d.X.row(u);
    r.train.data.y[i] = d.y[u];
    r.train.data.offsets[i] = d.offsets[u];
  }
  for (Index j = 0; j < d.X.cols(); ++j) r.train.feature_names.push_back("x" + std::to_string(j + 1));
  r.train.standardization = Standardization::from_training(X_train, r.train.feature_names);
  r.train.data.X = r.train.standardization.apply(X_train);
  r.train.units = d.train;
  r.train.family = sc.family;
  r.train.full_graph = d.unit_graph;
  r.train.unit_graph = d.unit_graph.induced_subgraph(d.train);
  r.train.feature_graph = d.feature_graph;

  Matrix X_test(n_test, d.X.cols());
  r.y_test.resize(n_test);
  r.offsets_test.resize(n_test);
  for (Index i = 0; i < n_test; ++i) {
    const Index u = d.test[static_cast<std::size_t>(i)];
    X_test.row(i) = d.X.row(u);
    r.y_test[i] = d.y[u];
    r.offsets_test[i] = d.offsets[u];
  }
  r.X_test = r.train.standardization.apply(X_test);
  return r;
}

TrainingSet method_view(const TrainingSet& t, const MethodSpec& m) {
  TrainingSet v = t;
  if (!m.unit_graph) v.unit_graph.reset();
  if (!m.feature_graph) v.feature_graph.reset();
  return v;
}

RunConfig tune_config(const ExperimentSettings& s, const MethodSpec& m) {
  RunConfig c;
  c.fusion = m.fusion;
  c.delta = s.delta;
  c.q = s.q;
  c.solver = s.solver;
  c.intercept = m.unit_graph ? InterceptMode::per_unit : InterceptMode::common;
  c.threads = 1;
  return c;
}

Hyperparams tune_method(const ExperimentSettings& s, const MethodSpec& m, const TrainingSet& view,
                        std::uint64_t seed) {
  RunConfig c = tune_config(s, m);
  c.seed = seed;
  const TuneSpec spec = make_tune_spec(s.tune, c, view);
  return coordinate_descent_tune(spec, make_tune_data(view)).best;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

// Coordinate-wise median over pilot fits; grid values are log-spaced so this
// is also the median on the log scale.
Hyperparams combine(const std::vector<Hyperparams>& hs) {
  Hyperparams out = hs.front();
  std::vector<double> l, gn, gp;
  for (const auto& h : hs) {
    l.push_back(h.lambda);
    gn.push_back(h.gamma_n);
    gp.push_back(h.gamma_p);
  }
  out.lambda = median(l);
  out.gamma_n = median(gn);
  out.gamma_p = median(gp);
  return out;
}

ReplicateMetrics evaluate(const ExperimentSettings& s, const MethodSpec& m, const Replicate& rep,
                          const Hyperparams& h) {
  ReplicateMetrics out;
  out.method = m.name;
  out.h = h;
  const TrainingSet view = method_view(rep.train, m);
  const InterceptMode mode = m.unit_graph ? InterceptMode::per_unit : InterceptMode::common;
  const Problem problem = make_problem(view, mode);
  const FitResult f = fit(problem, h, s.solver);
  if (!f.theta().allFinite()) throw NumericalError("non-finite coefficients");
  out.iterations = f.iterations;
  out.converged = f.converged;

  InferenceOptions io = s.inference;
  io.m_options.n = problem.n();
  io.m_options.threads = 1;
  const InferenceResult inf = run_inference(problem, f, io);

  const Vector& beta = rep.sim.beta;
  const Vector& scale = view.standardization.scale;
  const double a = s.experiment.alpha_level;
  int active = 0, hits = 0, nulls = 0, false_hits = 0, covered = 0;
  for (const auto& row : inf.rows) {
    const bool reject = row.testable && row.p_value < a;
    if (beta[row.j] != 0.0) {
      ++active;
      hits += reject;
    } else {
      ++nulls;
      false_hits += reject;
    }
    const double lo = row.ci_low / scale[row.j];
    const double hi = row.ci_high / scale[row.j];
    covered += row.testable && lo <= beta[row.j] && beta[row.j] <= hi;
  }
  out.power = active ? static_cast<double>(hits) / active : kNaN;
  out.type1_error = nulls ? static_cast<double>(false_hits) / nulls : kNaN;
  out.coverage = static_cast<double>(covered) / static_cast<double>(inf.rows.size());

  const auto pred = predict_held_out(f, rep.sim.unit_graph, rep.sim.train, rep.sim.test, rep.X_test, rep.offsets_test);
  const auto nt = static_cast<double>(rep.y_test.size());
  if (rep.train.family.kind == FamilyKind::binomial) {
    out.test_error = deviance(rep.train.family, rep.y_test, pred.eta) / nt;
  } else {
    out.test_error = std::sqrt((rep.y_test - mean(rep.train.family, pred.eta)).squaredNorm() / nt);
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateMetrics>& rows, const std::vector<std::string>& methods) {
  std::vector<SummaryRow> out;
  for (const auto& m : methods) {
    const std::pair<const char*, double ReplicateMetrics::*> metrics[] = {{"power", &ReplicateMetrics::power},
                                                                          {"type1_error", &ReplicateMetrics::type1_error},
                                                                          {"coverage", &ReplicateMetrics::coverage},
                                                                          {"test_error", &ReplicateMetrics::test_error}};
    for (const auto& [name, field] : metrics) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.method == m && r.status == "ok" && std::isfinite(r.*field)) v.push_back(r.*field);
      }
      SummaryRow s{m, name, kNaN, kNaN, static_cast<int>(v.size())};
      if (!v.empty()) {
        double sum = 0.0;
        for (double x : v) sum += x;
        s.mean = sum / static_cast<double>(v.size());
        if (v.size() > 1) {
          double ss = 0.0;
          for (double x : v) ss += (x - s.mean) * (x - s.mean);
          s.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
        }
      }
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace

MethodSpec method_spec(const std::string& name) {
  if (name == "glm-funk-l1") return {name, Fusion::l1, true, true};
  if (name == "glm-funk-l2") return {name, Fusion::l2, true, true};
  if (name == "rnc-lasso") return {name, Fusion::l2, true, false};
  if (name == "lasso") return {name, Fusion::l2, false, false};
  if (name == "grace-l1") return {name, Fusion::l1, false, true};
  if (name == "grace-l2") return {name, Fusion::l2, false, true};
  throw ConfigError("unknown method `" + name +
                    "` (expected glm-funk-l1, glm-funk-l2, rnc-lasso, lasso, grace-l1 or grace-l2)");
}

std::string_view test_metric_name(const Family& f) noexcept {
  return f.kind == FamilyKind::binomial ? "deviance" : "rmse";
}

ExperimentSettings experiment_settings(const RunConfig& c) {
  if (!c.simulation) throw ConfigError("config: experiment needs a `simulation` block");
  ExperimentSettings s;
  s.simulation = *c.simulation;
  s.experiment = c.experiment;
  s.tune = c.tune.value_or(TuneConfig{});
  s.solver = c.solver;
  s.inference = c.inference;
  s.delta = c.delta;
  s.q = c.q;
  s.seed = c.seed;
  s.threads = c.threads;
  return s;
}

ExperimentResult run_experiment(const ExperimentSettings& s) {
  s.simulation.validate();
  std::vector<MethodSpec> methods;
  for (const auto& name : s.experiment.methods) methods.push_back(method_spec(name));

  ExperimentResult result;
  std::map<std::string, Hyperparams> shared;
  if (s.experiment.tuning == TuningMode::fixed) {
    for (const auto& m : methods) {
      const auto it = std::find_if(s.experiment.fixed.begin(), s.experiment.fixed.end(),
                                   [&](const auto& kv) { return kv.first == m.name; });
      if (it == s.experiment.fixed.end()) {
        throw ConfigError("experiment.fixed has no hyperparameters for method `" + m.name + "`");
      }
      Hyperparams h = it->second;
      h.fusion = m.fusion;
      if (!m.unit_graph) h.gamma_n = 0.0;
      if (!m.feature_graph) h.gamma_p = 0.0;
      shared[m.name] = h;
    }
  } else if (s.experiment.tuning == TuningMode::pilot) {
    const auto pilots = static_cast<std::size_t>(s.experiment.pilot_replicates);
    std::vector<std::vector<Hyperparams>> tuned(pilots, std::vector<Hyperparams>(methods.size()));
    parallel_for(pilots * methods.size(), s.threads, [&](std::size_t task) {
      const std::size_t k = task / methods.size();
      const std::size_t mi = task % methods.size();
      const Replicate rep = make_replicate(s, kPilotStream + k);
      tuned[k][mi] = tune_method(s, methods[mi], method_view(rep.train, methods[mi]), derive_seed(s.seed, kPilotStream + k));
    });
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<Hyperparams> hs;
      for (std::size_t k = 0; k < pilots; ++k) hs.push_back(tuned[k][mi]);
      shared[methods[mi].name] = combine(hs);
    }
  }
  for (const auto& m : methods) {
    if (shared.count(m.name)) result.shared_penalties.emplace_back(m.name, shared[m.name]);
  }

  const auto reps = static_cast<std::size_t>(s.experiment.replicates);
  result.rows.resize(reps * methods.size());
  parallel_for(reps, s.threads, [&](std::size_t r) {
    std::optional<Replicate> rep;
    std::string rep_error;
    try {
      rep = make_replicate(s, r);
    } catch (const std::exception& e) {
      rep_error = e.what();
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      ReplicateMetrics& slot = result.rows[r * methods.size() + mi];
      try {
        if (!rep) throw DataError(rep_error);
        const Hyperparams h = shared.count(methods[mi].name)
                                  ? shared.at(methods[mi].name)
                                  : tune_method(s, methods[mi], method_view(rep->train, methods[mi]), derive_seed(s.seed, r));
        slot = evaluate(s, methods[mi], *rep, h);
      } catch (const std::exception& e) {
        slot = ReplicateMetrics{};
        slot.method = methods[mi].name;
        slot.status = std::string("failed: ") + e.what();
        slot.power = slot.type1_error = slot.coverage = slot.test_error = kNaN;
      }
      slot.replicate = static_cast<int>(r);
    }
  });
  result.summary = summarize(result.rows, s.experiment.methods);
  return result;
}

void cmd_experiment(const RunConfig& c) {
  const ExperimentSettings s = experiment_settings(c);
  const ExperimentResult r = run_experiment(s);

  std::vector<std::vector<std::string>> rows;
  int failed = 0;
  for (const auto& m : r.rows) {
    failed += m.status != "ok";
    std::string status = m.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    rows.push_back({std::to_string(m.replicate), m.method, status, format_double(m.power),
                    format_double(m.type1_error), format_double(m.coverage), format_double(m.test_error),
                    format_double(m.h.lambda), format_double(m.h.gamma_n), format_double(m.h.gamma_p),
                    std::to_string(m.iterations), m.converged ? "true" : "false"});
  }
  write_csv(c.out_dir / "metrics.csv",
            {"replicate", "method", "status", "power", "type1_error", "coverage", "test_error", "lambda", "gamma_n",
             "gamma_p", "iterations", "converged"},
            rows);

  rows.clear();
  for (const auto& sr : r.summary) {
    rows.push_back({sr.method, sr.metric, format_double(sr.mean), format_double(sr.se), std::to_string(sr.count)});
  }
  write_csv(c.out_dir / "summary.csv", {"method", "metric", "mean", "se", "count"}, rows);

  json shared = json::object();
  for (const auto& [name, h] : r.shared_penalties) shared[name] = hyperparams_json(h);
  write_json(c.out_dir / "experiment_meta.json",
             json{{"replicates", s.experiment.replicates},
                  {"methods", s.experiment.methods},
                  {"tuning", std::string(tuning_mode_name(s.experiment.tuning))},
                  {"shared_penalties", shared},
                  {"failed_rows", failed},
                  {"test_metric", std::string(test_metric_name(s.simulation.family))},
                  {"alpha_level", s.experiment.alpha_level},
                  {"seed", s.seed},
                  {"simulation",
                   {{"n", static_cast<std::int64_t>(s.simulation.n)},
                    {"p", static_cast<std::int64_t>(s.simulation.p)},
                    {"s", static_cast<std::int64_t>(s.simulation.s)},
                    {"rho", s.simulation.rho},
                    {"family", std::string(s.simulation.family.name())}}}});
}

}  // namespace glmfunk::cli
