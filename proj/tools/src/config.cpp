#include "config.hpp"

#include "glmfunk/error.hpp"

#include <algorithm>
#include <initializer_list>

namespace glmfunk::cli {

namespace {

void allow_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(std::string(where) + ": unknown key `" + key + "`");
    }
  }
}

template <class T>
T get(const json& obj, const char* key, std::string_view where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <class T>
std::optional<T> maybe(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::optional<fs::path> maybe_path(const json& obj, const char* key, std::string_view where, const fs::path& base) {
  auto s = maybe<std::string>(obj, key, where);
  if (!s) return std::nullopt;
  return resolve(base, *s);
}

Hyperparams parse_hyperparams(const json& j, std::string_view where, Fusion fusion, double delta, double q) {
  allow_keys(j, where, {"gamma_n", "gamma_p", "lambda", "delta", "q"});
  Hyperparams h;
  h.gamma_n = maybe<double>(j, "gamma_n", where).value_or(0.0);
  h.gamma_p = maybe<double>(j, "gamma_p", where).value_or(0.0);
  h.lambda = maybe<double>(j, "lambda", where).value_or(0.0);
  h.delta = maybe<double>(j, "delta", where).value_or(delta);
  h.q = maybe<double>(j, "q", where).value_or(q);
  h.fusion = fusion;
  h.validate();
  return h;
}

TuneConfig parse_tune(const json& j) {
  allow_keys(j, "tune", {"lambda", "gamma_n", "gamma_p", "grid_points", "k", "max_cycles", "score",
                         "adjacency_constraint"});
  TuneConfig t;
  t.lambda = maybe<std::vector<double>>(j, "lambda", "tune").value_or(t.lambda);
  t.gamma_n = maybe<std::vector<double>>(j, "gamma_n", "tune").value_or(t.gamma_n);
  t.gamma_p = maybe<std::vector<double>>(j, "gamma_p", "tune").value_or(t.gamma_p);
  t.grid_points = maybe<int>(j, "grid_points", "tune").value_or(t.grid_points);
  t.k = maybe<int>(j, "k", "tune").value_or(t.k);
  t.max_cycles = maybe<int>(j, "max_cycles", "tune").value_or(t.max_cycles);
  if (auto s = maybe<std::string>(j, "score", "tune")) t.score = score_from_name(*s);
  t.adjacency_constraint = maybe<bool>(j, "adjacency_constraint", "tune").value_or(t.adjacency_constraint);
  if (t.grid_points < 1) throw ConfigError("tune.grid_points must be at least 1");
  if (t.max_cycles < 1) throw ConfigError("tune.max_cycles must be at least 1");
  return t;
}

SolverOptions parse_solver(const json& j) {
  allow_keys(j, "solver", {"step_rule", "step_size", "max_iter", "tol", "grad_tol", "lipschitz_refresh", "accelerate"});
  SolverOptions o;
  if (auto r = maybe<std::string>(j, "step_rule", "solver")) {
    if (*r == "fixed") o.step_rule = StepRule::fixed;
    else if (*r == "backtracking") o.step_rule = StepRule::backtracking;
    else throw ConfigError("solver.step_rule must be `fixed` or `backtracking`");
  }
  o.step_size = maybe<double>(j, "step_size", "solver").value_or(o.step_size);
  o.max_iter = maybe<int>(j, "max_iter", "solver").value_or(o.max_iter);
  o.tol = maybe<double>(j, "tol", "solver").value_or(o.tol);
  o.grad_tol = maybe<double>(j, "grad_tol", "solver").value_or(o.grad_tol);
  o.lipschitz_refresh = maybe<int>(j, "lipschitz_refresh", "solver").value_or(o.lipschitz_refresh);
  o.accelerate = maybe<bool>(j, "accelerate", "solver").value_or(o.accelerate);
  if (!(o.step_size > 0.0)) throw ConfigError("solver.step_size must be positive");
  if (o.max_iter < 1) throw ConfigError("solver.max_iter must be at least 1");
  if (!(o.tol > 0.0)) throw ConfigError("solver.tol must be positive");
  if (o.lipschitz_refresh < 1) throw ConfigError("solver.lipschitz_refresh must be at least 1");
  return o;
}

InferenceOptions parse_inference(const json& j) {
  allow_keys(j, "inference", {"level", "q_constraint", "variance", "alternative", "max_doublings", "allow_inverse"});
  InferenceOptions o;
  o.level = maybe<double>(j, "level", "inference").value_or(o.level);
  o.q_constraint = maybe<double>(j, "q_constraint", "inference");
  if (auto v = maybe<std::string>(j, "variance", "inference")) {
    if (*v == "model") o.variance = Variance::model;
    else if (*v == "sandwich") o.variance = Variance::sandwich;
    else throw ConfigError("inference.variance must be `model` or `sandwich`");
  }
  if (auto a = maybe<std::string>(j, "alternative", "inference")) {
    if (*a == "two_sided") o.alternative = Alternative::two_sided;
    else if (*a == "greater") o.alternative = Alternative::greater;
    else if (*a == "less") o.alternative = Alternative::less;
    else throw ConfigError("inference.alternative must be `two_sided`, `greater` or `less`");
  }
  o.m_options.max_doublings = maybe<int>(j, "max_doublings", "inference").value_or(o.m_options.max_doublings);
  o.m_options.allow_inverse = maybe<bool>(j, "allow_inverse", "inference").value_or(o.m_options.allow_inverse);
  if (!(o.level > 0.0 && o.level < 1.0)) throw ConfigError("inference.level must lie in (0, 1)");
  if (o.q_constraint && !(*o.q_constraint > 0.0)) throw ConfigError("inference.q_constraint must be positive");
  return o;
}

SimConfig parse_simulation(const json& j, const fs::path& base) {
  const char* w = "simulation";
  allow_keys(j, w, {"n", "p", "s", "rho", "tau", "unit_graph", "lattice", "sbm_blocks", "sbm_means", "sbm_sd",
                    "intercepts", "iid_sd", "family", "train_fraction", "perturb"});
  SimConfig c;
  c.n = maybe<Index>(j, "n", w).value_or(c.n);
  c.p = maybe<Index>(j, "p", w).value_or(c.p);
  c.s = maybe<Index>(j, "s", w).value_or(c.s);
  c.rho = maybe<double>(j, "rho", w).value_or(c.rho);
  c.tau = maybe<double>(j, "tau", w).value_or(c.tau);
  if (auto g = maybe<std::string>(j, "unit_graph", w)) {
    if (*g == "lattice") c.unit_graph = UnitGraphKind::lattice_file;
    else if (*g == "sbm") c.unit_graph = UnitGraphKind::sbm;
    else throw ConfigError("simulation.unit_graph must be `lattice` or `sbm`");
  }
  if (auto l = maybe<std::string>(j, "lattice", w)) c.lattice_path = resolve(base, *l).string();
  c.sbm_blocks = maybe<int>(j, "sbm_blocks", w).value_or(c.sbm_blocks);
  c.sbm_means = maybe<std::vector<double>>(j, "sbm_means", w).value_or(c.sbm_means);
  c.sbm_sd = maybe<double>(j, "sbm_sd", w).value_or(c.sbm_sd);
  if (auto i = maybe<std::string>(j, "intercepts", w)) {
    if (*i == "icar") c.intercepts = InterceptKind::icar;
    else if (*i == "sbm") c.intercepts = InterceptKind::sbm;
    else if (*i == "iid") c.intercepts = InterceptKind::iid;
    else throw ConfigError("simulation.intercepts must be `icar`, `sbm` or `iid`");
  }
  c.iid_sd = maybe<double>(j, "iid_sd", w).value_or(c.iid_sd);
  if (auto f = maybe<std::string>(j, "family", w)) c.family = Family::from_name(*f);
  c.train_fraction = maybe<double>(j, "train_fraction", w).value_or(c.train_fraction);
  if (j.contains("perturb") && !j.at("perturb").is_null()) {
    const json& pj = j.at("perturb");
    allow_keys(pj, "simulation.perturb", {"add_prob", "add_scope", "delete_active_edges"});
    PerturbConfig p;
    p.add_prob = maybe<double>(pj, "add_prob", "simulation.perturb").value_or(0.0);
    if (auto s = maybe<std::string>(pj, "add_scope", "simulation.perturb")) {
      if (*s == "all_pairs") p.add_scope = AddScope::all_pairs;
      else if (*s == "intra_component") p.add_scope = AddScope::intra_component;
      else throw ConfigError("simulation.perturb.add_scope must be `all_pairs` or `intra_component`");
    }
    p.delete_active_edges = maybe<bool>(pj, "delete_active_edges", "simulation.perturb").value_or(false);
    c.perturb = p;
  }
  return c;
}

ExperimentConfig parse_experiment(const json& j, Fusion fusion, double delta, double q) {
  const char* w = "experiment";
  allow_keys(j, w, {"methods", "replicates", "tuning", "pilot_replicates", "fixed", "alpha_level"});
  ExperimentConfig e;
  e.methods = maybe<std::vector<std::string>>(j, "methods", w).value_or(e.methods);
  e.replicates = maybe<int>(j, "replicates", w).value_or(e.replicates);
  if (auto t = maybe<std::string>(j, "tuning", w)) {
    if (*t == "per_replicate") e.tuning = TuningMode::per_replicate;
    else if (*t == "pilot") e.tuning = TuningMode::pilot;
    else if (*t == "fixed") e.tuning = TuningMode::fixed;
    else throw ConfigError("experiment.tuning must be `per_replicate`, `pilot` or `fixed`");
  }
  e.pilot_replicates = maybe<int>(j, "pilot_replicates", w).value_or(e.pilot_replicates);
  e.alpha_level = maybe<double>(j, "alpha_level", w).value_or(e.alpha_level);
  if (j.contains("fixed")) {
    const json& fj = j.at("fixed");
    if (!fj.is_object()) throw ConfigError("experiment.fixed must map method names to hyperparameters");
    for (const auto& [name, hj] : fj.items()) {
      e.fixed.emplace_back(name, parse_hyperparams(hj, "experiment.fixed." + name, fusion, delta, q));
    }
  }
  if (e.replicates < 1) throw ConfigError("experiment.replicates must be at least 1");
  if (e.pilot_replicates < 1) throw ConfigError("experiment.pilot_replicates must be at least 1");
  if (e.methods.empty()) throw ConfigError("experiment.methods must not be empty");
  if (!(e.alpha_level > 0.0 && e.alpha_level < 1.0)) throw ConfigError("experiment.alpha_level must lie in (0, 1)");
  return e;
}

}  // namespace

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  allow_keys(j, "config",
             {"family", "fusion", "hyperparams", "tune", "intercept", "delta", "q", "solver", "data", "unit_graph",
              "feature_graph", "fit_dir", "standardize", "alr", "inference", "simulation", "experiment", "seed",
              "threads", "out_dir"});
  RunConfig c;
  c.base_dir = base_dir;
  if (auto f = maybe<std::string>(j, "family", "config")) c.family = Family::from_name(*f);
  if (auto f = maybe<std::string>(j, "fusion", "config")) c.fusion = fusion_from_name(*f);
  c.delta = maybe<double>(j, "delta", "config").value_or(c.delta);
  c.q = maybe<double>(j, "q", "config").value_or(c.q);
  if (j.contains("hyperparams")) c.hyperparams = parse_hyperparams(j.at("hyperparams"), "hyperparams", c.fusion, c.delta, c.q);
  if (j.contains("tune")) c.tune = parse_tune(j.at("tune"));
  if (c.hyperparams && c.tune) throw ConfigError("config: give either `hyperparams` or `tune`, not both");
  if (auto m = maybe<std::string>(j, "intercept", "config")) {
    if (*m == "per_unit") c.intercept = InterceptMode::per_unit;
    else if (*m == "common") c.intercept = InterceptMode::common;
    else throw ConfigError("intercept must be `per_unit` or `common`");
  }
  if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
  if (j.contains("data")) {
    const json& d = j.at("data");
    allow_keys(d, "data", {"design", "outcomes", "test_design", "test_outcomes"});
    c.design = maybe_path(d, "design", "data", base_dir);
    c.outcomes = maybe_path(d, "outcomes", "data", base_dir);
    c.test_design = maybe_path(d, "test_design", "data", base_dir);
    c.test_outcomes = maybe_path(d, "test_outcomes", "data", base_dir);
  }
  c.unit_graph = maybe_path(j, "unit_graph", "config", base_dir);
  c.feature_graph = maybe_path(j, "feature_graph", "config", base_dir);
  c.fit_dir = maybe_path(j, "fit_dir", "config", base_dir);
  c.standardize = maybe<bool>(j, "standardize", "config").value_or(true);
  if (j.contains("alr")) {
    const json& a = j.at("alr");
    allow_keys(a, "alr", {"columns", "reference", "pseudo_count"});
    AlrSpec s;
    s.columns = get<std::vector<std::string>>(a, "columns", "alr");
    s.reference = get<std::string>(a, "reference", "alr");
    s.pseudo_count = maybe<double>(a, "pseudo_count", "alr").value_or(0.0);
    if (std::find(s.columns.begin(), s.columns.end(), s.reference) == s.columns.end()) {
      throw ConfigError("alr.reference must be one of alr.columns");
    }
    if (!(s.pseudo_count >= 0.0)) throw ConfigError("alr.pseudo_count must be >= 0");
    c.alr = s;
  }
  if (j.contains("inference")) c.inference = parse_inference(j.at("inference"));
  if (j.contains("simulation")) c.simulation = parse_simulation(j.at("simulation"), base_dir);
  if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment"), c.fusion, c.delta, c.q);
  c.seed = maybe<std::uint64_t>(j, "seed", "config").value_or(c.seed);
  c.threads = maybe<int>(j, "threads", "config").value_or(c.threads);
  if (auto o = maybe<std::string>(j, "out_dir", "config")) c.out_dir = resolve(base_dir, *o);
  return c;
}

RunConfig load_config(const fs::path& path, const CliOverrides& overrides) {
  const json j = read_json(path);
  RunConfig c = parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.threads) c.threads = *overrides.threads;
  if (overrides.out_dir) c.out_dir = *overrides.out_dir;
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.simulation) c.simulation->seed = c.seed;
  return c;
}

json hyperparams_json(const Hyperparams& h) {
  return json{{"gamma_n", h.gamma_n}, {"gamma_p", h.gamma_p}, {"lambda", h.lambda},
              {"delta", h.delta},     {"q", h.q},             {"fusion", std::string(fusion_name(h.fusion))}};
}

std::string_view intercept_name(InterceptMode m) noexcept {
  return m == InterceptMode::per_unit ? "per_unit" : "common";
}

std::string_view tuning_mode_name(TuningMode m) noexcept {
  switch (m) {
    case TuningMode::per_replicate: return "per_replicate";
    case TuningMode::pilot: return "pilot";
    case TuningMode::fixed: return "fixed";
  }
  return "per_replicate";
}

}  // namespace glmfunk::cli
