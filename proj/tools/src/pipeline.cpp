#include "pipeline.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/family.hpp"
#include "glmfunk/random.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace glmfunk::cli {

Standardization Standardization::identity(Index p) {
  return {Vector::Zero(p), Vector::Ones(p), {}};
}

Standardization Standardization::from_training(const Matrix& X, const std::vector<std::string>& names) {
  Standardization s;
  const auto n = static_cast<double>(X.rows());
  s.center = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.center[j]).square().sum() / n;
    if (var > 0.0 && std::sqrt(var) > 1e-12 * std::max(1.0, std::abs(s.center[j]))) {
      s.scale[j] = std::sqrt(var);
    } else {
      s.scale[j] = 1.0;
      s.constant_columns.push_back(names[static_cast<std::size_t>(j)]);
    }
  }
  return s;
}

Matrix Standardization::apply(const Matrix& X) const {
  if (X.cols() != center.size()) throw DataError("design has " + std::to_string(X.cols()) +
                                                 " feature columns, the fitted model expects " +
                                                 std::to_string(center.size()));
  return ((X.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Design apply_alr(const Design& d, const AlrSpec& spec) {
  std::unordered_map<std::string, Index> col;
  for (std::size_t j = 0; j < d.feature_names.size(); ++j) col[d.feature_names[j]] = static_cast<Index>(j);
  std::vector<Index> comp;
  Index ref = 0;
  for (std::size_t k = 0; k < spec.columns.size(); ++k) {
    const auto it = col.find(spec.columns[k]);
    if (it == col.end()) throw ConfigError("alr column `" + spec.columns[k] + "` is not in the design");
    comp.push_back(it->second);
    if (spec.columns[k] == spec.reference) ref = static_cast<Index>(k);
  }
  Matrix composition(d.X.rows(), static_cast<Index>(comp.size()));
  for (std::size_t k = 0; k < comp.size(); ++k) composition.col(static_cast<Index>(k)) = d.X.col(comp[k]);
  const Matrix ratios = alr_transform(composition, ref, spec.pseudo_count);

  const std::unordered_set<Index> in_comp(comp.begin(), comp.end());
  const Index first = *std::min_element(comp.begin(), comp.end());
  Design out;
  out.units = d.units;
  std::vector<Index> keep;
  std::vector<int> ratio_at;  // -1 for an original column
  for (Index j = 0; j < d.X.cols(); ++j) {
    if (j == first) {
      int r = 0;
      for (std::size_t k = 0; k < comp.size(); ++k) {
        if (static_cast<Index>(k) == ref) continue;
        out.feature_names.push_back(spec.columns[k]);
        ratio_at.push_back(r++);
        keep.push_back(-1);
      }
    }
    if (in_comp.count(j)) continue;
    out.feature_names.push_back(d.feature_names[static_cast<std::size_t>(j)]);
    ratio_at.push_back(-1);
    keep.push_back(j);
  }
  out.X.resize(d.X.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.X.col(static_cast<Index>(c)) = ratio_at[c] >= 0 ? Vector(ratios.col(ratio_at[c])) : Vector(d.X.col(keep[c]));
  }
  return out;
}

std::optional<Graph> load_unit_graph(const RunConfig& c, Index min_nodes) {
  if (!c.unit_graph) return std::nullopt;
  return read_edge_list_file(c.unit_graph->string(), min_nodes);
}

namespace {

Design load_design(const RunConfig& c) {
  if (!c.design) throw ConfigError("config: data.design is required");
  Design d = read_design(*c.design);
  if (c.alr) d = apply_alr(d, *c.alr);
  return d;
}

Design subset_rows(const Design& d, const std::vector<Index>& rows) {
  Design out;
  out.feature_names = d.feature_names;
  out.X.resize(static_cast<Index>(rows.size()), d.X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.units.push_back(d.units[static_cast<std::size_t>(rows[r])]);
    out.X.row(static_cast<Index>(r)) = d.X.row(rows[r]);
  }
  return out;
}

// Design rows whose outcome split equals `which` (all rows when no split column).
std::vector<Index> rows_for_split(const Design& d, const Outcomes& o, const std::string& which) {
  std::unordered_map<Index, std::size_t> at;
  for (std::size_t r = 0; r < o.units.size(); ++r) at[o.units[r]] = r;
  std::vector<Index> rows;
  for (std::size_t r = 0; r < d.units.size(); ++r) {
    const auto it = at.find(d.units[r]);
    if (o.split.empty()) {
      rows.push_back(static_cast<Index>(r));
    } else if (it != at.end() && o.split[it->second] == which) {
      rows.push_back(static_cast<Index>(r));
    }
  }
  return rows;
}

Index max_unit(const std::vector<Index>& units) {
  return units.empty() ? 0 : *std::max_element(units.begin(), units.end()) + 1;
}

}  // namespace

TrainingSet load_training(const RunConfig& c) {
  if (!c.outcomes) throw ConfigError("config: data.outcomes is required");
  const Design all = load_design(c);
  const Outcomes outcomes = read_outcomes(*c.outcomes, true);
  const Design d = subset_rows(all, rows_for_split(all, outcomes, "train"));
  if (d.units.empty()) throw DataError(c.outcomes->string() + ": no training rows");
  const Outcomes o = align_outcomes(outcomes, d.units, *c.outcomes);
  validate_outcomes(c.family, o.y);

  TrainingSet t;
  t.family = c.family;
  t.units = d.units;
  t.feature_names = d.feature_names;
  t.standardization = c.standardize ? Standardization::from_training(d.X, d.feature_names)
                                    : Standardization::identity(d.X.cols());
  t.data.X = t.standardization.apply(d.X);
  t.data.y = o.y;
  t.data.offsets = o.offsets;

  t.full_graph = load_unit_graph(c, max_unit(t.units));
  if (t.full_graph) t.unit_graph = t.full_graph->induced_subgraph(t.units);
  if (c.feature_graph) {
    t.feature_graph = read_edge_list_file(c.feature_graph->string());
    if (t.feature_graph->node_count() != d.X.cols()) {
      throw DataError(c.feature_graph->string() + ": feature graph has " +
                      std::to_string(t.feature_graph->node_count()) + " nodes but the design has " +
                      std::to_string(d.X.cols()) + " features");
    }
  }
  return t;
}

TestSet load_test(const RunConfig& c) {
  Design d;
  std::optional<Outcomes> o;
  if (c.test_design) {
    d = read_design(*c.test_design);
    if (c.alr) d = apply_alr(d, *c.alr);
    if (c.test_outcomes) o = read_outcomes(*c.test_outcomes, false);
  } else {
    if (!c.outcomes) throw ConfigError("config: data.test_design or a split column in data.outcomes is required");
    const Design all = load_design(c);
    const Outcomes outcomes = read_outcomes(*c.outcomes, false);
    if (outcomes.split.empty()) throw ConfigError("config: data.test_design is required when outcomes have no split");
    d = subset_rows(all, rows_for_split(all, outcomes, "test"));
    o = outcomes;
  }
  TestSet t;
  t.units = d.units;
  t.X = d.X;
  t.offsets = Vector::Zero(d.X.rows());
  t.y = Vector::Zero(d.X.rows());
  if (o) {
    const fs::path src = c.test_outcomes ? *c.test_outcomes : *c.outcomes;
    const Outcomes a = align_outcomes(*o, d.units, src);
    t.offsets = a.offsets;
    t.y = a.y;
    t.has_y = a.has_y;
  }
  return t;
}

std::string method_label(const Hyperparams& h, InterceptMode intercept) {
  const bool network = intercept == InterceptMode::per_unit && h.gamma_n > 0.0;
  const std::string fusion(fusion_name(h.fusion));
  if (network) {
    if (h.gamma_p > 0.0) return "glm-funk-" + fusion;
    return h.lambda > 0.0 ? "rnc-lasso" : "rnc";
  }
  if (h.gamma_p > 0.0) return "grace-" + fusion;
  return "lasso";
}

InterceptMode resolve_intercept(const RunConfig& c, const Hyperparams& h, bool has_unit_graph) {
  if (c.intercept) {
    if (*c.intercept == InterceptMode::per_unit && !has_unit_graph) {
      throw ConfigError("per_unit intercepts need a unit graph");
    }
    return *c.intercept;
  }
  return default_intercept(h, has_unit_graph);
}

Problem make_problem(const TrainingSet& t, InterceptMode intercept) {
  return Problem(t.data, t.family, t.unit_graph, t.feature_graph, intercept);
}

TuneData make_tune_data(const TrainingSet& t) {
  TuneData td;
  td.data = t.data;
  td.unit_graph = t.unit_graph;
  td.feature_graph = t.feature_graph;
  td.family = t.family;
  return td;
}

TuneSpec make_tune_spec(const TuneConfig& tc, const RunConfig& c, const TrainingSet& t) {
  TuneSpec spec;
  const Grids defaults = default_grids(t.data, tc.grid_points);
  spec.grids.lambda = tc.lambda.empty() ? defaults.lambda : tc.lambda;
  spec.grids.gamma_n = !t.unit_graph ? std::vector<double>{0.0} : tc.gamma_n.empty() ? defaults.gamma_n : tc.gamma_n;
  spec.grids.gamma_p =
      !t.feature_graph ? std::vector<double>{0.0} : tc.gamma_p.empty() ? defaults.gamma_p : tc.gamma_p;
  spec.k = tc.k;
  spec.max_cycles = tc.max_cycles;
  spec.seed = derive_seed(c.seed, 6);
  spec.score = tc.score;
  spec.adjacency_constraint = tc.adjacency_constraint;
  spec.base.delta = c.delta;
  spec.base.q = c.q;
  spec.base.fusion = c.fusion;
  spec.intercept = c.intercept;
  spec.solver = c.solver;
  spec.threads = c.threads;
  spec.validate(t.data.X.rows(), t.data.X.cols());
  return spec;
}

ChosenPenalties choose_penalties(const RunConfig& c, const TrainingSet& t) {
  if (c.hyperparams) return {*c.hyperparams, std::nullopt};
  if (!c.tune) throw ConfigError("config: give `hyperparams` or a `tune` block");
  const TuneSpec spec = make_tune_spec(*c.tune, c, t);
  TuneResult r = coordinate_descent_tune(spec, make_tune_data(t));
  ChosenPenalties out{r.best, std::move(r)};
  return out;
}

json tuning_json(const TuneResult& r) {
  json evals = json::array();
  for (const auto& e : r.evaluations) {
    evals.push_back({{"cycle", e.cycle},
                     {"parameter", e.parameter},
                     {"lambda", e.h.lambda},
                     {"gamma_n", e.h.gamma_n},
                     {"gamma_p", e.h.gamma_p},
                     {"score", std::isfinite(e.cv.score) ? json(e.cv.score) : json(nullptr)},
                     {"skipped_folds", e.cv.skipped}});
  }
  return json{{"best", hyperparams_json(r.best)},
              {"best_score", r.best_score},
              {"initial_score", r.initial_score},
              {"cycles", r.cycles},
              {"converged", r.converged},
              {"folds_constrained", r.folds.constrained},
              {"warnings", r.warnings},
              {"evaluations", evals}};
}

json standardization_json(const Standardization& s, const std::vector<std::string>& names) {
  return json{{"features", names},
              {"center", std::vector<double>(s.center.data(), s.center.data() + s.center.size())},
              {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())},
              {"constant_columns", s.constant_columns}};
}

}  // namespace glmfunk::cli
