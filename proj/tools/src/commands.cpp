#include "commands.hpp"

#include "pipeline.hpp"

#include "glmfunk/error.hpp"
#include "glmfunk/infer.hpp"
#include "glmfunk/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace glmfunk::cli {

namespace {

json fit_json(const FitResult& f) {
  return json{{"iterations", f.iterations},
              {"converged", f.converged},
              {"final_step", f.final_step},
              {"gradient_map_norm", f.gradient_map_norm},
              {"objective_trace", f.objective_trace},
              {"warnings", f.warnings}};
}

void write_alpha(const fs::path& path, const std::vector<Index>& units, const Vector& alpha) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < units.size(); ++i) {
    rows.push_back({std::to_string(units[i]), format_double(alpha[static_cast<Index>(i)])});
  }
  write_csv(path, {"unit_id", "alpha"}, rows);
}

void write_beta(const fs::path& path, const std::vector<std::string>& names, const Vector& beta) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < names.size(); ++j) rows.push_back({names[j], format_double(beta[static_cast<Index>(j)])});
  write_csv(path, {"feature", "beta"}, rows);
}

struct Fitted {
  TrainingSet training;
  ChosenPenalties penalties;
  InterceptMode intercept;
  FitResult fit;
};

Fitted fit_from_config(const RunConfig& c) {
  TrainingSet t = load_training(c);
  ChosenPenalties chosen = choose_penalties(c, t);
  const InterceptMode mode = resolve_intercept(c, chosen.h, t.unit_graph.has_value());
  const Problem problem = make_problem(t, mode);
  FitResult f = fit(problem, chosen.h, c.solver);
  if (!f.alpha_hat.allFinite() || !f.beta_hat.allFinite()) {
    throw NumericalError("fit diverged: non-finite coefficients after " + std::to_string(f.iterations) +
                         " iterations");
  }
  return {std::move(t), std::move(chosen), mode, std::move(f)};
}

json model_meta(const Fitted& m) {
  json meta{{"label", method_label(m.fit.hyperparams, m.intercept)},
            {"family", std::string(m.training.family.name())},
            {"intercept", std::string(intercept_name(m.intercept))},
            {"hyperparams", hyperparams_json(m.fit.hyperparams)},
            {"n", static_cast<std::int64_t>(m.training.units.size())},
            {"p", static_cast<std::int64_t>(m.training.feature_names.size())},
            {"standardization", standardization_json(m.training.standardization, m.training.feature_names)},
            {"solver", fit_json(m.fit)}};
  if (m.penalties.tuning) meta["tuning"] = tuning_json(*m.penalties.tuning);
  return meta;
}

}  // namespace

void cmd_fit(const RunConfig& c) {
  const Fitted m = fit_from_config(c);
  write_alpha(c.out_dir / "alpha.csv", m.training.units, m.fit.alpha_hat);
  write_beta(c.out_dir / "beta.csv", m.training.feature_names, m.fit.beta_hat);
  write_json(c.out_dir / "fit_meta.json", model_meta(m));
}

void cmd_predict(const RunConfig& c) {
  const fs::path dir = c.fit_dir.value_or(c.out_dir);
  const json meta = read_json(dir / "fit_meta.json");
  Family family = Family::gaussian();
  InterceptMode mode = InterceptMode::common;
  Standardization stdz;
  try {
    family = Family::from_name(meta.at("family").get<std::string>());
    mode = meta.at("intercept").get<std::string>() == "per_unit" ? InterceptMode::per_unit : InterceptMode::common;
    const json& s = meta.at("standardization");
    const auto center = s.at("center").get<std::vector<double>>();
    const auto scale = s.at("scale").get<std::vector<double>>();
    stdz.center = Eigen::Map<const Vector>(center.data(), static_cast<Index>(center.size()));
    stdz.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Index>(scale.size()));
  } catch (const json::exception& e) {
    throw ConfigError((dir / "fit_meta.json").string() + ": malformed metadata: " + e.what());
  }

  const auto alpha_rows = read_key_values(dir / "alpha.csv");
  const auto beta_rows = read_key_values(dir / "beta.csv");
  Vector beta(static_cast<Index>(beta_rows.size()));
  for (std::size_t j = 0; j < beta_rows.size(); ++j) beta[static_cast<Index>(j)] = beta_rows[j].second;
  std::vector<Index> train;
  Vector alpha_train(static_cast<Index>(alpha_rows.size()));
  for (std::size_t i = 0; i < alpha_rows.size(); ++i) {
    train.push_back(static_cast<Index>(std::stoll(alpha_rows[i].first)));
    alpha_train[static_cast<Index>(i)] = alpha_rows[i].second;
  }

  const TestSet test = load_test(c);
  const Matrix X = stdz.apply(test.X);
  if (X.cols() != beta.size()) throw DataError("test design does not match the fitted coefficients");

  std::unordered_map<Index, double> alpha_of;
  std::vector<Index> unanchored;
  if (mode == InterceptMode::common) {
    for (Index u : test.units) alpha_of[u] = alpha_train.size() ? alpha_train[0] : 0.0;
  } else {
    const auto graph = load_unit_graph(c, 0);
    if (!graph) throw ConfigError("per_unit predictions need `unit_graph` (the full graph over train and test units)");
    for (Index u : test.units) {
      if (u >= graph->node_count()) {
        throw DataError("unknown unit id " + std::to_string(u) + " (the unit graph has " +
                        std::to_string(graph->node_count()) + " nodes)");
      }
    }
    const HarmonicExtension ext = harmonic_extend(*graph, train, alpha_train);
    for (std::size_t i = 0; i < train.size(); ++i) alpha_of[train[i]] = alpha_train[static_cast<Index>(i)];
    for (std::size_t k = 0; k < ext.test_nodes.size(); ++k) alpha_of[ext.test_nodes[k]] = ext.alpha_test[static_cast<Index>(k)];
    const std::unordered_set<Index> wanted(test.units.begin(), test.units.end());
    for (Index u : ext.unanchored) {
      if (wanted.count(u)) unanchored.push_back(u);
    }
  }

  std::vector<std::size_t> order(test.units.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return test.units[a] < test.units[b]; });
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r : order) {
    const auto i = static_cast<Index>(r);
    const double eta = test.offsets[i] + alpha_of.at(test.units[r]) + X.row(i).dot(beta);
    std::vector<std::string> row{std::to_string(test.units[r]), format_double(eta), format_double(mean(family, eta))};
    if (test.has_y) row.push_back(format_double(test.y[i]));
    rows.push_back(std::move(row));
  }
  std::vector<std::string> header{"unit_id", "eta", "mu"};
  if (test.has_y) header.push_back("y");
  write_csv(c.out_dir / "predictions.csv", header, rows);

  json pmeta{{"family", std::string(family.name())},
             {"intercept", std::string(intercept_name(mode))},
             {"rows", static_cast<std::int64_t>(rows.size())},
             {"unanchored_units", unanchored}};
  if (test.has_y) {
    Vector eta(static_cast<Index>(order.size()));
    Vector y(eta.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto i = static_cast<Index>(order[k]);
      eta[static_cast<Index>(k)] = test.offsets[i] + alpha_of.at(test.units[order[k]]) + X.row(i).dot(beta);
      y[static_cast<Index>(k)] = test.y[i];
    }
    const Vector mu = mean(family, eta);
    pmeta["rmse"] = std::sqrt((y - mu).squaredNorm() / static_cast<double>(std::max<Index>(y.size(), 1)));
    pmeta["mean_deviance"] = deviance(family, y, eta) / static_cast<double>(std::max<Index>(y.size(), 1));
  }
  write_json(c.out_dir / "predict_meta.json", pmeta);
}

void cmd_cv(const RunConfig& c) {
  const TrainingSet t = load_training(c);
  const TuneConfig tc = c.tune.value_or(TuneConfig{});
  TuneSpec spec = make_tune_spec(tc, c, t);
  const TuneData td = make_tune_data(t);
  std::vector<std::vector<std::string>> rows;
  json result;
  if (c.hyperparams) {
    const FoldAssignment folds =
        constrained_folds(t.unit_graph ? *t.unit_graph : Graph(t.data.X.rows()), spec.k, spec.seed,
                          spec.adjacency_constraint);
    const CvResult cv = cv_score(*c.hyperparams, folds, td, spec);
    for (std::size_t k = 0; k < cv.fold_scores.size(); ++k) {
      rows.push_back({std::to_string(k), format_double(cv.fold_scores[k])});
    }
    write_csv(c.out_dir / "cv_folds.csv", {"fold", "score"}, rows);
    result = json{{"hyperparams", hyperparams_json(*c.hyperparams)},
                  {"score", cv.score},
                  {"score_name", std::string(score_name(spec.score))},
                  {"skipped_folds", cv.skipped},
                  {"floored_means", cv.floored},
                  {"folds_constrained", folds.constrained},
                  {"warnings", cv.warnings}};
  } else {
    const TuneResult r = coordinate_descent_tune(spec, td);
    for (const auto& e : r.evaluations) {
      rows.push_back({std::to_string(e.cycle), e.parameter, format_double(e.h.lambda), format_double(e.h.gamma_n),
                      format_double(e.h.gamma_p), format_double(e.cv.score), std::to_string(e.cv.skipped)});
    }
    write_csv(c.out_dir / "cv_path.csv", {"cycle", "parameter", "lambda", "gamma_n", "gamma_p", "score", "skipped_folds"},
              rows);
    result = tuning_json(r);
    result.erase("evaluations");
    result["score_name"] = std::string(score_name(spec.score));
    result["label"] = method_label(r.best, resolve_intercept(c, r.best, t.unit_graph.has_value()));
  }
  write_json(c.out_dir / "cv_result.json", result);
}

void cmd_infer(const RunConfig& c) {
  const Fitted m = fit_from_config(c);
  const Problem problem = make_problem(m.training, m.intercept);
  InferenceOptions opts = c.inference;
  opts.m_options.n = problem.n();
  opts.m_options.threads = c.threads;
  const InferenceResult r = run_inference(problem, m.fit, opts);

  // rate ratios are reported for poisson models and left as NaN otherwise
  const bool poisson = m.training.family.kind == FamilyKind::poisson;
  const std::vector<std::string> header{"feature",  "estimate",      "rate_ratio",     "se",
                                        "t",        "p",             "ci_low",         "ci_high",
                                        "stars",    "rate_ratio_low", "rate_ratio_high", "estimate_original_scale",
                                        "ci_low_original_scale", "ci_high_original_scale"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) {
    const double sc = m.training.standardization.scale[row.j];
    const RateRatio rr = poisson ? rate_ratio(row) : RateRatio{std::nan(""), std::nan(""), std::nan("")};
    rows.push_back({m.training.feature_names[static_cast<std::size_t>(row.j)], format_double(row.b_hat),
                    format_double(rr.estimate), format_double(row.se), format_double(row.t_stat),
                    format_double(row.p_value), format_double(row.ci_low), format_double(row.ci_high),
                    significance_stars(row.p_value), format_double(rr.ci_low), format_double(rr.ci_high),
                    format_double(row.b_hat / sc), format_double(row.ci_low / sc), format_double(row.ci_high / sc)});
  }
  write_csv(c.out_dir / "inference.csv", header, rows);
  write_alpha(c.out_dir / "alpha.csv", m.training.units, m.fit.alpha_hat);
  write_beta(c.out_dir / "beta.csv", m.training.feature_names, m.fit.beta_hat);

  json meta = model_meta(m);
  meta["inference"] = json{{"level", opts.level},
                           {"q_constraint", r.m.q_used},
                           {"used_inverse", r.m.used_inverse},
                           {"q_doublings", r.m.doublings},
                           {"noise_sd", r.noise_sd},
                           {"variance", opts.variance == Variance::model ? "model" : "sandwich"}};
  write_json(c.out_dir / "infer_meta.json", meta);
}

void cmd_simulate(const RunConfig& c) {
  if (!c.simulation) throw ConfigError("config: simulate needs a `simulation` block");
  SimConfig sc = *c.simulation;
  sc.seed = c.seed;
  const SimDataset d = simulate_dataset(sc);

  auto write_graph = [&](const fs::path& path, const Graph& g) {
    std::ostringstream out;
    write_edge_list(out, g);
    write_text(path, out.str());
  };
  write_graph(c.out_dir / "units.tsv", d.unit_graph);
  write_graph(c.out_dir / "features.tsv", d.feature_graph);
  write_graph(c.out_dir / "features_true.tsv", d.true_feature_graph);

  std::vector<std::string> names;
  for (Index j = 0; j < d.X.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  std::vector<std::string> header{"unit_id"};
  header.insert(header.end(), names.begin(), names.end());
  std::vector<std::vector<std::string>> rows;
  for (Index i = 0; i < d.X.rows(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Index j = 0; j < d.X.cols(); ++j) row.push_back(format_double(d.X(i, j)));
    rows.push_back(std::move(row));
  }
  write_csv(c.out_dir / "design.csv", header, rows);

  std::vector<char> is_train(static_cast<std::size_t>(d.X.rows()), 0);
  for (Index u : d.train) is_train[static_cast<std::size_t>(u)] = 1;
  rows.clear();
  for (Index i = 0; i < d.X.rows(); ++i) {
    rows.push_back({std::to_string(i), format_double(d.y[i]), format_double(d.offsets[i]),
                    is_train[static_cast<std::size_t>(i)] ? "train" : "test"});
  }
  write_csv(c.out_dir / "outcomes.csv", {"unit_id", "y", "offset", "split"}, rows);

  std::vector<Index> all(static_cast<std::size_t>(d.X.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  write_alpha(c.out_dir / "truth_alpha.csv", all, d.alpha);
  write_beta(c.out_dir / "truth_beta.csv", names, d.beta);

  json meta{{"n", static_cast<std::int64_t>(sc.n)},
            {"p", static_cast<std::int64_t>(sc.p)},
            {"s", static_cast<std::int64_t>(sc.s)},
            {"rho", sc.rho},
            {"family", std::string(sc.family.name())},
            {"seed", c.seed},
            {"unit_edges", static_cast<std::int64_t>(d.unit_graph.edge_count())},
            {"feature_edges", static_cast<std::int64_t>(d.feature_graph.edge_count())},
            {"true_feature_edges", static_cast<std::int64_t>(d.true_feature_graph.edge_count())},
            {"train_units", static_cast<std::int64_t>(d.train.size())},
            {"blocks", d.blocks}};
  write_json(c.out_dir / "sim_meta.json", meta);
}

}  // namespace glmfunk::cli
