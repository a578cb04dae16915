#include "commands.hpp"
#include "experiment.hpp"

#include "glmfunk/error.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kNumericalExit = 4;

}  // namespace

int main(int argc, char** argv) {
  using namespace glmfunk;
  using namespace glmfunk::cli;

  CLI::App app{"Penalized GLMs with unit- and feature-graph regularization"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;
  auto* config_opt = app.add_option("--config", config_path, "JSON run configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config)");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out-dir", out_dir, "Output directory (overrides the config)");
  (void)config_opt;

  const std::map<std::string, std::pair<std::string, std::function<void(const RunConfig&)>>> commands{
      {"fit", {"Fit a model with fixed or tuned penalties", cmd_fit}},
      {"predict", {"Predict held-out units from a saved fit", cmd_predict}},
      {"cv", {"Cross-validate fixed penalties or tune by coordinate descent", cmd_cv}},
      {"infer", {"Fit and compute debiased confidence intervals and p-values", cmd_infer}},
      {"simulate", {"Write a simulated dataset", cmd_simulate}},
      {"experiment", {"Run a replicated simulation study", cmd_experiment}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    CliOverrides ov;
    if (*seed_opt) ov.seed = seed;
    if (*threads_opt) ov.threads = threads;
    if (*out_opt) ov.out_dir = out_dir;
    const RunConfig c = load_config(config_path, ov);
    const std::string name = app.get_subcommands().front()->get_name();
    commands.at(name).second(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalExit;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  }
  return 0;
}
