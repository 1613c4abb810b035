// Command-line front end for the guided-wave SHM batch pipeline.
//
// Every subcommand loads a JSON run configuration and applies any
// single-field overrides given on the command line, so shell scripts can
// sweep methods, risk levels, or seeds without editing config files.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gwshm/ar.hpp"
#include "gwshm/error.hpp"
#include "gwshm/pipeline.hpp"
#include "gwshm/stats.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> path_id;
  std::optional<std::string> method;
  std::optional<double> alpha;
  std::optional<double> manual_threshold;
  std::optional<int> order;
  std::optional<std::string> estimator;
  std::optional<std::string> covariance;
};

void add_common_options(CLI::App* cmd, CliOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration file")
      ->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "RNG seed (overrides config)");
  cmd->add_option("--path", opts.path_id,
                  "transducer path id to analyze (overrides config)");
  cmd->add_option("--method", opts.method,
                  "parameter treatment: standard, svd[:m], pca[:NN%], "
                  "pca:m=K, or manual:i,j,...");
  auto* alpha_opt = cmd->add_option(
      "--alpha", opts.alpha, "type-I risk level in (0,1) (overrides config)");
  auto* threshold_opt =
      cmd->add_option("--manual-threshold", opts.manual_threshold,
                      "fixed decision threshold (overrides config)");
  alpha_opt->excludes(threshold_opt);
  cmd->add_option("--order", opts.order,
                  "fixed model order (skips the order scan)");
  cmd->add_option("--estimator", opts.estimator, "ols or wls");
  cmd->add_option("--covariance", opts.covariance,
                  "experimental or theoretical parameter covariance");
}

gwshm::RunConfig make_config(const CliOptions& opts) {
  gwshm::RunConfig config = gwshm::load_config(opts.config_path);
  if (opts.out_dir) config.out_dir = *opts.out_dir;
  if (opts.seed) config.seed = *opts.seed;
  if (opts.path_id) config.path_id = *opts.path_id;
  if (opts.method) config.method = gwshm::parse_method(*opts.method);
  if (opts.alpha) config.risk = gwshm::RiskSpec::from_alpha(*opts.alpha);
  if (opts.manual_threshold)
    config.risk = gwshm::RiskSpec::from_threshold(*opts.manual_threshold);
  if (opts.order) config.order.fixed = *opts.order;
  if (opts.estimator)
    config.estimator = gwshm::estimator_kind_from_string(*opts.estimator);
  if (opts.covariance)
    config.covariance = gwshm::covariance_source_from_string(*opts.covariance);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic damage detection and identification for "
               "guided-wave structural health monitoring"};
  app.require_subcommand(1);

  CliOptions opts;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate the configured synthetic ensemble (ensemble.csv)");
  CLI::App* identify = app.add_subcommand(
      "identify",
      "Fit per-realization models: order scan, coefficients, diagnostics");
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "Build the state library and test every inspection record");
  CLI::App* roc = app.add_subcommand(
      "roc", "Sweep decision thresholds into a ROC curve");
  CLI::App* di = app.add_subcommand(
      "di", "Signal-energy damage index for each record against the "
            "baseline mean");
  for (CLI::App* cmd : {simulate, identify, diagnose, roc, di})
    add_common_options(cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gwshm::kExitSuccess : gwshm::kExitConfigError;
  }

  try {
    const gwshm::RunConfig config = make_config(opts);
    if (simulate->parsed()) {
      gwshm::run_simulate(config);
    } else if (identify->parsed()) {
      gwshm::run_identify(config);
    } else if (diagnose->parsed()) {
      gwshm::run_diagnose(config);
    } else if (roc->parsed()) {
      gwshm::run_roc(config);
    } else if (di->parsed()) {
      gwshm::run_di(config);
    }
  } catch (const gwshm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return gwshm::kExitConfigError;
  } catch (const gwshm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return gwshm::kExitDataError;
  } catch (const gwshm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return gwshm::kExitNumericError;
  }
  return gwshm::kExitSuccess;
}
