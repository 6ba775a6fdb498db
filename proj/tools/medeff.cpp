// medeff: causal difference in medians from the command line.
//
//   medeff simulate --plan plan.ini --out results/ --seed 1 --workers 4
//   medeff estimate --data data.csv --config analysis.ini --boot 1000 --level 0.95 --out report.json --seed 1
//   medeff truth --scenario scenario.ini --oracle-n 2000000 --seed 1 --out truth.json

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "medeff/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace medeff;
  CLI::App app{"Causal difference in medians: estimators, bootstrap inference and simulation studies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::tool_version);

  cli::SimulateOptions sim;
  std::optional<std::uint64_t> sim_seed;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation study");
  simulate->add_option("--plan", sim.plan_path, "Study plan (INI) or manifest.json of an earlier run")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--seed", sim_seed, "Master seed (overrides the plan)");
  simulate->add_option("--workers", sim.workers, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_flag("--quiet", sim.quiet, "No progress output");

  cli::EstimateOptions est;
  std::optional<std::size_t> est_boot;
  std::optional<double> est_level;
  std::optional<std::uint64_t> est_seed;
  auto* estimate = app.add_subcommand("estimate", "Estimate the causal difference in medians on a CSV dataset");
  estimate->add_option("--data", est.data_path, "Input CSV with header")->required()->check(CLI::ExistingFile);
  estimate->add_option("--config", est.config_path, "Analysis config (INI) or an earlier JSON report")
      ->required()
      ->check(CLI::ExistingFile);
  estimate->add_option("--boot", est_boot, "Bootstrap replicates (default 1000)");
  estimate->add_option("--level", est_level, "Confidence level (default 0.95)");
  estimate->add_option("--out", est.out_path, "JSON report path")->required();
  estimate->add_option("--seed", est_seed, "Seed");
  estimate->add_option("--workers", est.workers, "Bootstrap worker threads")->check(CLI::PositiveNumber);

  cli::TruthOptions truth;
  std::optional<std::uint64_t> truth_seed;
  auto* truth_cmd = app.add_subcommand("truth", "True causal difference in medians of a simulation scenario");
  truth_cmd->add_option("--scenario", truth.scenario_path, "Scenario file (INI [scenario] section or JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  truth_cmd->add_option("--oracle-n", truth.oracle_n, "Oracle sample size (default 2000000)");
  truth_cmd->add_option("--seed", truth_seed, "Seed");
  truth_cmd->add_option("--out", truth.out_path, "JSON output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::exit_validation;
  }

  try {
    if (*simulate) {
      sim.seed = sim_seed;
      return cli::cmd_simulate(sim);
    }
    if (*estimate) {
      est.bootstrap = est_boot;
      est.level = est_level;
      est.seed = est_seed;
      return cli::cmd_estimate(est);
    }
    truth.seed = truth_seed;
    return cli::cmd_truth(truth);
  } catch (const Error& e) {
    std::cerr << "medeff: " << e.what() << "\n";
    return cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "medeff: " << e.what() << "\n";
    return cli::exit_numerical;
  }
}
