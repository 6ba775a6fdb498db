#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/estimators.hpp"
#include "medeff/harness.hpp"
#include "medeff/inference.hpp"
#include "medeff/io/config.hpp"
#include "medeff/io/csv.hpp"
#include "medeff/io/json.hpp"
#include "medeff/simgen.hpp"

namespace medeff::cli {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_numerical = 2 };

inline int exit_code_for(const Error& e) {
  return e.category() == ErrorCategory::validation ? exit_validation : exit_numerical;
}

inline std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline bool looks_like_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  }
  return false;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string plan_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  bool quiet = false;
};

/// Reads an INI plan or a manifest.json written by a previous run.
inline io::PlanFile load_plan(const std::string& path) {
  if (looks_like_json(path)) {
    const io::json j = io::read_json_file(path);
    io::PlanFile out;
    out.plan = io::plan_from_json(j.contains("plan") ? j.at("plan") : j);
    out.seed_given = true;
    return out;
  }
  return io::plan_from_ini(io::read_ini_file(path));
}

inline int cmd_simulate(const SimulateOptions& options, std::ostream& log = std::cerr) {
  io::PlanFile file = load_plan(options.plan_path);
  StudyPlan& plan = file.plan;
  if (options.seed) plan.master_seed = *options.seed;
  else if (!file.seed_given) plan.master_seed = fresh_seed();
  plan.workers = options.workers;
  for (auto& s : plan.scenarios) s.master_seed = plan.master_seed;
  plan.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + options.out_dir + "': " + ec.message());

  std::size_t last_pct = 0;
  ProgressCallback progress;
  if (!options.quiet) {
    progress = [&](std::size_t done, std::size_t total) {
      const std::size_t pct = 100 * done / std::max<std::size_t>(total, 1);
      if (pct >= last_pct + 5 || done == total) {
        last_pct = pct;
        log << "simulate: " << done << "/" << total << " replicates\n" << std::flush;
      }
    };
  }
  const StudyResult result = run_study(plan, progress);

  const fs::path dir(options.out_dir);
  io::write_file((dir / "replicates.csv").string(), [&](std::ostream& o) { io::write_replicates(o, result.records); });
  io::write_file((dir / "metrics.csv").string(), [&](std::ostream& o) { io::write_metrics(o, result.metrics); });
  io::write_file((dir / "plotdata.csv").string(), [&](std::ostream& o) { io::write_plotdata(o, result.metrics); });

  io::json truths = io::json::object();
  for (const auto& s : plan.scenarios) {
    const auto it = result.truths.find(s.name);
    if (it != result.truths.end()) truths[s.name] = io::to_json(it->second);
  }
  io::json failures = io::json::array();
  for (const auto& f : result.failures) failures.push_back({{"scenario", f.scenario}, {"message", f.message}});
  io::json manifest = {{"tool", "medeff"},
                       {"version", io::tool_version},
                       {"command", "simulate"},
                       {"seed", plan.master_seed},
                       {"workers", plan.workers},
                       {"wall_seconds", result.wall_seconds},
                       {"plan", io::to_json(plan)},
                       {"truths", truths},
                       {"failures", failures},
                       {"outputs", {"replicates.csv", "metrics.csv", "plotdata.csv"}}};
  io::write_json_file((dir / "manifest.json").string(), manifest);

  for (const auto& f : result.failures) log << "simulate: scenario " << f.scenario << " failed: " << f.message << "\n";
  return result.failures.empty() ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  std::string data_path;
  std::string config_path;
  std::optional<std::size_t> bootstrap;
  std::optional<double> level;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

inline io::json to_json(const io::EstimateConfig& c) {
  io::json methods = io::json::array();
  for (const Method m : c.methods) methods.push_back(std::string(method_label(m)));
  return {{"data", {{"outcome", c.roles.outcome}, {"exposure", c.roles.exposure}, {"confounders", c.roles.confounders}}},
          {"methods", methods},
          {"bootstrap", c.bootstrap},
          {"level", c.level},
          {"seed", c.seed ? io::json(*c.seed) : io::json(nullptr)},
          {"models", io::to_json(c.settings)}};
}

inline io::EstimateConfig estimate_config_from_json(const io::json& j) {
  io::EstimateConfig c;
  const io::json& data = j.at("data");
  c.roles.outcome = io::detail::get<std::string>(data, "outcome");
  c.roles.exposure = io::detail::get<std::string>(data, "exposure");
  c.roles.confounders = io::detail::get<std::vector<std::string>>(data, "confounders");
  c.methods = io::parse_methods(io::detail::get<std::vector<std::string>>(j, "methods"));
  c.bootstrap = io::detail::get<std::size_t>(j, "bootstrap");
  c.level = io::detail::get<double>(j, "level");
  if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  c.settings = io::settings_from_json(j.at("models"));
  return c;
}

/// INI config, or the JSON report of an earlier run (its "config" entry).
inline io::EstimateConfig load_estimate_config(const std::string& path) {
  if (looks_like_json(path)) {
    const io::json j = io::read_json_file(path);
    return estimate_config_from_json(j.contains("config") ? j.at("config") : j);
  }
  return io::estimate_config_from_ini(io::read_ini_file(path));
}

inline int cmd_estimate(const EstimateOptions& options, std::ostream& log = std::cerr) {
  io::EstimateConfig config = load_estimate_config(options.config_path);
  if (options.bootstrap) config.bootstrap = *options.bootstrap;
  if (options.level) config.level = *options.level;
  if (options.seed) config.seed = *options.seed;
  if (!config.seed) config.seed = fresh_seed();
  if (config.methods.empty()) throw ValidationError("no methods requested");

  const io::DatasetLoad load = io::read_dataset(options.data_path, config.roles);
  const Dataset& data = load.data;
  data.validate();
  if (!config.settings.grid) config.settings.grid = DensityGrid::for_outcome(data.outcome);

  BootstrapOptions boot;
  boot.num_replicates = config.bootstrap;
  boot.level = config.level;
  boot.workers = options.workers;
  if (boot.num_replicates < 2) throw ValidationError("--boot must be at least 2");
  if (!(boot.level > 0.0 && boot.level < 1.0)) throw ValidationError("--level must lie in (0, 1)");

  const RngStream point_stream(*config.seed, DomainTag{0, 0, "estimate"});
  const RngStream boot_stream(*config.seed, DomainTag{0, 0, "bootstrap"});
  io::json methods = io::json::array();
  bool any_failed = false;
  for (const Method m : config.methods) {
    const MethodEstimator estimator{m, &config.settings};
    const auto idx = static_cast<std::uint64_t>(method_index(m));
    try {
      const EffectEstimate est = estimator(data, point_stream.substream(idx));
      const BootstrapSummary summary = bootstrap_estimate(data, estimator, est.delta, boot, boot_stream.substream(idx));
      methods.push_back(io::estimate_report(est, summary, config.level));
    } catch (const Error& e) {
      any_failed = true;
      log << "estimate: " << method_label(m) << " failed: " << e.what() << "\n";
      methods.push_back({{"method", std::string(method_label(m))},
                         {"status", "error"},
                         {"error_category", e.category() == ErrorCategory::validation ? "validation" : "numerical"},
                         {"message", e.what()}});
    }
  }
  io::json report = {{"tool", "medeff"},
                     {"version", io::tool_version},
                     {"command", "estimate"},
                     {"seed", *config.seed},
                     {"data",
                      {{"path", options.data_path},
                       {"rows_read", load.rows_read},
                       {"rows_dropped_incomplete", load.rows_dropped},
                       {"n", data.size()},
                       {"n_exposed", data.arm_size(1)},
                       {"n_unexposed", data.arm_size(0)}}},
                     {"config", to_json(config)},
                     {"methods", methods}};
  io::write_json_file(options.out_path, report);
  return any_failed ? exit_numerical : exit_ok;
}

// ---------------------------------------------------------------------------
// truth

struct TruthOptions {
  std::string scenario_path;
  std::size_t oracle_n = 2'000'000;
  std::optional<std::uint64_t> seed;
  std::string out_path;
};

/// INI scenario file, a scenario JSON object, or an earlier truth output.
inline ScenarioConfig load_scenario(const std::string& path, bool& seed_given) {
  if (looks_like_json(path)) {
    const io::json j = io::read_json_file(path);
    seed_given = true;
    return io::scenario_from_json(j.contains("scenario") ? j.at("scenario") : j);
  }
  const auto tree = io::read_ini_file(path);
  const auto s = tree.find("scenario");
  seed_given = s != tree.not_found() && s->second.find("seed") != s->second.not_found();
  return io::scenario_from_ini(tree);
}

inline int cmd_truth(const TruthOptions& options) {
  bool seed_given = false;
  ScenarioConfig cfg = load_scenario(options.scenario_path, seed_given);
  if (options.seed) cfg.master_seed = *options.seed;
  else if (!seed_given) cfg.master_seed = fresh_seed();
  const TruthResult t = true_delta_oracle(cfg, options.oracle_n, RngStream(cfg.master_seed, DomainTag{0, 0, "truth"}));
  io::json out = io::to_json(t);
  out["seed"] = cfg.master_seed;
  out["tool"] = "medeff";
  out["version"] = io::tool_version;
  out["scenario"] = io::to_json(cfg);
  io::write_json_file(options.out_path, out);
  return exit_ok;
}

}  // namespace medeff::cli
