#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>
#include "medeff/error.hpp"
#include "medeff/estimators.hpp"
#include "medeff/harness.hpp"
#include "medeff/inference.hpp"
#include "medeff/simgen.hpp"

namespace medeff::io {

using json = nlohmann::ordered_json;

inline constexpr const char* tool_version = "1.0.0";

inline json to_json(const ModelSpec& spec) {
  return {{"main_effects", spec.main_effects}, {"interactions", spec.interactions}};
}

inline json to_json(const DensityGrid& g) {
  return {{"lower", g.lower}, {"upper", g.upper}, {"step", g.step}, {"min_captured_mass", g.min_captured_mass}};
}

inline json to_json(const ScenarioConfig& cfg) {
  json coefficients = json::object();
  for (const auto& key : DgpCoefficients::names()) coefficients[key] = cfg.coefficients.at(key);
  return {{"name", cfg.name},
          {"confounding", std::string(confounding_label_name(cfg.confounding))},
          {"sigma", cfg.sigma},
          {"n", cfg.n},
          {"replicates", cfg.replicates},
          {"seed", cfg.master_seed},
          {"coefficients", coefficients}};
}

inline json to_json(const TruthResult& t) {
  return {{"delta_true", t.delta_true},
          {"m0_true", t.m0_true},
          {"m1_true", t.m1_true},
          {"oracle_n", t.oracle_n},
          {"mc_se", t.mc_se}};
}

inline json to_json(const EstimatorSettings& s) {
  json out = {{"qr", to_json(s.qr_spec)},
              {"propensity", to_json(s.ps_spec)},
              {"outcome", to_json(s.outcome_spec)},
              {"num_draws", s.num_draws},
              {"trim", s.ipw.trim}};
  out["grid"] = s.grid ? to_json(*s.grid) : json(nullptr);
  return out;
}

inline json to_json(const StudyPlan& plan) {
  json methods = json::array();
  for (const Method m : plan.methods) methods.push_back(std::string(method_label(m)));
  json scenarios = json::array();
  for (const auto& s : plan.scenarios) scenarios.push_back(to_json(s));
  return {{"seed", plan.master_seed},       {"methods", methods},
          {"bootstrap", plan.bootstrap_replicates}, {"level", plan.level},
          {"oracle_n", plan.oracle_n},      {"models", to_json(plan.settings)},
          {"scenarios", scenarios}};
}

namespace detail {

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("manifest: missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  cfg.name = detail::get<std::string>(j, "name");
  cfg.confounding = parse_confounding_label(detail::get<std::string>(j, "confounding"));
  cfg.sigma = detail::get<double>(j, "sigma");
  cfg.n = detail::get<std::size_t>(j, "n");
  cfg.replicates = detail::get<std::size_t>(j, "replicates");
  cfg.master_seed = detail::get<std::uint64_t>(j, "seed");
  const json& coefs = j.at("coefficients");
  for (auto it = coefs.begin(); it != coefs.end(); ++it) cfg.coefficients.at(it.key()) = it.value().get<double>();
  return cfg;
}

inline EstimatorSettings settings_from_json(const json& j) {
  EstimatorSettings s;
  auto spec = [&](const char* key) {
    const json& m = j.at(key);
    return std::pair{detail::get<std::vector<std::string>>(m, "main_effects"),
                     detail::get<std::vector<std::string>>(m, "interactions")};
  };
  s.qr_spec = ModelSpec::quantile(spec("qr").first);
  s.ps_spec = ModelSpec::propensity(spec("propensity").first);
  auto [main, inter] = spec("outcome");
  s.outcome_spec = ModelSpec::log_outcome(main, inter);
  s.num_draws = detail::get<std::size_t>(j, "num_draws");
  s.ipw.trim = detail::get<double>(j, "trim");
  if (j.contains("grid") && !j.at("grid").is_null()) {
    const json& g = j.at("grid");
    s.grid = DensityGrid{detail::get<double>(g, "lower"), detail::get<double>(g, "upper"),
                         detail::get<double>(g, "step"), detail::get<double>(g, "min_captured_mass")};
  }
  return s;
}

inline StudyPlan plan_from_json(const json& j) {
  StudyPlan plan;
  plan.master_seed = detail::get<std::uint64_t>(j, "seed");
  for (const auto& m : detail::get<std::vector<std::string>>(j, "methods")) plan.methods.push_back(parse_method(m));
  plan.bootstrap_replicates = detail::get<std::size_t>(j, "bootstrap");
  plan.level = detail::get<double>(j, "level");
  plan.oracle_n = detail::get<std::size_t>(j, "oracle_n");
  plan.settings = settings_from_json(j.at("models"));
  for (const auto& s : j.at("scenarios")) plan.scenarios.push_back(scenario_from_json(s));
  return plan;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in '" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

/// Report entry for one method of the estimate command.
inline json estimate_report(const EffectEstimate& est, const BootstrapSummary& boot, double level) {
  json out = {{"method", std::string(method_label(est.method))}, {"status", "ok"}};
  out["m0"] = est.m0 ? json(*est.m0) : json(nullptr);
  out["m1"] = est.m1 ? json(*est.m1) : json(nullptr);
  out["delta"] = est.delta;
  out["se"] = boot.se;
  out["ci"] = {{"level", level}, {"lower", boot.ci_lower}, {"upper", boot.ci_upper}};
  out["bootstrap"] = {{"replicates", boot.num_replicates}, {"failed", boot.num_failed}};
  json diag = json::object();
  for (const auto& [k, v] : est.diagnostics) diag[k] = v;
  out["diagnostics"] = diag;
  return out;
}

}  // namespace medeff::io
