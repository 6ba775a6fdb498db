#pragma once

// INI-style configuration files.
//
//   ; comment
//   [section]
//   key = value
//
// Lists are comma separated. Sections and keys are documented in
// docs/config.md; unknown sections or keys are rejected.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/estimators.hpp"
#include "medeff/harness.hpp"
#include "medeff/io/csv.hpp"
#include "medeff/simgen.hpp"

namespace medeff::io {

using boost::property_tree::ptree;

inline ptree read_ini_file(const std::string& path) {
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("cannot read config '" + path + "': " + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
  }
  return tree;
}

inline ptree parse_ini(const std::string& text) {
  std::istringstream in(text);
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("invalid config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Typed access to one section that remembers which keys were read.
class Section {
public:
  Section(std::string name, const ptree* node) : name_(std::move(name)), node_(node) {}

  bool present() const { return node_ != nullptr; }

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    if (!node_) return std::nullopt;
    const auto it = node_->find(key);
    if (it == node_->not_found()) return std::nullopt;
    return trim(it->second.data());
  }

  std::optional<double> number(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    double v = 0.0;
    if (!parse_number(*t, v)) throw ValidationError(where(key) + ": expected a number, got '" + *t + "'");
    return v;
  }

  std::optional<std::uint64_t> count(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
      if (t->empty() || (*t)[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(*t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != t->size()) {
      throw ValidationError(where(key) + ": expected a nonnegative integer, got '" + *t + "'");
    }
    return v;
  }

  std::optional<std::vector<std::string>> list(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    return split_list(*t);
  }

  /// Keys not yet read; rejected as unknown unless matched by accept.
  template <class Accept>
  void reject_unknown(const Accept& accept) const {
    if (!node_) return;
    for (const auto& [key, value] : *node_) {
      if (!used_.count(key) && !accept(key)) throw ValidationError(where(key) + ": unknown key");
    }
  }
  void reject_unknown() const {
    reject_unknown([](const std::string&) { return false; });
  }

  const ptree* node() const { return node_; }
  const std::string& name() const { return name_; }

private:
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  std::string name_;
  const ptree* node_;
  std::set<std::string> used_;
};

inline Section section(const ptree& tree, const std::string& name) {
  const auto it = tree.find(name);
  return Section(name, it == tree.not_found() ? nullptr : &it->second);
}

inline bool is_coefficient_key(const std::string& key) { return key.find('.') != std::string::npos; }

/// Applies preset, confounding, sigma, n, replicates, seed and coefficient
/// overrides (keys like y.C5) from one section onto base.
inline ScenarioConfig scenario_from_section(Section& s, ScenarioConfig base) {
  if (const auto preset = s.text("preset")) {
    const auto dash = preset->rfind('-');
    std::size_t k = 0;
    if (dash != std::string::npos) {
      try {
        k = std::stoul(preset->substr(dash + 1));
      } catch (const std::exception&) {
        k = 0;
      }
    }
    if (dash == std::string::npos || k < 1 || k > 4) {
      throw ValidationError("unknown preset '" + *preset + "' (expected weak-1..4 or strong-1..4)");
    }
    const auto label = parse_confounding_label(preset->substr(0, dash));
    const ScenarioConfig p = preset_scenario(label, k, base.n, base.replicates, base.master_seed);
    base.coefficients = p.coefficients;
    base.sigma = p.sigma;
    base.confounding = p.confounding;
    base.name = p.name;
  }
  if (const auto label = s.text("confounding")) base.confounding = parse_confounding_label(*label);
  if (const auto v = s.number("sigma")) base.sigma = *v;
  if (const auto v = s.count("n")) base.n = *v;
  if (const auto v = s.count("replicates")) base.replicates = *v;
  if (const auto v = s.count("seed")) base.master_seed = *v;
  if (s.node()) {
    for (const auto& [key, value] : *s.node()) {
      if (!is_coefficient_key(key)) continue;
      double v = 0.0;
      if (!parse_number(trim(value.data()), v)) {
        throw ValidationError("[" + s.name() + "] " + key + ": expected a number");
      }
      base.coefficients.at(key) = v;
    }
  }
  s.reject_unknown(is_coefficient_key);
  return base;
}

/// [models] and [grid] sections onto settings. default_confounders fills any
/// model term list that is not given.
inline void read_model_settings(const ptree& tree, EstimatorSettings& settings,
                                const std::vector<std::string>& default_confounders) {
  Section models = section(tree, "models");
  settings.qr_spec = ModelSpec::quantile(models.list("qr").value_or(default_confounders));
  settings.ps_spec = ModelSpec::propensity(models.list("propensity").value_or(default_confounders));
  settings.outcome_spec = ModelSpec::log_outcome(models.list("outcome").value_or(default_confounders),
                                                 models.list("interactions").value_or(settings.outcome_spec.interactions));
  if (const auto v = models.count("num_draws")) settings.num_draws = *v;
  if (const auto v = models.number("trim")) settings.ipw.trim = *v;
  models.reject_unknown();

  Section grid = section(tree, "grid");
  if (grid.present()) {
    DensityGrid g = settings.grid.value_or(DensityGrid{});
    if (const auto v = grid.number("lower")) g.lower = *v;
    if (const auto v = grid.number("upper")) g.upper = *v;
    if (const auto v = grid.number("step")) g.step = *v;
    if (const auto v = grid.number("min_captured_mass")) g.min_captured_mass = *v;
    grid.reject_unknown();
    g.validate();
    settings.grid = g;
  }
}

inline std::vector<Method> parse_methods(const std::vector<std::string>& labels) {
  std::vector<Method> out;
  for (const auto& l : labels) out.push_back(parse_method(l));
  return out;
}

inline std::vector<Method> all_method_list() { return {std::begin(all_methods), std::end(all_methods)}; }

struct PlanFile {
  StudyPlan plan;
  bool seed_given = false;
};

/// [study] seed, methods, bootstrap, level, oracle_n, n, replicates, presets;
/// [models]; [grid]; any number of [scenario:<name>] sections.
inline PlanFile plan_from_ini(const ptree& tree) {
  PlanFile out;
  StudyPlan& plan = out.plan;
  plan.settings = StudyPlan::simulation_settings();
  plan.methods = all_method_list();

  Section study = section(tree, "study");
  if (const auto v = study.count("seed")) {
    plan.master_seed = *v;
    out.seed_given = true;
  }
  if (const auto v = study.list("methods")) plan.methods = parse_methods(*v);
  if (const auto v = study.count("bootstrap")) plan.bootstrap_replicates = *v;
  if (const auto v = study.number("level")) plan.level = *v;
  if (const auto v = study.count("oracle_n")) plan.oracle_n = *v;
  if (const auto v = study.count("workers")) plan.workers = static_cast<unsigned>(*v);
  ScenarioConfig base;
  base.n = study.count("n").value_or(1000);
  base.replicates = study.count("replicates").value_or(1000);
  for (const auto& name : study.list("presets").value_or(std::vector<std::string>{})) {
    ptree fake;
    fake.put("preset", name);
    Section s(name, &fake);
    plan.scenarios.push_back(scenario_from_section(s, base));
  }
  study.reject_unknown();

  read_model_settings(tree, plan.settings, dgp_confounder_names());

  for (const auto& [name, node] : tree) {
    if (name == "study" || name == "models" || name == "grid") continue;
    if (name.rfind("scenario:", 0) != 0) throw ValidationError("unknown config section [" + name + "]");
    Section s(name, &node);
    ScenarioConfig cfg = scenario_from_section(s, base);
    cfg.name = name.substr(9);
    if (cfg.name.empty()) throw ValidationError("scenario section needs a name: [scenario:<name>]");
    plan.scenarios.push_back(cfg);
  }
  return out;
}

/// Scenario file for the truth command: one [scenario] section.
inline ScenarioConfig scenario_from_ini(const ptree& tree) {
  for (const auto& [name, node] : tree) {
    if (name != "scenario") throw ValidationError("unknown config section [" + name + "] (expected [scenario])");
  }
  Section s = section(tree, "scenario");
  if (!s.present()) throw ValidationError("scenario file needs a [scenario] section");
  return scenario_from_section(s, ScenarioConfig{});
}

/// Settings for the estimate command.
struct EstimateConfig {
  ColumnRoles roles;
  std::vector<Method> methods;
  EstimatorSettings settings;
  std::size_t bootstrap = 1000;
  double level = 0.95;
  std::optional<std::uint64_t> seed;
};

/// [data] outcome, exposure, confounders; [estimate] methods, bootstrap,
/// level, seed; [models]; [grid].
inline EstimateConfig estimate_config_from_ini(const ptree& tree) {
  EstimateConfig out;
  Section data = section(tree, "data");
  if (!data.present()) throw ValidationError("estimate config needs a [data] section");
  out.roles.outcome = data.text("outcome").value_or("");
  out.roles.exposure = data.text("exposure").value_or("");
  out.roles.confounders = data.list("confounders").value_or(std::vector<std::string>{});
  data.reject_unknown();
  if (out.roles.outcome.empty() || out.roles.exposure.empty()) {
    throw ValidationError("[data] needs outcome and exposure column names");
  }

  Section est = section(tree, "estimate");
  out.methods = parse_methods(est.list("methods").value_or(std::vector<std::string>{
      "unadjusted", "qr", "ipw", "weighted_qr", "gcomp_mc", "gcomp_approx"}));
  if (const auto v = est.count("bootstrap")) out.bootstrap = *v;
  if (const auto v = est.number("level")) out.level = *v;
  if (const auto v = est.count("seed")) out.seed = *v;
  est.reject_unknown();

  read_model_settings(tree, out.settings, out.roles.confounders);
  for (const auto& [name, node] : tree) {
    if (name != "data" && name != "estimate" && name != "models" && name != "grid") {
      throw ValidationError("unknown config section [" + name + "]");
    }
  }
  return out;
}

}  // namespace medeff::io
