#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/numerics/design.hpp"

namespace medeff {

/// Analysis table: positive outcome Y, binary exposure A and named confounders C.
struct Dataset {
  std::string outcome_name = "Y";
  std::string exposure_name = "A";
  std::vector<double> outcome;
  std::vector<double> exposure;
  Matrix confounders;  // n x K, column j named confounder_names[j]
  std::vector<std::string> confounder_names;

  std::size_t size() const noexcept { return outcome.size(); }
  std::size_t num_confounders() const noexcept { return confounder_names.size(); }

  std::optional<std::size_t> confounder_index(const std::string& name) const {
    for (std::size_t j = 0; j < confounder_names.size(); ++j) {
      if (confounder_names[j] == name) return j;
    }
    return std::nullopt;
  }

  std::size_t require_confounder(const std::string& name) const {
    const auto j = confounder_index(name);
    if (!j) throw ValidationError("unknown confounder '" + name + "'");
    return *j;
  }

  std::span<const double> confounder(const std::string& name) const {
    const auto j = static_cast<Eigen::Index>(require_confounder(name));
    return {confounders.col(j).data(), size()};
  }

  std::size_t arm_size(int a) const {
    std::size_t count = 0;
    for (const double v : exposure) count += (v == static_cast<double>(a));
    return count;
  }

  /// Outcome values of records with exposure a, in record order.
  std::vector<double> arm_outcomes(int a) const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      if (exposure[i] == static_cast<double>(a)) out.push_back(outcome[i]);
    }
    return out;
  }

  /// Throws ValidationError unless shapes agree, all values are finite and A is binary.
  /// Both exposure levels are required only when require_both_arms is set.
  void validate(bool require_both_arms = true) const {
    const std::size_t n = size();
    if (n == 0) throw ValidationError("dataset has no records");
    if (exposure.size() != n) throw ValidationError("exposure length does not match outcome length");
    if (static_cast<std::size_t>(confounders.rows()) != n && confounders.cols() > 0) {
      throw ValidationError("confounder row count does not match outcome length");
    }
    if (static_cast<std::size_t>(confounders.cols()) != confounder_names.size()) {
      throw ValidationError("confounder name count does not match column count");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(outcome[i])) {
        throw ValidationError("non-finite outcome at record " + std::to_string(i));
      }
      if (exposure[i] != 0.0 && exposure[i] != 1.0) {
        throw ValidationError("exposure must be 0 or 1; record " + std::to_string(i));
      }
    }
    if (confounders.size() > 0 && !confounders.allFinite()) {
      throw ValidationError("non-finite confounder value");
    }
    if (require_both_arms && (arm_size(0) == 0 || arm_size(1) == 0)) {
      throw ValidationError("exposure needs both levels present");
    }
  }

  void require_positive_outcome(const char* who) const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (!(outcome[i] > 0.0)) {
        throw DomainError(std::string(who) + ": outcome must be strictly positive for a log model; record " +
                          std::to_string(i));
      }
    }
  }

  /// Records at the given positions, in that order (repeats allowed).
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.outcome_name = outcome_name;
    out.exposure_name = exposure_name;
    out.confounder_names = confounder_names;
    out.outcome.resize(rows.size());
    out.exposure.resize(rows.size());
    out.confounders.resize(static_cast<Eigen::Index>(rows.size()), confounders.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t i = rows[k];
      out.outcome[k] = outcome[i];
      out.exposure[k] = exposure[i];
    }
    for (Eigen::Index j = 0; j < confounders.cols(); ++j) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        out.confounders(static_cast<Eigen::Index>(k), j) = confounders(static_cast<Eigen::Index>(rows[k]), j);
      }
    }
    return out;
  }
};

enum class ModelKind { propensity, outcome, quantile };
enum class OutcomeTransform { identity, log };

/// Term list for a regression on the dataset. Interactions name confounders
/// that enter as exposure x confounder products.
struct ModelSpec {
  ModelKind kind = ModelKind::quantile;
  std::vector<std::string> main_effects;
  std::vector<std::string> interactions;
  OutcomeTransform transform = OutcomeTransform::identity;

  static ModelSpec propensity(std::vector<std::string> confounders) {
    return {ModelKind::propensity, std::move(confounders), {}, OutcomeTransform::identity};
  }
  static ModelSpec quantile(std::vector<std::string> confounders) {
    return {ModelKind::quantile, std::move(confounders), {}, OutcomeTransform::identity};
  }
  static ModelSpec log_outcome(std::vector<std::string> confounders, std::vector<std::string> interactions) {
    return {ModelKind::outcome, std::move(confounders), std::move(interactions), OutcomeTransform::log};
  }

  void validate(const Dataset& data) const {
    for (const auto& name : main_effects) {
      if (name == data.outcome_name) throw ValidationError("model terms may not include the outcome");
      if (name == data.exposure_name) {
        throw ValidationError("the exposure enters models implicitly; remove it from the term list");
      }
      data.require_confounder(name);
    }
    for (const auto& name : interactions) {
      if (kind == ModelKind::propensity) {
        throw ValidationError("propensity models cannot contain exposure interactions");
      }
      if (name == data.outcome_name || name == data.exposure_name) {
        throw ValidationError("interactions pair the exposure with a confounder; got '" + name + "'");
      }
      data.require_confounder(name);
    }
  }
};

inline std::string interaction_label(const Dataset& data, const std::string& name) {
  return data.exposure_name + ":" + name;
}

/// Intercept, then A (outcome and quantile models), main effects and A x C products.
/// forced_exposure replaces A by a constant for counterfactual prediction.
inline DesignMatrix build_design(const Dataset& data, const ModelSpec& spec,
                                 std::optional<double> forced_exposure = std::nullopt) {
  spec.validate(data);
  const auto n = static_cast<Eigen::Index>(data.size());
  const bool with_exposure = spec.kind != ModelKind::propensity;
  const auto p = static_cast<Eigen::Index>(1 + (with_exposure ? 1 : 0) + spec.main_effects.size() +
                                           spec.interactions.size());
  Matrix x(n, p);
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(p));

  x.col(0).setOnes();
  labels.emplace_back("(Intercept)");
  Eigen::Index col = 1;
  Vector a(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i) = forced_exposure ? *forced_exposure : data.exposure[static_cast<std::size_t>(i)];
  }
  if (with_exposure) {
    x.col(col++) = a;
    labels.push_back(data.exposure_name);
  }
  for (const auto& name : spec.main_effects) {
    x.col(col++) = data.confounders.col(static_cast<Eigen::Index>(data.require_confounder(name)));
    labels.push_back(name);
  }
  for (const auto& name : spec.interactions) {
    x.col(col++) =
        a.cwiseProduct(data.confounders.col(static_cast<Eigen::Index>(data.require_confounder(name))));
    labels.push_back(interaction_label(data, name));
  }
  if (forced_exposure) {
    // Counterfactual designs may legitimately hold zero columns (A forced to 0).
    return DesignMatrix::unchecked(std::move(x), std::move(labels));
  }
  return DesignMatrix(std::move(x), std::move(labels));
}

}  // namespace medeff
