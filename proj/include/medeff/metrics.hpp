#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/estimators.hpp"
#include "medeff/simgen.hpp"

namespace medeff {

struct ReplicateRecord {
  std::string confounding;
  std::string scenario;
  Method method = Method::unadjusted;
  std::size_t replicate = 0;
  double delta_hat = 0.0;
  double se_hat = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

/// Simulation performance measures for one scenario x method, each with its
/// Monte Carlo SE (mcse_*). Percentages are on a 0-100 scale.
struct MetricsRow {
  std::string confounding;
  std::string scenario;
  Method method = Method::unadjusted;
  std::size_t num_replicates = 0;
  double bias = 0.0;
  double relative_bias_pct = 0.0;
  double empirical_se = 0.0;
  double model_se = 0.0;
  double relative_error_se_pct = 0.0;
  double coverage_pct = 0.0;
  double mcse_bias = 0.0;
  double mcse_relative_bias_pct = 0.0;
  double mcse_empirical_se = 0.0;
  double mcse_model_se = 0.0;
  double mcse_relative_error_se_pct = 0.0;
  double mcse_coverage_pct = 0.0;
};

/// Aggregates S >= 2 replicate records against the true delta.
///
///   bias = mean(delta_hat) - theta,  MCSE = empirical_se / sqrt(S)
///   empirical_se = SD(delta_hat),    MCSE = empirical_se / sqrt(2 (S - 1))
///   model_se = sqrt(mean(se_hat^2)), MCSE = sqrt(Var(se_hat^2) / (4 S model_se^2))
///   coverage = mean(ci covers theta), MCSE = sqrt(cov (1 - cov) / S)
///   relative error = model_se / empirical_se - 1, with first-order MCSE
///     (model_se / empirical_se) sqrt((MCSE(model_se) / model_se)^2 + (MCSE(empirical_se) / empirical_se)^2)
///   relative bias = bias / theta, MCSE = MCSE(bias) / |theta|
inline MetricsRow compute_metrics(const std::vector<ReplicateRecord>& records, const TruthResult& truth) {
  const std::size_t s = records.size();
  if (s < 2) throw ValidationError("compute_metrics: need at least 2 replicate records");
  for (const auto& r : records) {
    if (r.scenario != records.front().scenario || r.method != records.front().method) {
      throw ValidationError("compute_metrics: records mix scenarios or methods");
    }
  }
  const double theta = truth.delta_true;
  if (theta == 0.0) throw UndefinedMetricError("compute_metrics: relative bias is undefined when the true delta is 0");

  const double S = static_cast<double>(s);
  double sum = 0.0;
  double sum_var = 0.0;
  double covered = 0.0;
  for (const auto& r : records) {
    sum += r.delta_hat;
    sum_var += r.se_hat * r.se_hat;
    if (r.ci_lower <= theta && theta <= r.ci_upper) covered += 1.0;
  }
  const double mean = sum / S;
  const double mean_var = sum_var / S;
  double ss = 0.0;
  double ss_var = 0.0;
  for (const auto& r : records) {
    ss += (r.delta_hat - mean) * (r.delta_hat - mean);
    const double d = r.se_hat * r.se_hat - mean_var;
    ss_var += d * d;
  }

  MetricsRow row;
  row.confounding = records.front().confounding;
  row.scenario = records.front().scenario;
  row.method = records.front().method;
  row.num_replicates = s;
  row.bias = mean - theta;
  row.relative_bias_pct = 100.0 * row.bias / theta;
  row.empirical_se = std::sqrt(ss / (S - 1.0));
  row.model_se = std::sqrt(mean_var);
  const double cov = covered / S;
  row.coverage_pct = 100.0 * cov;

  row.mcse_bias = row.empirical_se / std::sqrt(S);
  row.mcse_relative_bias_pct = 100.0 * row.mcse_bias / std::abs(theta);
  row.mcse_empirical_se = row.empirical_se / std::sqrt(2.0 * (S - 1.0));
  row.mcse_model_se = row.model_se > 0.0 ? std::sqrt(ss_var / (S - 1.0) / (4.0 * S * mean_var)) : 0.0;
  row.mcse_coverage_pct = 100.0 * std::sqrt(cov * (1.0 - cov) / S);

  if (row.empirical_se > 0.0) {
    const double ratio = row.model_se / row.empirical_se;
    row.relative_error_se_pct = 100.0 * (ratio - 1.0);
    const double rel_model = row.model_se > 0.0 ? row.mcse_model_se / row.model_se : 0.0;
    const double rel_emp = row.mcse_empirical_se / row.empirical_se;
    row.mcse_relative_error_se_pct = 100.0 * ratio * std::sqrt(rel_model * rel_model + rel_emp * rel_emp);
  } else if (row.model_se == 0.0) {
    row.relative_error_se_pct = 0.0;
  } else {
    throw UndefinedMetricError("compute_metrics: relative error in model SE is undefined when empirical SE is 0");
  }
  return row;
}

}  // namespace medeff
