#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medeff/data.hpp"
#include "medeff/error.hpp"
#include "medeff/numerics/distributions.hpp"
#include "medeff/numerics/quantiles.hpp"
#include "medeff/rng.hpp"

namespace medeff {

/// Coefficients of the sequential generating models for C1..C5, A and log Y.
/// Normal parameters are (mean, SD).
struct DgpCoefficients {
  double c1_p = 0.51;
  double c2_mean = 35.17;
  double c2_sd = 5.47;
  std::array<double, 3> c3{-1.41, 0.78, 0.04};              // 1, C1, C2 (logit)
  std::array<double, 4> c4{-1.55, 0.47, 0.03, 0.80};        // 1, C1, C2, C3 (logit)
  std::array<double, 5> c5{1.91, 0.03, 0.01, 0.05, 0.12};   // 1, C1..C4 (mean)
  double c5_sd = 0.63;
  std::array<double, 6> a{-2.39, 0.04, -0.05, -0.09, 0.51, 1.07};  // 1, C1..C5 (logit)
  // 1, A, C1..C5, A:C1, A:C2 (log-scale mean)
  std::array<double, 9> y{1.40, 0.49, 0.03, -0.01, 0.01, 0.03, 0.26, 0.12, -0.01};

  /// Coefficient by name: c1.p, c2.mean, c2.sd, c5.sd, or <model>.<term> with
  /// model in {c3, c4, c5, a, y} and term in {intercept, A, C1..C5, A:C1, A:C2}.
  double& at(std::string_view name) {
    if (name == "c1.p") return c1_p;
    if (name == "c2.mean") return c2_mean;
    if (name == "c2.sd") return c2_sd;
    if (name == "c5.sd") return c5_sd;
    const auto dot = name.find('.');
    if (dot != std::string_view::npos) {
      const auto model = name.substr(0, dot);
      const auto term = name.substr(dot + 1);
      auto pick = [&](auto& arr, std::initializer_list<std::string_view> terms) -> double* {
        std::size_t k = 0;
        for (const auto t : terms) {
          if (t == term) return &arr[k];
          ++k;
        }
        return nullptr;
      };
      double* slot = nullptr;
      if (model == "c3") slot = pick(c3, {"intercept", "C1", "C2"});
      else if (model == "c4") slot = pick(c4, {"intercept", "C1", "C2", "C3"});
      else if (model == "c5") slot = pick(c5, {"intercept", "C1", "C2", "C3", "C4"});
      else if (model == "a") slot = pick(a, {"intercept", "C1", "C2", "C3", "C4", "C5"});
      else if (model == "y") slot = pick(y, {"intercept", "A", "C1", "C2", "C3", "C4", "C5", "A:C1", "A:C2"});
      if (slot) return *slot;
    }
    throw ValidationError("unknown DGP coefficient '" + std::string(name) + "'");
  }

  double at(std::string_view name) const { return const_cast<DgpCoefficients&>(*this).at(name); }

  static std::vector<std::string> names() {
    std::vector<std::string> out{"c1.p", "c2.mean", "c2.sd"};
    for (const char* t : {"intercept", "C1", "C2"}) out.push_back(std::string("c3.") + t);
    for (const char* t : {"intercept", "C1", "C2", "C3"}) out.push_back(std::string("c4.") + t);
    for (const char* t : {"intercept", "C1", "C2", "C3", "C4"}) out.push_back(std::string("c5.") + t);
    out.emplace_back("c5.sd");
    for (const char* t : {"intercept", "C1", "C2", "C3", "C4", "C5"}) out.push_back(std::string("a.") + t);
    for (const char* t : {"intercept", "A", "C1", "C2", "C3", "C4", "C5", "A:C1", "A:C2"}) {
      out.push_back(std::string("y.") + t);
    }
    return out;
  }

  bool operator==(const DgpCoefficients&) const = default;
};

enum class ConfoundingLabel { weak, strong, custom };

inline std::string_view confounding_label_name(ConfoundingLabel label) {
  switch (label) {
    case ConfoundingLabel::weak: return "weak";
    case ConfoundingLabel::strong: return "strong";
    case ConfoundingLabel::custom: return "custom";
  }
  return "custom";
}

inline ConfoundingLabel parse_confounding_label(std::string_view text) {
  if (text == "weak") return ConfoundingLabel::weak;
  if (text == "strong") return ConfoundingLabel::strong;
  if (text == "custom") return ConfoundingLabel::custom;
  throw ValidationError("confounding must be weak, strong or custom; got '" + std::string(text) + "'");
}

struct ScenarioConfig {
  std::string name = "custom";
  ConfoundingLabel confounding = ConfoundingLabel::custom;
  DgpCoefficients coefficients;
  double sigma = 1.0;
  std::size_t n = 1000;
  std::size_t replicates = 1;
  std::uint64_t master_seed = 0;

  /// sigma = 0 (deterministic outcome) is accepted for custom scenarios only.
  void validate() const {
    const bool sigma_ok = confounding == ConfoundingLabel::custom ? sigma >= 0.0 : sigma > 0.0;
    if (!sigma_ok || !std::isfinite(sigma)) {
      throw ValidationError("scenario '" + name + "': sigma must be positive");
    }
    if (n < 50) throw ValidationError("scenario '" + name + "': n must be at least 50");
    if (replicates < 1) throw ValidationError("scenario '" + name + "': replicates must be at least 1");
    if (!(coefficients.c1_p >= 0.0 && coefficients.c1_p <= 1.0)) {
      throw ValidationError("scenario '" + name + "': c1.p must be a probability");
    }
    if (!(coefficients.c2_sd >= 0.0) || !(coefficients.c5_sd >= 0.0)) {
      throw ValidationError("scenario '" + name + "': standard deviations must be nonnegative");
    }
    for (const auto& key : DgpCoefficients::names()) {
      if (!std::isfinite(coefficients.at(key))) {
        throw ValidationError("scenario '" + name + "': coefficient " + key + " is not finite");
      }
    }
  }
};

inline const std::vector<std::string>& dgp_confounder_names() {
  static const std::vector<std::string> names{"C1", "C2", "C3", "C4", "C5"};
  return names;
}

namespace detail {

struct ConfounderDraw {
  std::array<double, 5> c{};
};

inline ConfounderDraw draw_confounders(const DgpCoefficients& k, RngStream& rng) {
  ConfounderDraw d;
  auto& c = d.c;
  c[0] = rng.bernoulli(k.c1_p) ? 1.0 : 0.0;
  c[1] = rng.normal(k.c2_mean, k.c2_sd);
  c[2] = rng.bernoulli(expit(k.c3[0] + k.c3[1] * c[0] + k.c3[2] * c[1])) ? 1.0 : 0.0;
  c[3] = rng.bernoulli(expit(k.c4[0] + k.c4[1] * c[0] + k.c4[2] * c[1] + k.c4[3] * c[2])) ? 1.0 : 0.0;
  c[4] = rng.normal(k.c5[0] + k.c5[1] * c[0] + k.c5[2] * c[1] + k.c5[3] * c[2] + k.c5[4] * c[3], k.c5_sd);
  return d;
}

inline double exposure_logit(const DgpCoefficients& k, const std::array<double, 5>& c) {
  double eta = k.a[0];
  for (std::size_t j = 0; j < 5; ++j) eta += k.a[j + 1] * c[j];
  return eta;
}

inline double log_outcome_mean(const DgpCoefficients& k, double a, const std::array<double, 5>& c) {
  double mu = k.y[0] + k.y[1] * a;
  for (std::size_t j = 0; j < 5; ++j) mu += k.y[j + 2] * c[j];
  return mu + k.y[7] * a * c[0] + k.y[8] * a * c[1];
}

}  // namespace detail

/// One dataset of cfg.n records, each drawn in the order C1..C5, A, Y.
inline Dataset generate_dataset(const ScenarioConfig& cfg, RngStream rng) {
  cfg.validate();
  const std::size_t n = cfg.n;
  const auto& k = cfg.coefficients;
  Dataset data;
  data.confounder_names = dgp_confounder_names();
  data.outcome.resize(n);
  data.exposure.resize(n);
  data.confounders.resize(static_cast<Eigen::Index>(n), 5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto draw = detail::draw_confounders(k, rng);
    const double a = rng.bernoulli(expit(detail::exposure_logit(k, draw.c))) ? 1.0 : 0.0;
    const double log_y = rng.normal(detail::log_outcome_mean(k, a, draw.c), cfg.sigma);
    for (Eigen::Index j = 0; j < 5; ++j) data.confounders(static_cast<Eigen::Index>(i), j) = draw.c[j];
    data.exposure[i] = a;
    data.outcome[i] = std::exp(log_y);
  }
  return data;
}

struct TruthResult {
  double delta_true = 0.0;
  double m0_true = 0.0;
  double m1_true = 0.0;
  std::size_t oracle_n = 0;
  double mc_se = 0.0;
};

/// Causal difference in medians from simulated potential outcomes: both Y^0
/// and Y^1 are drawn for every simulated confounder vector, with independent
/// noise. mc_se is the SD of the deltas of 10 contiguous folds over sqrt(10).
inline TruthResult true_delta_oracle(const ScenarioConfig& cfg, std::size_t oracle_n, RngStream rng) {
  cfg.validate();
  if (oracle_n < 100'000) throw ValidationError("true_delta_oracle: oracle_n must be at least 100000");
  const auto& k = cfg.coefficients;
  std::vector<double> log_y0(oracle_n);
  std::vector<double> log_y1(oracle_n);
  for (std::size_t i = 0; i < oracle_n; ++i) {
    const auto draw = detail::draw_confounders(k, rng);
    log_y0[i] = rng.normal(detail::log_outcome_mean(k, 0.0, draw.c), cfg.sigma);
    log_y1[i] = rng.normal(detail::log_outcome_mean(k, 1.0, draw.c), cfg.sigma);
  }

  constexpr std::size_t folds = 10;
  std::vector<double> fold_delta(folds);
  const std::size_t fold_size = oracle_n / folds;
  for (std::size_t f = 0; f < folds; ++f) {
    const auto first = static_cast<std::ptrdiff_t>(f * fold_size);
    const auto last = static_cast<std::ptrdiff_t>(f + 1 == folds ? oracle_n : (f + 1) * fold_size);
    std::vector<double> y0(log_y0.begin() + first, log_y0.begin() + last);
    std::vector<double> y1(log_y1.begin() + first, log_y1.begin() + last);
    fold_delta[f] = std::exp(type1_quantile_inplace(y1, 0.5)) - std::exp(type1_quantile_inplace(y0, 0.5));
  }

  TruthResult out;
  out.oracle_n = oracle_n;
  out.m0_true = std::exp(type1_quantile_inplace(log_y0, 0.5));
  out.m1_true = std::exp(type1_quantile_inplace(log_y1, 0.5));
  out.delta_true = out.m1_true - out.m0_true;
  out.mc_se = sample_sd(fold_delta) / std::sqrt(static_cast<double>(folds));
  return out;
}

// ---------------------------------------------------------------------------
// Confounding calibration

/// Large-sample medians of the observed arms and of the potential outcomes,
/// from the conditional log-normal CDFs averaged over simulated confounders.
struct PopulationMedians {
  double observed0 = 0.0;
  double observed1 = 0.0;
  double potential0 = 0.0;
  double potential1 = 0.0;

  double unadjusted_delta() const { return observed1 - observed0; }
  double causal_delta() const { return potential1 - potential0; }
  double unadjusted_relative_bias_pct() const {
    return 100.0 * (unadjusted_delta() - causal_delta()) / causal_delta();
  }
};

inline PopulationMedians population_medians(const ScenarioConfig& cfg, std::size_t num_confounders,
                                             RngStream rng) {
  cfg.validate();
  if (num_confounders < 1000) throw ValidationError("population_medians: need at least 1000 confounder draws");
  const auto& k = cfg.coefficients;
  std::vector<double> pi(num_confounders);
  std::vector<double> mu0(num_confounders);
  std::vector<double> mu1(num_confounders);
  double pi_sum = 0.0;
  for (std::size_t i = 0; i < num_confounders; ++i) {
    const auto draw = detail::draw_confounders(k, rng);
    pi[i] = expit(detail::exposure_logit(k, draw.c));
    mu0[i] = detail::log_outcome_mean(k, 0.0, draw.c);
    mu1[i] = detail::log_outcome_mean(k, 1.0, draw.c);
    pi_sum += pi[i];
  }
  const double total = static_cast<double>(num_confounders);
  const double sigma = cfg.sigma;

  auto cdf = [&](const std::vector<double>& mu, int weighting, double log_y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < num_confounders; ++i) {
      const double p = sigma > 0.0 ? normal_cdf((log_y - mu[i]) / sigma) : (log_y >= mu[i] ? 1.0 : 0.0);
      const double w = weighting == 1 ? pi[i] : weighting == 0 ? 1.0 - pi[i] : 1.0;
      acc += w * p;
    }
    const double norm = weighting == 1 ? pi_sum : weighting == 0 ? total - pi_sum : total;
    return acc / norm;
  };
  auto median = [&](const std::vector<double>& mu, int weighting) {
    const auto [lo_it, hi_it] = std::minmax_element(mu.begin(), mu.end());
    double lo = *lo_it - 10.0 * sigma - 1.0;
    double hi = *hi_it + 10.0 * sigma + 1.0;
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mu, weighting, mid) >= 0.5 ? hi : lo) = mid;
    }
    return std::exp(hi);
  };
  PopulationMedians out;
  out.observed0 = median(mu0, 0);
  out.observed1 = median(mu1, 1);
  out.potential0 = median(mu0, -1);
  out.potential1 = median(mu1, -1);
  return out;
}

inline const std::vector<std::string>& default_tunables() {
  static const std::vector<std::string> names{"y.C1", "y.C2", "y.C3", "y.C4", "y.C5"};
  return names;
}

struct CalibrationOptions {
  double factor_lower = 0.01;
  double factor_upper = 10.0;
  double tolerance_pct = 0.05;  // bisection stops once this close to the target
  std::size_t num_confounders = 200'000;
  std::uint64_t seed = 20240611;
  int max_iterations = 60;
};

struct CalibrationResult {
  ScenarioConfig config;
  double factor = 1.0;
  double achieved_pct = 0.0;
};

inline ScenarioConfig scale_coefficients(ScenarioConfig cfg, const std::vector<std::string>& names, double factor) {
  for (const auto& key : names) cfg.coefficients.at(key) *= factor;
  return cfg;
}

/// Scales the named outcome-model coefficients by a common factor, found by
/// bisection on a log scale, until the large-sample relative bias of the
/// unadjusted estimator is within tolerance of target_pct.
inline CalibrationResult calibrate_confounding(const ScenarioConfig& cfg, double target_pct,
                                               const std::vector<std::string>& tunables,
                                               ConfoundingLabel label, const CalibrationOptions& options = {}) {
  cfg.validate();
  if (tunables.empty()) throw ValidationError("calibrate_confounding: no tunable coefficients");
  bool all_zero = true;
  for (const auto& key : tunables) {
    if (key.rfind("y.", 0) != 0) {
      throw ValidationError("calibrate_confounding: '" + key + "' is not an outcome-model coefficient");
    }
    all_zero = all_zero && cfg.coefficients.at(key) == 0.0;
  }
  if (all_zero) return {cfg, 1.0, target_pct};
  if (!(options.factor_lower > 0.0 && options.factor_upper > options.factor_lower)) {
    throw ValidationError("calibrate_confounding: invalid factor bracket");
  }

  // Every evaluation reuses the same confounder draws, so the measured bias
  // is a smooth function of the factor.
  const RngStream stream(options.seed, DomainTag{0, 0, "calibration"});
  auto measure = [&](double factor) {
    return population_medians(scale_coefficients(cfg, tunables, factor), options.num_confounders, stream)
        .unadjusted_relative_bias_pct();
  };

  double lo = std::log(options.factor_lower);
  double hi = std::log(options.factor_upper);
  const double f_lo = measure(options.factor_lower) - target_pct;
  const double f_hi = measure(options.factor_upper) - target_pct;
  if (f_lo * f_hi > 0.0) {
    throw CalibrationError("calibrate_confounding: target " + std::to_string(target_pct) +
                           "% not bracketed by factors in [" + std::to_string(options.factor_lower) + ", " +
                           std::to_string(options.factor_upper) + "] (relative bias " +
                           std::to_string(f_lo + target_pct) + "% to " + std::to_string(f_hi + target_pct) + "%)");
  }
  const bool increasing = f_hi > f_lo;
  double mid = 0.5 * (lo + hi);
  double f_mid = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    mid = 0.5 * (lo + hi);
    f_mid = measure(std::exp(mid)) - target_pct;
    if (std::abs(f_mid) < options.tolerance_pct) break;
    ((f_mid > 0.0) == increasing ? hi : lo) = mid;
  }
  if (std::abs(f_mid) >= 1.0) {
    throw CalibrationError("calibrate_confounding: bisection ended " + std::to_string(f_mid) + " points from target");
  }
  CalibrationResult out;
  out.factor = std::exp(mid);
  out.config = scale_coefficients(cfg, tunables, out.factor);
  out.config.confounding = label;
  out.achieved_pct = f_mid + target_pct;
  return out;
}

// ---------------------------------------------------------------------------
// Presets

inline constexpr std::array<double, 4> preset_sigmas{0.75, 1.0, 1.25, 1.5};

// Factors applied to y.C1..y.C5 that calibrate_confounding returns for targets
// of 10% (weak) and 20% (strong) with default CalibrationOptions.
inline constexpr std::array<double, 4> weak_factors{0.066116902624148197, 0.066116902624148197,
                                                    0.066116902624148197, 0.066116902624148197};
inline constexpr std::array<double, 4> strong_factors{0.222667201035192, 0.222667201035192,
                                                      0.22417435945466335, 0.22417435945466335};

/// Scenario "<label>-<k>" (k = 1..4 for sigma 0.75, 1.0, 1.25, 1.5) with frozen
/// calibrated coefficients.
inline ScenarioConfig preset_scenario(ConfoundingLabel label, std::size_t k, std::size_t n = 1000,
                                      std::size_t replicates = 1000, std::uint64_t seed = 0) {
  if (label == ConfoundingLabel::custom || k < 1 || k > 4) {
    throw ValidationError("preset_scenario: presets are weak-1..4 and strong-1..4");
  }
  ScenarioConfig cfg;
  cfg.confounding = label;
  cfg.name = std::string(confounding_label_name(label)) + "-" + std::to_string(k);
  cfg.sigma = preset_sigmas[k - 1];
  cfg.n = n;
  cfg.replicates = replicates;
  cfg.master_seed = seed;
  const double factor = (label == ConfoundingLabel::weak ? weak_factors : strong_factors)[k - 1];
  cfg.coefficients = scale_coefficients(cfg, default_tunables(), factor).coefficients;
  return cfg;
}

}  // namespace medeff
