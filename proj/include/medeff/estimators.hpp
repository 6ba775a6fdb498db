#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medeff/data.hpp"
#include "medeff/error.hpp"
#include "medeff/numerics/distributions.hpp"
#include "medeff/numerics/linear.hpp"
#include "medeff/numerics/quantile_regression.hpp"
#include "medeff/numerics/quantiles.hpp"
#include "medeff/rng.hpp"

namespace medeff {

enum class Method { unadjusted, multivariable_qr, ipw, weighted_qr, gcomp_mc, gcomp_approx };

inline constexpr Method all_methods[] = {Method::unadjusted, Method::multivariable_qr, Method::ipw,
                                         Method::weighted_qr, Method::gcomp_mc, Method::gcomp_approx};

inline std::string_view method_label(Method m) {
  switch (m) {
    case Method::unadjusted: return "unadjusted";
    case Method::multivariable_qr: return "qr";
    case Method::ipw: return "ipw";
    case Method::weighted_qr: return "weighted_qr";
    case Method::gcomp_mc: return "gcomp_mc";
    case Method::gcomp_approx: return "gcomp_approx";
  }
  return "unknown";
}

inline Method parse_method(std::string_view label) {
  for (const Method m : all_methods) {
    if (method_label(m) == label) return m;
  }
  throw ValidationError("unknown method '" + std::string(label) +
                        "' (expected unadjusted, qr, ipw, weighted_qr, gcomp_mc or gcomp_approx)");
}

inline std::size_t method_index(Method m) { return static_cast<std::size_t>(m); }

/// Estimated median potential outcomes and their difference. m0 and m1 are
/// absent for multivariable QR, whose delta is a conditional coefficient.
struct EffectEstimate {
  Method method = Method::unadjusted;
  std::optional<double> m0;
  std::optional<double> m1;
  double delta = 0.0;
  std::map<std::string, double> diagnostics;
};

namespace detail {

inline EffectEstimate make_estimate(Method method, double m0, double m1) {
  EffectEstimate est;
  est.method = method;
  est.m0 = m0;
  est.m1 = m1;
  est.delta = m1 - m0;
  if (!std::isfinite(est.delta)) throw EstimationError(std::string(method_label(method)) + ": non-finite estimate");
  return est;
}

inline void require_kind(const ModelSpec& spec, ModelKind kind, const char* who) {
  if (spec.kind != kind) throw ValidationError(std::string(who) + ": model spec has the wrong kind");
}

inline void require_arms(const Dataset& data, const char* who) {
  if (data.arm_size(0) == 0 || data.arm_size(1) == 0) {
    throw EstimationError(std::string(who) + ": an exposure arm is empty");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Unadjusted and multivariable QR

inline EffectEstimate estimate_unadjusted(const Dataset& data) {
  detail::require_arms(data, "estimate_unadjusted");
  return detail::make_estimate(Method::unadjusted, lower_median(data.arm_outcomes(0)),
                               lower_median(data.arm_outcomes(1)));
}

inline EffectEstimate estimate_multivariable_qr(const Dataset& data, const ModelSpec& spec) {
  detail::require_kind(spec, ModelKind::quantile, "estimate_multivariable_qr");
  if (!spec.interactions.empty()) {
    throw ValidationError("estimate_multivariable_qr: the constant-effect model takes main effects only");
  }
  detail::require_arms(data, "estimate_multivariable_qr");
  const DesignMatrix design = build_design(data, spec);
  const FitResult fit = fit_quantile_reg(design, data.outcome, 0.5);
  EffectEstimate est;
  est.method = Method::multivariable_qr;
  est.delta = fit.coefficients(1);
  est.diagnostics["check_loss"] = fit.objective;
  est.diagnostics["iterations"] = fit.iterations;
  return est;
}

// ---------------------------------------------------------------------------
// Inverse probability weighting

struct IpWeights {
  std::vector<double> arm0;  // zero outside arm 0, sums to 1
  std::vector<double> arm1;  // zero outside arm 1, sums to 1
  std::map<std::string, double> diagnostics;
};

struct IpwOptions {
  // Fitted propensities within this distance of 0 or 1 are positivity violations.
  double positivity_tolerance = 1e-12;
  // Propensities truncated to [trim, 1 - trim]; 0 disables truncation.
  double trim = 0.0;
};

/// Normalized inverse probability weights from a main-effects logistic
/// propensity model; each arm's weights sum to one.
inline IpWeights normalized_ip_weights(const Dataset& data, const ModelSpec& ps_spec,
                                       const IpwOptions& options = {}) {
  detail::require_kind(ps_spec, ModelKind::propensity, "normalized_ip_weights");
  detail::require_arms(data, "normalized_ip_weights");
  if (!(options.trim >= 0.0 && options.trim < 0.5)) {
    throw ValidationError("normalized_ip_weights: trim must lie in [0, 0.5)");
  }
  const DesignMatrix design = build_design(data, ps_spec);
  const FitResult fit = fit_logistic(design, data.exposure);
  const Vector eta = design.values() * fit.coefficients;

  const std::size_t n = data.size();
  IpWeights w;
  w.arm0.assign(n, 0.0);
  w.arm1.assign(n, 0.0);
  double pi_min = 1.0;
  double pi_max = 0.0;
  double sum0 = 0.0;
  double sum1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pi = expit(eta(static_cast<Eigen::Index>(i)));
    if (pi < options.positivity_tolerance || 1.0 - pi < options.positivity_tolerance) {
      throw PositivityError("normalized_ip_weights: fitted propensity is numerically " +
                                std::string(pi < 0.5 ? "0" : "1") + " at record " + std::to_string(i),
                            i);
    }
    if (options.trim > 0.0) pi = std::clamp(pi, options.trim, 1.0 - options.trim);
    pi_min = std::min(pi_min, pi);
    pi_max = std::max(pi_max, pi);
    if (data.exposure[i] == 1.0) {
      w.arm1[i] = 1.0 / pi;
      sum1 += w.arm1[i];
    } else {
      w.arm0[i] = 1.0 / (1.0 - pi);
      sum0 += w.arm0[i];
    }
  }
  double max_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w.arm0[i] /= sum0;
    w.arm1[i] /= sum1;
    max_w = std::max({max_w, w.arm0[i], w.arm1[i]});
  }
  w.diagnostics["max_weight"] = max_w;
  w.diagnostics["pi_min"] = pi_min;
  w.diagnostics["pi_max"] = pi_max;
  return w;
}

inline EffectEstimate estimate_ipw(const Dataset& data, const ModelSpec& ps_spec, const IpwOptions& options = {}) {
  const IpWeights w = normalized_ip_weights(data, ps_spec, options);
  const double m0 = weighted_quantile(data.outcome, w.arm0, 0.5);
  const double m1 = weighted_quantile(data.outcome, w.arm1, 0.5);
  EffectEstimate est = detail::make_estimate(Method::ipw, m0, m1);
  est.diagnostics = w.diagnostics;
  return est;
}

inline EffectEstimate estimate_weighted_qr(const Dataset& data, const ModelSpec& ps_spec,
                                           const IpwOptions& options = {}) {
  const IpWeights w = normalized_ip_weights(data, ps_spec, options);
  std::vector<double> weights(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) weights[i] = w.arm0[i] + w.arm1[i];
  const DesignMatrix design = build_design(data, ModelSpec::quantile({}));
  const FitResult fit = fit_quantile_reg(design, data.outcome, 0.5, weights);
  EffectEstimate est = detail::make_estimate(Method::weighted_qr, fit.coefficients(0),
                                             fit.coefficients(0) + fit.coefficients(1));
  est.diagnostics = w.diagnostics;
  est.diagnostics["check_loss"] = fit.objective;
  return est;
}

// ---------------------------------------------------------------------------
// G-computation with a log-normal outcome model

struct LogNormalOutcomeFit {
  Vector mu0;  // log-scale means with A forced to 0
  Vector mu1;  // log-scale means with A forced to 1
  double sigma = 0.0;
};

inline LogNormalOutcomeFit fit_lognormal_outcome(const Dataset& data, const ModelSpec& out_spec, const char* who) {
  detail::require_kind(out_spec, ModelKind::outcome, who);
  if (out_spec.transform != OutcomeTransform::log) {
    throw ValidationError(std::string(who) + ": the outcome model must use the log transform");
  }
  detail::require_arms(data, who);
  data.require_positive_outcome(who);

  std::vector<double> log_y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) log_y[i] = std::log(data.outcome[i]);
  const DesignMatrix design = build_design(data, out_spec);
  const FitResult fit = fit_ols(design, log_y);

  LogNormalOutcomeFit out;
  out.mu0 = build_design(data, out_spec, 0.0).values() * fit.coefficients;
  out.mu1 = build_design(data, out_spec, 1.0).values() * fit.coefficients;
  out.sigma = fit.residual_scale.value_or(0.0);
  if (!(out.sigma > 0.0)) {
    throw EstimationError(std::string(who) + ": residual scale is zero; the log-normal model is degenerate");
  }
  return out;
}

namespace detail {

/// Mean of Phi((x - mu_i) / sigma) over records.
inline double mixture_cdf(const Vector& mu, double sigma, double x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) s += normal_cdf((x - mu(i)) / sigma);
  return s / static_cast<double>(mu.size());
}

/// x with mixture_cdf(x) close to p, to within tol on the x scale.
inline double mixture_quantile(const Vector& mu, double sigma, double p, double tol) {
  double lo = mu.minCoeff() - 9.0 * sigma;
  double hi = mu.maxCoeff() + 9.0 * sigma;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (mixture_cdf(mu, sigma, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// k-th smallest (0-based) of the n * num_draws values mu_i + sigma Z drawn
/// record by record from stream. The draws are counted against a band around
/// the mixture quantile so only the band is stored; if the order statistic
/// misses the band the draws are regenerated in full.
inline double pooled_normal_order_statistic(const Vector& mu, double sigma, std::size_t num_draws,
                                            std::size_t k, const RngStream& stream) {
  const auto n = static_cast<std::size_t>(mu.size());
  const std::size_t total = n * num_draws;
  const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(total);
  const double half_width = 8.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(total)) + 1e-9;
  const double tol = 1e-3 * sigma;
  const double lo = mixture_quantile(mu, sigma, std::max(p - half_width, 1e-300), tol) - tol;
  const double hi = mixture_quantile(mu, sigma, std::min(p + half_width, 1.0), tol) + tol;

  const std::size_t capacity = static_cast<std::size_t>(4.0 * half_width * static_cast<double>(total)) + 1024;
  std::vector<double> band(capacity + 1);
  std::vector<double> chunk(num_draws);
  std::size_t below = 0;
  std::size_t m = 0;
  RngStream s = stream;
  for (std::size_t i = 0; i < n && m < capacity; ++i) {
    const double mean = mu(static_cast<Eigen::Index>(i));
    for (double& x : chunk) x = mean + sigma * s.normal();
    for (const double x : chunk) {
      below += static_cast<std::size_t>(x < lo);
      band[std::min(m, capacity)] = x;
      m += static_cast<std::size_t>(x >= lo) & static_cast<std::size_t>(x < hi);
    }
  }
  if (m < capacity && below <= k && k < below + m) {
    return select_order_statistic(std::span<double>(band.data(), m), k - below);
  }

  std::vector<double> pooled(total);
  s = stream;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = mu(static_cast<Eigen::Index>(i));
    for (std::size_t r = 0; r < num_draws; ++r) pooled[j++] = mean + sigma * s.normal();
  }
  return select_order_statistic(pooled, k);
}

}  // namespace detail

/// Monte Carlo g-computation: num_draws log-normal draws per record and arm,
/// pooled, median taken over the pooled draws.
inline EffectEstimate estimate_gcomp_mc(const Dataset& data, const ModelSpec& out_spec, std::size_t num_draws,
                                        const RngStream& rng) {
  if (num_draws == 0) throw ValidationError("estimate_gcomp_mc: num_draws must be positive");
  const LogNormalOutcomeFit fit = fit_lognormal_outcome(data, out_spec, "estimate_gcomp_mc");
  const std::size_t total = data.size() * num_draws;
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(static_cast<double>(total) * 0.5 * (1.0 - 1e-12))), 1, total);

  // The median is taken on the log scale; exp is monotone so the selected
  // order statistic is the same draw.
  const double m0 = std::exp(
      detail::pooled_normal_order_statistic(fit.mu0, fit.sigma, num_draws, k - 1, rng.substream("arm0")));
  const double m1 = std::exp(
      detail::pooled_normal_order_statistic(fit.mu1, fit.sigma, num_draws, k - 1, rng.substream("arm1")));
  EffectEstimate est = detail::make_estimate(Method::gcomp_mc, m0, m1);
  est.diagnostics["sigma"] = fit.sigma;
  est.diagnostics["num_draws"] = static_cast<double>(num_draws);
  return est;
}

/// Candidate outcome values lower, lower + step, ... <= upper.
struct DensityGrid {
  double lower = 0.01;
  double upper = 8.0;
  double step = 0.01;
  // Minimum mass the averaged density must place on the grid, per arm.
  double min_captured_mass = 0.98;

  std::size_t size() const {
    return static_cast<std::size_t>(std::floor((upper - lower) / step + 1e-9)) + 1;
  }

  double point(std::size_t k) const { return lower + static_cast<double>(k) * step; }

  void validate() const {
    if (!(lower > 0.0) || !(step > 0.0) || !(upper > lower) || !std::isfinite(upper)) {
      throw ValidationError("DensityGrid: need 0 < lower < upper and step > 0");
    }
    if (size() > 50'000'000) throw ValidationError("DensityGrid: too many grid points");
    if (!(min_captured_mass >= 0.0 && min_captured_mass <= 1.0)) {
      throw ValidationError("DensityGrid: min_captured_mass must lie in [0, 1]");
    }
  }

  /// [step, 2 max(Y)] with step max(Y)/2000.
  static DensityGrid for_outcome(std::span<const double> y) {
    if (y.empty()) throw ValidationError("DensityGrid: empty outcome");
    const double ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > 0.0)) throw DomainError("DensityGrid: outcome maximum must be positive");
    const double step = ymax / 2000.0;
    return {step, 2.0 * ymax, step, 0.98};
  }
};

/// Density-averaging g-computation on a grid of candidate outcome values.
inline EffectEstimate estimate_gcomp_approx(const Dataset& data, const ModelSpec& out_spec,
                                            const DensityGrid& grid) {
  grid.validate();
  const LogNormalOutcomeFit fit = fit_lognormal_outcome(data, out_spec, "estimate_gcomp_approx");
  const std::size_t n = data.size();
  const std::size_t points = grid.size();
  const double inv_two_var = 1.0 / (2.0 * fit.sigma * fit.sigma);
  const double norm = 1.0 / (fit.sigma * std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(n));

  auto arm_median = [&](const Vector& mu, double& captured) {
    double cumulative = 0.0;
    std::optional<double> median;
    for (std::size_t k = 0; k < points; ++k) {
      const double y = grid.point(k);
      const double ly = std::log(y);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = ly - mu(static_cast<Eigen::Index>(i));
        s += std::exp(-z * z * inv_two_var);
      }
      cumulative += grid.step * s * norm / y;
      if (!median && cumulative >= 0.5) median = y;
    }
    captured = cumulative;
    return median;
  };

  double mass0 = 0.0;
  double mass1 = 0.0;
  const auto m0 = arm_median(fit.mu0, mass0);
  const auto m1 = arm_median(fit.mu1, mass1);
  const double min_mass = std::min(mass0, mass1);
  if (!m0 || !m1 || min_mass < grid.min_captured_mass) {
    throw InsufficientGridError("estimate_gcomp_approx: grid captures mass " + std::to_string(mass0) +
                                " (arm 0) and " + std::to_string(mass1) +
                                " (arm 1); widen or refine the grid");
  }
  EffectEstimate est = detail::make_estimate(Method::gcomp_approx, *m0, *m1);
  est.diagnostics["captured_mass_arm0"] = mass0;
  est.diagnostics["captured_mass_arm1"] = mass1;
  est.diagnostics["sigma"] = fit.sigma;
  return est;
}

// ---------------------------------------------------------------------------
// Uniform dispatch

/// Model specifications and tuning shared by all methods.
struct EstimatorSettings {
  ModelSpec qr_spec = ModelSpec::quantile({});
  ModelSpec ps_spec = ModelSpec::propensity({});
  ModelSpec outcome_spec = ModelSpec::log_outcome({}, {});
  std::size_t num_draws = 1000;
  std::optional<DensityGrid> grid;  // data-driven default when absent
  IpwOptions ipw;
};

inline EffectEstimate run_method(Method method, const Dataset& data, const EstimatorSettings& settings,
                                 const RngStream& rng) {
  switch (method) {
    case Method::unadjusted: return estimate_unadjusted(data);
    case Method::multivariable_qr: return estimate_multivariable_qr(data, settings.qr_spec);
    case Method::ipw: return estimate_ipw(data, settings.ps_spec, settings.ipw);
    case Method::weighted_qr: return estimate_weighted_qr(data, settings.ps_spec, settings.ipw);
    case Method::gcomp_mc: return estimate_gcomp_mc(data, settings.outcome_spec, settings.num_draws, rng);
    case Method::gcomp_approx:
      return estimate_gcomp_approx(data, settings.outcome_spec,
                                   settings.grid ? *settings.grid : DensityGrid::for_outcome(data.outcome));
  }
  throw ValidationError("run_method: unknown method");
}

/// Callable estimator bound to a method and its settings.
struct MethodEstimator {
  Method method;
  const EstimatorSettings* settings;

  EffectEstimate operator()(const Dataset& data, const RngStream& rng) const {
    return run_method(method, data, *settings, rng);
  }
};

}  // namespace medeff
