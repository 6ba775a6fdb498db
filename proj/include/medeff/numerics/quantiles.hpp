#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "medeff/error.hpp"

namespace medeff {

namespace detail {

inline void check_probability(double p, const char* who) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ValidationError(std::string(who) + ": probability must lie in (0, 1], got " +
                          std::to_string(p));
  }
}

}  // namespace detail

/// Weighted quantile of a step-function CDF: after a stable ascending sort,
/// the smallest value whose cumulative (normalized) weight reaches p.
///
/// The comparison carries a 1e-12 relative slack so that exactly tied
/// cumulative weights (equal weights, p * n integral) resolve to the lower
/// order statistic as in the type-1 empirical quantile.
inline double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                                double p) {
  if (values.size() != weights.size()) {
    throw ValidationError("weighted_quantile: values and weights differ in length");
  }
  if (values.empty()) throw InvalidWeightsError("weighted_quantile: empty input");
  detail::check_probability(p, "weighted_quantile");

  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ValidationError("weighted_quantile: non-finite value");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw InvalidWeightsError("weighted_quantile: weights must be finite and nonnegative");
    }
    total += weights[i];
  }
  if (!(total > 0.0)) throw InvalidWeightsError("weighted_quantile: weights sum to zero");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  const double target = p * total * (1.0 - 1e-12);
  double cumulative = 0.0;
  for (const std::size_t i : order) {
    cumulative += weights[i];
    if (cumulative >= target && weights[i] > 0.0) return values[i];
  }
  // Only reachable through rounding at p = 1.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (weights[*it] > 0.0) return values[*it];
  }
  return values[order.back()];
}

/// The k-th smallest value (0-based). Large inputs are first narrowed to a
/// bracket taken from a strided subsample, so only the bracketed values are
/// partially sorted; the result is the same order statistic as nth_element.
/// May reorder `values`.
inline double select_order_statistic(std::span<double> values, std::size_t k) {
  const std::size_t n = values.size();
  if (k >= n) throw ValidationError("select_order_statistic: rank out of range");
  constexpr std::size_t direct_limit = 65536;
  if (n > direct_limit) {
    constexpr std::size_t m = 8192;
    const std::size_t stride = n / m;
    std::vector<double> sample(m);
    for (std::size_t j = 0; j < m; ++j) sample[j] = values[j * stride];
    std::sort(sample.begin(), sample.end());
    const double centre = static_cast<double>(k) / static_cast<double>(n) * static_cast<double>(m);
    const double spread = 6.0 * std::sqrt(static_cast<double>(m)) * 0.5;
    const auto lo_idx = static_cast<std::ptrdiff_t>(std::floor(centre - spread));
    const auto hi_idx = static_cast<std::ptrdiff_t>(std::ceil(centre + spread));
    if (lo_idx >= 0 && hi_idx < static_cast<std::ptrdiff_t>(m)) {
      const double lo = sample[static_cast<std::size_t>(lo_idx)];
      const double hi = sample[static_cast<std::size_t>(hi_idx)];
      // Branch-free scan; the band buffer is sized generously and an overflow
      // falls back to the full selection.
      const std::size_t capacity =
          static_cast<std::size_t>(4.0 * spread / static_cast<double>(m) * static_cast<double>(n)) + 16;
      std::vector<double> band(capacity + 1);
      std::size_t below = 0;
      std::size_t count = 0;
      for (const double v : values) {
        below += static_cast<std::size_t>(v < lo);
        band[count] = v;
        count += static_cast<std::size_t>((v >= lo) & (v <= hi) & (count < capacity));
      }
      const bool overflow = count >= capacity;
      band.resize(count);
      if (!overflow && k >= below && k - below < band.size()) {
        auto nth = band.begin() + static_cast<std::ptrdiff_t>(k - below);
        std::nth_element(band.begin(), nth, band.end());
        return *nth;
      }
    }
  }
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

/// Type-1 empirical quantile: the ceil(n p)-th order statistic. May reorder `values`.
inline double type1_quantile_inplace(std::span<double> values, double p) {
  if (values.empty()) throw EstimationError("type1_quantile: empty sample");
  detail::check_probability(p, "type1_quantile");
  const auto n = static_cast<double>(values.size());
  auto k = static_cast<std::size_t>(std::ceil(n * p * (1.0 - 1e-12)));
  k = std::clamp<std::size_t>(k, 1, values.size());
  return select_order_statistic(values, k - 1);
}

inline double type1_quantile(std::vector<double> values, double p) {
  return type1_quantile_inplace(values, p);
}

/// Median with the smallest-value rule (lower median for even n).
inline double lower_median(std::vector<double> values) { return type1_quantile_inplace(values, 0.5); }

/// Linear-interpolation (type-7) quantile of an unsorted sample.
inline double type7_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw EstimationError("type7_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("type7_quantile: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

inline double sample_mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation with the n - 1 divisor.
inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double ss = 0.0;
  for (const double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace medeff
