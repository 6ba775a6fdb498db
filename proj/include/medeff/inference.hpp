#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "medeff/data.hpp"
#include "medeff/error.hpp"
#include "medeff/estimators.hpp"
#include "medeff/numerics/quantiles.hpp"
#include "medeff/rng.hpp"

namespace medeff {

struct BootstrapSummary {
  double point = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t num_replicates = 0;
  std::size_t num_failed = 0;
};

struct BootstrapOptions {
  std::size_t num_replicates = 1000;
  double level = 0.95;
  unsigned workers = 1;
  // Largest tolerated fraction of replicates whose estimator raised an error.
  double max_failed_fraction = 0.05;
};

template <class F>
concept DeltaEstimator = requires(const F& f, const Dataset& d, const RngStream& r) {
  { f(d, r) } -> std::convertible_to<EffectEstimate>;
};

namespace detail {

// Replicate b resamples with substream(b).substream("resample") and hands
// substream(b).substream("estimator") to the estimator.
template <DeltaEstimator F>
std::optional<double> bootstrap_replicate(const Dataset& data, const F& estimator, const RngStream& rng,
                                          std::size_t b) {
  const RngStream base = rng.substream(static_cast<std::uint64_t>(b));
  RngStream resample = base.substream("resample");
  const std::size_t n = data.size();
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = static_cast<std::size_t>(resample.uniform_index(n));
  try {
    return estimator(data.subset(rows), base.substream("estimator")).delta;
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Percentile bootstrap around a given full-data point estimate.
template <DeltaEstimator F>
BootstrapSummary bootstrap_estimate(const Dataset& data, const F& estimator, double point,
                                    const BootstrapOptions& options, const RngStream& rng) {
  if (options.num_replicates < 2) throw ValidationError("bootstrap_estimate: need at least 2 replicates");
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw ValidationError("bootstrap_estimate: level must lie in (0, 1)");
  }
  const std::size_t reps = options.num_replicates;
  std::vector<std::optional<double>> deltas(reps);

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(reps)));
  if (workers == 1) {
    for (std::size_t b = 0; b < reps; ++b) deltas[b] = detail::bootstrap_replicate(data, estimator, rng, b);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::size_t b = next++; b < reps && !failed; b = next++) {
            deltas[b] = detail::bootstrap_replicate(data, estimator, rng, b);
          }
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<double> ok;
  ok.reserve(reps);
  for (const auto& d : deltas) {
    if (d) ok.push_back(*d);
  }
  BootstrapSummary out;
  out.point = point;
  out.num_replicates = reps;
  out.num_failed = reps - ok.size();
  if (static_cast<double>(out.num_failed) > options.max_failed_fraction * static_cast<double>(reps) ||
      ok.size() < 2) {
    throw BootstrapInstabilityError("bootstrap_estimate: " + std::to_string(out.num_failed) + " of " +
                                    std::to_string(reps) + " replicates failed");
  }
  out.se = sample_sd(ok);
  const double alpha = 1.0 - options.level;
  out.ci_lower = type7_quantile(ok, alpha / 2.0);
  out.ci_upper = type7_quantile(ok, 1.0 - alpha / 2.0);
  return out;
}

/// Full-data estimate (errors propagate) followed by the percentile bootstrap.
/// The full-data estimator receives rng.substream("point").
template <DeltaEstimator F>
BootstrapSummary bootstrap_estimate(const Dataset& data, const F& estimator, const BootstrapOptions& options,
                                    const RngStream& rng) {
  const double point = estimator(data, rng.substream("point")).delta;
  return bootstrap_estimate(data, estimator, point, options, rng);
}

}  // namespace medeff
