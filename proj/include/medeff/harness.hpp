#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/estimators.hpp"
#include "medeff/inference.hpp"
#include "medeff/metrics.hpp"
#include "medeff/rng.hpp"
#include "medeff/simgen.hpp"

namespace medeff {

struct StudyPlan {
  std::vector<ScenarioConfig> scenarios;
  std::vector<Method> methods;
  std::size_t bootstrap_replicates = 200;
  double level = 0.95;
  std::size_t oracle_n = 2'000'000;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  EstimatorSettings settings;

  /// Model specifications of the simulation study: main-effects QR and
  /// propensity models, log outcome model with A:C1 and A:C2, 1000 draws,
  /// grid [0.01, 8] step 0.01.
  static EstimatorSettings simulation_settings() {
    const auto& c = dgp_confounder_names();
    EstimatorSettings s;
    s.qr_spec = ModelSpec::quantile(c);
    s.ps_spec = ModelSpec::propensity(c);
    s.outcome_spec = ModelSpec::log_outcome(c, {"C1", "C2"});
    s.num_draws = 1000;
    // The grid bounds are fixed for every scenario; only the 0.5 crossing is
    // required of it.
    s.grid = DensityGrid{0.01, 8.0, 0.01, 0.5};
    return s;
  }

  void validate() const {
    if (scenarios.empty()) throw ValidationError("study plan has no scenarios");
    if (methods.empty()) throw ValidationError("study plan has no methods");
    if (bootstrap_replicates < 2) throw ValidationError("study plan needs at least 2 bootstrap replicates");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("study plan level must lie in (0, 1)");
    if (oracle_n < 100'000) throw ValidationError("study plan oracle_n must be at least 100000");
    if (workers < 1) throw ValidationError("study plan needs at least one worker");
    std::vector<std::string> names;
    for (const auto& s : scenarios) {
      s.validate();
      if (std::find(names.begin(), names.end(), s.name) != names.end()) {
        throw ValidationError("duplicate scenario name '" + s.name + "'");
      }
      names.push_back(s.name);
    }
    for (std::size_t i = 0; i < methods.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (methods[i] == methods[j]) throw ValidationError("duplicate method in study plan");
      }
    }
    // Specs may only name DGP confounders.
    Dataset probe;
    probe.confounder_names = dgp_confounder_names();
    probe.confounders.resize(0, 5);
    settings.qr_spec.validate(probe);
    settings.ps_spec.validate(probe);
    settings.outcome_spec.validate(probe);
    if (settings.grid) settings.grid->validate();
  }
};

struct ScenarioFailure {
  std::string scenario;
  std::string message;
};

struct StudyResult {
  std::vector<ReplicateRecord> records;  // sorted by (scenario, method, replicate)
  std::vector<MetricsRow> metrics;       // sorted by (scenario, method)
  std::map<std::string, TruthResult> truths;
  std::vector<ScenarioFailure> failures;
  double wall_seconds = 0.0;
};

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

namespace detail {

template <class Task>
void run_pool(std::size_t count, unsigned workers, const Task& task) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < count && !failed; i = next++) task(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct ReplicateOutcome {
  std::vector<ReplicateRecord> records;  // one per method, empty on failure
  std::optional<std::string> error;
};

}  // namespace detail

/// Runs every (scenario, replicate, method) cell. Replicate r of scenario s
/// draws its data from (s, r, "generation"), g-computation draws from
/// (s, r, "gcomp-draws") and resamples from (s, r, "bootstrap"); the truth for
/// scenario s comes from (s, 0, "truth"). Output does not depend on workers.
inline StudyResult run_study(const StudyPlan& plan, const ProgressCallback& progress = {}) {
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t num_scenarios = plan.scenarios.size();

  std::vector<std::optional<TruthResult>> truths(num_scenarios);
  std::vector<std::optional<std::string>> truth_errors(num_scenarios);
  detail::run_pool(num_scenarios, plan.workers, [&](std::size_t s) {
    try {
      truths[s] = true_delta_oracle(plan.scenarios[s], plan.oracle_n,
                                    RngStream(plan.master_seed, DomainTag{s, 0, "truth"}));
    } catch (const Error& e) {
      truth_errors[s] = std::string("truth oracle failed: ") + e.what();
    }
  });

  struct Cell {
    std::size_t scenario;
    std::size_t replicate;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < num_scenarios; ++s) {
    if (!truths[s]) continue;
    for (std::size_t r = 0; r < plan.scenarios[s].replicates; ++r) cells.push_back({s, r});
  }

  std::vector<detail::ReplicateOutcome> outcomes(cells.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  BootstrapOptions boot;
  boot.num_replicates = plan.bootstrap_replicates;
  boot.level = plan.level;
  boot.workers = 1;

  detail::run_pool(cells.size(), plan.workers, [&](std::size_t k) {
    const auto [s, r] = cells[k];
    const ScenarioConfig& cfg = plan.scenarios[s];
    auto& out = outcomes[k];
    std::optional<Method> current;
    try {
      const Dataset data = generate_dataset(cfg, RngStream(plan.master_seed, DomainTag{s, r, "generation"}));
      const RngStream draws(plan.master_seed, DomainTag{s, r, "gcomp-draws"});
      const RngStream resampling(plan.master_seed, DomainTag{s, r, "bootstrap"});
      for (const Method m : plan.methods) {
        current = m;
        const MethodEstimator estimator{m, &plan.settings};
        const auto idx = static_cast<std::uint64_t>(method_index(m));
        const EffectEstimate point = estimator(data, draws.substream(idx));
        const BootstrapSummary summary =
            bootstrap_estimate(data, estimator, point.delta, boot, resampling.substream(idx));
        ReplicateRecord rec;
        rec.confounding = std::string(confounding_label_name(cfg.confounding));
        rec.scenario = cfg.name;
        rec.method = m;
        rec.replicate = r;
        rec.delta_hat = point.delta;
        rec.se_hat = summary.se;
        rec.ci_lower = summary.ci_lower;
        rec.ci_upper = summary.ci_upper;
        out.records.push_back(std::move(rec));
      }
    } catch (const Error& e) {
      out.records.clear();
      out.error = current ? std::string(method_label(*current)) + ": " + e.what() : std::string(e.what());
    }
    const std::size_t finished = ++done;
    if (progress) {
      const std::lock_guard lock(progress_mutex);
      progress(finished, cells.size());
    }
  });

  StudyResult result;
  std::vector<std::size_t> failed(num_scenarios, 0);
  std::vector<std::optional<std::string>> first_error(num_scenarios);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (outcomes[k].error) {
      const std::size_t s = cells[k].scenario;
      ++failed[s];
      if (!first_error[s]) {
        first_error[s] = "replicate " + std::to_string(cells[k].replicate) + ": " + *outcomes[k].error;
      }
    }
  }

  for (std::size_t s = 0; s < num_scenarios; ++s) {
    const ScenarioConfig& cfg = plan.scenarios[s];
    if (!truths[s]) {
      result.failures.push_back({cfg.name, *truth_errors[s]});
      continue;
    }
    if (static_cast<double>(failed[s]) > 0.05 * static_cast<double>(cfg.replicates)) {
      result.failures.push_back({cfg.name, std::to_string(failed[s]) + " of " + std::to_string(cfg.replicates) +
                                               " replicates failed; first: " + *first_error[s]});
      continue;
    }
    result.truths[cfg.name] = *truths[s];
    std::vector<std::vector<ReplicateRecord>> by_method(plan.methods.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].scenario != s) continue;
      for (std::size_t m = 0; m < outcomes[k].records.size(); ++m) by_method[m].push_back(outcomes[k].records[m]);
    }
    std::vector<std::size_t> order(plan.methods.size());
    for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return method_index(plan.methods[a]) < method_index(plan.methods[b]);
    });
    for (const std::size_t m : order) {
      auto& recs = by_method[m];
      std::sort(recs.begin(), recs.end(),
                [](const ReplicateRecord& a, const ReplicateRecord& b) { return a.replicate < b.replicate; });
      if (recs.size() >= 2) {
        try {
          result.metrics.push_back(compute_metrics(recs, *truths[s]));
        } catch (const Error& e) {
          result.failures.push_back({cfg.name, std::string(method_label(plan.methods[m])) + ": " + e.what()});
        }
      }
      result.records.insert(result.records.end(), recs.begin(), recs.end());
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace medeff
