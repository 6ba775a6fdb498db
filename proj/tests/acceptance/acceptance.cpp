// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//
//   medeff_acceptance [--work DIR] [--fresh] [--only N[,N...]]
//
// The desk-scale study of criteria 2-5 is run through `medeff simulate` into
// DIR/study. A previous output there is reused when its manifest records the
// same plan and seed; --fresh forces a rerun.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "medeff/cli/commands.hpp"

#ifndef MEDEFF_CLI
#error "MEDEFF_CLI must name the medeff executable"
#endif

namespace fs = std::filesystem;
using namespace medeff;

namespace {

struct Verdict {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ------------------------------------------------------------------ truth

Verdict truth_oracle() {
  const auto start = std::chrono::steady_clock::now();
  constexpr double table[4] = {0.895, 1.220, 1.600, 1.910};
  constexpr std::uint64_t seeds[3] = {1, 2, 3};
  Verdict v;
  bool all_close = true;
  bool reproducible = true;
  for (std::size_t k = 0; k < 4; ++k) {
    ScenarioConfig cfg;
    cfg.sigma = preset_sigmas[k];
    std::vector<double> deltas;
    double max_se = 0.0;
    for (const auto seed : seeds) {
      const auto t = true_delta_oracle(cfg, 2'000'000, RngStream(seed, DomainTag{0, 0, "truth"}));
      deltas.push_back(t.delta_true);
      max_se = std::max(max_se, t.mc_se);
    }
    const auto [lo, hi] = std::minmax_element(deltas.begin(), deltas.end());
    bool close = true;
    bool same_side = true;
    for (const double d : deltas) {
      close = close && std::abs(d - table[k]) <= 0.05;
      same_side = same_side && ((d - table[k]) > 0) == ((deltas[0] - table[k]) > 0);
    }
    const bool mismatch = !close;
    // A mismatch is reproducible when every seed misses on the same side and
    // the seeds agree within their Monte Carlo error.
    const bool stable = *hi - *lo <= 4.0 * std::sqrt(2.0) * max_se;
    all_close = all_close && close;
    if (mismatch) reproducible = reproducible && same_side && stable;
    v.details.push_back(fmt("sigma %.2f: delta %.4f %.4f %.4f (mc_se <= %.4f), table %.3f, %s", cfg.sigma, deltas[0],
                            deltas[1], deltas[2], max_se, table[k],
                            close ? "within 0.05" : (same_side && stable ? "reproducible mismatch" : "unstable")));
  }
  const fs::path doc = fs::path(MEDEFF_SOURCE_DIR) / "docs" / "true-values.md";
  const bool documented = fs::exists(doc);
  v.details.push_back("finding documented in " + doc.string() + (documented ? "" : " (missing)"));
  v.pass = all_close || (reproducible && documented);
  v.summary = all_close ? "default coefficients agree with the published true values"
                        : (v.pass ? "mismatch reproducible across 3 seeds and documented"
                                  : "mismatch not reproducible or not documented");
  v.details.push_back(fmt("%.1f s", seconds_since(start)));
  return v;
}

// ------------------------------------------------------------------ study

const char* study_plan =
    "[study]\n"
    "seed = 20240611\n"
    "presets = weak-2\n"
    "n = 1000\n"
    "replicates = 500\n"
    "bootstrap = 200\n"
    "oracle_n = 2000000\n";

struct Study {
  std::map<std::string, MetricsRow> rows;  // by method label
  std::string note;
  bool ok = false;
};

Study run_desk_study(const fs::path& work, bool fresh) {
  Study s;
  const fs::path dir = work / "study";
  fs::create_directories(work);
  const fs::path plan_path = work / "study-plan.ini";
  std::ofstream(plan_path) << study_plan;

  auto expected = cli::load_plan(plan_path.string());
  for (auto& sc : expected.plan.scenarios) sc.master_seed = expected.plan.master_seed;
  const auto expected_json = io::to_json(expected.plan);

  bool reuse = false;
  if (!fresh && fs::exists(dir / "manifest.json") && fs::exists(dir / "metrics.csv")) {
    try {
      const auto m = io::read_json_file((dir / "manifest.json").string());
      reuse = m.at("plan") == expected_json && m.at("failures").empty();
    } catch (const std::exception&) {
      reuse = false;
    }
  }
  const auto start = std::chrono::steady_clock::now();
  if (reuse) {
    s.note = "reused " + dir.string() + " (manifest plan and seed match)";
  } else {
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    const int code = shell(std::string(MEDEFF_CLI) + " simulate --quiet --plan " + plan_path.string() + " --out " +
                           dir.string() + " --workers " + std::to_string(workers));
    if (code != 0) {
      s.note = "simulate exited with " + std::to_string(code);
      return s;
    }
    s.note = fmt("ran in %.0f s with %u workers", seconds_since(start), workers);
  }
  const auto table = io::read_csv_file((dir / "metrics.csv").string());
  for (const auto& row : table.rows) {
    auto num = [&](const char* col) { return std::stod(row[table.column(col)]); };
    MetricsRow m;
    m.method = parse_method(row[table.column("method")]);
    m.relative_bias_pct = num("relative_bias_pct");
    m.mcse_relative_bias_pct = num("mcse_relative_bias_pct");
    m.empirical_se = num("empirical_se");
    m.mcse_empirical_se = num("mcse_empirical_se");
    m.coverage_pct = num("coverage_pct");
    m.mcse_coverage_pct = num("mcse_coverage_pct");
    s.rows[std::string(method_label(m.method))] = m;
  }
  s.ok = s.rows.size() == 6;
  if (!s.ok) s.note += "; metrics.csv does not hold all six methods";
  return s;
}

std::string rb(const MetricsRow& m) {
  return fmt("%+.2f%% (MCSE %.2f)", m.relative_bias_pct, m.mcse_relative_bias_pct);
}

Verdict desk_bias(const Study& s) {
  Verdict v;
  if (!s.ok) {
    v.summary = s.note;
    return v;
  }
  v.pass = true;
  bool strict = true;
  auto judge = [&](const std::string& method, bool pass, bool pass_strict, const std::string& rule) {
    v.pass = v.pass && pass;
    strict = strict && pass_strict;
    v.details.push_back(fmt("%-13s relative bias %s, %s: %s%s", method.c_str(), rb(s.rows.at(method)).c_str(),
                            rule.c_str(), pass ? "ok" : "FAIL", pass && !pass_strict ? " (within 3 MCSE)" : ""));
  };
  for (const char* m : {"ipw", "weighted_qr", "gcomp_mc", "gcomp_approx"}) {
    const auto& r = s.rows.at(m);
    judge(m, std::abs(r.relative_bias_pct) - 3.0 * r.mcse_relative_bias_pct < 5.0, std::abs(r.relative_bias_pct) < 5.0,
          "|rb| < 5%");
  }
  const auto& q = s.rows.at("qr");
  judge("qr", q.relative_bias_pct + 3.0 * q.mcse_relative_bias_pct > 4.0, q.relative_bias_pct > 4.0, "rb > +4%");
  const auto& u = s.rows.at("unadjusted");
  judge("unadjusted",
        u.relative_bias_pct + 3.0 * u.mcse_relative_bias_pct >= 6.0 &&
            u.relative_bias_pct - 3.0 * u.mcse_relative_bias_pct <= 14.0,
        u.relative_bias_pct >= 6.0 && u.relative_bias_pct <= 14.0, "rb in [6%, 14%]");
  v.details.push_back(s.note);
  v.summary = v.pass ? (strict ? "all relative-bias bounds met" : "all bounds met within 3 Monte Carlo SEs")
                     : "relative-bias bound missed by more than 3 Monte Carlo SEs";
  return v;
}

Verdict gcomp_agreement(const Study& s) {
  Verdict v;
  if (!s.ok) {
    v.summary = s.note;
    return v;
  }
  const double gap = std::abs(s.rows.at("gcomp_mc").relative_bias_pct - s.rows.at("gcomp_approx").relative_bias_pct);
  v.pass = gap < 0.5;
  v.summary = fmt("|rb(gcomp_mc) - rb(gcomp_approx)| = %.3f points (bound 0.5)", gap);
  return v;
}

Verdict variance_ordering(const Study& s) {
  Verdict v;
  if (!s.ok) {
    v.summary = s.note;
    return v;
  }
  const auto& a = s.rows.at("gcomp_approx");
  const auto& i = s.rows.at("ipw");
  v.pass = a.empirical_se < i.empirical_se;
  v.summary = fmt("empirical SE gcomp_approx %.4f vs ipw %.4f", a.empirical_se, i.empirical_se);
  for (const auto& [label, m] : s.rows) v.details.push_back(fmt("%-13s empirical SE %.4f", label.c_str(), m.empirical_se));
  return v;
}

Verdict coverage(const Study& s) {
  Verdict v;
  if (!s.ok) {
    v.summary = s.note;
    return v;
  }
  v.pass = true;
  for (const char* m : {"ipw", "weighted_qr", "gcomp_mc", "gcomp_approx"}) {
    const auto& r = s.rows.at(m);
    const bool ok = r.coverage_pct >= 92.0 && r.coverage_pct <= 98.0;
    v.pass = v.pass && ok;
    v.details.push_back(fmt("%-13s coverage %.1f%% (MCSE %.1f): %s", m, r.coverage_pct, r.mcse_coverage_pct,
                            ok ? "ok" : "FAIL"));
  }
  v.summary = v.pass ? "all four coverages in [92%, 98%]" : "coverage outside [92%, 98%]";
  return v;
}

// ---------------------------------------------------------------- oracles

Verdict oracle_suites(const fs::path& work) {
  const std::string filters[][2] = {
      {MEDEFF_TEST_NUMERICS, "WeightedQuantile.MatchesScanOracleOnRandomInstances"},
      {MEDEFF_TEST_NUMERICS, "FitQuantileReg.MatchesEnumerationOnRandomSmallInstances"},
      {MEDEFF_TEST_NUMERICS, "FitLogistic.MatchesGridSearchOracle"},
      {MEDEFF_TEST_ESTIMATORS, "Reductions.*"},
  };
  const char* labels[] = {"weighted_quantile vs scan oracle, 1000 instances",
                          "fit_quantile_reg vs enumeration, 200 instances",
                          "fit_logistic vs grid search, 50 instances",
                          "intercept-only reductions, 100 datasets each"};
  Verdict v;
  v.pass = true;
  for (std::size_t k = 0; k < 4; ++k) {
    const fs::path log = work / ("oracle-" + std::to_string(k) + ".log");
    const int code = shell(filters[k][0] + std::string(" --gtest_filter=") + filters[k][1] + " > " + log.string() +
                           " 2>&1");
    const std::string out = slurp(log);
    const bool ran = out.find("[  PASSED  ]") != std::string::npos;
    const bool ok = code == 0 && ran;
    v.pass = v.pass && ok;
    v.details.push_back(std::string(labels[k]) + ": " + (ok ? "ok" : "FAIL, see " + log.string()));
  }
  v.summary = v.pass ? "zero oracle failures" : "oracle failures";
  return v;
}

// ------------------------------------------------------------ determinism

const char* replay_plan =
    "[study]\n"
    "seed = 7\n"
    "bootstrap = 25\n"
    "oracle_n = 200000\n"
    "n = 400\n"
    "replicates = 6\n"
    "presets = weak-1, strong-1\n";

Verdict determinism(const fs::path& work) {
  Verdict v;
  const fs::path dir = work / "replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path plan = dir / "plan.ini";
  std::ofstream(plan) << replay_plan;
  const std::string cli = std::string(MEDEFF_CLI) + " simulate --quiet ";
  const int first = shell(cli + "--plan " + plan.string() + " --out " + (dir / "first").string() + " --workers 1");
  const fs::path manifest = dir / "first" / "manifest.json";
  const int w1 = shell(cli + "--plan " + manifest.string() + " --out " + (dir / "w1").string() + " --workers 1");
  const int w8 = shell(cli + "--plan " + manifest.string() + " --out " + (dir / "w8").string() + " --workers 8");
  if (first != 0 || w1 != 0 || w8 != 0) {
    v.summary = fmt("simulate exit codes %d, %d, %d", first, w1, w8);
    return v;
  }
  v.pass = true;
  for (const char* f : {"replicates.csv", "metrics.csv"}) {
    const std::string a = slurp(dir / "first" / f);
    for (const char* run : {"w1", "w8"}) {
      const bool same = !a.empty() && a == slurp(dir / run / f);
      v.pass = v.pass && same;
      v.details.push_back(fmt("%s replayed at %s: %s", f, run, same ? "byte-identical" : "DIFFERS"));
    }
  }
  v.details.push_back("plan: weak-1 and strong-1, all six methods, 6 replicates, n 400, 25 bootstrap replicates");
  v.summary = v.pass ? "manifest replay byte-identical at 1 and 8 workers" : "replay differs";
  return v;
}

// ------------------------------------------------------------ calibration

Verdict calibration() {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  v.pass = true;
  std::uint64_t fresh = 900;
  for (const double target : {10.0, 20.0}) {
    const auto label = target == 10.0 ? ConfoundingLabel::weak : ConfoundingLabel::strong;
    for (const double sigma : preset_sigmas) {
      ScenarioConfig cfg;
      cfg.sigma = sigma;
      const auto r = calibrate_confounding(cfg, target, default_tunables(), label);
      const auto remeasured =
          population_medians(r.config, 1'000'000, RngStream(++fresh, DomainTag{0, 0, "remeasure"}));
      const double pct = remeasured.unadjusted_relative_bias_pct();
      const bool ok = std::abs(pct - target) <= 1.0;
      v.pass = v.pass && ok;

      // Direct look with one large simulated dataset, for information.
      const ScenarioConfig big = [&] {
        ScenarioConfig c = r.config;
        c.n = 500'000;
        return c;
      }();
      const Dataset d = generate_dataset(big, RngStream(fresh, DomainTag{0, 0, "generation"}));
      const auto truth = true_delta_oracle(big, 2'000'000, RngStream(fresh, DomainTag{0, 0, "truth"}));
      const double sample_pct = 100.0 * (estimate_unadjusted(d).delta - truth.delta_true) / truth.delta_true;
      v.details.push_back(fmt("target %2.0f%%, sigma %.2f: factor %.5f, re-measured %.2f%% with fresh draws: %s "
                              "[single n=500000 dataset, for information: %.2f%%]",
                              target, sigma, r.factor, pct, ok ? "ok" : "FAIL", sample_pct));
    }
  }
  v.summary = v.pass ? "all 8 calibrations within 1 point on re-measurement" : "calibration missed by more than 1 point";
  v.details.push_back(fmt("%.1f s", seconds_since(start)));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medeff acceptance suite"};
  std::string work = MEDEFF_ACCEPTANCE_WORK;
  bool fresh = false;
  std::vector<int> only;
  app.add_option("--work", work, "Working directory");
  app.add_flag("--fresh", fresh, "Rerun the desk-scale study even if a matching output exists");
  app.add_option("--only", only, "Criteria to run")->delimiter(',')->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> wanted = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8} : std::set<int>(only.begin(), only.end());

  const fs::path dir(work);
  fs::create_directories(dir);
  bool all = true;
  auto report = [&](int k, const char* title, const Verdict& v) {
    all = all && v.pass;
    std::cout << "criterion " << k << " (" << title << "): " << (v.pass ? "PASS" : "FAIL") << ": " << v.summary
              << "\n";
    for (const auto& d : v.details) std::cout << "    " << d << "\n";
    std::cout << std::flush;
  };
  auto guarded = [&](auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      Verdict v;
      v.summary = std::string("error: ") + e.what();
      return v;
    }
  };

  if (wanted.count(1)) report(1, "truth oracle", guarded(truth_oracle));
  if (wanted.count(2) || wanted.count(3) || wanted.count(4) || wanted.count(5)) {
    Study study;
    try {
      study = run_desk_study(dir, fresh);
    } catch (const std::exception& e) {
      study.note = std::string("error: ") + e.what();
    }
    if (wanted.count(2)) report(2, "desk-scale relative bias", desk_bias(study));
    if (wanted.count(3)) report(3, "g-comp agreement", gcomp_agreement(study));
    if (wanted.count(4)) report(4, "variance ordering", variance_ordering(study));
    if (wanted.count(5)) report(5, "coverage", coverage(study));
  }
  if (wanted.count(6)) report(6, "oracle equivalence", guarded([&] { return oracle_suites(dir); }));
  if (wanted.count(7)) report(7, "determinism", guarded([&] { return determinism(dir); }));
  if (wanted.count(8)) report(8, "calibration", guarded(calibration));
  return all ? 0 : 1;
}
