#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "medeff/io/config.hpp"
#include "medeff/io/csv.hpp"
#include "medeff/io/json.hpp"
#include "test_support.hpp"

namespace medeff {
namespace {

using testing::random_dataset;
using testing::test_stream;

io::CsvTable table_of(const std::string& text) {
  std::istringstream in(text);
  return io::parse_csv(in);
}

// ------------------------------------------------------------------------ CSV

TEST(Csv, DoublesRoundTripExactly) {
  auto rng = test_stream(501);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.uniform_index(200)) - 100);
    EXPECT_EQ(std::strtod(io::format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(2.0), "2");
}

TEST(Csv, QuotedFieldsAndLineEndings) {
  const auto f = io::split_csv_line(R"(a,"b,c","say ""hi""",)");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "b,c");
  EXPECT_EQ(f[2], R"(say "hi")");
  EXPECT_EQ(f[3], "");
  const auto t = table_of("\xEF\xBB\xBFy,a\r\n1,0\r\n\r\n2,1\r\n");
  EXPECT_EQ(t.header[0], "y");
  EXPECT_EQ(t.rows.size(), 2u);
}

TEST(Csv, MalformedInputIsAValidationError) {
  EXPECT_THROW(table_of(""), ValidationError);
  EXPECT_THROW(table_of("y,a\n1,0,3\n"), ValidationError);
  EXPECT_THROW(table_of("y,a\n1,0\n").column("x"), ValidationError);
}

TEST(Csv, DatasetMappingDropsIncompleteRowsOnly) {
  const auto t = table_of("id,y,a,c\n1,2.5,0,1\n2,,1,0\n3,4,1,\n4,7,1,1\n5,3,0,0\n");
  const auto load = io::dataset_from_table(t, {"y", "a", {"c"}});
  EXPECT_EQ(load.rows_read, 5u);
  EXPECT_EQ(load.rows_dropped, 2u);
  ASSERT_EQ(load.data.size(), 3u);
  EXPECT_EQ(load.data.outcome, (std::vector<double>{2.5, 7, 3}));
  EXPECT_EQ(load.data.confounders(1, 0), 1.0);
  // unmapped columns may be anything
  const auto other = table_of("note,y,a\nx,1,0\n,2,1\n");
  EXPECT_EQ(io::dataset_from_table(other, {"y", "a", {}}).data.size(), 2u);
}

TEST(Csv, DatasetMappingErrors) {
  EXPECT_THROW(io::dataset_from_table(table_of("y,a\n1,2\n"), {"y", "a", {}}), ValidationError);
  EXPECT_THROW(io::dataset_from_table(table_of("y,a\n1,x\n"), {"y", "a", {}}), ValidationError);
  EXPECT_THROW(io::dataset_from_table(table_of("y,a\n1,nan\n"), {"y", "a", {}}), ValidationError);
  EXPECT_THROW(io::dataset_from_table(table_of("y,a\n,1\n"), {"y", "a", {}}), ValidationError);
  EXPECT_THROW(io::dataset_from_table(table_of("y,a\n1,1\n"), {"y", "b", {}}), ValidationError);
}

TEST(Csv, DatasetRoundTrip) {
  auto rng = test_stream(502);
  const Dataset d = random_dataset(rng, 57);
  std::ostringstream out;
  io::write_dataset(out, d);
  const auto back = io::dataset_from_table(table_of(out.str()), io::roles_of(d)).data;
  EXPECT_EQ(back.outcome, d.outcome);
  EXPECT_EQ(back.exposure, d.exposure);
  EXPECT_TRUE(back.confounders == d.confounders);
  EXPECT_EQ(back.confounder_names, d.confounder_names);
}

TEST(Csv, ReplicatesRoundTripAndHeaders) {
  std::vector<ReplicateRecord> recs(2);
  recs[0] = {"weak", "weak-1", Method::gcomp_mc, 0, 1.0 / 3.0, 0.25, -0.1, 0.9};
  recs[1] = {"strong", "s,2", Method::multivariable_qr, 7, -2e-300, 1e300, -1, 1};
  recs[1].scenario = "s2";
  std::ostringstream out;
  io::write_replicates(out, recs);
  std::istringstream in(out.str());
  const auto back = io::read_replicates(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].delta_hat, 1.0 / 3.0);
  EXPECT_EQ(back[1].method, Method::multivariable_qr);
  EXPECT_EQ(back[1].replicate, 7u);
  EXPECT_EQ(back[1].delta_hat, -2e-300);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "confounding,scenario,method,replicate,delta_hat,se_hat,ci_lower,ci_upper");

  EXPECT_EQ(io::metrics_header().size(), 15u);
  std::ostringstream m;
  io::write_metrics(m, {MetricsRow{}});
  const auto t = table_of(m.str());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].size(), 15u);
  EXPECT_EQ(t.header[4], "relative_bias_pct");
}

// --------------------------------------------------------------------- config

TEST(Config, PlanWithPresetsAndCustomScenario) {
  const auto file = io::plan_from_ini(io::parse_ini(R"(
; desk-scale study
[study]
seed = 12
methods = unadjusted, ipw
bootstrap = 50
n = 300
replicates = 20
presets = weak-2, strong-4

[scenario:mine]
sigma = 0.5
replicates = 5
y.A = 0.0
)"));
  EXPECT_TRUE(file.seed_given);
  const StudyPlan& p = file.plan;
  EXPECT_EQ(p.master_seed, 12u);
  EXPECT_EQ(p.methods, (std::vector<Method>{Method::unadjusted, Method::ipw}));
  EXPECT_EQ(p.bootstrap_replicates, 50u);
  ASSERT_EQ(p.scenarios.size(), 3u);
  EXPECT_EQ(p.scenarios[0].name, "weak-2");
  EXPECT_EQ(p.scenarios[0].sigma, preset_sigmas[1]);
  EXPECT_EQ(p.scenarios[0].n, 300u);
  EXPECT_EQ(p.scenarios[1].coefficients, preset_scenario(ConfoundingLabel::strong, 4).coefficients);
  EXPECT_EQ(p.scenarios[2].name, "mine");
  EXPECT_EQ(p.scenarios[2].replicates, 5u);
  EXPECT_EQ(p.scenarios[2].coefficients.at("y.A"), 0.0);
  EXPECT_EQ(p.settings.num_draws, 1000u);
  EXPECT_EQ(p.settings.outcome_spec.interactions.size(), 2u);
  p.validate();
}

TEST(Config, DefaultWeakGridHasTwentyFourCells) {
  const auto file = io::plan_from_ini(io::parse_ini("[study]\npresets = weak-1, weak-2, weak-3, weak-4\n"));
  EXPECT_FALSE(file.seed_given);
  EXPECT_EQ(file.plan.scenarios.size() * file.plan.methods.size(), 24u);
  EXPECT_EQ(file.plan.scenarios[0].replicates, 1000u);
}

TEST(Config, RejectsUnknownAndMalformedEntries) {
  const char* bad[] = {
      "[study]\nbogus = 1\n",
      "[study]\nbootstrap = -3\n",
      "[study]\nbootstrap = 2.5\n",
      "[study]\nlevel = high\n",
      "[study]\nmethods = unadjusted, magic\n",
      "[study]\npresets = weak-9\n",
      "[study]\npresets = medium-1\n",
      "[elsewhere]\nx = 1\n",
      "[scenario:x]\ny.Q = 1\n",
      "[scenario:x]\ny.A = one\n",
      "[scenario:x]\ncolour = red\n",
      "[scenario:]\nsigma = 1\n",
      "[models]\noutcome = C1, C9\n",
      "[grid]\nstep = 0\n",
      "[study\n",
  };
  for (const char* text : bad) {
    EXPECT_THROW(io::plan_from_ini(io::parse_ini(text)).plan.validate(), ValidationError) << text;
  }
}

TEST(Config, EstimateConfig) {
  const auto c = io::estimate_config_from_ini(io::parse_ini(R"(
[data]
outcome = los
exposure = treated
confounders = age, sex

[estimate]
methods = qr, gcomp_approx
bootstrap = 300
seed = 5

[models]
interactions = sex

[grid]
lower = 0.5
upper = 40
step = 0.05
)"));
  EXPECT_EQ(c.roles.outcome, "los");
  EXPECT_EQ(c.roles.confounders, (std::vector<std::string>{"age", "sex"}));
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::multivariable_qr, Method::gcomp_approx}));
  EXPECT_EQ(c.bootstrap, 300u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.level, 0.95);
  EXPECT_EQ(c.settings.outcome_spec.main_effects, (std::vector<std::string>{"age", "sex"}));
  EXPECT_EQ(c.settings.outcome_spec.interactions, (std::vector<std::string>{"sex"}));
  ASSERT_TRUE(c.settings.grid);
  EXPECT_EQ(c.settings.grid->upper, 40.0);
  EXPECT_THROW(io::estimate_config_from_ini(io::parse_ini("[estimate]\nbootstrap = 3\n")), ValidationError);
  EXPECT_THROW(io::estimate_config_from_ini(io::parse_ini("[data]\noutcome = y\n")), ValidationError);
  EXPECT_THROW(io::estimate_config_from_ini(io::parse_ini("[data]\noutcome = y\nexposure = a\n[study]\nseed = 1\n")),
               ValidationError);
}

TEST(Config, ScenarioFile) {
  const auto s = io::scenario_from_ini(io::parse_ini("[scenario]\npreset = strong-3\nseed = 4\n"));
  EXPECT_EQ(s.name, "strong-3");
  EXPECT_EQ(s.master_seed, 4u);
  EXPECT_EQ(s.sigma, preset_sigmas[2]);
  EXPECT_THROW(io::scenario_from_ini(io::parse_ini("[study]\n")), ValidationError);
  EXPECT_THROW(io::scenario_from_ini(io::parse_ini("")), ValidationError);
}

// ----------------------------------------------------------------------- JSON

TEST(Json, PlanRoundTrip) {
  auto file = io::plan_from_ini(io::parse_ini(
      "[study]\nseed = 3\npresets = strong-1\n[scenario:z]\nsigma = 0.9\nc2.mean = 30.5\n[grid]\nupper = 12\n"));
  file.plan.scenarios[1].coefficients.at("y.C5") = 1.0 / 3.0;
  const io::json j = io::to_json(file.plan);
  const StudyPlan back = io::plan_from_json(j);
  EXPECT_EQ(io::to_json(back).dump(), j.dump());
  EXPECT_EQ(back.scenarios[1].coefficients.at("y.C5"), 1.0 / 3.0);
  EXPECT_EQ(back.scenarios[1].coefficients, file.plan.scenarios[1].coefficients);
  EXPECT_EQ(back.settings.grid->upper, 12.0);
  EXPECT_EQ(back.master_seed, 3u);
}

}  // namespace
}  // namespace medeff
