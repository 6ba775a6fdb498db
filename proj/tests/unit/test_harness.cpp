#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "medeff/harness.hpp"
#include "medeff/io/csv.hpp"

namespace medeff {
namespace {

ScenarioConfig small_scenario(const std::string& name, std::size_t replicates) {
  ScenarioConfig cfg = preset_scenario(ConfoundingLabel::weak, 2, 200);
  cfg.name = name;
  cfg.replicates = replicates;
  return cfg;
}

StudyPlan small_plan() {
  StudyPlan plan;
  plan.scenarios = {small_scenario("a", 4), small_scenario("b", 3)};
  plan.scenarios[1].sigma = 1.5;
  plan.methods = {Method::gcomp_approx, Method::unadjusted, Method::ipw};
  plan.bootstrap_replicates = 20;
  plan.oracle_n = 100'000;
  plan.master_seed = 77;
  plan.settings = StudyPlan::simulation_settings();
  return plan;
}

std::string csv_of(const StudyResult& r) {
  std::ostringstream out;
  io::write_replicates(out, r.records);
  io::write_metrics(out, r.metrics);
  return out.str();
}

TEST(Harness, OneRecordPerCellAndOneRowPerScenarioMethod) {
  StudyPlan plan = small_plan();
  plan.scenarios = {small_scenario("only", 2)};
  plan.methods = {Method::unadjusted};
  const auto r = run_study(plan);
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.records.size(), 2u);
  ASSERT_EQ(r.metrics.size(), 1u);
  EXPECT_EQ(r.metrics[0].num_replicates, 2u);
  EXPECT_EQ(r.records[0].replicate, 0u);
  EXPECT_EQ(r.records[1].replicate, 1u);
  EXPECT_EQ(r.records[0].confounding, "weak");
  EXPECT_EQ(r.truths.at("only").oracle_n, 100'000u);
}

TEST(Harness, RowsAreOrderedByScenarioMethodReplicate) {
  const auto r = run_study(small_plan());
  ASSERT_EQ(r.records.size(), (4u + 3u) * 3u);
  ASSERT_EQ(r.metrics.size(), 6u);
  // methods appear in canonical order whatever the plan order
  EXPECT_EQ(r.metrics[0].method, Method::unadjusted);
  EXPECT_EQ(r.metrics[1].method, Method::ipw);
  EXPECT_EQ(r.metrics[2].method, Method::gcomp_approx);
  EXPECT_EQ(r.metrics[3].scenario, "b");
  EXPECT_EQ(r.records[4].method, Method::ipw);
  EXPECT_EQ(r.records[4].replicate, 0u);
}

TEST(Harness, OutputIndependentOfWorkerCount) {
  StudyPlan plan = small_plan();
  const std::string one = csv_of(run_study(plan));
  plan.workers = 8;
  EXPECT_EQ(csv_of(run_study(plan)), one);
  plan.workers = 3;
  EXPECT_EQ(csv_of(run_study(plan)), one);
}

TEST(Harness, SeedChangesResultsAndRecordsMatchStandaloneEstimates) {
  StudyPlan plan = small_plan();
  const auto a = run_study(plan);
  plan.master_seed = 78;
  const auto b = run_study(plan);
  EXPECT_NE(a.records[0].delta_hat, b.records[0].delta_hat);

  // Replicate 1 of scenario 0 rebuilt from its streams.
  const Dataset d = generate_dataset(small_plan().scenarios[0], RngStream(77, DomainTag{0, 1, "generation"}));
  EXPECT_EQ(a.records[1].delta_hat, estimate_unadjusted(d).delta);
}

TEST(Harness, FailingScenarioIsIsolated) {
  StudyPlan plan = small_plan();
  // nobody exposed: every replicate has an empty arm
  plan.scenarios[1].coefficients.at("a.intercept") = -60.0;
  const auto r = run_study(plan);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].scenario, "b");
  EXPECT_NE(r.failures[0].message.find("3 of 3"), std::string::npos);
  EXPECT_EQ(r.metrics.size(), 3u);
  EXPECT_EQ(r.records.size(), 12u);
  EXPECT_EQ(r.truths.count("b"), 0u);
}

TEST(Harness, PlanValidation) {
  StudyPlan plan = small_plan();
  plan.methods = {Method::ipw, Method::ipw};
  EXPECT_THROW(run_study(plan), ValidationError);
  plan = small_plan();
  plan.scenarios[1].name = "a";
  EXPECT_THROW(plan.validate(), ValidationError);
  plan = small_plan();
  plan.oracle_n = 10;
  EXPECT_THROW(plan.validate(), ValidationError);
  plan = small_plan();
  plan.settings.outcome_spec = ModelSpec::log_outcome({"C1", "C7"}, {});
  EXPECT_THROW(plan.validate(), ValidationError);
  plan = small_plan();
  plan.scenarios.clear();
  EXPECT_THROW(plan.validate(), ValidationError);
}

}  // namespace
}  // namespace medeff
