#include <gtest/gtest.h>

#include "support.hpp"

using namespace qosc;
using namespace qosc::testing;

namespace {

// Members hold pointers into each other, so a Case is built in place.
struct Case {
  RepositoryDocument doc;
  AbstractionHierarchy h;
  DependencyGraph dg;
  CompositionPlan plan;

  Case(double rt, double rel)
      : doc(worked_example(rt, rel)),
        h(build_hierarchy(doc, response_time_weights())),
        dg(build_dependency_graph(doc.ontology, h.space(1), doc.queries[0])),
        plan(optimal_single_qos(dg, h.specs, "response_time")) {}
};

}  // namespace

TEST(PartialRefine, AbstractPlanUsesFastestRepresentatives) {
  const Case c(200, 0.8);
  EXPECT_EQ(c.h.level1.size(), 2u);
  EXPECT_EQ(c.plan.qos.at("response_time"), 60.0);
  EXPECT_NEAR(c.plan.qos.at("reliability"), 0.56, 1e-12);
}

TEST(PartialRefine, ReweightsTowardsTheViolatedParameter) {
  const Case c(200, 0.8);
  RefinementSession s;
  const auto refined = partial_refine(c.plan, c.doc.queries[0], c.h, c.dg, s);
  ASSERT_TRUE(refined.has_value());
  EXPECT_EQ(s.violated, std::vector<std::string>{"reliability"});
  EXPECT_EQ(s.bounds.aggregate.at("response_time").min, 60.0);
  EXPECT_EQ(s.bounds.aggregate.at("response_time").max, 160.0);
  EXPECT_NEAR(s.bounds.aggregate.at("reliability").max, 0.95 * 0.99, 1e-12);
  EXPECT_NEAR(s.normalized.at("reliability"), 0.24 / (0.95 * 0.99 - 0.56), 1e-9);
  EXPECT_EQ(s.normalized.at("response_time"), 0.0);
  EXPECT_EQ(s.recomputed_weights.at("reliability"), 1.0);
  EXPECT_EQ(s.recomputed_weights.at("response_time"), 0.0);
  std::set<std::string> chosen;
  for (const auto& [_, to] : s.rebindings) chosen.insert(to);
  EXPECT_EQ(chosen, (std::set<std::string>{"S_2", "S_5"}));
  EXPECT_EQ(refined->qos.at("response_time"), 160.0);
  EXPECT_NEAR(refined->qos.at("reliability"), 0.9405, 1e-12);
  EXPECT_EQ(s.outcome, RefinementOutcome::satisfied);
}

TEST(PartialRefine, DeclinesWhenNoPoolCanMeetTheBound) {
  const Case c(50, 0.8);
  RefinementSession s;
  EXPECT_FALSE(partial_refine(c.plan, c.doc.queries[0], c.h, c.dg, s).has_value());
  EXPECT_EQ(s.outcome, RefinementOutcome::declined);
}

TEST(PartialRefine, SatisfiedPlanIsAPreconditionError) {
  const Case c(1000, 0.1);
  RefinementSession s;
  try {
    partial_refine(c.plan, c.doc.queries[0], c.h, c.dg, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(CompleteRefine, StepsDownOneLevel) {
  const Case c(200, 0.8);
  EXPECT_EQ(&complete_refine(c.h, 1), &c.h.space(0));
  EXPECT_THROW(complete_refine(c.h, 0), Error);
}

TEST(Reconstruct, DefaultsFollowRepresentatives) {
  const Case c(200, 0.8);
  const auto concrete = reconstruct(c.plan, c.h, c.dg);
  EXPECT_EQ(concrete.level, 0);
  EXPECT_EQ(concrete.nodes, (std::set<std::string>{"S_1", "S_4"}));
  const auto dg0 = build_dependency_graph(c.doc.ontology, c.h.space(0), c.doc.queries[0]);
  const auto v = validate_plan(concrete, dg0, c.doc.queries[0], c.h.specs);
  ASSERT_EQ(v.size(), 1u);  // reliability
}

TEST(Compose, WorkedExampleRefinesPartially) {
  const Case c(200, 0.8);
  const auto r = compose_with_refinement(c.doc, c.h, c.doc.queries[0], 1);
  ASSERT_TRUE(r.plan.has_value());
  EXPECT_EQ(r.level_used, 1);
  EXPECT_EQ(r.plan->nodes, (std::set<std::string>{"S_2", "S_5"}));
}

TEST(Compose, DeclineFallsBackToCompleteRefinement) {
  const Case c(50, 0.8);
  const auto r = compose_with_refinement(c.doc, c.h, c.doc.queries[0], 1);
  EXPECT_FALSE(r.plan.has_value());
  std::vector<std::string> actions;
  for (const auto& s : r.trace) actions.push_back(s.action);
  EXPECT_EQ(actions, (std::vector<std::string>{"solve", "partial-refine", "complete-refine", "solve"}));
  EXPECT_EQ(r.trace[1].outcome, "declined");
}

TEST(Compose, FixtureAnswerIsValidAtLevelZero) {
  const auto doc = running_example();
  const auto h = build_hierarchy(doc);
  const auto& q = doc.queries[0];
  const auto dg0 = build_dependency_graph(doc.ontology, h.space(0), q);
  for (int level = 0; level < 4; ++level) {
    const auto r = compose_with_refinement(doc, h, q, level);
    ASSERT_TRUE(r.plan.has_value()) << "level " << level;
    EXPECT_TRUE(validate_plan(*r.plan, dg0, q, h.specs).empty());
  }
}

TEST(Compose, ReturnedPlansAreAlwaysValid) {
  int answered = 0;
  for (std::uint64_t seed = 1; seed < 80; ++seed) {
    const auto maybe = try_generate(small_config(seed, 6 + static_cast<int>(seed % 10)));
    if (!maybe) continue;
    const auto& doc = *maybe;
    const auto h = build_hierarchy(doc);
    const auto& q = doc.queries[0];
    const auto dg0 = build_dependency_graph(doc.ontology, h.space(0), q);
    const auto r = compose_with_refinement(doc, h, q);
    if (!r.plan) continue;
    EXPECT_TRUE(validate_plan(*r.plan, dg0, q, h.specs).empty()) << "seed " << seed;
    ++answered;
  }
  EXPECT_GT(answered, 10);
}

TEST(Level2Candidates, FixtureNodesHaveNonEmptyPools) {
  const auto doc = running_example();
  const auto h = build_hierarchy(doc);
  const auto dg = build_dependency_graph(doc.ontology, h.space(2), doc.queries[0]);
  const auto plan = optimal_single_qos(dg, h.specs, "response_time");
  for (const auto& n : plan.nodes) EXPECT_FALSE(level2_candidates(n, plan, h, dg).empty()) << n;
}
