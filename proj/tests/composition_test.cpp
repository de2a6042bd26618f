#include <gtest/gtest.h>

#include "support.hpp"

using namespace qosc;
using namespace qosc::testing;

namespace {

CompositionPlan two_step(double rt1, double rel1, double rt2, double rel2) {
  CompositionPlan p;
  p.nodes = {"x", "y"};
  p.edges = {{kQueryNode, "x", "A"}, {"x", "y", "B"}, {"y", kQueryNode, "C"}};
  p.node_qos = {{"x", {{"response_time", rt1}, {"reliability", rel1}}},
                {"y", {{"response_time", rt2}, {"reliability", rel2}}}};
  return p;
}

}  // namespace

TEST(DependencyGraph, FixtureLayers) {
  const auto doc = running_example();
  const auto space = level0_space(doc.ontology, doc.services);
  const auto dg = build_dependency_graph(doc.ontology, space, doc.queries[0]);
  ASSERT_EQ(dg.depth(), 2u);
  EXPECT_EQ(dg.layers[0].size(), 12u);
  EXPECT_EQ(dg.layers[1].size(), 8u);
  EXPECT_EQ(dg.service_count(), 20u);
  EXPECT_TRUE(dg.covers_outputs());
  // Photo-based name lookup needs an RGB image; code-from-photo needs png.
  EXPECT_FALSE(dg.activated(space.index_of("S21")));
  EXPECT_FALSE(dg.activated(space.index_of("S32")));
}

TEST(DependencyGraph, ActivationNeedsConceptsAndKnowledge) {
  const auto doc = running_example();
  const auto& onto = doc.ontology;
  const auto& reader = doc.services[0];  // BWImage -> ean, pre jpeg
  EXPECT_TRUE(is_activated(onto, reader, {"binaryImage"}, Condition{{"jpeg"}}));
  EXPECT_FALSE(is_activated(onto, reader, {"binaryImage"}, Condition{{"png"}}));
  EXPECT_FALSE(is_activated(onto, reader, {"grayImage"}, Condition{{"jpeg"}}));
  const auto& by_ref = doc.services[8];  // productRef -> review
  EXPECT_TRUE(is_activated(onto, by_ref, {"EAN"}, Condition{}));
}

TEST(DependencyGraph, LevelThreeExcludesTreeMembers) {
  const auto doc = running_example();
  const auto h = build_hierarchy(doc);
  const auto dg = build_dependency_graph(doc.ontology, h.space(3), doc.queries[0]);
  EXPECT_EQ(dg.service_count(), 5u);
  EXPECT_EQ(dg.excluded.size(), 2u);
}

TEST(PlanCount, FixtureMatchesTreeEnumeration) {
  const auto doc = running_example();
  const auto h = build_hierarchy(doc);
  const std::array<int, 4> expected{173, 13, 7, 3};
  for (int level = 0; level < 4; ++level) {
    const auto dg = build_dependency_graph(doc.ontology, h.space(level), doc.queries[0]);
    EXPECT_EQ(count_plans(dg), expected[level]) << "level " << level;
    EXPECT_EQ(enumerate_plan_trees(dg).value(), static_cast<std::uint64_t>(expected[level]));
  }
}

TEST(PlanCount, RandomInstancesMatchTreeEnumeration) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed < 120; ++seed) {
    const auto maybe = try_generate(small_config(seed, 4 + static_cast<int>(seed % 9)));
    if (!maybe) continue;
    const auto& doc = *maybe;
    const auto space = level0_space(doc.ontology, doc.services);
    const auto dg = build_dependency_graph(doc.ontology, space, doc.queries[0]);
    const auto oracle = enumerate_plan_trees(dg);
    if (!oracle) continue;
    EXPECT_EQ(count_plans(dg), *oracle) << "seed " << seed;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(PlanCount, OutputRequirementFiltersProducers) {
  auto doc = running_example();
  auto q = doc.queries[0];
  q.output_req.atoms = {"png"};  // nobody guarantees it
  const auto space = level0_space(doc.ontology, doc.services);
  EXPECT_EQ(count_plans(build_dependency_graph(doc.ontology, space, q)), 0);
  q.output_req.atoms = {"jpeg"};  // already known from the query
  EXPECT_EQ(count_plans(build_dependency_graph(doc.ontology, space, q)), 173);
}

TEST(Aggregation, SequenceAddsAndMultiplies) {
  const auto specs = rt_and_reliability();
  const auto q = aggregate_qos(two_step(30, 0.8, 30, 0.7), specs);
  EXPECT_DOUBLE_EQ(q.at("response_time"), 60.0);
  EXPECT_DOUBLE_EQ(q.at("reliability"), 0.8 * 0.7);
}

TEST(Aggregation, ParallelBranchesTakeTheCriticalPath) {
  CompositionPlan p;
  p.nodes = {"a", "b", "c"};
  p.edges = {{kQueryNode, "a", "X"}, {kQueryNode, "b", "X"}, {"a", "c", "Y"}, {"b", "c", "Z"}, {"c", kQueryNode, "W"}};
  p.node_qos = {{"a", {{"response_time", 10}, {"throughput", 5}}},
                {"b", {{"response_time", 40}, {"throughput", 9}}},
                {"c", {{"response_time", 5}, {"throughput", 7}}}};
  const QoSSpecs specs{{"response_time", Polarity::negative, Aggregation::additive_critical_path},
                       {"throughput", Polarity::positive, Aggregation::min_bottleneck}};
  const auto q = aggregate_qos(p, specs);
  EXPECT_DOUBLE_EQ(q.at("response_time"), 45.0);
  EXPECT_DOUBLE_EQ(q.at("throughput"), 5.0);
}

TEST(Aggregation, EmptyPlanIsNeutral) {
  CompositionPlan p;
  const auto q = aggregate_qos(p, rt_and_reliability());
  EXPECT_EQ(q.at("response_time"), 0.0);
  EXPECT_EQ(q.at("reliability"), 1.0);
}

TEST(Aggregation, CyclesAreRejected) {
  auto p = two_step(1, 1, 1, 1);
  p.edges.insert({"y", "x", "B"});
  EXPECT_THROW(aggregate_qos(p, rt_and_reliability()), Error);
}

TEST(OptimalSingle, WorkedExampleFastestPlan) {
  const auto doc = worked_example(200, 0.8);
  const auto space = level0_space(doc.ontology, doc.services);
  const auto dg = build_dependency_graph(doc.ontology, space, doc.queries[0]);
  const auto rt = optimal_single_qos(dg, doc.qos_specs, "response_time");
  EXPECT_EQ(rt.qos.at("response_time"), 60.0);
  const auto rel = optimal_single_qos(dg, doc.qos_specs, "reliability");
  EXPECT_DOUBLE_EQ(rel.qos.at("reliability"), 0.95 * 0.99);
  EXPECT_EQ(rel.nodes, (std::set<std::string>{"S_2", "S_5"}));
}

TEST(OptimalSingle, MatchesExhaustiveSearch) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed < 150; ++seed) {
    const auto maybe = try_generate(small_config(seed, 4 + static_cast<int>(seed % 7)));
    if (!maybe) continue;
    const auto& doc = *maybe;
    const auto space = level0_space(doc.ontology, doc.services);
    const auto dg = build_dependency_graph(doc.ontology, space, doc.queries[0]);
    const auto plans = enumerate_plans(dg, doc.qos_specs);
    if (!plans) continue;
    for (const auto& spec : doc.qos_specs) {
      const auto best = best_value(*plans, spec);
      if (!best) {
        EXPECT_THROW(optimal_single_qos(dg, doc.qos_specs, spec.name), Error);
        continue;
      }
      const auto plan = optimal_single_qos(dg, doc.qos_specs, spec.name);
      const double got = plan.qos.at(spec.name);
      if (got != *best) EXPECT_NEAR(got, *best, 1e-12) << "seed " << seed << " " << spec.name;
    }
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Constrained, MatchesExhaustiveSearch) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed < 150; ++seed) {
    const auto maybe = try_generate(small_config(seed, 4 + static_cast<int>(seed % 7)));
    if (!maybe) continue;
    const auto& doc = *maybe;
    const auto& q = doc.queries[0];
    const auto space = level0_space(doc.ontology, doc.services);
    const auto dg = build_dependency_graph(doc.ontology, space, q);
    const auto plans = enumerate_plans(dg, doc.qos_specs);
    if (!plans) continue;
    std::vector<CompositionPlan> ok;
    for (const auto& p : *plans)
      if (satisfies_all(doc.qos_specs, p.qos, q.constraints)) ok.push_back(p);
    const auto found = find_constrained(dg, q, doc.qos_specs);
    ASSERT_EQ(found.has_value(), !ok.empty()) << "seed " << seed;
    if (found) {
      EXPECT_TRUE(satisfies_all(doc.qos_specs, found->qos, q.constraints));
      const auto& obj = spec_of(doc.qos_specs, q.objectives.front().qos);
      const double got = found->qos.at(obj.name), best = *best_value(ok, obj);
      if (got != best) EXPECT_NEAR(got, best, 1e-9) << "seed " << seed;
    }
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Constrained, ElapsedDeadlineThrowsTimeout) {
  const auto doc = running_example();
  const auto space = level0_space(doc.ontology, doc.services);
  const auto dg = build_dependency_graph(doc.ontology, space, doc.queries[0]);
  SearchOptions o;
  o.deadline = Clock::now() - std::chrono::milliseconds(1);
  try {
    find_constrained(dg, doc.queries[0], doc.qos_specs, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::timeout);
  }
}

TEST(Constrained, UnreachableOutputsYieldNothing) {
  auto doc = running_example();
  auto q = doc.queries[0];
  q.outputs.insert("brand");
  const auto space = level0_space(doc.ontology, doc.services);
  const auto dg = build_dependency_graph(doc.ontology, space, q);
  EXPECT_FALSE(dg.covers_outputs());
  EXPECT_FALSE(find_constrained(dg, q, doc.qos_specs).has_value());
  EXPECT_EQ(count_plans(dg), 0);
}
