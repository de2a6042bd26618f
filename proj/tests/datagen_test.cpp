#include <gtest/gtest.h>

#include "support.hpp"

using namespace qosc;
using namespace qosc::testing;

TEST(Generator, SameSeedSameBytes) {
  GeneratorConfig c;
  c.seed = 42;
  EXPECT_EQ(to_text(generate(c)), to_text(generate(c)));
  auto d = c;
  d.seed = 43;
  EXPECT_NE(to_text(generate(c)), to_text(generate(d)));
}

TEST(Generator, OutputValidatesAndRoundTrips) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GeneratorConfig c;
    c.seed = seed;
    const auto doc = generate(c);
    EXPECT_TRUE(validate(doc).empty());
    EXPECT_EQ(doc.services.size(), 100u);
    EXPECT_EQ(doc.queries.size(), 5u);
    EXPECT_TRUE(same_document(doc, parse_document(to_text(doc))));
  }
}

TEST(Generator, AllUnrelatedKeepsLevelOneFull) {
  GeneratorConfig c;
  c.seed = 5;
  c.n_services = 60;
  c.redundancy = {0.0, 0.0, 0.0, 1.0};
  const auto doc = generate(c);
  EXPECT_EQ(build_hierarchy(doc).level1.size(), doc.services.size());
}

TEST(Generator, AllEquivalentCollapsesLevelOne) {
  GeneratorConfig c;
  c.seed = 5;
  c.n_services = 60;
  c.redundancy = {1.0, 0.0, 0.0, 0.0};
  const auto doc = generate(c);
  EXPECT_LE(build_hierarchy(doc).level1.size(), 2u);
}

TEST(Generator, RealizedMixFollowsTheConfig) {
  GeneratorConfig c;
  c.seed = 11;
  c.n_services = 300;
  c.redundancy = {0.4, 0.2, 0.2, 0.2};
  const auto mix = realized_mix(generate(c));
  const double n = static_cast<double>(mix.total());
  EXPECT_NEAR(mix.equivalent / n, 0.4, 0.1);
  EXPECT_NEAR(mix.dominant / n, 0.2, 0.1);
  EXPECT_NEAR(mix.iioe / n, 0.2, 0.1);
  EXPECT_NEAR(mix.unrelated / n, 0.2, 0.1);
}

TEST(Generator, InfeasibleConfigs) {
  auto expect_infeasible = [](const GeneratorConfig& c) {
    try {
      generate(c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config_infeasible);
    }
  };
  GeneratorConfig c;
  c.n_parameters = c.n_concepts - 1;
  expect_infeasible(c);
  c = {};
  c.redundancy = {0.5, 0.5, 0.5, 0.0};
  expect_infeasible(c);
  c = {};
  c.qos_distributions.erase("reliability");
  expect_infeasible(c);
}

TEST(Generator, ConfigFromJson) {
  const auto c = config_from_json(nlohmann::json::parse(R"({
    "seed": 9, "n_concepts": 20, "n_parameters": 25, "n_services": 30,
    "redundancy": {"equivalent": 0.1, "dominant": 0.2, "iioe": 0.3, "unrelated": 0.4}
  })"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.n_services, 30);
  EXPECT_DOUBLE_EQ(c.redundancy.iioe, 0.3);
  EXPECT_EQ(generate(c).services.size(), 30u);
}

TEST(Generator, ConstraintsAreAnchoredToReachableValues) {
  GeneratorConfig c;
  c.seed = 17;
  c.constraint_tightness = 0.0;
  const auto doc = generate(c);
  const auto h = build_hierarchy(doc);
  for (const auto& q : doc.queries) {
    const auto dg = build_dependency_graph(doc.ontology, h.space(0), q);
    if (!dg.covers_outputs() || count_plans(dg) == 0) continue;
    // Tightness 0 puts every bound at the worst extreme, so some plan fits.
    EXPECT_TRUE(find_constrained(dg, q, h.specs).has_value()) << q.id;
  }
}
