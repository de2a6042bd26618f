#pragma once

// Shared fixtures and brute-force oracles for the test binaries.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qosc/qosc.hpp"

namespace qosc::testing {

inline std::string fixture(const std::string& name) { return std::string(QOSC_FIXTURES) + "/" + name; }

inline RepositoryDocument running_example() { return load(fixture("running_example.repo.json")); }

inline QoSSpecs rt_and_reliability() {
  return {{"response_time", Polarity::negative, Aggregation::additive_critical_path},
          {"reliability", Polarity::positive, Aggregation::multiplicative}};
}

/// Two-step sequential composition a -> b -> c with three interchangeable
/// services per step: {(30,0.8),(70,0.95),(50,0.9)} and {(30,0.7),(90,0.99),(60,0.9)}.
inline RepositoryDocument worked_example(double rt_bound, double rel_bound) {
  OntologySpec o;
  o.concepts = {"A", "B", "C"};
  o.parameters = {{"a", "A"}, {"b", "B"}, {"c", "C"}};
  std::vector<ServiceDescriptor> services;
  auto add = [&](const std::string& id, const std::string& in, const std::string& out, double rt, double rel) {
    services.push_back({id, {in}, {out}, id, {{"response_time", rt}, {"reliability", rel}}, {}, {}});
  };
  add("S_1", "a", "b", 30, 0.8);
  add("S_2", "a", "b", 70, 0.95);
  add("S_3", "a", "b", 50, 0.9);
  add("S_4", "b", "c", 30, 0.7);
  add("S_5", "b", "c", 90, 0.99);
  add("S_6", "b", "c", 60, 0.9);
  Query q{"case", {"a"}, {"c"}, {}, {}, {{"response_time", Direction::minimize}},
          {{"response_time", rt_bound}, {"reliability", rel_bound}}};
  return RepositoryDocument{Ontology(o), rt_and_reliability(), services, {q}, {}};
}

/// Representatives chosen on response time alone, so the default plan is the
/// fastest one: (60 ms, 0.56).
inline QoSVector response_time_weights() { return {{"response_time", 1.0}, {"reliability", 0.0}}; }

/// Small random instance for exhaustive checks.
inline GeneratorConfig small_config(std::uint64_t seed, int services, QoSSpecs specs = standard_qos_specs()) {
  GeneratorConfig c;
  c.seed = seed;
  c.n_concepts = 8;
  c.n_parameters = 10;
  c.n_atoms = 3;
  c.n_services = services;
  c.subsumption_density = 0.6;
  c.redundancy = {0.3, 0.2, 0.2, 0.3};
  c.n_queries = 1;
  c.constraint_tightness = static_cast<double>(seed % 11) / 10.0;
  c.qos_specs = std::move(specs);
  return c;
}

/// nullopt when the ontology is too small for the requested variants or no
/// query came out.
inline std::optional<RepositoryDocument> try_generate(const GeneratorConfig& c) {
  try {
    auto doc = generate(c);
    if (doc.queries.empty()) return std::nullopt;
    return doc;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::config_infeasible) throw;
    return std::nullopt;
  }
}

// --- oracles ---------------------------------------------------------------------

/// Counts derivation trees by listing them one by one. Returns nullopt when
/// more than `budget` trees would have to be listed.
inline std::optional<std::uint64_t> enumerate_plan_trees(const DependencyGraph& dg, std::uint64_t budget = 2'000'000) {
  const Ontology& onto = *dg.onto;
  const auto& nodes = dg.space->nodes;
  // A tree is represented by the multiset of postconditions at its top; only
  // the count and the requirement check matter here.
  struct Tree {
    AtomSet post;
  };
  std::uint64_t listed = 0;
  bool over = false;
  std::function<std::vector<Tree>(ConceptIndex, int)> trees_for;
  std::function<std::vector<Tree>(std::uint32_t)> trees_of = [&](std::uint32_t s) {
    std::vector<Tree> acc{Tree{nodes[s].post}};
    for (auto i : nodes[s].inputs) {
      const auto sub = trees_for(i, dg.layer_of[s]);
      std::vector<Tree> next;
      for (const auto& a : acc)
        for (std::size_t k = 0; k < sub.size(); ++k) {
          if (++listed > budget) {
            over = true;
            return std::vector<Tree>{};
          }
          next.push_back(a);
        }
      acc = std::move(next);
    }
    return acc;
  };
  trees_for = [&](ConceptIndex c, int bound) {
    std::vector<Tree> out;
    if (dg.query_covered().test(c)) out.push_back(Tree{dg.query.input_spec});
    for (std::uint32_t s = 0; s < nodes.size() && !over; ++s) {
      if (!dg.activated(s) || dg.layer_of[s] >= bound) continue;
      if (!provides(onto, nodes[s].outputs, c)) continue;
      for (auto& t : trees_of(s)) out.push_back(std::move(t));
    }
    return out;
  };
  if (dg.query.outputs.empty()) return 0;
  std::vector<AtomSet> combos{dg.query.input_spec};
  for (auto out : dg.query.outputs) {
    const auto options = trees_for(out, std::numeric_limits<int>::max());
    std::vector<AtomSet> next;
    for (const auto& k : combos)
      for (const auto& t : options) {
        if (++listed > budget || over) return std::nullopt;
        AtomSet merged = k;
        merged.insert(merged.end(), t.post.begin(), t.post.end());
        sort_unique(merged);
        next.push_back(std::move(merged));
      }
    combos = std::move(next);
  }
  if (over) return std::nullopt;
  std::uint64_t n = 0;
  for (const auto& k : combos)
    if (onto.implies(k, dg.query.output_req)) ++n;
  return n;
}

/// Every plan over a subset of activated services in which each service input
/// and each query output has exactly one producer from an earlier layer (or
/// the query inputs) and every chosen service feeds the query, directly or
/// not. Returns nullopt if more than `budget` assignments would be tried.
inline std::optional<std::vector<CompositionPlan>> enumerate_plans(const DependencyGraph& dg, const QoSSpecs& specs,
                                                                   std::uint64_t budget = 400'000) {
  const Ontology& onto = *dg.onto;
  const auto& nodes = dg.space->nodes;
  std::vector<std::uint32_t> active;
  for (std::uint32_t s = 0; s < nodes.size(); ++s)
    if (dg.activated(s)) active.push_back(s);
  if (active.size() > 16) return std::nullopt;

  std::vector<CompositionPlan> plans;
  std::uint64_t tried = 0;
  for (std::uint32_t mask = 0; mask < (1u << active.size()); ++mask) {
    std::vector<std::uint32_t> chosen;
    for (std::size_t k = 0; k < active.size(); ++k)
      if (mask & (1u << k)) chosen.push_back(active[k]);
    struct Slot {
      std::string consumer;
      ConceptIndex c;
      std::vector<std::string> options;
    };
    std::vector<Slot> slots;
    auto options_for = [&](ConceptIndex c, int bound) {
      std::vector<std::string> out;
      if (dg.query_covered().test(c)) out.push_back(kQueryNode);
      for (auto p : chosen)
        if (dg.layer_of[p] < bound && provides(onto, nodes[p].outputs, c)) out.push_back(nodes[p].id);
      return out;
    };
    for (auto c : dg.query.outputs) slots.push_back({kQueryNode, c, options_for(c, std::numeric_limits<int>::max())});
    for (auto s : chosen)
      for (auto i : nodes[s].inputs) slots.push_back({nodes[s].id, i, options_for(i, dg.layer_of[s])});
    std::uint64_t combos = 1;
    bool empty = false;
    for (const auto& sl : slots) {
      if (sl.options.empty()) empty = true;
      combos *= std::max<std::size_t>(sl.options.size(), 1);
      if (combos > budget) return std::nullopt;
    }
    if (empty) continue;
    tried += combos;
    if (tried > budget) return std::nullopt;

    std::vector<std::size_t> pick(slots.size(), 0);
    for (;;) {
      CompositionPlan p;
      for (auto s : chosen) {
        p.nodes.insert(nodes[s].id);
        p.node_qos[nodes[s].id] = nodes[s].qos;
      }
      for (std::size_t k = 0; k < slots.size(); ++k)
        p.edges.insert({slots[k].options[pick[k]], slots[k].consumer, onto.concept_name(slots[k].c)});
      // every chosen service must reach the query
      std::set<std::string> live{kQueryNode};
      for (bool grew = true; grew;) {
        grew = false;
        for (const auto& e : p.edges)
          if (live.contains(e.consumer) && live.insert(e.producer).second) grew = true;
      }
      const bool all_live =
          std::all_of(p.nodes.begin(), p.nodes.end(), [&](const std::string& n) { return live.contains(n); });
      AtomSet knowledge = dg.query.input_spec;
      for (std::size_t k = 0; k < dg.query.outputs.size(); ++k)
        if (slots[k].options[pick[k]] != kQueryNode) {
          const auto& post = dg.space->node(slots[k].options[pick[k]]).post;
          knowledge.insert(knowledge.end(), post.begin(), post.end());
        }
      sort_unique(knowledge);
      if (all_live && onto.implies(knowledge, dg.query.output_req)) {
        p.level = dg.level;
        p.qos = aggregate_qos(p, specs);
        plans.push_back(std::move(p));
      }
      std::size_t k = 0;
      while (k < slots.size() && ++pick[k] == slots[k].options.size()) pick[k++] = 0;
      if (k == slots.size()) break;
    }
  }
  return plans;
}

inline bool any_satisfying(const std::vector<CompositionPlan>& plans, const QoSSpecs& specs,
                           const std::vector<Constraint>& constraints) {
  return std::any_of(plans.begin(), plans.end(),
                     [&](const CompositionPlan& p) { return satisfies_all(specs, p.qos, constraints); });
}

inline std::optional<double> best_value(const std::vector<CompositionPlan>& plans, const QoSSpec& spec) {
  std::optional<double> best;
  for (const auto& p : plans) {
    const double v = p.qos.at(spec.name);
    if (!best || strictly_better(spec.polarity, v, *best)) best = v;
  }
  return best;
}

}  // namespace qosc::testing
