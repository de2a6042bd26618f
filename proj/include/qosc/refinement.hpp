#pragma once

// Partial refinement (re-selecting representatives under constraint-driven
// weights), complete refinement (dropping one level) and the orchestrator
// that alternates them until a level-0 plan is found or ruled out.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qosc/abstraction.hpp"
#include "qosc/composition.hpp"
#include "qosc/error.hpp"
#include "qosc/model.hpp"
#include "qosc/repository.hpp"

namespace qosc {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct QoSBounds {
  std::map<std::string, std::map<std::string, Range>> node;  // node id -> parameter -> pool range
  std::map<std::string, Range> aggregate;                    // parameter -> aggregated range

  double best(const QoSSpec& s) const {
    const auto& r = aggregate.at(s.name);
    return s.polarity == Polarity::positive ? r.max : r.min;
  }
  double worst(const QoSSpec& s) const {
    const auto& r = aggregate.at(s.name);
    return s.polarity == Polarity::positive ? r.min : r.max;
  }
};

/// abstract id -> chosen id one level down. Overrides the defaults for the
/// duration of one query.
using Bindings = std::map<std::string, std::string>;

enum class RefinementOutcome { satisfied, declined, exhausted };

inline const char* to_string(RefinementOutcome o) {
  switch (o) {
    case RefinementOutcome::satisfied: return "satisfied";
    case RefinementOutcome::declined: return "declined";
    case RefinementOutcome::exhausted: return "exhausted";
  }
  return "?";
}

struct RefinementSession {
  CompositionPlan plan;
  QoSBounds bounds;
  std::vector<std::string> violated;
  QoSVector normalized;          // NV per constrained parameter
  QoSVector recomputed_weights;  // WT
  Bindings rebindings;
  RefinementOutcome outcome = RefinementOutcome::declined;
};

/// A level-0 service reachable from an abstract node, with the bindings that
/// select it.
struct PoolEntry {
  std::string service;
  Bindings binding;
};

// --- resolution ------------------------------------------------------------------

inline std::string default_child(const AbstractionHierarchy& h, int level, const std::string& id) {
  switch (level) {
    case 1: return level1_class(h, id).representative;
    case 2: return level2_group(h, id).root;
    case 3: return level3_tree(h, id).representative;
    default: throw Error(ErrorKind::argument, "level-0 services have no children");
  }
}

/// The level-0 service an abstract node currently stands for.
inline std::string resolve_service(const AbstractionHierarchy& h, int level, std::string id,
                                   const Bindings& bindings = {}) {
  for (; level > 0; --level) {
    auto it = bindings.find(id);
    id = it != bindings.end() ? it->second : default_child(h, level, id);
  }
  if (!h.spaces[0].contains(id)) throw Error(ErrorKind::stale_hierarchy, "unknown service '" + id + "'");
  return id;
}

// --- eligibility -----------------------------------------------------------------

namespace detail {

struct PlanView {
  const CompositionPlan& plan;
  const DependencyGraph& dg;

  int layer(const std::string& id) const { return dg.layer_of.at(dg.space->index_of(id)); }
  std::vector<ProducerEdge> out_edges(const std::string& id) const {
    std::vector<ProducerEdge> out;
    for (const auto& e : plan.edges)
      if (e.producer == id) out.push_back(e);
    return out;
  }
  std::vector<ProducerEdge> in_edges(const std::string& id) const {
    std::vector<ProducerEdge> out;
    for (const auto& e : plan.edges)
      if (e.consumer == id) out.push_back(e);
    return out;
  }
};

}  // namespace detail

/// Level-1 services that may stand in for `node` (a level-2 or level-3 plan
/// node): activatable when the node activates, with every input obtainable
/// from the query or from what earlier plan nodes already supply, producing
/// every concept the node supplies in the plan, and guaranteeing the output
/// requirement atoms only this node secures.
inline std::vector<std::string> level2_candidates(const std::string& node, const CompositionPlan& plan,
                                                  const AbstractionHierarchy& h, const DependencyGraph& dg) {
  const Ontology& onto = *h.onto;
  const int level = dg.level;
  if (level != 2 && level != 3) throw Error(ErrorKind::argument, "eligibility applies to levels 2 and 3");
  const detail::PlanView view{plan, dg};
  const int layer = view.layer(node);
  if (layer < 0) throw Error(ErrorKind::argument, "plan node '" + node + "' is not activated");

  // Concepts this node must keep supplying.
  ConceptSet io;
  for (const auto& e : view.out_edges(node)) io.push_back(onto.concept_index(e.concept_id));
  sort_unique(io);

  // Concepts earlier plan nodes keep supplying, whatever they are bound to.
  ConceptSet supplied;
  for (const auto& e : plan.edges)
    if (e.producer != kQueryNode && e.producer != node && view.layer(e.producer) < layer)
      supplied.push_back(onto.concept_index(e.concept_id));
  sort_unique(supplied);
  Bitset wirable = dg.query_covered();
  wirable |= covered_by(onto, supplied);

  // Output requirement atoms secured by this node alone.
  AtomSet required;
  const auto& self = dg.space->node(node);
  if (!dg.query.output_req.empty() && !view.out_edges(node).empty()) {
    bool feeds_query = false;
    AtomSet others = dg.query.input_spec;
    std::set<std::string> seen;
    for (const auto& e : plan.edges) {
      if (e.consumer != kQueryNode) continue;
      if (e.producer == node) feeds_query = true;
      else if (e.producer != kQueryNode && seen.insert(e.producer).second) {
        const auto& post = dg.space->node(e.producer).post;
        others.insert(others.end(), post.begin(), post.end());
      }
    }
    if (feeds_query) {
      sort_unique(others);
      const Bitset by_others = onto.entailed(others);
      const Bitset by_self = onto.entailed(self.post);
      for (auto a : dg.query.output_req)
        if (by_self.test(a) && !by_others.test(a)) required.push_back(a);
    }
  }

  std::vector<std::string> groups;
  if (level == 2) groups.push_back(node);
  else groups = level3_tree(h, node).tree_members;

  std::set<std::string> out;
  for (const auto& g : groups)
    for (const auto& m : level2_group(h, g).members) {
      const auto& cand = h.spaces[1].node(m);
      if (!is_activated(cand, dg.covered[layer], dg.entailed[layer])) continue;
      if (!std::all_of(cand.inputs.begin(), cand.inputs.end(), [&](ConceptIndex i) { return wirable.test(i); }))
        continue;
      if (!std::all_of(io.begin(), io.end(), [&](ConceptIndex c) { return provides(onto, cand.outputs, c); }))
        continue;
      if (!onto.implies(cand.post, required)) continue;
      out.insert(m);
    }
  return {out.begin(), out.end()};
}

/// Level-0 services an abstract plan node may be rebound to.
inline std::vector<PoolEntry> node_pool(const std::string& node, const CompositionPlan& plan,
                                        const AbstractionHierarchy& h, const DependencyGraph& dg) {
  std::vector<PoolEntry> pool;
  std::set<std::string> seen;
  auto add_class = [&](const std::string& s1, Bindings b) {
    for (const auto& s : level1_class(h, s1).members)
      if (seen.insert(s).second) {
        Bindings full = b;
        full[s1] = s;
        pool.push_back({s, std::move(full)});
      }
  };
  switch (dg.level) {
    case 1: add_class(node, {}); break;
    case 2:
      for (const auto& m : level2_candidates(node, plan, h, dg)) add_class(m, {{node, m}});
      break;
    case 3: {
      const auto eligible = level2_candidates(node, plan, h, dg);
      for (const auto& t : level3_tree(h, node).tree_members)
        for (const auto& m : level2_group(h, t).members)
          if (std::binary_search(eligible.begin(), eligible.end(), m)) add_class(m, {{node, t}, {t, m}});
      break;
    }
    default: throw Error(ErrorKind::argument, "level-0 plans have nothing to refine");
  }
  return pool;
}

// --- bounds ----------------------------------------------------------------------

inline QoSBounds plan_bounds(const CompositionPlan& plan, const QoSSpecs& specs,
                             const std::map<std::string, std::vector<PoolEntry>>& pools,
                             const AbstractionHierarchy& h) {
  QoSBounds b;
  for (const auto& n : plan.nodes) {
    const auto& pool = pools.at(n);
    if (pool.empty()) throw Error(ErrorKind::argument, "empty pool for '" + n + "'");
    for (const auto& spec : specs) {
      Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      for (const auto& e : pool) {
        const double v = h.spaces[0].node(e.service).qos.at(spec.name);
        r.min = std::min(r.min, v);
        r.max = std::max(r.max, v);
      }
      b.node[n][spec.name] = r;
    }
  }
  const auto lo = aggregate_with(plan, specs, [&](const std::string& n, const QoSSpec& s) { return b.node[n][s.name].min; });
  const auto hi = aggregate_with(plan, specs, [&](const std::string& n, const QoSSpec& s) { return b.node[n][s.name].max; });
  for (const auto& spec : specs) b.aggregate[spec.name] = {lo.at(spec.name), hi.at(spec.name)};
  return b;
}

inline std::map<std::string, std::vector<PoolEntry>> plan_pools(const CompositionPlan& plan,
                                                                const AbstractionHierarchy& h,
                                                                const DependencyGraph& dg) {
  std::map<std::string, std::vector<PoolEntry>> pools;
  for (const auto& n : plan.nodes) pools[n] = node_pool(n, plan, h, dg);
  return pools;
}

inline QoSBounds plan_bounds(const CompositionPlan& plan, const AbstractionHierarchy& h, const DependencyGraph& dg) {
  return plan_bounds(plan, h.specs, plan_pools(plan, h, dg), h);
}

// --- partial refinement ------------------------------------------------------------

/// One re-selection pass. Returns the plan with updated node QoS when every
/// constraint then holds; the session records the bounds, weights and
/// rebindings either way.
inline std::optional<CompositionPlan> partial_refine(const CompositionPlan& plan, const Query& q,
                                                     const AbstractionHierarchy& h, const DependencyGraph& dg,
                                                     RefinementSession& session) {
  const QoSSpecs& specs = h.specs;
  session = {};
  session.plan = plan;
  for (const auto& c : q.constraints)
    if (!satisfies_bound(spec_of(specs, c.qos).polarity, plan.qos.at(c.qos), c.bound)) session.violated.push_back(c.qos);
  if (session.violated.empty()) throw Error(ErrorKind::precondition, "plan already satisfies every constraint");

  const auto pools = plan_pools(plan, h, dg);
  for (const auto& n : plan.nodes)
    if (pools.at(n).empty()) return std::nullopt;
  session.bounds = plan_bounds(plan, specs, pools, h);

  for (const auto& c : q.constraints) {
    const auto& spec = spec_of(specs, c.qos);
    const bool violated = std::find(session.violated.begin(), session.violated.end(), c.qos) != session.violated.end();
    if (violated && !satisfies_bound(spec.polarity, session.bounds.best(spec), c.bound)) return std::nullopt;
  }

  double total = 0.0;
  for (const auto& spec : specs) session.normalized[spec.name] = 0.0;
  for (const auto& c : q.constraints) {
    const auto& spec = spec_of(specs, c.qos);
    if (satisfies_bound(spec.polarity, session.bounds.worst(spec), c.bound)) continue;
    const auto& r = session.bounds.aggregate.at(c.qos);
    double nv = spec.polarity == Polarity::positive ? (c.bound - r.min) / (r.max - r.min)
                                                    : (r.max - c.bound) / (r.max - r.min);
    nv = std::clamp(nv, 0.0, 1.0);
    session.normalized[c.qos] = std::max(session.normalized[c.qos], nv);
  }
  for (const auto& [_, nv] : session.normalized) total += nv;
  if (total <= 0.0) return std::nullopt;
  for (const auto& [name, nv] : session.normalized) session.recomputed_weights[name] = nv / total;

  CompositionPlan refined = plan;
  for (const auto& n : plan.nodes) {
    const auto& pool = pools.at(n);
    std::vector<Candidate> candidates;
    for (const auto& e : pool) candidates.emplace_back(e.service, h.spaces[0].node(e.service).qos);
    const auto chosen = select_representative(candidates, specs, session.recomputed_weights);
    const auto& entry = *std::find_if(pool.begin(), pool.end(), [&](const PoolEntry& e) { return e.service == chosen; });
    for (const auto& [from, to] : entry.binding) session.rebindings[from] = to;
    refined.node_qos[n] = h.spaces[0].node(chosen).qos;
  }
  refined.qos = aggregate_qos(refined, specs);
  session.plan = refined;
  if (!satisfies_all(specs, refined.qos, q.constraints)) {
    session.outcome = RefinementOutcome::exhausted;
    return std::nullopt;
  }
  session.outcome = RefinementOutcome::satisfied;
  return refined;
}

// --- complete refinement --------------------------------------------------------------

inline const ServiceSpace& complete_refine(const AbstractionHierarchy& h, int level) {
  if (level <= 0) throw Error(ErrorKind::precondition, "level 0 cannot be reverted further");
  return h.space(level - 1);
}

// --- reconstruction -----------------------------------------------------------------

/// Replaces every abstract node by the level-0 service it is bound to and
/// re-wires inputs: the original producer if it still fits, otherwise another
/// earlier plan node, otherwise the query inputs.
inline CompositionPlan reconstruct(const CompositionPlan& plan, const AbstractionHierarchy& h,
                                   const DependencyGraph& dg, const Bindings& bindings = {}) {
  if (plan.level == 0) return plan;
  const Ontology& onto = *h.onto;
  const auto& l0 = h.spaces[0];
  const detail::PlanView view{plan, dg};

  std::map<std::string, std::string> concrete;
  for (const auto& n : plan.nodes) {
    const auto s = resolve_service(h, plan.level, n, bindings);
    if (plan.node_qos.at(n) != l0.node(s).qos)
      throw Error(ErrorKind::stale_hierarchy, "QoS of '" + n + "' no longer matches its binding '" + s + "'");
    concrete[n] = s;
  }

  CompositionPlan out;
  out.level = 0;
  for (const auto& [n, s] : concrete) {
    out.nodes.insert(s);
    out.node_qos[s] = l0.node(s).qos;
  }
  auto supplies = [&](const std::string& abstract, ConceptIndex c) {
    return provides(onto, l0.node(concrete.at(abstract)).outputs, c);
  };
  auto wire = [&](const std::string& consumer_abstract, const std::string& consumer, ConceptIndex c, int bound,
                  const std::vector<ProducerEdge>& original) {
    for (const auto& e : original)
      if (e.producer != kQueryNode && supplies(e.producer, c)) {
        out.edges.insert({concrete.at(e.producer), consumer, onto.concept_name(c)});
        return;
      }
    for (const auto& n : plan.nodes)
      if (n != consumer_abstract && view.layer(n) < bound && supplies(n, c)) {
        out.edges.insert({concrete.at(n), consumer, onto.concept_name(c)});
        return;
      }
    if (dg.query_covered().test(c)) {
      out.edges.insert({kQueryNode, consumer, onto.concept_name(c)});
      return;
    }
    throw Error(ErrorKind::validation, "cannot supply '" + onto.concept_name(c) + "' to '" + consumer + "'");
  };

  for (const auto& n : plan.nodes) {
    const auto in = view.in_edges(n);
    for (auto i : l0.node(concrete[n]).inputs) wire(n, concrete[n], i, view.layer(n), in);
  }
  std::map<ConceptIndex, std::vector<ProducerEdge>> outputs;
  for (const auto& e : view.in_edges(kQueryNode)) outputs[onto.concept_index(e.concept_id)].push_back(e);
  for (const auto& [c, edges] : outputs) wire(kQueryNode, kQueryNode, c, kUnbounded, edges);
  out.qos = aggregate_qos(out, h.specs);
  return out;
}

/// Everything wrong with a level-0 plan for `q`; empty means valid.
inline std::vector<std::string> validate_plan(const CompositionPlan& plan, const DependencyGraph& dg0, const Query& q,
                                              const QoSSpecs& specs) {
  std::vector<std::string> out;
  const Ontology& onto = *dg0.onto;
  const auto& space = *dg0.space;
  for (const auto& n : plan.nodes) {
    if (!space.contains(n)) {
      out.push_back("unknown service '" + n + "'");
      continue;
    }
    const auto i = space.index_of(n);
    if (!dg0.activated(i)) out.push_back("service '" + n + "' is never activated");
    for (auto c : space.nodes[i].inputs) {
      const bool fed = std::any_of(plan.edges.begin(), plan.edges.end(), [&](const ProducerEdge& e) {
        if (e.consumer != n || e.concept_id != onto.concept_name(c)) return false;
        if (e.producer == kQueryNode) return dg0.query_covered().test(c);
        return space.contains(e.producer) && provides(onto, space.node(e.producer).outputs, c);
      });
      if (!fed) out.push_back("input '" + onto.concept_name(c) + "' of '" + n + "' is not supplied");
    }
  }
  AtomSet knowledge = dg0.query.input_spec;
  for (auto c : dg0.query.outputs) {
    bool fed = false;
    for (const auto& e : plan.edges) {
      if (e.consumer != kQueryNode || e.concept_id != onto.concept_name(c)) continue;
      if (e.producer == kQueryNode) fed = fed || dg0.query_covered().test(c);
      else if (space.contains(e.producer) && provides(onto, space.node(e.producer).outputs, c)) {
        fed = true;
        const auto& post = space.node(e.producer).post;
        knowledge.insert(knowledge.end(), post.begin(), post.end());
      }
    }
    if (!fed) out.push_back("query output '" + onto.concept_name(c) + "' is not supplied");
  }
  sort_unique(knowledge);
  if (!onto.implies(knowledge, dg0.query.output_req)) out.push_back("output requirement not guaranteed");
  try {
    const auto qos = aggregate_qos(plan, specs);
    for (const auto& c : q.constraints)
      if (!satisfies_all(specs, qos, {c})) out.push_back("constraint on '" + c.qos + "' violated");
  } catch (const Error& e) {
    out.push_back(e.what());
  }
  return out;
}

// --- orchestration ------------------------------------------------------------------

struct RefinementStep {
  int level = 0;
  std::string action;  // solve | partial-refine | complete-refine
  std::vector<std::string> violated;
  QoSVector normalized;
  QoSVector weights;
  Bindings rebindings;
  std::string outcome;
};

struct CompositionResult {
  std::optional<CompositionPlan> plan;  // level 0
  std::optional<CompositionPlan> abstract_plan;
  int level_used = 0;
  std::vector<RefinementStep> trace;
};

inline nlohmann::json to_json(const RefinementStep& s) {
  return {{"level", s.level},     {"action", s.action},   {"violated", s.violated}, {"nv", s.normalized},
          {"wt", s.weights},      {"rebindings", s.rebindings}, {"outcome", s.outcome}};
}

inline nlohmann::json to_json(const CompositionPlan& p) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : p.edges) edges.push_back({{"producer", e.producer}, {"consumer", e.consumer}, {"concept", e.concept_id}});
  return {{"level", p.level}, {"nodes", p.nodes}, {"edges", edges}, {"node_qos", p.node_qos}, {"qos", p.qos}};
}

namespace detail {

inline std::optional<CompositionPlan> unconstrained_plan(const DependencyGraph& dg, const Query& q,
                                                         const QoSSpecs& specs, const SearchOptions& options) {
  if (!q.objectives.empty()) {
    try {
      return optimal_single_qos(dg, specs, q.objectives.front().qos, options);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::no_solution) return std::nullopt;
      throw;
    }
  }
  Query bare;
  return find_constrained(dg, bare, specs, options);
}

}  // namespace detail

/// Solves at `start_level`, partially refining or dropping a level whenever
/// the abstract solution does not hold up, down to level 0.
inline CompositionResult compose_with_refinement(const RepositoryDocument& doc, const AbstractionHierarchy& h,
                                                 const Query& q, int start_level = 3,
                                                 const SearchOptions& options = {}) {
  const Ontology& onto = doc.ontology;
  if (auto v = validate_query(onto, q, h.specs); !v.empty()) throw ValidationError(std::move(v));
  CompositionResult result;
  const DependencyGraph dg0 = build_dependency_graph(onto, h.space(0), q);

  auto accept = [&](const CompositionPlan& abstract, const DependencyGraph& dg, const Bindings& b) {
    try {
      auto concrete = reconstruct(abstract, h, dg, b);
      if (!validate_plan(concrete, dg0, q, h.specs).empty()) return false;
      result.plan = std::move(concrete);
      result.abstract_plan = abstract;
      result.level_used = abstract.level;
      return true;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::validation) return false;
      throw;
    }
  };

  for (int level = start_level; level >= 0; --level) {
    const DependencyGraph dg = level == 0 ? dg0 : build_dependency_graph(onto, h.space(level), q);
    auto plan = find_constrained(dg, q, h.specs, options);
    if (plan) {
      if (accept(*plan, dg, {})) {
        result.trace.push_back({level, "solve", {}, {}, {}, {}, "satisfied"});
        return result;
      }
      result.trace.push_back({level, "solve", {}, {}, {}, {}, "invalid-after-reconstruction"});
    } else {
      result.trace.push_back({level, "solve", {}, {}, {}, {}, "no-plan"});
      if (level == 0) break;
      auto candidate = detail::unconstrained_plan(dg, q, h.specs, options);
      if (candidate) {
        RefinementSession session;
        auto refined = partial_refine(*candidate, q, h, dg, session);
        RefinementStep step{level, "partial-refine", session.violated, session.normalized,
                            session.recomputed_weights, session.rebindings, to_string(session.outcome)};
        if (refined && accept(*refined, dg, session.rebindings)) {
          result.trace.push_back(std::move(step));
          return result;
        }
        if (refined) step.outcome = "invalid-after-reconstruction";
        result.trace.push_back(std::move(step));
      }
    }
    if (level > 0) {
      complete_refine(h, level);
      result.trace.push_back({level, "complete-refine", {}, {}, {}, {}, "level " + std::to_string(level - 1)});
    }
  }
  result.level_used = 0;
  return result;
}

}  // namespace qosc
