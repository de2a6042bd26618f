#pragma once

// Activation fixpoint, dependency graphs, plan counting, QoS aggregation and
// the two solver backends (single-parameter optimum, constrained search).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "qosc/error.hpp"
#include "qosc/model.hpp"
#include "qosc/ontology.hpp"
#include "qosc/service_space.hpp"

namespace qosc {

using BigCount = boost::multiprecision::cpp_int;
using Clock = std::chrono::steady_clock;

inline constexpr std::int64_t kDefaultDeadlineMs = 60'000;

// --- activation ------------------------------------------------------------

/// `covered` holds every concept some available concept is subsumed by;
/// `knowledge` is the entailment closure of the accumulated conditions.
inline bool is_activated(const ServiceNode& s, const Bitset& covered, const Bitset& knowledge) {
  for (auto i : s.inputs)
    if (!covered.test(i)) return false;
  return Ontology::covers(knowledge, s.pre);
}

inline bool is_activated(const Ontology& onto, const ServiceDescriptor& s, const std::set<ConceptId>& available,
                         const Condition& knowledge) {
  ConceptSet avail;
  for (const auto& c : available) avail.push_back(onto.concept_index(c));
  sort_unique(avail);
  return is_activated(to_node(onto, s), covered_by(onto, avail), onto.entailed(onto.resolve(knowledge)));
}

struct DependencyGraph {
  int level = 0;
  const Ontology* onto = nullptr;
  const ServiceSpace* space = nullptr;
  ResolvedQuery query;

  std::vector<std::vector<std::uint32_t>> layers;
  std::vector<int> layer_of;  // -1 when not activated
  // Index k describes what layer k could use: query inputs plus outputs of
  // layers < k. One extra trailing entry describes the final state.
  std::vector<ConceptSet> available;
  std::vector<Bitset> covered;
  std::vector<AtomSet> knowledge;
  std::vector<Bitset> entailed;
  std::vector<std::uint32_t> excluded;  // level 3: ruled out by an activated tree root

  std::size_t service_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.size();
    return n;
  }
  std::size_t depth() const { return layers.size(); }
  bool activated(std::uint32_t i) const { return layer_of[i] >= 0; }
  const Bitset& final_covered() const { return covered.back(); }
  const Bitset& query_covered() const { return covered.front(); }
  const Bitset& final_entailed() const { return entailed.back(); }

  std::vector<std::string> layer_ids(std::size_t k) const {
    std::vector<std::string> out;
    for (auto i : layers.at(k)) out.push_back(space->nodes[i].id);
    return out;
  }

  /// Every query output concept is available at the fixpoint.
  bool covers_outputs() const {
    return std::all_of(query.outputs.begin(), query.outputs.end(),
                       [&](ConceptIndex c) { return final_covered().test(c); });
  }
};

inline DependencyGraph build_dependency_graph(const Ontology& onto, const ServiceSpace& space, const Query& q) {
  DependencyGraph dg;
  dg.level = space.level;
  dg.onto = &onto;
  dg.space = &space;
  dg.query = resolve_query(onto, q);
  dg.layer_of.assign(space.size(), -1);

  ConceptSet available = dg.query.inputs;
  Bitset covered = covered_by(onto, available);
  AtomSet knowledge = dg.query.input_spec;
  Bitset entailed = onto.entailed(knowledge);

  std::vector<std::vector<std::uint32_t>> containers;
  if (!space.contained.empty()) {
    containers.resize(space.size());
    for (std::uint32_t t = 0; t < space.contained.size(); ++t)
      for (auto s : space.contained[t]) containers[s].push_back(t);
  }

  std::vector<std::uint32_t> remaining(space.size());
  for (std::uint32_t i = 0; i < space.size(); ++i) remaining[i] = i;
  std::vector<char> in_round(space.size(), 0);

  auto snapshot = [&] {
    dg.available.push_back(available);
    dg.covered.push_back(covered);
    dg.knowledge.push_back(knowledge);
    dg.entailed.push_back(entailed);
  };

  for (;;) {
    snapshot();
    std::vector<std::uint32_t> fresh;
    std::vector<std::uint32_t> rest;
    for (auto i : remaining) {
      if (is_activated(space.nodes[i], covered, entailed)) fresh.push_back(i);
      else rest.push_back(i);
    }
    if (!containers.empty() && !fresh.empty()) {
      for (auto i : fresh) in_round[i] = 1;
      std::vector<std::uint32_t> kept;
      for (auto s : fresh) {
        bool ruled_out = std::any_of(containers[s].begin(), containers[s].end(), [&](std::uint32_t t) {
          return t != s && (dg.layer_of[t] >= 0 || in_round[t]);
        });
        if (ruled_out) dg.excluded.push_back(s);
        else kept.push_back(s);
      }
      for (auto i : fresh) in_round[i] = 0;
      fresh = std::move(kept);
    }
    remaining = std::move(rest);
    if (fresh.empty()) break;

    const int k = static_cast<int>(dg.layers.size());
    for (auto i : fresh) {
      dg.layer_of[i] = k;
      const auto& node = space.nodes[i];
      available.insert(available.end(), node.outputs.begin(), node.outputs.end());
      for (auto o : node.outputs) covered |= onto.ancestors(o);
      knowledge.insert(knowledge.end(), node.post.begin(), node.post.end());
    }
    sort_unique(available);
    sort_unique(knowledge);
    entailed = onto.entailed(knowledge);
    dg.layers.push_back(std::move(fresh));
  }
  std::sort(dg.excluded.begin(), dg.excluded.end());
  return dg;
}

// --- producers ---------------------------------------------------------------

/// For every concept, the activated services providing it (some output ⊑ the
/// concept), ordered by layer.
class ProducerIndex {
 public:
  explicit ProducerIndex(const DependencyGraph& dg) : dg_(&dg), by_concept_(dg.onto->concept_count()) {
    std::vector<std::uint32_t> seen(dg.onto->concept_count(), UINT32_MAX);
    for (const auto& layer : dg.layers)
      for (auto s : layer)
        for (auto o : dg.space->nodes[s].outputs) {
          const auto& anc = dg.onto->ancestors(o);
          for (auto a = anc.find_first(); a != Bitset::npos; a = anc.find_next(a)) {
            if (seen[a] == s) continue;
            seen[a] = s;
            by_concept_[a].push_back(s);
          }
        }
  }

  /// Producers of `c` activated strictly before layer `bound`.
  std::pair<const std::uint32_t*, const std::uint32_t*> before(ConceptIndex c, int bound) const {
    const auto& v = by_concept_[c];
    auto end = std::partition_point(v.begin(), v.end(),
                                    [&](std::uint32_t s) { return dg_->layer_of[s] < bound; });
    return {v.data(), v.data() + (end - v.begin())};
  }

  const std::vector<std::uint32_t>& all(ConceptIndex c) const { return by_concept_[c]; }

 private:
  const DependencyGraph* dg_;
  std::vector<std::vector<std::uint32_t>> by_concept_;
};

inline constexpr int kUnbounded = std::numeric_limits<int>::max();

namespace detail {

// Bit i set iff output-requirement atom i is entailed by `atoms`.
inline std::uint32_t requirement_mask(const Ontology& onto, const AtomSet& requirement, const AtomSet& atoms) {
  if (requirement.size() > 24) throw Error(ErrorKind::argument, "output requirement has too many atoms");
  const Bitset e = onto.entailed(atoms);
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < requirement.size(); ++i)
    if (e.test(requirement[i])) mask |= 1u << i;
  return mask;
}

inline std::uint64_t memo_key(ConceptIndex c, int bound) {
  return (static_cast<std::uint64_t>(c) << 32) | static_cast<std::uint32_t>(bound);
}

}  // namespace detail

// --- plan counting -----------------------------------------------------------

/// Number of distinct producer-choice assignments serving the query: each
/// demanded concept (query outputs, then the inputs of every chosen service)
/// picks one producer among the query inputs and services of earlier layers.
/// Alternatives add, independent obligations multiply. Query outputs must
/// jointly satisfy the output requirement.
inline BigCount count_plans(const DependencyGraph& dg) {
  const Ontology& onto = *dg.onto;
  const ProducerIndex producers(dg);
  std::unordered_map<std::uint64_t, BigCount> concept_memo;
  std::vector<std::optional<BigCount>> service_memo(dg.space->size());

  std::function<BigCount(ConceptIndex, int)> ways_concept;
  std::function<const BigCount&(std::uint32_t)> ways_service = [&](std::uint32_t s) -> const BigCount& {
    if (!service_memo[s]) {
      BigCount w = 1;
      for (auto i : dg.space->nodes[s].inputs) {
        w *= ways_concept(i, dg.layer_of[s]);
        if (w == 0) break;
      }
      service_memo[s] = w;
    }
    return *service_memo[s];
  };
  ways_concept = [&](ConceptIndex c, int bound) -> BigCount {
    const auto key = detail::memo_key(c, bound);
    if (auto it = concept_memo.find(key); it != concept_memo.end()) return it->second;
    BigCount w = dg.query_covered().test(c) ? 1 : 0;
    auto [b, e] = producers.before(c, bound);
    for (auto p = b; p != e; ++p) w += ways_service(*p);
    concept_memo.emplace(key, w);
    return w;
  };

  const auto& req = dg.query.output_req;
  const std::uint32_t full = req.empty() ? 0u : ((1u << req.size()) - 1u);
  const std::uint32_t query_mask = detail::requirement_mask(onto, req, dg.query.input_spec);
  std::map<std::uint32_t, BigCount> state{{0u, BigCount(1)}};
  for (auto out : dg.query.outputs) {
    std::map<std::uint32_t, BigCount> options;
    if (dg.query_covered().test(out)) options[query_mask] += 1;
    auto [b, e] = producers.before(out, kUnbounded);
    for (auto p = b; p != e; ++p) {
      const auto& w = ways_service(*p);
      if (w != 0) options[detail::requirement_mask(onto, req, dg.space->nodes[*p].post)] += w;
    }
    std::map<std::uint32_t, BigCount> next;
    for (const auto& [m1, w1] : state)
      for (const auto& [m2, w2] : options) next[m1 | m2] += w1 * w2;
    state = std::move(next);
  }
  if (dg.query.outputs.empty()) return 0;
  // The query's own input specification counts towards the requirement.
  BigCount total = 0;
  for (const auto& [m, w] : state)
    if (((m | query_mask) & full) == full) total += w;
  return total;
}

// --- aggregation -------------------------------------------------------------

namespace detail {

// Plan nodes in an order where producers precede consumers.
inline std::vector<std::string> topological_nodes(const CompositionPlan& plan) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& n : plan.nodes) indegree[n] = 0;
  for (const auto& e : plan.edges) {
    if (e.producer == kQueryNode || e.consumer == kQueryNode) continue;
    if (!plan.nodes.contains(e.producer) || !plan.nodes.contains(e.consumer))
      throw Error(ErrorKind::validation, "edge references a node outside the plan");
    out[e.producer].push_back(e.consumer);
    ++indegree[e.consumer];
  }
  std::vector<std::string> order;
  for (const auto& [n, d] : indegree)
    if (d == 0) order.push_back(n);
  for (std::size_t h = 0; h < order.size(); ++h)
    for (const auto& m : out[order[h]])
      if (--indegree[m] == 0) order.push_back(m);
  if (order.size() != plan.nodes.size()) throw Error(ErrorKind::validation, "plan edges contain a cycle");
  return order;
}

}  // namespace detail

using NodeValue = std::function<double(const std::string& node, const QoSSpec& spec)>;

/// Aggregates with node values supplied by `value`: critical path for
/// additive parameters, product for multiplicative, minimum for bottleneck.
inline QoSVector aggregate_with(const CompositionPlan& plan, const QoSSpecs& specs, const NodeValue& value) {
  const auto order = detail::topological_nodes(plan);
  std::map<std::string, std::vector<std::string>> producers;
  for (const auto& e : plan.edges)
    if (e.producer != kQueryNode && e.consumer != kQueryNode) producers[e.consumer].push_back(e.producer);

  QoSVector result;
  for (const auto& spec : specs) {
    double agg = 0.0;
    switch (spec.aggregation) {
      case Aggregation::additive_critical_path: {
        std::map<std::string, double> dist;
        for (const auto& n : order) {
          double longest = 0.0;
          for (const auto& p : producers[n]) longest = std::max(longest, dist[p]);
          dist[n] = value(n, spec) + longest;
          agg = std::max(agg, dist[n]);
        }
        break;
      }
      case Aggregation::multiplicative:
        agg = 1.0;
        for (const auto& n : order) agg *= value(n, spec);
        break;
      case Aggregation::min_bottleneck:
        agg = std::numeric_limits<double>::infinity();
        for (const auto& n : order) agg = std::min(agg, value(n, spec));
        break;
    }
    result[spec.name] = agg;
  }
  return result;
}

inline QoSVector aggregate_qos(const CompositionPlan& plan, const QoSSpecs& specs) {
  return aggregate_with(plan, specs, [&](const std::string& n, const QoSSpec& spec) {
    auto it = plan.node_qos.find(n);
    if (it == plan.node_qos.end()) throw Error(ErrorKind::validation, "no QoS recorded for node '" + n + "'");
    auto v = it->second.find(spec.name);
    if (v == it->second.end())
      throw Error(ErrorKind::validation, "node '" + n + "' lacks QoS value '" + spec.name + "'");
    return v->second;
  });
}

// --- plan assembly -----------------------------------------------------------

inline constexpr int kQueryConsumer = -1;
inline constexpr int kQueryProducer = -1;

/// One demanded concept and who demands it.
struct Obligation {
  int consumer = kQueryConsumer;  // service index, or the query
  ConceptIndex concept_index = 0;
  int bound = kUnbounded;  // producers must be activated before this layer
};

/// A (possibly partial) choice of producers, one per obligation.
struct Assignment {
  std::vector<Obligation> obligations;
  std::vector<int> producer;  // per obligation; kQueryProducer = query inputs
  std::vector<std::uint32_t> chosen;
};

inline CompositionPlan to_plan(const DependencyGraph& dg, const Assignment& a, const QoSSpecs& specs) {
  CompositionPlan plan;
  plan.level = dg.level;
  const auto& nodes = dg.space->nodes;
  for (auto s : a.chosen) {
    plan.nodes.insert(nodes[s].id);
    plan.node_qos[nodes[s].id] = nodes[s].qos;
  }
  for (std::size_t k = 0; k < a.producer.size(); ++k) {
    const auto& ob = a.obligations[k];
    const int p = a.producer[k];
    plan.edges.insert({p == kQueryProducer ? kQueryNode : nodes[p].id,
                       ob.consumer == kQueryConsumer ? kQueryNode : nodes[ob.consumer].id,
                       dg.onto->concept_name(ob.concept_index)});
  }
  plan.qos = aggregate_qos(plan, specs);
  return plan;
}

inline std::vector<Obligation> output_obligations(const DependencyGraph& dg) {
  std::vector<Obligation> out;
  for (auto c : dg.query.outputs) out.push_back({kQueryConsumer, c, kUnbounded});
  return out;
}

// --- single-parameter optimum -----------------------------------------------

namespace detail {

struct Extremal {
  const DependencyGraph& dg;
  const ProducerIndex& producers;
  const QoSSpec& spec;
  bool prefer_low;  // direction of optimisation

  std::unordered_map<std::uint64_t, std::optional<std::pair<double, int>>> concept_memo{};
  std::vector<std::optional<std::optional<double>>> service_memo{};

  double identity() const {
    switch (spec.aggregation) {
      case Aggregation::additive_critical_path: return 0.0;
      case Aggregation::multiplicative: return 1.0;
      case Aggregation::min_bottleneck: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }
  // Combines values of sibling sub-plans.
  double join(double a, double b) const {
    switch (spec.aggregation) {
      case Aggregation::additive_critical_path: return std::max(a, b);
      case Aggregation::multiplicative: return a * b;
      case Aggregation::min_bottleneck: return std::min(a, b);
    }
    return a;
  }
  double extend(double own, double inputs) const {
    switch (spec.aggregation) {
      case Aggregation::additive_critical_path: return own + inputs;
      case Aggregation::multiplicative: return own * inputs;
      case Aggregation::min_bottleneck: return std::min(own, inputs);
    }
    return own;
  }
  bool better(double a, double b) const { return prefer_low ? a < b : a > b; }

  std::optional<double> service(std::uint32_t s) {
    if (service_memo.empty()) service_memo.resize(dg.space->size());
    if (!service_memo[s]) {
      std::optional<double> acc = identity();
      for (auto i : dg.space->nodes[s].inputs) {
        auto c = concept_value(i, dg.layer_of[s]);
        if (!c) {
          acc.reset();
          break;
        }
        *acc = join(*acc, c->first);
      }
      if (acc) acc = extend(dg.space->nodes[s].qos.at(spec.name), *acc);
      service_memo[s] = acc;
    }
    return *service_memo[s];
  }

  // Best value for obtaining `c` before layer `bound`, with the chosen producer.
  std::optional<std::pair<double, int>> concept_value(ConceptIndex c, int bound) {
    const auto key = memo_key(c, bound);
    if (auto it = concept_memo.find(key); it != concept_memo.end()) return it->second;
    std::optional<std::pair<double, int>> best;
    if (dg.query_covered().test(c)) best = std::pair{identity(), kQueryProducer};
    auto [b, e] = producers.before(c, bound);
    for (auto p = b; p != e; ++p) {
      auto v = service(*p);
      if (v && (!best || better(*v, best->first))) best = std::pair{*v, static_cast<int>(*p)};
    }
    concept_memo.emplace(key, best);
    return best;
  }

  // Expands memoised choices below the given top-level producers into a
  // consistent assignment (every service keeps a single producer per input).
  Assignment expand(const std::vector<int>& top) {
    Assignment a;
    a.obligations = output_obligations(dg);
    a.producer = top;
    std::vector<char> in_plan(dg.space->size(), 0);
    std::vector<std::uint32_t> queue;
    for (int p : top)
      if (p != kQueryProducer && !in_plan[p]) {
        in_plan[p] = 1;
        queue.push_back(static_cast<std::uint32_t>(p));
      }
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const auto s = queue[h];
      for (auto i : dg.space->nodes[s].inputs) {
        const int bound = dg.layer_of[s];
        const int p = concept_value(i, bound)->second;
        a.obligations.push_back({static_cast<int>(s), i, bound});
        a.producer.push_back(p);
        if (p != kQueryProducer && !in_plan[p]) {
          in_plan[p] = 1;
          queue.push_back(static_cast<std::uint32_t>(p));
        }
      }
    }
    a.chosen = queue;
    return a;
  }

  std::optional<Assignment> solve() {
    const Ontology& onto = *dg.onto;
    const auto& req = dg.query.output_req;
    const std::uint32_t full = req.empty() ? 0u : ((1u << req.size()) - 1u);
    const std::uint32_t query_mask = requirement_mask(onto, req, dg.query.input_spec);
    struct State {
      double value;
      std::vector<int> choice;
    };
    std::map<std::uint32_t, State> state{{query_mask, State{identity(), {}}}};
    for (auto out : dg.query.outputs) {
      std::vector<std::tuple<std::uint32_t, double, int>> options;
      if (dg.query_covered().test(out)) options.emplace_back(query_mask, identity(), kQueryProducer);
      // Best producer per requirement mask.
      std::map<std::uint32_t, std::pair<double, int>> best_by_mask;
      for (auto p : producers.all(out)) {
        auto v = service(p);
        if (!v) continue;
        const auto m = requirement_mask(onto, req, dg.space->nodes[p].post);
        auto it = best_by_mask.find(m);
        if (it == best_by_mask.end() || better(*v, it->second.first)) best_by_mask[m] = {*v, static_cast<int>(p)};
      }
      for (const auto& [m, vp] : best_by_mask) options.emplace_back(m, vp.first, vp.second);
      std::map<std::uint32_t, State> next;
      for (const auto& [m1, st] : state)
        for (const auto& [m2, v, p] : options) {
          const double joined = join(st.value, v);
          auto it = next.find(m1 | m2);
          if (it == next.end() || better(joined, it->second.value)) {
            auto choice = st.choice;
            choice.push_back(p);
            next[m1 | m2] = State{joined, std::move(choice)};
          }
        }
      state = std::move(next);
    }
    if (dg.query.outputs.empty()) return std::nullopt;
    const State* best = nullptr;
    for (const auto& [m, st] : state)
      if ((m & full) == full && (!best || better(st.value, best->value))) best = &st;
    if (!best) return std::nullopt;
    return expand(best->choice);
  }
};

}  // namespace detail

struct SearchOptions {
  std::optional<Clock::time_point> deadline;
};

inline std::optional<CompositionPlan> find_constrained(const DependencyGraph& dg, const Query& q,
                                                       const QoSSpecs& specs, const SearchOptions& options = {});

/// Optimal plan for one QoS parameter (minimal for negative, maximal for
/// positive parameters). Critical-path and bottleneck parameters use dynamic
/// programming over the layers; multiplicative parameters use exact search
/// because shared producers are counted once.
inline CompositionPlan optimal_single_qos(const DependencyGraph& dg, const QoSSpecs& specs,
                                          const std::string& qos_name, const SearchOptions& options = {}) {
  const QoSSpec& spec = spec_of(specs, qos_name);
  const bool minimize = spec.polarity == Polarity::negative;
  const bool dp_exact = (spec.aggregation == Aggregation::additive_critical_path && minimize) ||
                        (spec.aggregation == Aggregation::min_bottleneck && !minimize);
  if (dp_exact) {
    const ProducerIndex producers(dg);
    detail::Extremal solver{dg, producers, spec, minimize};
    auto a = solver.solve();
    if (!a) throw Error(ErrorKind::no_solution, "query outputs cannot be produced");
    return to_plan(dg, *a, specs);
  }
  Query q;
  q.objectives.push_back({qos_name, minimize ? Direction::minimize : Direction::maximize});
  auto plan = find_constrained(dg, q, specs, options);
  if (!plan) throw Error(ErrorKind::no_solution, "query outputs cannot be produced");
  return *plan;
}

/// Best and worst value of one parameter over consistent plans, by dynamic
/// programming. Exact for the best critical path and best bottleneck; an
/// estimate otherwise. Used to anchor generated constraints.
inline std::optional<std::pair<CompositionPlan, CompositionPlan>> extreme_plans(const DependencyGraph& dg,
                                                                                 const QoSSpecs& specs,
                                                                                 const std::string& qos_name) {
  const QoSSpec& spec = spec_of(specs, qos_name);
  const ProducerIndex producers(dg);
  const bool low_is_good = spec.polarity == Polarity::negative;
  detail::Extremal best{dg, producers, spec, low_is_good};
  detail::Extremal worst{dg, producers, spec, !low_is_good};
  auto b = best.solve();
  auto w = worst.solve();
  if (!b || !w) return std::nullopt;
  return std::pair{to_plan(dg, *b, specs), to_plan(dg, *w, specs)};
}

// --- constrained search -------------------------------------------------------

namespace detail {

class ConstrainedSearch {
 public:
  ConstrainedSearch(const DependencyGraph& dg, const Query& q, const QoSSpecs& specs, const SearchOptions& options)
      : dg_(dg), specs_(specs), options_(options), producers_(dg), nodes_(dg.space->nodes) {
    for (const auto& c : q.constraints) constraints_.push_back({&spec_of(specs, c.qos), c.bound});
    if (!q.objectives.empty()) {
      objective_spec_ = &spec_of(specs, q.objectives.front().qos);
      objective_minimize_ = q.objectives.front().direction == Direction::minimize;
    }
    const auto& req = dg.query.output_req;
    full_mask_ = req.empty() ? 0u : ((1u << req.size()) - 1u);
    query_mask_ = requirement_mask(*dg.onto, req, dg.query.input_spec);
    post_mask_.resize(nodes_.size());
    for (const auto& layer : dg.layers)
      for (auto s : layer) post_mask_[s] = requirement_mask(*dg.onto, req, nodes_[s].post);
    in_plan_.assign(nodes_.size(), 0);
  }

  std::optional<CompositionPlan> run() {
    if (dg_.query.outputs.empty()) return std::nullopt;
    a_.obligations = output_obligations(dg_);
    search(0);
    return best_;
  }

 private:
  struct Bounded {
    const QoSSpec* spec;
    double bound;
  };

  void tick() {
    if (!options_.deadline) return;
    if ((expansions_++ & 0xff) == 0 && Clock::now() > *options_.deadline)
      throw Error(ErrorKind::timeout, "constrained search deadline elapsed");
  }

  // Lower bound on the critical path of any completion of the current
  // partial plan.
  double critical_path_lower_bound(const QoSSpec& spec) {
    auto& memo = lb_memo_[spec.name];
    std::function<double(ConceptIndex, int)> lb_concept;
    std::function<double(std::uint32_t)> lb_service = [&](std::uint32_t s) {
      double inputs = 0.0;
      for (auto i : nodes_[s].inputs) inputs = std::max(inputs, lb_concept(i, dg_.layer_of[s]));
      return nodes_[s].qos.at(spec.name) + inputs;
    };
    lb_concept = [&](ConceptIndex c, int bound) -> double {
      const auto key = memo_key(c, bound);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      double best = std::numeric_limits<double>::infinity();
      if (dg_.query_covered().test(c)) best = 0.0;
      auto [b, e] = producers_.before(c, bound);
      for (auto p = b; p != e && best > 0.0; ++p) best = std::min(best, lb_service(*p));
      memo.emplace(key, best);
      return best;
    };

    std::unordered_map<std::uint32_t, double> dist;
    std::vector<std::uint32_t> order = a_.chosen;
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t x, std::uint32_t y) { return dg_.layer_of[x] < dg_.layer_of[y]; });
    std::unordered_map<std::uint32_t, double> longest_input;
    double top = 0.0;
    const std::size_t assigned = a_.producer.size();
    // Inputs contribute either their assigned producer's distance or, while
    // still pending, the cheapest way to obtain them.
    std::vector<std::pair<std::size_t, double>> pending;
    for (auto s : order) {
      double in = 0.0;
      for (std::size_t k = 0; k < a_.obligations.size(); ++k) {
        const auto& ob = a_.obligations[k];
        if (ob.consumer != static_cast<int>(s)) continue;
        if (k < assigned) {
          const int p = a_.producer[k];
          if (p != kQueryProducer) in = std::max(in, dist[static_cast<std::uint32_t>(p)]);
        } else {
          in = std::max(in, lb_concept(ob.concept_index, ob.bound));
        }
      }
      dist[s] = nodes_[s].qos.at(spec.name) + in;
      top = std::max(top, dist[s]);
    }
    for (std::size_t k = assigned; k < a_.obligations.size(); ++k)
      if (a_.obligations[k].consumer == kQueryConsumer)
        top = std::max(top, lb_concept(a_.obligations[k].concept_index, kUnbounded));
    return top;
  }

  // Optimistic value of any completion, or nullopt if no bound is available.
  std::optional<double> optimistic(const QoSSpec& spec, bool want_low) {
    switch (spec.aggregation) {
      case Aggregation::additive_critical_path:
        if (want_low) return critical_path_lower_bound(spec);
        return std::nullopt;
      case Aggregation::multiplicative: {
        if (want_low) return std::nullopt;
        double prod = 1.0;
        for (auto s : a_.chosen) prod *= nodes_[s].qos.at(spec.name);
        return prod;
      }
      case Aggregation::min_bottleneck: {
        if (want_low) return std::nullopt;
        double m = std::numeric_limits<double>::infinity();
        for (auto s : a_.chosen) m = std::min(m, nodes_[s].qos.at(spec.name));
        return m;
      }
    }
    return std::nullopt;
  }

  bool prune() {
    for (const auto& c : constraints_) {
      const bool want_low = c.spec->polarity == Polarity::negative;
      if (auto v = optimistic(*c.spec, want_low); v && !satisfies_bound(c.spec->polarity, *v, c.bound)) return true;
    }
    if (best_ && objective_spec_) {
      if (auto v = optimistic(*objective_spec_, objective_minimize_)) {
        const double incumbent = best_->qos.at(objective_spec_->name);
        if (objective_minimize_ ? *v >= incumbent : *v <= incumbent) return true;
      }
    }
    return false;
  }

  void complete() {
    CompositionPlan plan = to_plan(dg_, a_, specs_);
    for (const auto& c : constraints_)
      if (!satisfies_bound(c.spec->polarity, plan.qos.at(c.spec->name), c.bound)) return;
    if (best_ && objective_spec_) {
      const double v = plan.qos.at(objective_spec_->name);
      const double incumbent = best_->qos.at(objective_spec_->name);
      if (objective_minimize_ ? !(v < incumbent) : !(v > incumbent)) return;
    }
    best_ = std::move(plan);
    if (!objective_spec_) done_ = true;
  }

  void search(std::size_t k) {
    if (done_) return;
    tick();
    const std::size_t outputs = dg_.query.outputs.size();
    if (k == outputs) {
      std::uint32_t mask = query_mask_;
      for (std::size_t i = 0; i < outputs; ++i)
        if (a_.producer[i] != kQueryProducer) mask |= post_mask_[a_.producer[i]];
      if ((mask & full_mask_) != full_mask_) return;
    }
    if (k == a_.obligations.size()) {
      complete();
      return;
    }
    const Obligation ob = a_.obligations[k];
    if (dg_.query_covered().test(ob.concept_index)) {
      a_.producer.push_back(kQueryProducer);
      if (!prune()) search(k + 1);
      a_.producer.pop_back();
      if (done_) return;
    }
    auto [b, e] = producers_.before(ob.concept_index, ob.bound);
    for (auto p = b; p != e && !done_; ++p) {
      const auto s = *p;
      a_.producer.push_back(static_cast<int>(s));
      if (in_plan_[s]) {
        if (!prune()) search(k + 1);
      } else {
        in_plan_[s] = 1;
        a_.chosen.push_back(s);
        const auto before = a_.obligations.size();
        for (auto i : nodes_[s].inputs) a_.obligations.push_back({static_cast<int>(s), i, dg_.layer_of[s]});
        if (!prune()) search(k + 1);
        a_.obligations.resize(before);
        a_.chosen.pop_back();
        in_plan_[s] = 0;
      }
      a_.producer.pop_back();
    }
  }

  const DependencyGraph& dg_;
  const QoSSpecs& specs_;
  SearchOptions options_;
  ProducerIndex producers_;
  const std::vector<ServiceNode>& nodes_;
  std::vector<Bounded> constraints_;
  const QoSSpec* objective_spec_ = nullptr;
  bool objective_minimize_ = true;
  std::uint32_t full_mask_ = 0;
  std::uint32_t query_mask_ = 0;
  std::vector<std::uint32_t> post_mask_;
  std::vector<char> in_plan_;
  std::map<std::string, std::unordered_map<std::uint64_t, double>> lb_memo_;
  Assignment a_;
  std::optional<CompositionPlan> best_;
  bool done_ = false;
  std::uint64_t expansions_ = 0;
};

}  // namespace detail

/// Depth-first search over producer choices with branch-and-bound pruning.
/// Returns the plan optimising the first objective among those meeting every
/// constraint (or the first such plan when there is no objective). Throws a
/// timeout error if the deadline elapses first.
inline std::optional<CompositionPlan> find_constrained(const DependencyGraph& dg, const Query& q,
                                                       const QoSSpecs& specs, const SearchOptions& options) {
  detail::ConstrainedSearch search(dg, q, specs, options);
  return search.run();
}

/// A negative budget means no deadline; zero means already elapsed.
inline SearchOptions deadline_after(std::int64_t ms) {
  SearchOptions o;
  if (ms >= 0) o.deadline = Clock::now() + std::chrono::milliseconds(ms);
  return o;
}

}  // namespace qosc
