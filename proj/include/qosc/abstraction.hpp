#pragma once

// Three abstraction levels over a repository: equivalence classes, dominance
// groups and IIOE trees, each with a representative lending its QoS.

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qosc/error.hpp"
#include "qosc/model.hpp"
#include "qosc/ontology.hpp"
#include "qosc/repository.hpp"
#include "qosc/service_space.hpp"

namespace qosc {

// --- relations ---------------------------------------------------------------

/// Same input and output concepts, pre ↔ pre, post ↔ post.
inline bool equivalent(const Ontology& onto, const ServiceNode& a, const ServiceNode& b) {
  return a.inputs == b.inputs && a.outputs == b.outputs && onto.equivalent(a.pre, b.pre) &&
         onto.equivalent(a.post, b.post);
}
inline bool equivalent(const Ontology& onto, const ServiceDescriptor& a, const ServiceDescriptor& b) {
  return equivalent(onto, to_node(onto, a), to_node(onto, b));
}

/// Same concepts provided (outputs compared through what they cover, so a
/// redundant general output next to a specific one changes nothing) and
/// post ↔ post.
inline bool output_equivalent(const Ontology& onto, const ServiceNode& a, const ServiceNode& b) {
  if (a.outputs != b.outputs && covered_by(onto, a.outputs) != covered_by(onto, b.outputs)) return false;
  return onto.equivalent(a.post, b.post);
}

/// a ≻ b: a asks for more general inputs, offers more specific outputs,
/// needs a weaker precondition and guarantees a stronger postcondition.
inline bool dominates(const Ontology& onto, const ServiceNode& a, const ServiceNode& b) {
  for (auto i : a.inputs)
    if (std::none_of(b.inputs.begin(), b.inputs.end(), [&](ConceptIndex j) { return onto.subsumes(j, i); }))
      return false;
  for (auto o2 : b.outputs)
    if (std::none_of(a.outputs.begin(), a.outputs.end(), [&](ConceptIndex o) { return onto.subsumes(o, o2); }))
      return false;
  if (!onto.implies(b.pre, a.pre) || !onto.implies(a.post, b.post)) return false;
  return !output_equivalent(onto, a, b);
}

/// a →IIOE b: same outputs and post, every input of b is served by a more
/// specific input of a, and pre(a) implies pre(b). Activating a activates b.
inline bool iioe(const Ontology& onto, const ServiceNode& a, const ServiceNode& b) {
  if (!output_equivalent(onto, a, b)) return false;
  for (auto i : b.inputs)
    if (std::none_of(a.inputs.begin(), a.inputs.end(), [&](ConceptIndex j) { return onto.subsumes(j, i); }))
      return false;
  return onto.implies(a.pre, b.pre);
}

// --- representatives ----------------------------------------------------------

/// Candidate for representative selection: an id with its QoS.
using Candidate = std::pair<std::string, QoSVector>;

/// Min-max normalisation within the candidate set, oriented so that 1 is best.
/// A parameter on which every candidate agrees normalises to 1.
inline std::map<std::string, QoSVector> normalize_qos(const std::vector<Candidate>& candidates,
                                                      const QoSSpecs& specs) {
  if (candidates.empty()) throw Error(ErrorKind::argument, "cannot normalise an empty candidate set");
  std::map<std::string, QoSVector> nv;
  for (const auto& spec : specs) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [id, qos] : candidates) {
      lo = std::min(lo, qos.at(spec.name));
      hi = std::max(hi, qos.at(spec.name));
    }
    for (const auto& [id, qos] : candidates) {
      const double v = qos.at(spec.name);
      double x = 1.0;
      if (hi > lo) x = spec.polarity == Polarity::positive ? (v - lo) / (hi - lo) : (hi - v) / (hi - lo);
      nv[id][spec.name] = x;
    }
  }
  return nv;
}

inline QoSVector default_weights(const QoSSpecs& specs) {
  QoSVector w;
  for (const auto& s : specs) w[s.name] = 1.0 / static_cast<double>(specs.size());
  return w;
}

/// Argmax of the weighted normalised sum; ties go to the smallest id.
/// Parameters missing from `weights` weigh 0.
inline std::string select_representative(const std::vector<Candidate>& candidates, const QoSSpecs& specs,
                                         const QoSVector& weights) {
  for (const auto& [name, w] : weights)
    if (w < 0.0 || w > 1.0) throw Error(ErrorKind::argument, "weight for '" + name + "' outside [0,1]");
  const auto nv = normalize_qos(candidates, specs);
  std::optional<std::pair<double, std::string>> best;
  for (const auto& [id, values] : nv) {  // map order: ascending id
    double score = 0.0;
    for (const auto& [name, x] : values)
      if (auto it = weights.find(name); it != weights.end()) score += it->second * x;
    if (!best || score > best->first) best = {score, id};
  }
  return best->second;
}

// --- hierarchy -----------------------------------------------------------------

struct EquivalenceClass {
  std::string abstract_id;
  std::vector<std::string> members;  // level-0 ids, sorted
  ServiceNode signature;             // QoS is the representative's
  std::string representative;
  QoSVector weights_used;
};

struct DominanceGroup {
  std::string abstract_id;
  std::string root;                  // level-1 id
  std::vector<std::string> members;  // level-1 ids, root included, sorted
};

struct IIOETree {
  std::string abstract_id;
  std::string root;                       // level-2 id
  std::vector<std::string> tree_members;  // level-2 ids reachable from root, root included
  std::string representative;             // level-2 id
};

struct AbstractionHierarchy {
  const Ontology* onto = nullptr;
  QoSSpecs specs;
  QoSVector weights;
  std::vector<EquivalenceClass> level1;
  std::vector<DominanceGroup> level2;
  std::vector<IIOETree> level3;
  std::vector<std::pair<std::string, std::string>> iioe_edges;  // reduced, level-2 ids
  std::vector<std::vector<std::string>> iioe_collapsed;         // mutually IIOE level-2 ids
  std::array<ServiceSpace, 4> spaces;
  std::map<std::string, std::uint32_t> class_of;  // level-0 id -> level-1 index

  const ServiceSpace& space(int level) const {
    if (level < 0 || level > 3) throw Error(ErrorKind::argument, "abstraction level must be 0..3");
    return spaces[static_cast<std::size_t>(level)];
  }
  std::array<std::size_t, 4> sizes() const {
    return {spaces[0].size(), spaces[1].size(), spaces[2].size(), spaces[3].size()};
  }
};

namespace detail {

inline std::vector<AtomIndex> closure_key(const Ontology& onto, const AtomSet& atoms) {
  const Bitset e = onto.entailed(atoms);
  std::vector<AtomIndex> out;
  for (auto i = e.find_first(); i != Bitset::npos; i = e.find_next(i)) out.push_back(static_cast<AtomIndex>(i));
  return out;
}

inline std::string mint(const char* prefix, std::size_t k) { return std::string(prefix) + std::to_string(k + 1); }

}  // namespace detail

/// Partition by functional equivalence. Classes are numbered by their
/// smallest member id.
inline std::vector<EquivalenceClass> partition_level1(const Ontology& onto, const ServiceSpace& level0,
                                                      const QoSSpecs& specs, const QoSVector& weights) {
  using Key = std::tuple<ConceptSet, ConceptSet, std::vector<AtomIndex>, std::vector<AtomIndex>>;
  std::map<Key, std::vector<std::uint32_t>> buckets;
  for (std::uint32_t i = 0; i < level0.size(); ++i) {
    const auto& s = level0.nodes[i];
    buckets[{s.inputs, s.outputs, detail::closure_key(onto, s.pre), detail::closure_key(onto, s.post)}].push_back(i);
  }
  std::vector<std::vector<std::uint32_t>> groups;
  for (auto& [_, members] : buckets) {
    std::sort(members.begin(), members.end(),
              [&](std::uint32_t a, std::uint32_t b) { return level0.nodes[a].id < level0.nodes[b].id; });
    groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
    return level0.nodes[a.front()].id < level0.nodes[b.front()].id;
  });

  std::vector<EquivalenceClass> out;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    EquivalenceClass c;
    c.abstract_id = detail::mint("S1_", k);
    std::vector<Candidate> candidates;
    for (auto i : groups[k]) {
      c.members.push_back(level0.nodes[i].id);
      candidates.emplace_back(level0.nodes[i].id, level0.nodes[i].qos);
    }
    c.representative = select_representative(candidates, specs, weights);
    c.weights_used = weights;
    c.signature = level0.nodes[groups[k].front()];
    c.signature.id = c.abstract_id;
    c.signature.qos = level0.node(c.representative).qos;
    out.push_back(std::move(c));
  }
  return out;
}

/// One group per non-dominated level-1 service. Mutual dominance is broken in
/// favour of the smaller id; a service no root dominates gets its own group.
inline std::vector<DominanceGroup> build_level2(const Ontology& onto, const ServiceSpace& level1) {
  const std::size_t n = level1.size();
  std::vector<std::vector<char>> dom(n, std::vector<char>(n, 0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) dom[a][b] = dominates(onto, level1.nodes[a], level1.nodes[b]);
  auto effectively = [&](std::size_t a, std::size_t b) {
    return dom[a][b] && (!dom[b][a] || level1.nodes[a].id < level1.nodes[b].id);
  };
  std::vector<char> is_root(n, 1), grouped(n, 0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < n && is_root[b]; ++a)
      if (effectively(a, b)) is_root[b] = 0;
  for (std::size_t r = 0; r < n; ++r)
    if (is_root[r]) {
      grouped[r] = 1;
      for (std::size_t b = 0; b < n; ++b)
        if (dom[r][b]) grouped[b] = 1;
    }
  for (std::size_t b = 0; b < n; ++b)
    if (!grouped[b]) is_root[b] = 1;

  std::vector<DominanceGroup> out;
  for (std::size_t r = 0; r < n; ++r) {
    if (!is_root[r]) continue;
    DominanceGroup g;
    g.abstract_id = detail::mint("S2_", out.size());
    g.root = level1.nodes[r].id;
    g.members.push_back(g.root);
    for (std::size_t b = 0; b < n; ++b)
      if (dom[r][b] && !is_root[b]) g.members.push_back(level1.nodes[b].id);
    std::sort(g.members.begin(), g.members.end());
    out.push_back(std::move(g));
  }
  return out;
}

/// Hasse diagram of a partial order given as reflexive-transitive rows:
/// keeps x -> y unless some third node lies between them.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> transitive_reduction(const std::vector<Bitset>& reach) {
  const std::size_t n = reach.size();
  std::vector<Bitset> into(n, Bitset(n));
  for (std::size_t x = 0; x < n; ++x)
    for (auto y = reach[x].find_first(); y != Bitset::npos; y = reach[x].find_next(y)) into[y].set(x);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t x = 0; x < n; ++x)
    for (auto y = reach[x].find_first(); y != Bitset::npos; y = reach[x].find_next(y)) {
      if (y == x) continue;
      Bitset between = reach[x] & into[y];
      between.reset(x);
      between.reset(y);
      if (between.none()) edges.emplace_back(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
    }
  return edges;
}

struct IIOEGraph {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // reduced, between component leaders
  std::vector<std::vector<std::uint32_t>> components;          // mutually IIOE nodes, leader first
  std::vector<std::vector<std::uint32_t>> reach;               // per node: reachable nodes, itself included
};

/// IIOE graph over `nodes`: mutually related nodes are merged, transitive edges
/// dropped. Reachability is kept per original node.
inline IIOEGraph build_iioe_graph(const Ontology& onto, const std::vector<ServiceNode>& nodes) {
  const std::size_t n = nodes.size();
  // Only output equivalent services can be related.
  std::map<std::pair<std::vector<std::size_t>, std::vector<AtomIndex>>, std::vector<std::uint32_t>> buckets;
  for (std::uint32_t a = 0; a < n; ++a) {
    const Bitset out = covered_by(onto, nodes[a].outputs);
    std::vector<std::size_t> key;
    for (auto c = out.find_first(); c != Bitset::npos; c = out.find_next(c)) key.push_back(c);
    buckets[{key, detail::closure_key(onto, nodes[a].post)}].push_back(a);
  }
  std::vector<Bitset> rel(n, Bitset(n));
  for (const auto& [_, members] : buckets)
    for (auto a : members)
      for (auto b : members)
        if (a == b || iioe(onto, nodes[a], nodes[b])) rel[a].set(b);

  IIOEGraph g;
  std::vector<int> comp(n, -1);
  Bitset leaders(n);
  for (std::uint32_t a = 0; a < n; ++a) {
    if (comp[a] >= 0) continue;
    comp[a] = static_cast<int>(g.components.size());
    leaders.set(a);
    std::vector<std::uint32_t> members{a};
    for (auto b = rel[a].find_next(a); b != Bitset::npos; b = rel[a].find_next(b))
      if (comp[b] < 0 && rel[b].test(a)) {
        comp[b] = comp[a];
        members.push_back(static_cast<std::uint32_t>(b));
      }
    g.components.push_back(std::move(members));
  }
  std::vector<Bitset> between_leaders(n, Bitset(n));
  for (std::size_t a = 0; a < n; ++a)
    if (leaders.test(a)) between_leaders[a] = rel[a] & leaders;
  for (const auto& [x, y] : transitive_reduction(between_leaders))
    if (leaders.test(x)) g.edges.emplace_back(x, y);
  g.reach.resize(n);
  for (std::size_t a = 0; a < n; ++a)
    for (auto b = rel[a].find_first(); b != Bitset::npos; b = rel[a].find_next(b))
      g.reach[a].push_back(static_cast<std::uint32_t>(b));
  return g;
}

/// Builds every level. `weights` drive the default representatives (equal
/// weights when empty). The hierarchy refers to `onto`, which must outlive it.
inline AbstractionHierarchy build_hierarchy(const Ontology& onto, const std::vector<ServiceDescriptor>& services,
                                            const QoSSpecs& specs, QoSVector weights = {}) {
  AbstractionHierarchy h;
  h.onto = &onto;
  h.specs = specs;
  h.weights = weights.empty() ? default_weights(specs) : std::move(weights);

  h.spaces[0] = level0_space(onto, services);

  h.level1 = partition_level1(onto, h.spaces[0], specs, h.weights);
  h.spaces[1].level = 1;
  for (std::uint32_t k = 0; k < h.level1.size(); ++k) {
    h.spaces[1].nodes.push_back(h.level1[k].signature);
    for (const auto& m : h.level1[k].members) h.class_of[m] = k;
  }
  h.spaces[1].reindex();

  h.level2 = build_level2(onto, h.spaces[1]);
  h.spaces[2].level = 2;
  for (const auto& g : h.level2) {
    ServiceNode node = h.spaces[1].node(g.root);
    node.id = g.abstract_id;
    h.spaces[2].nodes.push_back(std::move(node));
  }
  h.spaces[2].reindex();

  const auto graph = build_iioe_graph(onto, h.spaces[2].nodes);
  const auto& l2 = h.spaces[2].nodes;
  for (const auto& [a, b] : graph.edges) h.iioe_edges.emplace_back(l2[a].id, l2[b].id);
  for (const auto& c : graph.components)
    if (c.size() > 1) {
      std::vector<std::string> ids;
      for (auto i : c) ids.push_back(l2[i].id);
      h.iioe_collapsed.push_back(std::move(ids));
    }

  h.spaces[3].level = 3;
  h.spaces[3].contained.resize(l2.size());
  for (std::uint32_t k = 0; k < l2.size(); ++k) {
    IIOETree t;
    t.abstract_id = detail::mint("S3_", k);
    t.root = l2[k].id;
    std::vector<Candidate> candidates;
    for (auto j : graph.reach[k]) {
      t.tree_members.push_back(l2[j].id);
      candidates.emplace_back(l2[j].id, l2[j].qos);
      // A mutually related pair contains each other only one way, so that
      // activating both keeps the one with the smaller index.
      const bool mutual = std::find(graph.reach[j].begin(), graph.reach[j].end(), k) != graph.reach[j].end();
      if (j != k && (!mutual || k < j)) h.spaces[3].contained[k].push_back(j);
    }
    std::sort(t.tree_members.begin(), t.tree_members.end());
    t.representative = select_representative(candidates, specs, h.weights);
    ServiceNode node = l2[k];
    node.id = t.abstract_id;
    node.qos = h.spaces[2].node(t.representative).qos;
    h.spaces[3].nodes.push_back(std::move(node));
    h.level3.push_back(std::move(t));
  }
  h.spaces[3].reindex();
  return h;
}

inline AbstractionHierarchy build_hierarchy(const RepositoryDocument& doc, QoSVector weights = {}) {
  return build_hierarchy(doc.ontology, doc.services, doc.qos_specs, std::move(weights));
}

inline const EquivalenceClass& level1_class(const AbstractionHierarchy& h, const std::string& id) {
  return h.level1.at(h.spaces[1].index_of(id));
}
inline const DominanceGroup& level2_group(const AbstractionHierarchy& h, const std::string& id) {
  return h.level2.at(h.spaces[2].index_of(id));
}
inline const IIOETree& level3_tree(const AbstractionHierarchy& h, const std::string& id) {
  return h.level3.at(h.spaces[3].index_of(id));
}

/// Inspection report: rosters, trees and representatives.
inline nlohmann::json hierarchy_report(const AbstractionHierarchy& h) {
  using nlohmann::json;
  json level1 = json::array(), level2 = json::array(), level3 = json::array(), edges = json::array();
  for (const auto& c : h.level1)
    level1.push_back({{"id", c.abstract_id}, {"members", c.members}, {"representative", c.representative}});
  for (const auto& g : h.level2) level2.push_back({{"id", g.abstract_id}, {"root", g.root}, {"members", g.members}});
  for (const auto& t : h.level3)
    level3.push_back({{"id", t.abstract_id},
                      {"root", t.root},
                      {"tree_members", t.tree_members},
                      {"representative", t.representative}});
  for (const auto& [a, b] : h.iioe_edges) edges.push_back({a, b});
  const auto n = h.sizes();
  return {{"sizes", {n[0], n[1], n[2], n[3]}},
          {"weights", h.weights},
          {"level1", level1},
          {"level2", level2},
          {"level3", level3},
          {"iioe_edges", edges},
          {"iioe_collapsed", h.iioe_collapsed}};
}

}  // namespace qosc
