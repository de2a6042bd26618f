#pragma once

// Concepts, the subsumption order, the parameter-to-concept mapping and the
// atom-based condition language.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "qosc/error.hpp"

namespace qosc {

using ConceptId = std::string;
using AtomId = std::string;
using ParameterName = std::string;

using ConceptIndex = std::uint32_t;
using AtomIndex = std::uint32_t;

using ConceptSet = std::vector<ConceptIndex>;  // sorted, unique
using AtomSet = std::vector<AtomIndex>;        // sorted, unique
using Bitset = boost::dynamic_bitset<>;

/// A conjunction of named atoms. The empty condition is `true`.
struct Condition {
  std::set<AtomId> atoms;

  bool empty() const { return atoms.empty(); }
  friend bool operator==(const Condition&, const Condition&) = default;
};

enum class ConceptRelation { equal, sub, super, unrelated };

inline const char* to_string(ConceptRelation r) {
  switch (r) {
    case ConceptRelation::equal: return "equal";
    case ConceptRelation::sub: return "sub";
    case ConceptRelation::super: return "super";
    case ConceptRelation::unrelated: return "unrelated";
  }
  return "?";
}

/// Raw, unvalidated ontology content as it appears in a repository document.
struct OntologySpec {
  std::vector<ConceptId> concepts;
  std::vector<std::pair<ConceptId, ConceptId>> subsumptions;  // (child, parent)
  std::map<ParameterName, ConceptId> parameters;
  std::vector<AtomId> atoms;
  std::vector<std::pair<AtomId, AtomId>> atom_implications;  // (stronger, weaker)

  friend bool operator==(const OntologySpec&, const OntologySpec&) = default;
};

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

namespace detail {

// Reflexive-transitive closure of a relation given as adjacency lists.
// Returns an empty vector if the relation has a cycle.
inline std::vector<Bitset> closure_of_dag(const std::vector<std::vector<std::uint32_t>>& up,
                                          bool& acyclic) {
  const std::size_t n = up.size();
  std::vector<int> indegree(n, 0);
  for (const auto& targets : up)
    for (auto t : targets) ++indegree[t];
  // Kahn order from sources (most specific) towards sinks.
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    if (indegree[i] == 0) order.push_back(i);
  for (std::size_t head = 0; head < order.size(); ++head)
    for (auto t : up[order[head]])
      if (--indegree[t] == 0) order.push_back(t);
  acyclic = order.size() == n;
  if (!acyclic) return {};

  std::vector<Bitset> reach(n, Bitset(n));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = *it;
    reach[v].set(v);
    for (auto t : up[v]) reach[v] |= reach[t];
  }
  return reach;
}

}  // namespace detail

/// Immutable once constructed; safe to share across threads.
class Ontology {
 public:
  Ontology() = default;

  explicit Ontology(OntologySpec spec) : spec_(std::move(spec)) {
    std::vector<std::string> violations;

    for (const auto& c : spec_.concepts) {
      if (c.empty()) {
        violations.push_back("empty concept id");
        continue;
      }
      if (!concept_index_.emplace(c, static_cast<ConceptIndex>(concept_names_.size())).second) {
        violations.push_back("duplicate concept '" + c + "'");
        continue;
      }
      concept_names_.push_back(c);
    }
    for (const auto& a : spec_.atoms) {
      if (a.empty()) {
        violations.push_back("empty atom id");
        continue;
      }
      if (!atom_index_.emplace(a, static_cast<AtomIndex>(atom_names_.size())).second) {
        violations.push_back("duplicate atom '" + a + "'");
        continue;
      }
      atom_names_.push_back(a);
    }

    std::vector<std::vector<std::uint32_t>> parents(concept_names_.size());
    for (const auto& [child, parent] : spec_.subsumptions) {
      auto c = concept_index_.find(child);
      auto p = concept_index_.find(parent);
      if (c == concept_index_.end() || p == concept_index_.end()) {
        violations.push_back("subsumption references unknown concept (" + child + ", " + parent + ")");
        continue;
      }
      if (c->second == p->second) {
        violations.push_back("self subsumption on '" + child + "'");
        continue;
      }
      parents[c->second].push_back(p->second);
    }
    std::vector<std::vector<std::uint32_t>> weaker(atom_names_.size());
    for (const auto& [strong, weak] : spec_.atom_implications) {
      auto s = atom_index_.find(strong);
      auto w = atom_index_.find(weak);
      if (s == atom_index_.end() || w == atom_index_.end()) {
        violations.push_back("atom implication references unknown atom (" + strong + ", " + weak + ")");
        continue;
      }
      if (s->second == w->second) {
        violations.push_back("self implication on '" + strong + "'");
        continue;
      }
      weaker[s->second].push_back(w->second);
    }
    for (const auto& [param, concept_id] : spec_.parameters) {
      auto c = concept_index_.find(concept_id);
      if (param.empty()) violations.push_back("empty parameter name");
      if (c == concept_index_.end()) {
        violations.push_back("parameter '" + param + "' maps to unknown concept '" + concept_id + "'");
        continue;
      }
      parameter_concept_.emplace(param, c->second);
    }

    bool acyclic = true;
    ancestors_ = detail::closure_of_dag(parents, acyclic);
    if (!acyclic) violations.push_back("subsumption relation contains a cycle");
    implied_ = detail::closure_of_dag(weaker, acyclic);
    if (!acyclic) violations.push_back("atom implication relation contains a cycle");

    if (!violations.empty()) throw ValidationError(std::move(violations));
  }

  const OntologySpec& spec() const { return spec_; }
  std::size_t concept_count() const { return concept_names_.size(); }
  std::size_t atom_count() const { return atom_names_.size(); }
  std::size_t parameter_count() const { return parameter_concept_.size(); }

  bool has_concept(const ConceptId& c) const { return concept_index_.contains(c); }
  bool has_parameter(const ParameterName& p) const { return parameter_concept_.contains(p); }
  bool has_atom(const AtomId& a) const { return atom_index_.contains(a); }

  ConceptIndex concept_index(const ConceptId& c) const {
    auto it = concept_index_.find(c);
    if (it == concept_index_.end()) throw Error(ErrorKind::unknown_concept, c);
    return it->second;
  }
  const ConceptId& concept_name(ConceptIndex i) const { return concept_names_.at(i); }

  AtomIndex atom_index(const AtomId& a) const {
    auto it = atom_index_.find(a);
    if (it == atom_index_.end()) throw Error(ErrorKind::unknown_atom, a);
    return it->second;
  }
  const AtomId& atom_name(AtomIndex i) const { return atom_names_.at(i); }

  ConceptIndex parameter_concept(const ParameterName& p) const {
    auto it = parameter_concept_.find(p);
    if (it == parameter_concept_.end()) throw Error(ErrorKind::unknown_parameter, p);
    return it->second;
  }

  /// f(param)
  const ConceptId& concept_of(const ParameterName& p) const {
    return concept_names_[parameter_concept(p)];
  }

  // sub ⊑ sup, reflexive.
  bool subsumes(ConceptIndex sub, ConceptIndex sup) const { return ancestors_[sub].test(sup); }
  bool subsumes(const ConceptId& sub, const ConceptId& sup) const {
    return subsumes(concept_index(sub), concept_index(sup));
  }

  /// Every concept `sub` is subsumed by, itself included.
  const Bitset& ancestors(ConceptIndex sub) const { return ancestors_[sub]; }

  ConceptRelation relate(ConceptIndex a, ConceptIndex b) const {
    if (a == b) return ConceptRelation::equal;
    if (subsumes(a, b)) return ConceptRelation::sub;
    if (subsumes(b, a)) return ConceptRelation::super;
    return ConceptRelation::unrelated;
  }
  ConceptRelation relate(const ConceptId& a, const ConceptId& b) const {
    return relate(concept_index(a), concept_index(b));
  }

  ConceptSet concepts_of(const std::set<ParameterName>& params) const {
    ConceptSet out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(parameter_concept(p));
    sort_unique(out);
    return out;
  }

  AtomSet resolve(const Condition& c) const {
    AtomSet out;
    out.reserve(c.atoms.size());
    for (const auto& a : c.atoms) out.push_back(atom_index(a));
    sort_unique(out);
    return out;
  }

  Condition to_condition(const AtomSet& atoms) const {
    Condition c;
    for (auto a : atoms) c.atoms.insert(atom_names_.at(a));
    return c;
  }

  /// Every atom entailed by the conjunction `atoms`.
  Bitset entailed(const AtomSet& atoms) const {
    Bitset out(atom_names_.size());
    for (auto a : atoms) out |= implied_[a];
    return out;
  }

  static bool covers(const Bitset& entailed, const AtomSet& required) {
    return std::all_of(required.begin(), required.end(),
                       [&](AtomIndex b) { return entailed.test(b); });
  }

  // a → b: every atom of b is implied by some atom of a.
  bool implies(const AtomSet& a, const AtomSet& b) const {
    if (b.empty()) return true;
    return covers(entailed(a), b);
  }
  bool implies(const Condition& a, const Condition& b) const { return implies(resolve(a), resolve(b)); }

  bool equivalent(const AtomSet& a, const AtomSet& b) const { return implies(a, b) && implies(b, a); }

 private:
  OntologySpec spec_;
  std::vector<ConceptId> concept_names_;
  std::vector<AtomId> atom_names_;
  std::unordered_map<ConceptId, ConceptIndex> concept_index_;
  std::unordered_map<AtomId, AtomIndex> atom_index_;
  std::unordered_map<ParameterName, ConceptIndex> parameter_concept_;
  std::vector<Bitset> ancestors_;
  std::vector<Bitset> implied_;
};

}  // namespace qosc
