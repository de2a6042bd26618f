#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "qosc/error.hpp"
#include "qosc/model.hpp"
#include "qosc/ontology.hpp"

namespace qosc {

/// A service as the composition engine sees it at any abstraction level:
/// parameters already mapped through f, conditions resolved to atom indices.
struct ServiceNode {
  std::string id;
  ConceptSet inputs;
  ConceptSet outputs;
  AtomSet pre;
  AtomSet post;
  QoSVector qos;
};

/// The services available at one abstraction level.
struct ServiceSpace {
  int level = 0;
  std::vector<ServiceNode> nodes;
  // Level 3 only: for each node, the nodes lying in the IIOE tree rooted at it
  // (itself excluded). Activating a node rules those out.
  std::vector<std::vector<std::uint32_t>> contained;

  std::size_t size() const { return nodes.size(); }

  std::uint32_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorKind::argument, "no service '" + id + "' at level " + std::to_string(level));
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.contains(id); }
  const ServiceNode& node(const std::string& id) const { return nodes[index_of(id)]; }

  void reindex() {
    index_.clear();
    for (std::uint32_t i = 0; i < nodes.size(); ++i) index_.emplace(nodes[i].id, i);
  }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
};

inline ServiceNode to_node(const Ontology& onto, const ServiceDescriptor& s) {
  return {s.id, onto.concepts_of(s.inputs), onto.concepts_of(s.outputs), onto.resolve(s.pre), onto.resolve(s.post),
          s.qos};
}

inline ServiceSpace level0_space(const Ontology& onto, const std::vector<ServiceDescriptor>& services) {
  ServiceSpace space;
  space.level = 0;
  space.nodes.reserve(services.size());
  for (const auto& s : services) space.nodes.push_back(to_node(onto, s));
  space.reindex();
  return space;
}

/// Query with parameters mapped through f.
struct ResolvedQuery {
  ConceptSet inputs;
  ConceptSet outputs;
  AtomSet input_spec;
  AtomSet output_req;
};

inline ResolvedQuery resolve_query(const Ontology& onto, const Query& q) {
  return {onto.concepts_of(q.inputs), onto.concepts_of(q.outputs), onto.resolve(q.input_spec),
          onto.resolve(q.output_req)};
}

// Set of concepts covered by `available`: c is covered iff some available a has a ⊑ c.
inline Bitset covered_by(const Ontology& onto, const ConceptSet& available) {
  Bitset out(onto.concept_count());
  for (auto c : available) out |= onto.ancestors(c);
  return out;
}

inline bool provides(const Ontology& onto, const ConceptSet& outputs, ConceptIndex demanded) {
  for (auto o : outputs)
    if (onto.subsumes(o, demanded)) return true;
  return false;
}

}  // namespace qosc
