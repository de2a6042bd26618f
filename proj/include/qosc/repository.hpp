#pragma once

// The `.repo.json` document: ontology, QoS declarations, services and queries
// in one file. Schema is described in docs/format.md.

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qosc/error.hpp"
#include "qosc/model.hpp"
#include "qosc/ontology.hpp"

namespace qosc {

inline const std::string kFormatVersion = "v1";

struct RepositoryDocument {
  Ontology ontology;
  QoSSpecs qos_specs;
  std::vector<ServiceDescriptor> services;
  std::vector<Query> queries;
  std::map<std::string, std::string> metadata;
};

struct RepositoryStats {
  std::size_t concepts = 0;
  std::size_t subsumption_edges = 0;
  std::size_t parameters = 0;
  std::size_t atoms = 0;
  std::size_t qos_specs = 0;
  std::size_t services = 0;
  std::size_t queries = 0;

  friend bool operator==(const RepositoryStats&, const RepositoryStats&) = default;
};

inline RepositoryStats summarize(const RepositoryDocument& doc) {
  const auto& spec = doc.ontology.spec();
  return {doc.ontology.concept_count(), spec.subsumptions.size(), doc.ontology.parameter_count(),
          doc.ontology.atom_count(),    doc.qos_specs.size(),      doc.services.size(),
          doc.queries.size()};
}

namespace detail {

inline OntologySpec canonical(OntologySpec s) {
  std::sort(s.concepts.begin(), s.concepts.end());
  std::sort(s.subsumptions.begin(), s.subsumptions.end());
  std::sort(s.atoms.begin(), s.atoms.end());
  std::sort(s.atom_implications.begin(), s.atom_implications.end());
  return s;
}

template <typename T, typename Key>
std::vector<T> sorted_by(std::vector<T> v, Key key) {
  std::sort(v.begin(), v.end(), [&](const T& a, const T& b) { return key(a) < key(b); });
  return v;
}

}  // namespace detail

/// Structural equality; insensitive to the order of set-valued sections.
inline bool same_document(const RepositoryDocument& a, const RepositoryDocument& b) {
  auto by_name = [](const QoSSpec& s) { return s.name; };
  auto by_id = [](const auto& x) { return x.id; };
  return detail::canonical(a.ontology.spec()) == detail::canonical(b.ontology.spec()) &&
         detail::sorted_by(a.qos_specs, by_name) == detail::sorted_by(b.qos_specs, by_name) &&
         detail::sorted_by(a.services, by_id) == detail::sorted_by(b.services, by_id) &&
         a.queries == b.queries && a.metadata == b.metadata;
}

// --- serialization ---------------------------------------------------------

inline const char* to_string(Polarity p) { return p == Polarity::positive ? "positive" : "negative"; }
inline const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::additive_critical_path: return "additive_critical_path";
    case Aggregation::multiplicative: return "multiplicative";
    case Aggregation::min_bottleneck: return "min_bottleneck";
  }
  return "?";
}
inline const char* to_string(Direction d) { return d == Direction::maximize ? "maximize" : "minimize"; }

namespace detail {

using nlohmann::json;

inline json strings(const std::set<std::string>& s) { return json(std::vector<std::string>(s.begin(), s.end())); }

inline json to_json(const ServiceDescriptor& s) {
  return json{{"id", s.id},           {"inputs", strings(s.inputs)},   {"outputs", strings(s.outputs)},
              {"method", s.method},   {"qos", s.qos},                  {"pre", strings(s.pre.atoms)},
              {"post", strings(s.post.atoms)}};
}

inline json to_json(const Query& q) {
  json objectives = json::array();
  for (const auto& o : q.objectives) objectives.push_back({{"qos", o.qos}, {"direction", to_string(o.direction)}});
  json constraints = json::array();
  for (const auto& c : q.constraints) constraints.push_back({{"qos", c.qos}, {"bound", c.bound}});
  return json{{"id", q.id},
              {"inputs", strings(q.inputs)},
              {"outputs", strings(q.outputs)},
              {"input_spec", strings(q.input_spec.atoms)},
              {"output_req", strings(q.output_req.atoms)},
              {"objectives", objectives},
              {"constraints", constraints}};
}

// Collects schema problems instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> problems;

  const json* field(const json& obj, const char* key, const std::string& where, bool required = true) {
    if (!obj.is_object()) {
      problems.push_back(where + ": expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) problems.push_back(where + ": missing field '" + key + "'");
      return nullptr;
    }
    return &*it;
  }

  std::string string(const json& obj, const char* key, const std::string& where, bool required = true) {
    const json* v = field(obj, key, where, required);
    if (!v) return {};
    if (!v->is_string()) {
      problems.push_back(where + "." + key + ": expected a string");
      return {};
    }
    return v->get<std::string>();
  }

  double number(const json& v, const std::string& where) {
    if (!v.is_number()) {
      problems.push_back(where + ": expected a number");
      return 0.0;
    }
    return v.get<double>();
  }

  const json* array(const json& obj, const char* key, const std::string& where, bool required = true) {
    const json* v = field(obj, key, where, required);
    if (v && !v->is_array()) {
      problems.push_back(where + "." + key + ": expected an array");
      return nullptr;
    }
    return v;
  }

  std::vector<std::string> string_list(const json& obj, const char* key, const std::string& where,
                                       bool required = true) {
    std::vector<std::string> out;
    const json* arr = array(obj, key, where, required);
    if (!arr) return out;
    for (const auto& e : *arr) {
      if (!e.is_string()) {
        problems.push_back(where + "." + key + ": expected string elements");
        continue;
      }
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::set<std::string> string_set(const json& obj, const char* key, const std::string& where,
                                   bool required = true) {
    std::set<std::string> out;
    for (auto& s : string_list(obj, key, where, required))
      if (!out.insert(s).second) problems.push_back(where + "." + key + ": duplicate element '" + s + "'");
    return out;
  }

  template <typename Enum>
  Enum choice(const json& obj, const char* key, const std::string& where,
              std::initializer_list<std::pair<const char*, Enum>> options) {
    const auto text = string(obj, key, where);
    for (const auto& [name, value] : options)
      if (text == name) return value;
    if (!text.empty()) problems.push_back(where + "." + key + ": unknown value '" + text + "'");
    return options.begin()->second;
  }
};

inline void line_column(const std::string& text, std::size_t offset, std::size_t& line, std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

}  // namespace detail

inline nlohmann::json to_json(const RepositoryDocument& doc) {
  using nlohmann::json;
  const auto& spec = doc.ontology.spec();
  json subs = json::array();
  for (const auto& [child, parent] : spec.subsumptions) subs.push_back({{"child", child}, {"parent", parent}});
  json impl = json::array();
  for (const auto& [strong, weak] : spec.atom_implications) impl.push_back({{"stronger", strong}, {"weaker", weak}});
  json qos = json::array();
  for (const auto& s : doc.qos_specs)
    qos.push_back({{"name", s.name}, {"polarity", to_string(s.polarity)}, {"aggregation", to_string(s.aggregation)}});
  json services = json::array();
  for (const auto& s : doc.services) services.push_back(detail::to_json(s));
  json queries = json::array();
  for (const auto& q : doc.queries) queries.push_back(detail::to_json(q));
  return json{{"version", kFormatVersion},
              {"metadata", doc.metadata},
              {"concepts", spec.concepts},
              {"subsumption_edges", subs},
              {"atoms", spec.atoms},
              {"atom_implications", impl},
              {"parameter_map", spec.parameters},
              {"qos_specs", qos},
              {"services", services},
              {"queries", queries}};
}

inline std::string to_text(const RepositoryDocument& doc) { return to_json(doc).dump(2) + "\n"; }

/// Validates ontology, QoS declarations, services and queries, reporting every violation.
inline std::vector<std::string> validate(const RepositoryDocument& doc) {
  std::vector<std::string> out = validate_qos_specs(doc.qos_specs);
  std::set<std::string> ids;
  for (const auto& s : doc.services) {
    if (!ids.insert(s.id).second) out.push_back("duplicate service id '" + s.id + "'");
    auto v = validate_service(doc.ontology, s, doc.qos_specs);
    out.insert(out.end(), v.begin(), v.end());
  }
  for (const auto& q : doc.queries) {
    auto v = validate_query(doc.ontology, q, doc.qos_specs);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline RepositoryDocument from_json(const nlohmann::json& root) {
  detail::Reader r;
  RepositoryDocument doc;
  const std::string version = r.string(root, "version", "document");
  if (!version.empty() && version != kFormatVersion)
    r.problems.push_back("document: unsupported version '" + version + "'");

  if (const auto* meta = r.field(root, "metadata", "document", false)) {
    if (!meta->is_object()) r.problems.push_back("metadata: expected an object");
    else
      for (const auto& [k, v] : meta->items()) {
        if (v.is_string()) doc.metadata[k] = v.get<std::string>();
        else r.problems.push_back("metadata." + k + ": expected a string");
      }
  }

  OntologySpec spec;
  {
    auto concepts = r.string_set(root, "concepts", "document");
    spec.concepts.assign(concepts.begin(), concepts.end());
    auto atoms = r.string_set(root, "atoms", "document");
    spec.atoms.assign(atoms.begin(), atoms.end());
  }
  if (const auto* subs = r.array(root, "subsumption_edges", "document")) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : *subs) {
      std::pair<std::string, std::string> edge{r.string(e, "child", "subsumption_edges[]"),
                                               r.string(e, "parent", "subsumption_edges[]")};
      if (!seen.insert(edge).second)
        r.problems.push_back("subsumption_edges: duplicate (" + edge.first + ", " + edge.second + ")");
      spec.subsumptions.push_back(edge);
    }
  }
  if (const auto* impl = r.array(root, "atom_implications", "document")) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : *impl) {
      std::pair<std::string, std::string> edge{r.string(e, "stronger", "atom_implications[]"),
                                               r.string(e, "weaker", "atom_implications[]")};
      if (!seen.insert(edge).second)
        r.problems.push_back("atom_implications: duplicate (" + edge.first + ", " + edge.second + ")");
      spec.atom_implications.push_back(edge);
    }
  }
  if (const auto* pm = r.field(root, "parameter_map", "document")) {
    if (!pm->is_object()) r.problems.push_back("parameter_map: expected an object");
    else
      for (const auto& [k, v] : pm->items()) {
        if (v.is_string()) spec.parameters[k] = v.get<std::string>();
        else r.problems.push_back("parameter_map." + k + ": expected a string");
      }
  }
  if (const auto* qs = r.array(root, "qos_specs", "document")) {
    for (const auto& e : *qs) {
      QoSSpec s;
      s.name = r.string(e, "name", "qos_specs[]");
      s.polarity = r.choice(e, "polarity", "qos_specs[" + s.name + "]",
                            {std::pair{"negative", Polarity::negative}, std::pair{"positive", Polarity::positive}});
      s.aggregation = r.choice(e, "aggregation", "qos_specs[" + s.name + "]",
                               {std::pair{"additive_critical_path", Aggregation::additive_critical_path},
                                std::pair{"multiplicative", Aggregation::multiplicative},
                                std::pair{"min_bottleneck", Aggregation::min_bottleneck}});
      doc.qos_specs.push_back(s);
    }
  }
  if (const auto* ss = r.array(root, "services", "document")) {
    for (const auto& e : *ss) {
      ServiceDescriptor s;
      s.id = r.string(e, "id", "services[]");
      const std::string where = "services[" + s.id + "]";
      s.inputs = r.string_set(e, "inputs", where);
      s.outputs = r.string_set(e, "outputs", where);
      s.method = r.string(e, "method", where, false);
      if (const auto* q = r.field(e, "qos", where)) {
        if (!q->is_object()) r.problems.push_back(where + ".qos: expected an object");
        else
          for (const auto& [k, v] : q->items()) s.qos[k] = r.number(v, where + ".qos." + k);
      }
      s.pre.atoms = r.string_set(e, "pre", where, false);
      s.post.atoms = r.string_set(e, "post", where, false);
      doc.services.push_back(std::move(s));
    }
  }
  if (const auto* qs = r.array(root, "queries", "document", false)) {
    for (const auto& e : *qs) {
      Query q;
      q.id = r.string(e, "id", "queries[]", false);
      const std::string where = "queries[" + q.id + "]";
      q.inputs = r.string_set(e, "inputs", where);
      q.outputs = r.string_set(e, "outputs", where);
      q.input_spec.atoms = r.string_set(e, "input_spec", where, false);
      q.output_req.atoms = r.string_set(e, "output_req", where, false);
      if (const auto* objs = r.array(e, "objectives", where, false))
        for (const auto& o : *objs)
          q.objectives.push_back(
              {r.string(o, "qos", where + ".objectives[]"),
               r.choice(o, "direction", where + ".objectives[]",
                        {std::pair{"minimize", Direction::minimize}, std::pair{"maximize", Direction::maximize}})});
      if (const auto* cons = r.array(e, "constraints", where, false))
        for (const auto& c : *cons) {
          Constraint k;
          k.qos = r.string(c, "qos", where + ".constraints[]");
          if (const auto* b = r.field(c, "bound", where + ".constraints[]"))
            k.bound = r.number(*b, where + ".constraints[].bound");
          q.constraints.push_back(k);
        }
      doc.queries.push_back(std::move(q));
    }
  }
  if (!r.problems.empty()) throw ValidationError(std::move(r.problems));

  doc.ontology = Ontology(std::move(spec));  // throws ValidationError on cycles etc.
  if (auto v = validate(doc); !v.empty()) throw ValidationError(std::move(v));
  return doc;
}

inline RepositoryDocument parse_document(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 0, col = 0;
    detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1, line, col);
    throw ParseError(e.what(), line, col);
  }
  return from_json(root);
}

inline RepositoryDocument load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_document(text);
}

inline void save(const RepositoryDocument& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << to_text(doc);
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

}  // namespace qosc
