#pragma once

// Value types shared by every layer: QoS declarations, services, queries and
// composition plans.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "qosc/error.hpp"
#include "qosc/ontology.hpp"

namespace qosc {

enum class Polarity { positive, negative };
enum class Aggregation { additive_critical_path, multiplicative, min_bottleneck };
enum class Direction { maximize, minimize };

struct QoSSpec {
  std::string name;
  Polarity polarity = Polarity::negative;
  Aggregation aggregation = Aggregation::additive_critical_path;

  friend bool operator==(const QoSSpec&, const QoSSpec&) = default;
};

using QoSSpecs = std::vector<QoSSpec>;
using QoSVector = std::map<std::string, double>;

inline const QoSSpec* find_spec(const QoSSpecs& specs, const std::string& name) {
  auto it = std::find_if(specs.begin(), specs.end(), [&](const QoSSpec& s) { return s.name == name; });
  return it == specs.end() ? nullptr : &*it;
}

inline const QoSSpec& spec_of(const QoSSpecs& specs, const std::string& name) {
  if (const auto* s = find_spec(specs, name)) return *s;
  throw Error(ErrorKind::argument, "unknown QoS parameter '" + name + "'");
}

/// The four parameters used throughout the experiments.
inline QoSSpecs standard_qos_specs() {
  return {
      {"response_time", Polarity::negative, Aggregation::additive_critical_path},
      {"throughput", Polarity::positive, Aggregation::min_bottleneck},
      {"reliability", Polarity::positive, Aggregation::multiplicative},
      {"availability", Polarity::positive, Aggregation::multiplicative},
  };
}

// True if `a` is at least as good as `b` under the parameter's polarity.
inline bool no_worse(Polarity p, double a, double b) { return p == Polarity::negative ? a <= b : a >= b; }
inline bool strictly_better(Polarity p, double a, double b) { return p == Polarity::negative ? a < b : a > b; }

/// Non-strict: <= for negative parameters, >= for positive ones.
inline bool satisfies_bound(Polarity p, double value, double bound) { return no_worse(p, value, bound); }

struct ServiceDescriptor {
  std::string id;
  std::set<ParameterName> inputs;
  std::set<ParameterName> outputs;
  std::string method;
  QoSVector qos;
  Condition pre;
  Condition post;

  friend bool operator==(const ServiceDescriptor&, const ServiceDescriptor&) = default;
};

struct Objective {
  std::string qos;
  Direction direction = Direction::minimize;
  friend bool operator==(const Objective&, const Objective&) = default;
};

struct Constraint {
  std::string qos;
  double bound = 0.0;
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct Query {
  std::string id;
  std::set<ParameterName> inputs;
  std::set<ParameterName> outputs;
  Condition input_spec;
  Condition output_req;
  std::vector<Objective> objectives;
  std::vector<Constraint> constraints;

  friend bool operator==(const Query&, const Query&) = default;
};

/// Pseudo node standing for the query: source of query inputs and sink of
/// query outputs in a plan's producer edges.
inline const std::string kQueryNode = "@query";

struct ProducerEdge {
  std::string producer;
  std::string consumer;
  ConceptId concept_id;

  friend auto operator<=>(const ProducerEdge&, const ProducerEdge&) = default;
};

struct CompositionPlan {
  int level = 0;
  std::set<std::string> nodes;
  std::set<ProducerEdge> edges;
  std::map<std::string, QoSVector> node_qos;  // QoS lent to each node
  QoSVector qos;                              // aggregate

  friend bool operator==(const CompositionPlan&, const CompositionPlan&) = default;
};

inline bool satisfies_all(const QoSSpecs& specs, const QoSVector& qos, const std::vector<Constraint>& constraints) {
  for (const auto& c : constraints) {
    auto it = qos.find(c.qos);
    if (it == qos.end()) return false;
    if (!satisfies_bound(spec_of(specs, c.qos).polarity, it->second, c.bound)) return false;
  }
  return true;
}

inline std::vector<std::string> validate_qos(const QoSSpecs& specs, const QoSVector& qos, const std::string& owner) {
  std::vector<std::string> out;
  for (const auto& spec : specs) {
    auto it = qos.find(spec.name);
    if (it == qos.end()) {
      out.push_back(owner + ": missing QoS value '" + spec.name + "'");
      continue;
    }
    const double v = it->second;
    if (!std::isfinite(v)) {
      out.push_back(owner + ": non-finite QoS value '" + spec.name + "'");
    } else if (spec.aggregation == Aggregation::multiplicative) {
      if (v < 0.0 || v > 1.0) out.push_back(owner + ": QoS '" + spec.name + "' out of range [0,1]");
    } else if (v <= 0.0) {
      out.push_back(owner + ": QoS '" + spec.name + "' must be positive");
    }
  }
  for (const auto& [name, _] : qos)
    if (!find_spec(specs, name)) out.push_back(owner + ": undeclared QoS parameter '" + name + "'");
  return out;
}

inline std::vector<std::string> validate_condition(const Ontology& onto, const Condition& c, const std::string& owner) {
  std::vector<std::string> out;
  for (const auto& a : c.atoms) {
    if (a.empty()) out.push_back(owner + ": empty atom");
    else if (!onto.has_atom(a)) out.push_back(owner + ": unknown atom '" + a + "'");
  }
  return out;
}

/// Returns every violated invariant; empty means the service is well formed.
inline std::vector<std::string> validate_service(const Ontology& onto, const ServiceDescriptor& s,
                                                 const QoSSpecs& specs) {
  std::vector<std::string> out;
  const std::string owner = "service '" + s.id + "'";
  if (s.id.empty()) out.push_back("service with empty id");
  if (s.id == kQueryNode) out.push_back(owner + ": reserved id");
  if (s.inputs.empty()) out.push_back(owner + ": no inputs");
  if (s.outputs.empty()) out.push_back(owner + ": no outputs");
  for (const auto& p : s.inputs)
    if (!onto.has_parameter(p)) out.push_back(owner + ": unknown-parameter input '" + p + "'");
  for (const auto& p : s.outputs)
    if (!onto.has_parameter(p)) out.push_back(owner + ": unknown-parameter output '" + p + "'");
  auto pre = validate_condition(onto, s.pre, owner + " pre");
  auto post = validate_condition(onto, s.post, owner + " post");
  auto qos = validate_qos(specs, s.qos, owner);
  out.insert(out.end(), pre.begin(), pre.end());
  out.insert(out.end(), post.begin(), post.end());
  out.insert(out.end(), qos.begin(), qos.end());
  return out;
}

inline std::vector<std::string> validate_query(const Ontology& onto, const Query& q, const QoSSpecs& specs) {
  std::vector<std::string> out;
  const std::string owner = "query '" + q.id + "'";
  if (q.outputs.empty()) out.push_back(owner + ": no outputs");
  for (const auto& p : q.inputs)
    if (!onto.has_parameter(p)) out.push_back(owner + ": unknown-parameter input '" + p + "'");
  for (const auto& p : q.outputs)
    if (!onto.has_parameter(p)) out.push_back(owner + ": unknown-parameter output '" + p + "'");
  auto is = validate_condition(onto, q.input_spec, owner + " input_spec");
  auto orq = validate_condition(onto, q.output_req, owner + " output_req");
  out.insert(out.end(), is.begin(), is.end());
  out.insert(out.end(), orq.begin(), orq.end());
  for (const auto& o : q.objectives)
    if (!find_spec(specs, o.qos)) out.push_back(owner + ": objective on undeclared QoS '" + o.qos + "'");
  for (const auto& c : q.constraints) {
    if (!find_spec(specs, c.qos)) out.push_back(owner + ": constraint on undeclared QoS '" + c.qos + "'");
    else if (!std::isfinite(c.bound)) out.push_back(owner + ": non-finite bound on '" + c.qos + "'");
  }
  return out;
}

/// Checks the well-known parameter names carry their standard semantics.
inline std::vector<std::string> validate_qos_specs(const QoSSpecs& specs) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : specs) {
    if (s.name.empty()) out.push_back("QoS spec with empty name");
    if (!seen.insert(s.name).second) out.push_back("duplicate QoS spec '" + s.name + "'");
    for (const auto& std_spec : standard_qos_specs())
      if (std_spec.name == s.name && std_spec != s)
        out.push_back("QoS spec '" + s.name + "' must keep its standard polarity/aggregation");
  }
  return out;
}

}  // namespace qosc
