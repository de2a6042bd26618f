#pragma once

// Seeded synthetic repositories and queries with a controlled mix of
// equivalent, dominance-related, IIOE-related and unrelated services.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qosc/abstraction.hpp"
#include "qosc/composition.hpp"
#include "qosc/error.hpp"
#include "qosc/model.hpp"
#include "qosc/repository.hpp"

namespace qosc {

struct Redundancy {
  double equivalent = 0.25;
  double dominant = 0.25;
  double iioe = 0.25;
  double unrelated = 0.25;
};

struct QoSDistribution {
  double mean = 0.0;
  double stddev = 1.0;
  double min = 0.0;
  double max = 1.0;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int n_concepts = 60;
  double subsumption_density = 0.5;
  int n_parameters = 80;
  int n_atoms = 12;
  int n_services = 100;
  Redundancy redundancy;
  std::map<std::string, QoSDistribution> qos_distributions = default_distributions();
  int n_queries = 5;
  double constraint_tightness = 0.5;
  QoSSpecs qos_specs = standard_qos_specs();

  static std::map<std::string, QoSDistribution> default_distributions() {
    return {{"response_time", {100.0, 40.0, 1.0, 1000.0}},
            {"throughput", {50.0, 20.0, 1.0, 500.0}},
            {"reliability", {0.9, 0.05, 0.5, 1.0}},
            {"availability", {0.9, 0.05, 0.5, 1.0}}};
  }
};

inline void check_config(const GeneratorConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::config_infeasible, m); };
  const auto& r = c.redundancy;
  for (double p : {r.equivalent, r.dominant, r.iioe, r.unrelated})
    if (p < 0.0 || p > 1.0) fail("redundancy fractions must lie in [0,1]");
  if (std::abs(r.equivalent + r.dominant + r.iioe + r.unrelated - 1.0) > 1e-9) fail("redundancy fractions must sum to 1");
  if (c.n_concepts < 1) fail("need at least one concept");
  if (c.n_parameters < c.n_concepts) fail("every concept needs a parameter: n_parameters < n_concepts");
  if (c.n_services < 0 || c.n_queries < 0 || c.n_atoms < 0) fail("counts must be non-negative");
  if (c.subsumption_density < 0.0 || c.subsumption_density > 1.0) fail("subsumption_density must lie in [0,1]");
  if (c.constraint_tightness < 0.0 || c.constraint_tightness > 1.0) fail("constraint_tightness must lie in [0,1]");
  if ((r.dominant > 0.0 || r.iioe > 0.0) && (c.n_concepts < 2 || c.subsumption_density <= 0.0))
    fail("dominance and IIOE variants need at least two related concepts");
  for (const auto& spec : c.qos_specs) {
    auto it = c.qos_distributions.find(spec.name);
    if (it == c.qos_distributions.end()) fail("no distribution for QoS '" + spec.name + "'");
    const auto& d = it->second;
    if (!(d.min < d.max) || d.stddev <= 0.0) fail("bad distribution for QoS '" + spec.name + "'");
    if (spec.aggregation == Aggregation::multiplicative && (d.min < 0.0 || d.max > 1.0))
      fail("QoS '" + spec.name + "' must be drawn within [0,1]");
    if (spec.aggregation != Aggregation::multiplicative && d.min <= 0.0)
      fail("QoS '" + spec.name + "' must be drawn above 0");
  }
}

inline GeneratorConfig config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.n_concepts = j.value("n_concepts", c.n_concepts);
    c.subsumption_density = j.value("subsumption_density", c.subsumption_density);
    c.n_parameters = j.value("n_parameters", std::max(c.n_parameters, c.n_concepts));
    c.n_atoms = j.value("n_atoms", c.n_atoms);
    c.n_services = j.value("n_services", c.n_services);
    c.n_queries = j.value("n_queries", c.n_queries);
    c.constraint_tightness = j.value("constraint_tightness", c.constraint_tightness);
    if (j.contains("redundancy")) {
      const auto& r = j.at("redundancy");
      c.redundancy = {r.value("equivalent", 0.0), r.value("dominant", 0.0), r.value("iioe", 0.0),
                      r.value("unrelated", 0.0)};
    }
    if (j.contains("qos_distributions"))
      for (const auto& [name, d] : j.at("qos_distributions").items())
        c.qos_distributions[name] = {d.at("mean").get<double>(), d.at("std").get<double>(),
                                     d.at("min").get<double>(), d.at("max").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("generator config: ") + e.what());
  }
  return c;
}

inline GeneratorConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("generator config: ") + e.what(), 0, 0);
  }
}

namespace detail {

class Generator {
 public:
  explicit Generator(const GeneratorConfig& c) : c_(c), rng_(c.seed) {}

  RepositoryDocument run() {
    check_config(c_);
    make_ontology();
    make_services();
    RepositoryDocument doc{Ontology(spec_), c_.qos_specs, services_, {}, {}};
    doc.metadata["generator"] = "qosc-gen";
    doc.metadata["seed"] = std::to_string(c_.seed);
    make_queries(doc);
    return doc;
  }

 private:
  static std::string name(const char* prefix, int i) {
    std::ostringstream os;
    os << prefix << std::setw(4) << std::setfill('0') << i;
    return os.str();
  }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  void make_ontology() {
    const int n = c_.n_concepts;
    parents_.assign(n, {});
    children_.assign(n, {});
    for (int i = 0; i < n; ++i) spec_.concepts.push_back(name("C", i));
    for (int i = 1; i < n; ++i)
      if (coin(c_.subsumption_density)) link(i, uniform(0, i - 1));
    if ((c_.redundancy.dominant > 0.0 || c_.redundancy.iioe > 0.0) && spec_.subsumptions.empty()) link(1, 0);
    for (int i = 0; i < n; ++i)
      if (!parents_[i].empty() || !children_[i].empty()) linked_.push_back(i);

    params_.assign(n, {});
    for (int i = 0; i < c_.n_parameters; ++i) {
      const int concept_index = i < n ? i : uniform(0, n - 1);
      const auto p = name("p", i);
      spec_.parameters[p] = spec_.concepts[concept_index];
      params_[concept_index].push_back(p);
    }
    for (int i = 0; i < c_.n_atoms; ++i) spec_.atoms.push_back(name("a", i));
    for (int i = 1; i < c_.n_atoms; ++i)
      if (coin(0.3)) spec_.atom_implications.emplace_back(spec_.atoms[i], spec_.atoms[uniform(0, i - 1)]);
  }

  void link(int child, int parent) {
    spec_.subsumptions.emplace_back(spec_.concepts[child], spec_.concepts[parent]);
    parents_[child].push_back(parent);
    children_[parent].push_back(child);
  }

  double draw(const QoSDistribution& d) {
    std::normal_distribution<double> normal(d.mean, d.stddev);
    for (int attempt = 0; attempt < 10'000; ++attempt) {
      const double v = normal(rng_);
      if (v >= d.min && v <= d.max && (v > 0.0 || d.min > 0.0)) return v;
    }
    return std::clamp(d.mean, d.min, d.max);
  }

  QoSVector fresh_qos() {
    QoSVector q;
    for (const auto& spec : c_.qos_specs) {
      // Rounded so documents round-trip through text unchanged.
      const double v = draw(c_.qos_distributions.at(spec.name));
      q[spec.name] = spec.aggregation == Aggregation::multiplicative ? std::round(v * 1e4) / 1e4
                                                                     : std::max(std::round(v * 100) / 100, 0.01);
    }
    return q;
  }

  int random_concept(double linked_bias = 0.5) {
    if (!linked_.empty() && coin(linked_bias)) return pick(linked_);
    return uniform(0, c_.n_concepts - 1);
  }

  // Concepts and atoms of a service before they become parameters.
  struct Shape {
    std::set<int> inputs, outputs;
    std::set<std::string> pre, post;
  };

  ServiceDescriptor realize(const Shape& s) {
    ServiceDescriptor d;
    d.id = name("svc", static_cast<int>(services_.size()));
    d.method = "op" + std::to_string(services_.size());
    for (int c : s.inputs) d.inputs.insert(pick(params_[c]));
    for (int c : s.outputs) d.outputs.insert(pick(params_[c]));
    d.pre.atoms = s.pre;
    d.post.atoms = s.post;
    d.qos = fresh_qos();
    return d;
  }

  Shape base_shape() {
    Shape s;
    const int n_in = uniform(1, std::min(2, c_.n_concepts));
    while (static_cast<int>(s.inputs.size()) < n_in) s.inputs.insert(random_concept());
    const int n_out = uniform(1, 2);
    for (int tries = 0; static_cast<int>(s.outputs.size()) < n_out && tries < 20; ++tries) {
      const int c = random_concept();
      if (!s.inputs.contains(c)) s.outputs.insert(c);
    }
    if (s.outputs.empty()) s.outputs.insert(random_concept());
    if (c_.n_atoms > 0) {
      if (coin(0.3)) s.pre.insert(pick(spec_.atoms));
      if (coin(0.5)) s.post.insert(pick(spec_.atoms));
    }
    return s;
  }

  // Swaps `from` for `to` in a concept set.
  static std::set<int> swapped(std::set<int> set, int from, int to) {
    set.erase(from);
    set.insert(to);
    return set;
  }

  std::optional<Shape> dominance_variant(const Shape& src) {
    if (coin(0.5)) {
      // Dominating: more general input where possible, one more output.
      Shape v = src;
      std::vector<int> general;
      for (int i : src.inputs)
        if (!parents_[i].empty()) general.push_back(i);
      if (!general.empty()) {
        const int i = pick(general);
        v.inputs = swapped(v.inputs, i, pick(parents_[i]));
      }
      for (int tries = 0; tries < 20; ++tries) {
        const int c = random_concept(0.0);
        if (!v.outputs.contains(c) && !v.inputs.contains(c)) {
          v.outputs.insert(c);
          return v;
        }
      }
      return std::nullopt;
    }
    // Dominated: one output made more general.
    std::vector<int> outs;
    for (int o : src.outputs)
      if (!parents_[o].empty()) outs.push_back(o);
    if (outs.empty()) return std::nullopt;
    Shape v = src;
    const int o = pick(outs);
    const int p = pick(parents_[o]);
    if (src.outputs.contains(p)) return std::nullopt;
    v.outputs = swapped(v.outputs, o, p);
    return v;
  }

  std::optional<Shape> iioe_variant(const Shape& src) {
    std::vector<std::pair<int, int>> moves;
    for (int i : src.inputs) {
      for (int p : parents_[i]) moves.emplace_back(i, p);
      for (int ch : children_[i]) moves.emplace_back(i, ch);
    }
    if (moves.empty()) return std::nullopt;
    const auto [from, to] = pick(moves);
    if (src.outputs.contains(to)) return std::nullopt;
    Shape v = src;
    v.inputs = swapped(v.inputs, from, to);
    return v;
  }

  void make_services() {
    const int n = c_.n_services;
    const auto& r = c_.redundancy;
    std::map<std::string, int> want{{"equivalent", static_cast<int>(std::lround(n * r.equivalent))},
                                    {"dominant", static_cast<int>(std::lround(n * r.dominant))},
                                    {"iioe", static_cast<int>(std::lround(n * r.iioe))}};
    int derived = want["equivalent"] + want["dominant"] + want["iioe"];
    int base = n - derived;
    if (n > 0 && base < 1) {
      base = 1;
      // Trim the largest derived share to make room for one base service.
      auto it = std::max_element(want.begin(), want.end(), [](auto& a, auto& b) { return a.second < b.second; });
      --it->second;
    }
    std::vector<Shape> bases;
    for (int i = 0; i < base && n > 0; ++i) {
      bases.push_back(base_shape());
      services_.push_back(realize(bases.back()));
    }
    std::vector<std::string> kinds;
    for (const auto& [kind, count] : want) kinds.insert(kinds.end(), static_cast<std::size_t>(std::max(count, 0)), kind);
    std::shuffle(kinds.begin(), kinds.end(), rng_);
    for (const auto& kind : kinds) {
      std::optional<Shape> v;
      for (int attempt = 0; attempt < 200 && !v; ++attempt) {
        const Shape& src = pick(bases);
        if (kind == "equivalent") v = src;
        else if (kind == "dominant") v = dominance_variant(src);
        else v = iioe_variant(src);
      }
      if (!v) throw Error(ErrorKind::config_infeasible, "cannot realise a " + kind + " variant in this ontology");
      services_.push_back(realize(*v));
    }
  }

  void make_queries(RepositoryDocument& doc) {
    const Ontology& onto = doc.ontology;
    const auto space = level0_space(onto, doc.services);
    for (int qi = 0; qi < c_.n_queries && !doc.services.empty(); ++qi) {
      std::optional<Query> made;
      for (int attempt = 0; attempt < 50 && !made; ++attempt) made = try_query(doc, space, qi);
      if (made) doc.queries.push_back(std::move(*made));
    }
  }

  std::optional<Query> try_query(const RepositoryDocument& doc, const ServiceSpace& space, int qi) {
    const Ontology& onto = doc.ontology;
    Query q;
    q.id = name("q", qi);
    const int seeds = uniform(1, 3);
    for (int k = 0; k < seeds; ++k) {
      const auto& s = pick(doc.services);
      q.inputs.insert(s.inputs.begin(), s.inputs.end());
      q.input_spec.atoms.insert(s.pre.atoms.begin(), s.pre.atoms.end());
    }
    auto dg = build_dependency_graph(onto, space, q);
    const auto input_concepts = onto.concepts_of(q.inputs);
    std::vector<std::pair<ConceptIndex, int>> reachable;  // concept, layer of first producer
    for (std::size_t k = 0; k < dg.layers.size(); ++k)
      for (auto s : dg.layers[k])
        for (auto o : space.nodes[s].outputs)
          if (!std::binary_search(input_concepts.begin(), input_concepts.end(), o)) reachable.emplace_back(o, k);
    if (reachable.empty()) return std::nullopt;
    // Prefer concepts only deeper layers produce.
    std::stable_sort(reachable.begin(), reachable.end(), [](auto& a, auto& b) { return a.second > b.second; });
    const int n_out = uniform(1, 2);
    for (int k = 0; k < n_out; ++k) {
      const auto idx = coin(0.6) ? 0 : uniform(0, static_cast<int>(reachable.size()) - 1);
      q.outputs.insert(pick(params_[reachable[static_cast<std::size_t>(idx)].first]));
    }
    if (coin(0.3)) {
      for (const auto& p : q.outputs) {
        const auto c = onto.parameter_concept(p);
        for (const auto& layer : dg.layers)
          for (auto s : layer)
            if (provides(onto, space.nodes[s].outputs, c) && !space.nodes[s].post.empty()) {
              q.output_req.atoms.insert(onto.atom_name(space.nodes[s].post.front()));
              goto requirement_done;
            }
      }
    }
  requirement_done:
    dg = build_dependency_graph(onto, space, q);
    q.objectives.push_back({"response_time", Direction::minimize});
    std::vector<std::string> constrained{"response_time"};
    if (find_spec(c_.qos_specs, "reliability") && coin(0.7)) constrained.push_back("reliability");
    for (const auto& name : constrained) {
      if (!find_spec(c_.qos_specs, name)) continue;
      const auto extremes = extreme_plans(dg, c_.qos_specs, name);
      if (!extremes) return std::nullopt;
      const double best = extremes->first.qos.at(name);
      const double worst = extremes->second.qos.at(name);
      const double bound = worst + c_.constraint_tightness * (best - worst);
      q.constraints.push_back({name, std::round(bound * 1e4) / 1e4});
    }
    if (!find_spec(c_.qos_specs, "response_time")) q.objectives.clear();
    return q;
  }

  const GeneratorConfig& c_;
  std::mt19937_64 rng_;
  OntologySpec spec_;
  std::vector<std::vector<int>> parents_, children_;
  std::vector<int> linked_;
  std::vector<std::vector<std::string>> params_;
  std::vector<ServiceDescriptor> services_;
};

}  // namespace detail

/// Deterministic for a given config (same seed, same document).
inline RepositoryDocument generate(const GeneratorConfig& config) { return detail::Generator(config).run(); }

struct RelationMix {
  std::size_t equivalent = 0;
  std::size_t dominant = 0;
  std::size_t iioe = 0;
  std::size_t unrelated = 0;
  std::size_t total() const { return equivalent + dominant + iioe + unrelated; }
};

/// Classifies each service, in document order, by its strongest relation to
/// any earlier service: equivalence, then dominance either way, then IIOE
/// either way, otherwise unrelated.
inline RelationMix realized_mix(const RepositoryDocument& doc) {
  const Ontology& onto = doc.ontology;
  const auto space = level0_space(onto, doc.services);
  RelationMix mix;
  for (std::size_t b = 0; b < space.size(); ++b) {
    int rank = 3;
    for (std::size_t a = 0; a < b && rank > 0; ++a) {
      const auto& x = space.nodes[a];
      const auto& y = space.nodes[b];
      if (equivalent(onto, x, y)) rank = 0;
      else if (rank > 1 && (dominates(onto, x, y) || dominates(onto, y, x))) rank = 1;
      else if (rank > 2 && (iioe(onto, x, y) || iioe(onto, y, x))) rank = 2;
    }
    switch (rank) {
      case 0: ++mix.equivalent; break;
      case 1: ++mix.dominant; break;
      case 2: ++mix.iioe; break;
      default: ++mix.unrelated; break;
    }
  }
  return mix;
}

}  // namespace qosc
