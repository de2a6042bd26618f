// qosc: abstraction, composition, generation, validation and benchmarking.
//
// Exit status: 0 success, 2 load/parse/validation/usage error, 3 no solution,
// 4 deadline elapsed.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qosc/qosc.hpp"

namespace {

using namespace qosc;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoSolution = 3;
constexpr int kExitTimeout = 4;

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error(ErrorKind::io, "cannot write '" + out + "'");
  f << text;
}

std::int64_t default_deadline() {
  if (const char* env = std::getenv("QOSC_DEADLINE_MS")) {
    try {
      return std::stoll(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::argument, "QOSC_DEADLINE_MS is not an integer");
    }
  }
  return kDefaultDeadlineMs;
}

QoSVector parse_weights(const std::string& text) {
  QoSVector w;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::argument, "weights look like name=value,...");
    w[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return w;
}

Query select_query(const RepositoryDocument& doc, const std::string& repo_path, const std::string& selector,
                   const std::string& query_file) {
  if (!query_file.empty()) {
    std::ifstream in(query_file);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + query_file + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json q;
    try {
      q = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("query file: ") + e.what(), 0, 0);
    }
    // Validate the query against the repository it refers to.
    json root = to_json(doc);
    root["queries"] = json::array({q});
    return from_json(root).queries.front();
  }
  (void)repo_path;
  for (const auto& q : doc.queries)
    if (q.id == selector) return q;
  try {
    std::size_t used = 0;
    const auto idx = std::stoul(selector, &used);
    if (used == selector.size() && idx < doc.queries.size()) return doc.queries[idx];
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::argument, "no query '" + selector + "' in the repository");
}

int cmd_abstract(const std::string& repo, const std::string& out, const std::string& weights) {
  const auto doc = load(repo);
  const auto h = build_hierarchy(doc, parse_weights(weights));
  emit(hierarchy_report(h).dump(2) + "\n", out);
  return kExitOk;
}

struct ComposeArgs {
  std::string repo, query = "0", query_file, backend = "constrained", refine = "on", out;
  int level = 3;
  std::int64_t deadline_ms = -1;
};

int cmd_compose(const ComposeArgs& a) {
  const auto doc = load(a.repo);
  const auto h = build_hierarchy(doc);
  const Query q = select_query(doc, a.repo, a.query, a.query_file);
  const Backend backend = parse_backend(a.backend);
  if (a.refine != "on" && a.refine != "off") throw Error(ErrorKind::argument, "--refine takes on|off");
  if (a.level < 0 || a.level > 3) throw Error(ErrorKind::argument, "--level takes 0..3");
  const auto options = deadline_after(a.deadline_ms >= 0 ? a.deadline_ms : default_deadline());

  json report{{"query", q.id}, {"level_requested", a.level}, {"backend", a.backend}, {"refine", a.refine}};
  std::optional<CompositionPlan> plan;
  std::optional<CompositionPlan> abstract_plan;
  json trace = json::array();
  int level_used = a.level;

  const auto t0 = Clock::now();
  if (backend == Backend::constrained && a.refine == "on") {
    const auto r = compose_with_refinement(doc, h, q, a.level, options);
    plan = r.plan;
    abstract_plan = r.abstract_plan;
    level_used = r.level_used;
    for (const auto& s : r.trace) trace.push_back(to_json(s));
  } else {
    const auto dg = build_dependency_graph(doc.ontology, h.space(a.level), q);
    try {
      if (backend == Backend::constrained) {
        abstract_plan = find_constrained(dg, q, h.specs, options);
      } else {
        const std::string name = backend == Backend::optimal_rt ? "response_time" : "throughput";
        abstract_plan = optimal_single_qos(dg, h.specs, name, options);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::no_solution) throw;
    }
    if (abstract_plan) plan = reconstruct(*abstract_plan, h, dg);
  }
  const double elapsed = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  report["solve_ms"] = elapsed;
  report["trace"] = trace;
  if (!plan) {
    report["status"] = "no-solution";
    emit(report.dump(2) + "\n", a.out);
    return kExitNoSolution;
  }
  const auto dg0 = build_dependency_graph(doc.ontology, h.space(0), q);
  const auto violations = validate_plan(*plan, dg0, q, h.specs);
  report["status"] = violations.empty() ? "solution" : "constraint-violation";
  report["violations"] = violations;
  report["level_used"] = level_used;
  report["plan"] = to_json(*plan);
  report["qos"] = plan->qos;
  if (abstract_plan) report["abstract_plan"] = to_json(*abstract_plan);
  emit(report.dump(2) + "\n", a.out);
  // A plan that misses constraints counts as no solution for the caller.
  return violations.empty() ? kExitOk : kExitNoSolution;
}

int cmd_gen(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  auto c = load_config(config);
  if (seed) c.seed = *seed;
  const auto doc = generate(c);
  emit(to_text(doc), out);
  return kExitOk;
}

int cmd_validate(const std::string& repo) {
  try {
    const auto doc = load(repo);
    const auto s = summarize(doc);
    std::cout << "ok: " << s.services << " services, " << s.queries << " queries, " << s.concepts << " concepts\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cout << v << "\n";
    return kExitInput;
  }
}

struct BenchArgs {
  std::vector<std::string> repos;
  std::string levels = "0,1,2,3", backend = "optimal-rt", out;
  int repetitions = 5;
  std::size_t queries = 0;
  std::int64_t deadline_ms = -1;
  bool no_count = false;
};

int cmd_bench(const BenchArgs& a) {
  BenchOptions o;
  o.levels.clear();
  std::stringstream ss(a.levels);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int l = std::stoi(item);
    if (l < 0 || l > 3) throw Error(ErrorKind::argument, "levels must lie in 0..3");
    o.levels.push_back(l);
  }
  o.repetitions = a.repetitions;
  o.max_queries = a.queries;
  o.backend = parse_backend(a.backend);
  o.deadline_ms = a.deadline_ms >= 0 ? a.deadline_ms : default_deadline();
  o.count_plans = !a.no_count;
  if (o.repetitions <= 0) throw Error(ErrorKind::argument, "repetitions must be positive");

  std::ostringstream csv;
  bool header = true;
  for (const auto& path : a.repos) {
    const auto doc = load(path);
    const auto h = build_hierarchy(doc);
    auto name = path.substr(path.find_last_of('/') + 1);
    write_csv(csv, run_bench(name, doc, h, o), header);
    header = false;
  }
  if (header) csv << kBenchHeader << '\n';
  emit(csv.str(), a.out);
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::no_solution: return kExitNoSolution;
    case ErrorKind::timeout: return kExitTimeout;
    default: return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QoS-aware service composition over abstraction levels"};
  app.require_subcommand(1);

  std::string repo, out, weights;
  auto* abstract = app.add_subcommand("abstract", "build the abstraction hierarchy and report it");
  abstract->add_option("repo", repo, "repository file")->required();
  abstract->add_option("--out", out, "output file (default: stdout)");
  abstract->add_option("--weights", weights, "representative weights, name=value,...");

  ComposeArgs ca;
  auto* compose = app.add_subcommand("compose", "answer one query");
  compose->add_option("repo", ca.repo, "repository file")->required();
  compose->add_option("--query", ca.query, "query id or index")->capture_default_str();
  compose->add_option("--query-file", ca.query_file, "query as a separate JSON object");
  compose->add_option("--level", ca.level, "abstraction level to start from (0..3)")->capture_default_str();
  compose->add_option("--backend", ca.backend, "optimal-rt | optimal-throughput | constrained")->capture_default_str();
  compose->add_option("--refine", ca.refine, "on | off")->capture_default_str();
  compose->add_option("--deadline-ms", ca.deadline_ms, "search deadline (default: QOSC_DEADLINE_MS or 60000)");
  compose->add_option("--out", ca.out, "output file (default: stdout)");

  std::string config;
  std::optional<std::uint64_t> seed;
  auto* gen = app.add_subcommand("gen", "generate a synthetic repository");
  gen->add_option("config", config, "generator config file")->required();
  gen->add_option("--seed", seed, "override the configured seed");
  gen->add_option("--out", out, "output file (default: stdout)");

  auto* validate_cmd = app.add_subcommand("validate", "check a repository file");
  validate_cmd->add_option("repo", repo, "repository file")->required();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "time dependency-graph construction and solving per level");
  bench->add_option("repos", ba.repos, "repository files")->required();
  bench->add_option("--levels", ba.levels, "comma separated levels")->capture_default_str();
  bench->add_option("--repetitions", ba.repetitions, "timing repetitions per cell")->capture_default_str();
  bench->add_option("--queries", ba.queries, "use at most this many queries per dataset (0: all)");
  bench->add_option("--backend", ba.backend, "optimal-rt | optimal-throughput | constrained")->capture_default_str();
  bench->add_option("--deadline-ms", ba.deadline_ms, "per-query search deadline");
  bench->add_flag("--no-count", ba.no_count, "skip plan counting");
  bench->add_option("--out", ba.out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*abstract) return cmd_abstract(repo, out, weights);
    if (*compose) return cmd_compose(ca);
    if (*gen) return cmd_gen(config, out, seed);
    if (*validate_cmd) return cmd_validate(repo);
    if (*bench) return cmd_bench(ba);
  } catch (const Error& e) {
    std::cerr << "qosc: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "qosc: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
