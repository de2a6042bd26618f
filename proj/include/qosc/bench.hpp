#pragma once

// Timing harness: dependency-graph construction and solving per abstraction
// level, medians over repetitions, CSV output.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qosc/abstraction.hpp"
#include "qosc/composition.hpp"
#include "qosc/error.hpp"
#include "qosc/refinement.hpp"
#include "qosc/repository.hpp"

namespace qosc {

inline const char* const kBenchHeader =
    "dataset,level,repo_services,dg_services,dg_build_ms,solve_ms,plan_count,objective_value,refinement,speedup";

enum class Backend { optimal_rt, optimal_throughput, constrained };

inline Backend parse_backend(const std::string& s) {
  if (s == "optimal-rt") return Backend::optimal_rt;
  if (s == "optimal-throughput") return Backend::optimal_throughput;
  if (s == "constrained") return Backend::constrained;
  throw Error(ErrorKind::argument, "unknown backend '" + s + "'");
}

struct BenchOptions {
  std::vector<int> levels{0, 1, 2, 3};
  int repetitions = 5;
  std::size_t max_queries = 0;  // 0: all queries of the dataset
  Backend backend = Backend::optimal_rt;
  std::int64_t deadline_ms = kDefaultDeadlineMs;
  bool count_plans = true;
};

struct BenchRow {
  std::string dataset;
  int level = 0;
  std::size_t repo_services = 0;
  std::size_t dg_services = 0;  // summed over queries
  double dg_build_ms = 0.0;     // median over queries of the per-query median
  double solve_ms = 0.0;
  std::string plan_count;  // summed over queries
  std::optional<double> objective_value;  // mean over solved queries
  std::string refinement;                 // outcome tallies, e.g. "satisfied:3;no-solution:1"
  std::optional<double> speedup;          // level-0 dg_build_ms / this row's
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

template <typename F>
double time_ms(F&& f) {
  const auto t0 = Clock::now();
  f();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct SolveOutcome {
  std::string outcome;
  std::optional<double> objective;
};

inline SolveOutcome solve_once(const RepositoryDocument& doc, const AbstractionHierarchy& h, const DependencyGraph& dg,
                               const Query& q, int level, const BenchOptions& o) {
  try {
    switch (o.backend) {
      case Backend::optimal_rt:
      case Backend::optimal_throughput: {
        const std::string name = o.backend == Backend::optimal_rt ? "response_time" : "throughput";
        const auto plan = optimal_single_qos(dg, h.specs, name, deadline_after(o.deadline_ms));
        return {"solved", plan.qos.at(name)};
      }
      case Backend::constrained: {
        const auto r = compose_with_refinement(doc, h, q, level, deadline_after(o.deadline_ms));
        if (!r.plan) return {"no-solution", std::nullopt};
        std::optional<double> obj;
        if (!q.objectives.empty()) obj = r.plan->qos.at(q.objectives.front().qos);
        std::string tag = r.trace.back().action == "solve" ? "solved" : "refined";
        if (r.level_used != level) tag = "reverted";
        return {tag, obj};
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::no_solution) return {"no-solution", std::nullopt};
    if (e.kind() == ErrorKind::timeout) return {"timeout", std::nullopt};
    throw;
  }
  return {"?", std::nullopt};
}

}  // namespace detail

inline std::vector<BenchRow> run_bench(const std::string& dataset, const RepositoryDocument& doc,
                                       const AbstractionHierarchy& h, const BenchOptions& o) {
  if (o.repetitions <= 0) throw Error(ErrorKind::argument, "repetitions must be positive");
  std::vector<const Query*> queries;
  for (const auto& q : doc.queries)
    if (o.max_queries == 0 || queries.size() < o.max_queries) queries.push_back(&q);

  std::vector<BenchRow> rows;
  for (int level : o.levels) {
    BenchRow row;
    row.dataset = dataset;
    row.level = level;
    row.repo_services = h.space(level).size();
    std::vector<double> build, solve, objectives;
    BigCount plans = 0;
    std::map<std::string, int> tally;
    for (const Query* q : queries) {
      std::vector<double> b, s;
      std::optional<DependencyGraph> dg;
      std::optional<detail::SolveOutcome> outcome;
      for (int r = 0; r < o.repetitions; ++r) {
        b.push_back(detail::time_ms([&] { dg = build_dependency_graph(doc.ontology, h.space(level), *q); }));
        s.push_back(detail::time_ms([&] { outcome = detail::solve_once(doc, h, *dg, *q, level, o); }));
      }
      build.push_back(median(b));
      solve.push_back(median(s));
      row.dg_services += dg->service_count();
      if (o.count_plans) plans += count_plans(*dg);
      ++tally[outcome->outcome];
      if (outcome->objective) objectives.push_back(*outcome->objective);
    }
    row.dg_build_ms = median(build);
    row.solve_ms = median(solve);
    row.plan_count = o.count_plans ? plans.str() : "";
    if (!objectives.empty()) {
      double sum = 0.0;
      for (double v : objectives) sum += v;
      row.objective_value = sum / static_cast<double>(objectives.size());
    }
    for (const auto& [k, n] : tally) row.refinement += (row.refinement.empty() ? "" : ";") + k + ":" + std::to_string(n);
    rows.push_back(std::move(row));
  }
  std::optional<double> base;
  for (const auto& r : rows)
    if (r.level == 0) base = r.dg_build_ms;
  for (auto& r : rows)
    if (base && r.dg_build_ms > 0.0) r.speedup = *base / r.dg_build_ms;
  return rows;
}

inline void write_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool header = true) {
  if (header) out << kBenchHeader << '\n';
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream os;
    os << std::setprecision(10) << *v;
    return os.str();
  };
  for (const auto& r : rows) {
    std::ostringstream ms;
    ms << std::fixed << std::setprecision(4) << r.dg_build_ms << ',' << r.solve_ms;
    out << r.dataset << ',' << r.level << ',' << r.repo_services << ',' << r.dg_services << ',' << ms.str() << ','
        << r.plan_count << ',' << opt(r.objective_value) << ',' << r.refinement << ',' << opt(r.speedup) << '\n';
  }
}

}  // namespace qosc
