#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "brook/chopper.hpp"
#include "brook/dsl.hpp"
#include "brook/slw_graph.hpp"

namespace brook {

using Rational = boost::multiprecision::cpp_rational;

// Sum over lock nodes of (operations strictly between the lock and its unlock) divided by the
// locked table's population. Combined lock nodes contribute one term per member table.
Rational contention_score(const SlwGraph& g);

struct CycleFreeResult {
  std::vector<SlwGraph> graphs;
  std::size_t enumerated = 0;   // orderings built before the SLW filter
  std::size_t bound = 1;        // product of k! over template paths
};

// Every arrangement reachable by reordering the conflicting lock nodes of each template path
// (both instances alike), placing each as late as its successors allow, that is SLW-acyclic.
CycleFreeResult generate_cycle_free(const SlwGraph& g0);

struct GreedyTrace {
  std::vector<Rational> scores;  // score after each accepted move, starting with the input
  std::size_t attempted = 0;
};

SlwGraph greedy_early_lock_release(const SlwGraph& g, GreedyTrace* trace = nullptr);

// Number of unlock nodes not in the trailing run of unlocks at the end of their chain.
int early_unlock_count(const SlwGraph& g);

// Minimum score; ties go to more early unlocks, then to the smaller serialization.
// Throws std::invalid_argument on an empty set.
const SlwGraph& select_best_graph(const std::vector<SlwGraph>& candidates);

enum class HopKind { kAcquire, kOperation, kRelease };

struct PlanHop {
  HopKind kind = HopKind::kOperation;
  std::vector<LockItem> items;  // acquire / release
  bool atomic = false;
  int op_index = -1;            // operation

  bool operator==(const PlanHop&) const = default;
};

struct ExecutionPlan {
  std::string template_name;
  int path_id = 0;
  std::vector<PlanHop> hops;
  int abort_horizon = 0;  // index of the first release hop

  bool operator==(const ExecutionPlan&) const = default;
};

std::vector<ExecutionPlan> extract_plans(const SlwGraph& g);

// Canonical text form; table names come from `schema`.
std::string serialize_plans(const std::vector<ExecutionPlan>& plans,
                            const std::vector<TableRef>& schema,
                            const std::vector<TransactionTemplate>& templates);
std::vector<ExecutionPlan> parse_plans(std::string_view text, const std::vector<TableRef>& schema);
// One cluster per plan, hops chained in execution order; release hops are drawn as boxes.
std::string plans_to_dot(const std::vector<ExecutionPlan>& plans, const std::vector<TableRef>& schema,
                         const std::vector<TransactionTemplate>& templates);

// Slice count of a plan: runs of hops separated by release hops.
int slice_count(const ExecutionPlan& p);

struct AnalysisResult {
  Workload workload;  // Dynamic fallbacks are marked in place
  SlwGraph initial;
  SlwGraph chosen;
  ScGraph sc;
  std::vector<ExecutionPlan> plans;
  std::vector<std::string> dynamic_fallbacks;
  nlohmann::json report;
};

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AnalysisResult analyze(const Workload& workload);

}  // namespace brook
