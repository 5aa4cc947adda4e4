#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "brook/common.hpp"
#include "brook/dsl.hpp"

namespace brook {

enum class NodeKind { kOperation, kSharedLock, kExclusiveLock, kUnlock };

struct LockItem {
  int table = -1;
  LockMode mode = LockMode::kShared;

  bool operator==(const LockItem&) const = default;
};

struct SlwNode {
  int id = -1;
  NodeKind kind = NodeKind::kOperation;
  // Lock nodes: one item per table (several after combine_locks).
  // Unlock nodes: the tables released; mode is ignored.
  // Operation nodes: the single table touched.
  std::vector<LockItem> items;
  int chain = -1;
  int position = -1;
  int op_index = -1;
  bool atomic = false;

  bool is_lock() const { return kind == NodeKind::kSharedLock || kind == NodeKind::kExclusiveLock; }
  bool has_table(int t) const;
};

struct SlwChain {
  int template_index = -1;
  int path_id = 0;
  int instance = 0;
  std::vector<int> hops;
};

// Immutable inputs shared by every graph derived from one analysis.
struct GraphContext {
  std::vector<TableRef> schema;
  std::vector<TransactionTemplate> templates;
};

class SlwGraph {
 public:
  std::shared_ptr<const GraphContext> ctx;
  std::vector<SlwNode> nodes;
  std::vector<SlwChain> chains;
  // Undirected, stored with first < second, sorted.
  std::vector<std::pair<int, int>> w_edges;

  const TransactionTemplate& chain_template(int chain) const;
  const TemplatePath& chain_path(int chain) const;
  const TemplateOp& op(int node) const;
  std::string chain_label(int chain) const;
  const std::string& table_name(int table) const;

  std::vector<std::pair<int, int>> s_edges() const;
  bool has_w_edge(int a, int b) const;
  std::vector<int> lock_nodes(int chain) const;
  // Rebuilds node positions and chain membership from chain hop lists.
  void reindex();
  // Recomputes w-edges from lock nodes, modes and commutativity annotations.
  void rebuild_w_edges();
  // Lock node of `chain` covering table `t`, or -1.
  int lock_of(int chain, int table) const;
  // Unlock node of `chain` releasing table `t`, or -1.
  int unlock_of(int chain, int table) const;
  // Appends a fresh node and returns its id.
  int add_node(SlwNode n);
  // Canonical text used for hashing and tie-breaking.
  std::string serialize() const;
};

// True when lock nodes `a` and `b` (in different chains) conflict on some shared table:
// at least one side holds it exclusively and some pair of guarded operations, at least one
// a write, does not share a commutative group.
bool locks_conflict(const SlwGraph& g, int a, int b);

struct SlwCycle {
  // Lock nodes in traversal order: segment starts and ends alternate, i.e.
  // nodes[0] ->s nodes[1] -w- nodes[2] ->s nodes[3] -w- ... -w- nodes[0].
  std::vector<int> nodes;

  bool operator==(const SlwCycle&) const = default;
  bool operator<(const SlwCycle& o) const { return nodes < o.nodes; }
};

SlwGraph build_initial_slw_graph(const std::vector<TransactionTemplate>& templates,
                                 const std::vector<TableRef>& schema);

// Fast emptiness test used by the analyzer.
bool has_slw_cycle(const SlwGraph& g);

// Every simple SLW-cycle, rotated to start at its smallest segment-start node.
std::vector<SlwCycle> enumerate_slw_cycles(const SlwGraph& g, size_t limit = 100000);

// Minimal cycles (no other cycle's node set is a strict subset), reported once per
// combination of template paths regardless of which chain instance was traversed.
std::vector<SlwCycle> detect_slw_cycles(const SlwGraph& g);

SlwGraph combine_locks(const SlwGraph& g, const std::vector<int>& group);

std::string to_dot(const SlwGraph& g);

// Structural checks: lock before first use, unlock after last use, one mode per table.
std::vector<std::string> check_structure(const SlwGraph& g);

}  // namespace brook
