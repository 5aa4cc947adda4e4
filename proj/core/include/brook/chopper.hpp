#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brook/slw_graph.hpp"

namespace brook {

struct SubTransaction {
  int id = -1;
  int chain = -1;
  int instance = 0;
  int index = 0;             // slice number within its chain, from 0
  std::vector<int> hops;     // node ids, unlock nodes excluded
  std::vector<int> locks;    // lock nodes acquired inside this slice
};

struct ScGraph {
  std::vector<SubTransaction> slices;
  std::vector<std::pair<int, int>> s_edges;  // consecutive slices of one chain instance
  std::vector<std::pair<int, int>> c_edges;  // undirected, first < second
};

ScGraph build_sc_graph(const SlwGraph& g);

// True iff some cycle uses at least one s-edge and at least one c-edge.
bool detect_sc_cycles(const ScGraph& sc);

// Hoists every lock node that sits in a non-first slice and conflicts with a lock node of
// another instance of the same template to the end of the first slice. Returns nullopt when
// a hoist would precede the operations producing the lock's keys or would create an
// SLW-cycle.
std::optional<SlwGraph> resolve_self_conflicts(const SlwGraph& g);

// Keys of lock nodes must be computable inside the slice that acquires the lock: no lock
// guards an operation whose key is produced after an intervening unlock node.
bool respects_key_availability(const SlwGraph& g, int chain);

std::string to_dot(const ScGraph& sc, const SlwGraph& g);

}  // namespace brook
