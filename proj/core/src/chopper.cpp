#include "brook/chopper.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

namespace brook {

ScGraph build_sc_graph(const SlwGraph& g) {
  ScGraph sc;
  std::vector<std::vector<int>> by_chain(g.chains.size());
  for (size_t c = 0; c < g.chains.size(); ++c) {
    SubTransaction cur;
    auto flush = [&]() {
      if (cur.hops.empty()) return;
      cur.id = static_cast<int>(sc.slices.size());
      cur.chain = static_cast<int>(c);
      cur.instance = g.chains[c].instance;
      cur.index = static_cast<int>(by_chain[c].size());
      by_chain[c].push_back(cur.id);
      sc.slices.push_back(std::move(cur));
      cur = SubTransaction{};
    };
    for (int id : g.chains[c].hops) {
      const SlwNode& n = g.nodes[static_cast<size_t>(id)];
      if (n.kind == NodeKind::kUnlock) {
        flush();
        continue;
      }
      cur.hops.push_back(id);
      if (n.is_lock()) cur.locks.push_back(id);
    }
    flush();
    for (size_t i = 1; i < by_chain[c].size(); ++i)
      sc.s_edges.emplace_back(by_chain[c][i - 1], by_chain[c][i]);
  }
  for (size_t a = 0; a < sc.slices.size(); ++a) {
    for (size_t b = a + 1; b < sc.slices.size(); ++b) {
      if (sc.slices[a].chain == sc.slices[b].chain) continue;
      bool conflict = false;
      for (int x : sc.slices[a].locks) {
        for (int y : sc.slices[b].locks)
          if (g.has_w_edge(x, y)) {
            conflict = true;
            break;
          }
        if (conflict) break;
      }
      if (conflict) sc.c_edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return sc;
}

bool detect_sc_cycles(const ScGraph& sc) {
  const size_t n = sc.slices.size();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, edge index)
  int e = 0;
  for (const auto& [a, b] : sc.s_edges) {
    adj[static_cast<size_t>(a)].push_back({b, e});
    adj[static_cast<size_t>(b)].push_back({a, e});
    ++e;
  }
  for (const auto& [a, b] : sc.c_edges) {
    adj[static_cast<size_t>(a)].push_back({b, e});
    adj[static_cast<size_t>(b)].push_back({a, e});
    ++e;
  }
  // An s-edge lies on a cycle iff its endpoints stay connected without it; such a
  // detour must leave the chain, so it uses a c-edge.
  for (size_t k = 0; k < sc.s_edges.size(); ++k) {
    auto [from, to] = sc.s_edges[k];
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(from);
    seen[static_cast<size_t>(from)] = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      if (v == to) return true;
      for (auto [u, idx] : adj[static_cast<size_t>(v)]) {
        if (idx == static_cast<int>(k) || seen[static_cast<size_t>(u)]) continue;
        seen[static_cast<size_t>(u)] = 1;
        q.push(u);
      }
    }
  }
  return false;
}

namespace {

// Ops of `chain` guarded by lock node `lock` (same table), by hop position.
std::vector<int> guarded_ops(const SlwGraph& g, int chain, int lock) {
  std::vector<int> out;
  const SlwNode& l = g.nodes[static_cast<size_t>(lock)];
  for (int id : g.chains[static_cast<size_t>(chain)].hops) {
    const SlwNode& n = g.nodes[static_cast<size_t>(id)];
    if (n.kind == NodeKind::kOperation && l.has_table(g.op(id).table_id)) out.push_back(id);
  }
  return out;
}

int op_position(const SlwGraph& g, int chain, int op_index) {
  for (int id : g.chains[static_cast<size_t>(chain)].hops) {
    const SlwNode& n = g.nodes[static_cast<size_t>(id)];
    if (n.kind == NodeKind::kOperation && n.op_index == op_index) return n.position;
  }
  return -1;
}

}  // namespace

bool respects_key_availability(const SlwGraph& g, int chain) {
  const auto& hops = g.chains[static_cast<size_t>(chain)].hops;
  std::vector<int> unlock_positions;
  for (int id : hops)
    if (g.nodes[static_cast<size_t>(id)].kind == NodeKind::kUnlock)
      unlock_positions.push_back(g.nodes[static_cast<size_t>(id)].position);
  for (int id : hops) {
    const SlwNode& l = g.nodes[static_cast<size_t>(id)];
    if (!l.is_lock()) continue;
    for (int x : guarded_ops(g, chain, id)) {
      for (int producer : g.op(x).depends_on) {
        int p = op_position(g, chain, producer);
        for (int u : unlock_positions)
          if (u > l.position && u < p) return false;
      }
    }
  }
  return true;
}

std::optional<SlwGraph> resolve_self_conflicts(const SlwGraph& g) {
  SlwGraph out = g;
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t c = 0; c < out.chains.size(); ++c) {
      auto& hops = out.chains[c].hops;
      auto first_unlock = std::find_if(hops.begin(), hops.end(), [&](int id) {
        return out.nodes[static_cast<size_t>(id)].kind == NodeKind::kUnlock;
      });
      if (first_unlock == hops.end()) continue;
      int cut = out.nodes[static_cast<size_t>(*first_unlock)].position;
      std::vector<int> hoist;
      for (int id : hops) {
        const SlwNode& n = out.nodes[static_cast<size_t>(id)];
        if (!n.is_lock() || n.position < cut) continue;
        bool self = false;
        for (const auto& [a, b] : out.w_edges) {
          int other = a == id ? b : b == id ? a : -1;
          if (other < 0) continue;
          const SlwNode& o = out.nodes[static_cast<size_t>(other)];
          if (out.chains[static_cast<size_t>(o.chain)].template_index == out.chains[c].template_index) {
            self = true;
            break;
          }
        }
        if (!self) continue;
        for (int x : guarded_ops(out, static_cast<int>(c), id))
          for (int producer : out.op(x).depends_on)
            if (op_position(out, static_cast<int>(c), producer) > cut) return std::nullopt;
        hoist.push_back(id);
      }
      if (hoist.empty()) continue;
      std::vector<int> rebuilt;
      for (int id : hops) {
        if (id == *first_unlock)
          rebuilt.insert(rebuilt.end(), hoist.begin(), hoist.end());
        if (std::find(hoist.begin(), hoist.end(), id) == hoist.end()) rebuilt.push_back(id);
      }
      hops = std::move(rebuilt);
      out.reindex();
      changed = true;
    }
  }
  if (has_slw_cycle(out)) return std::nullopt;
  return out;
}

std::string to_dot(const ScGraph& sc, const SlwGraph& g) {
  std::ostringstream os;
  os << "graph sc {\n  node [shape=box, fontsize=10];\n";
  std::vector<std::vector<int>> by_chain(g.chains.size());
  for (const auto& s : sc.slices) by_chain[static_cast<size_t>(s.chain)].push_back(s.id);
  for (size_t c = 0; c < g.chains.size(); ++c) {
    os << "  subgraph cluster_" << c << " {\n    label=\"" << g.chain_label(static_cast<int>(c))
       << "\";\n";
    for (int id : by_chain[c]) {
      const auto& s = sc.slices[static_cast<size_t>(id)];
      os << "    s" << id << " [label=\"" << g.chain_label(static_cast<int>(c)) << "." << s.index + 1
         << "\\n";
      for (size_t k = 0; k < s.hops.size(); ++k) {
        const SlwNode& n = g.nodes[static_cast<size_t>(s.hops[k])];
        if (k) os << " ";
        if (n.kind == NodeKind::kOperation) {
          const auto& op = g.op(n.id);
          os << to_string(op.kind)[0] << "(" << op.table << ")";
        } else {
          os << (n.kind == NodeKind::kExclusiveLock ? "XL(" : "L(");
          for (size_t i = 0; i < n.items.size(); ++i)
            os << (i ? "," : "") << g.table_name(n.items[i].table);
          os << ")";
        }
      }
      os << "\"];\n";
    }
    os << "  }\n";
  }
  for (const auto& [a, b] : sc.s_edges) os << "  s" << a << " -- s" << b << ";\n";
  for (const auto& [a, b] : sc.c_edges) os << "  s" << a << " -- s" << b << " [style=dashed];\n";
  os << "}\n";
  return os.str();
}

}  // namespace brook
