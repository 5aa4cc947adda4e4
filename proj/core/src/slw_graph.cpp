#include "brook/slw_graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace brook {

bool SlwNode::has_table(int t) const {
  return std::any_of(items.begin(), items.end(), [t](const LockItem& i) { return i.table == t; });
}

const TransactionTemplate& SlwGraph::chain_template(int chain) const {
  return ctx->templates.at(static_cast<size_t>(chains.at(static_cast<size_t>(chain)).template_index));
}

const TemplatePath& SlwGraph::chain_path(int chain) const {
  const auto& c = chains.at(static_cast<size_t>(chain));
  return chain_template(chain).paths.at(static_cast<size_t>(c.path_id));
}

const TemplateOp& SlwGraph::op(int node) const {
  const SlwNode& n = nodes.at(static_cast<size_t>(node));
  return chain_path(n.chain).ops.at(static_cast<size_t>(n.op_index));
}

std::string SlwGraph::chain_label(int chain) const {
  const auto& c = chains.at(static_cast<size_t>(chain));
  std::string s = chain_template(chain).name;
  if (chain_template(chain).paths.size() > 1) s += "/p" + std::to_string(c.path_id);
  s += "#" + std::to_string(c.instance + 1);
  return s;
}

const std::string& SlwGraph::table_name(int table) const {
  return ctx->schema.at(static_cast<size_t>(table)).name;
}

std::vector<std::pair<int, int>> SlwGraph::s_edges() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& c : chains)
    for (size_t i = 1; i < c.hops.size(); ++i) out.emplace_back(c.hops[i - 1], c.hops[i]);
  return out;
}

bool SlwGraph::has_w_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(w_edges.begin(), w_edges.end(), std::make_pair(a, b));
}

std::vector<int> SlwGraph::lock_nodes(int chain) const {
  std::vector<int> out;
  for (int id : chains.at(static_cast<size_t>(chain)).hops)
    if (nodes[static_cast<size_t>(id)].is_lock()) out.push_back(id);
  return out;
}

void SlwGraph::reindex() {
  for (size_t c = 0; c < chains.size(); ++c)
    for (size_t i = 0; i < chains[c].hops.size(); ++i) {
      SlwNode& n = nodes.at(static_cast<size_t>(chains[c].hops[i]));
      n.chain = static_cast<int>(c);
      n.position = static_cast<int>(i);
    }
}

int SlwGraph::lock_of(int chain, int table) const {
  for (int id : chains.at(static_cast<size_t>(chain)).hops) {
    const SlwNode& n = nodes[static_cast<size_t>(id)];
    if (n.is_lock() && n.has_table(table)) return id;
  }
  return -1;
}

int SlwGraph::unlock_of(int chain, int table) const {
  for (int id : chains.at(static_cast<size_t>(chain)).hops) {
    const SlwNode& n = nodes[static_cast<size_t>(id)];
    if (n.kind == NodeKind::kUnlock && n.has_table(table)) return id;
  }
  return -1;
}

int SlwGraph::add_node(SlwNode n) {
  n.id = static_cast<int>(nodes.size());
  nodes.push_back(std::move(n));
  return nodes.back().id;
}

bool locks_conflict(const SlwGraph& g, int a, int b) {
  const SlwNode& na = g.nodes.at(static_cast<size_t>(a));
  const SlwNode& nb = g.nodes.at(static_cast<size_t>(b));
  if (!na.is_lock() || !nb.is_lock() || na.chain == nb.chain) return false;
  const auto& ops_a = g.chain_path(na.chain).ops;
  const auto& ops_b = g.chain_path(nb.chain).ops;
  for (const auto& ia : na.items) {
    for (const auto& ib : nb.items) {
      if (ia.table != ib.table) continue;
      if (ia.mode == LockMode::kShared && ib.mode == LockMode::kShared) continue;
      for (const auto& x : ops_a) {
        if (x.table_id != ia.table) continue;
        for (const auto& y : ops_b) {
          if (y.table_id != ib.table) continue;
          if (!is_write(x.kind) && !is_write(y.kind)) continue;
          if (!x.commutative_group.empty() && x.commutative_group == y.commutative_group) continue;
          return true;
        }
      }
    }
  }
  return false;
}

void SlwGraph::rebuild_w_edges() {
  w_edges.clear();
  std::vector<int> locks;
  for (const auto& c : chains)
    for (int id : c.hops)
      if (nodes[static_cast<size_t>(id)].is_lock()) locks.push_back(id);
  std::sort(locks.begin(), locks.end());
  for (size_t i = 0; i < locks.size(); ++i)
    for (size_t j = i + 1; j < locks.size(); ++j)
      if (locks_conflict(*this, locks[i], locks[j])) w_edges.emplace_back(locks[i], locks[j]);
}

namespace {

std::string hop_token(const SlwGraph& g, int id) {
  const SlwNode& n = g.nodes[static_cast<size_t>(id)];
  std::string s;
  auto tables = [&](bool modes) {
    std::string t;
    for (size_t i = 0; i < n.items.size(); ++i) {
      if (i) t += ",";
      if (modes && n.items.size() > 1) t += std::string(to_string(n.items[i].mode)) + ":";
      t += g.table_name(n.items[i].table);
    }
    return t;
  };
  switch (n.kind) {
    case NodeKind::kOperation: {
      const TemplateOp& op = g.op(id);
      s = std::string(1, to_string(op.kind)[0]) + "(" + op.table + ")";
      break;
    }
    case NodeKind::kSharedLock: s = (n.atomic ? "AL(" : "L(") + tables(true) + ")"; break;
    case NodeKind::kExclusiveLock: s = (n.atomic ? "AXL(" : "XL(") + tables(true) + ")"; break;
    case NodeKind::kUnlock: s = "U(" + tables(false) + ")"; break;
  }
  return s;
}

}  // namespace

std::string SlwGraph::serialize() const {
  std::ostringstream os;
  for (size_t c = 0; c < chains.size(); ++c) {
    os << chain_label(static_cast<int>(c)) << ":";
    for (int id : chains[c].hops) {
      os << " " << hop_token(*this, id);
      if (nodes[static_cast<size_t>(id)].kind == NodeKind::kOperation)
        os << "@" << nodes[static_cast<size_t>(id)].op_index;
    }
    os << "\n";
  }
  return os.str();
}

SlwGraph build_initial_slw_graph(const std::vector<TransactionTemplate>& templates,
                                 const std::vector<TableRef>& schema) {
  auto ctx = std::make_shared<GraphContext>();
  ctx->schema = schema;
  for (const auto& t : templates)
    if (t.kind == TemplateKind::kStatic) ctx->templates.push_back(t);
  SlwGraph g;
  g.ctx = ctx;
  for (size_t ti = 0; ti < ctx->templates.size(); ++ti) {
    const auto& t = ctx->templates[ti];
    for (const auto& path : t.paths) {
      for (int inst = 0; inst < 2; ++inst) {
        SlwChain chain;
        chain.template_index = static_cast<int>(ti);
        chain.path_id = path.id;
        chain.instance = inst;
        std::map<int, LockMode> mode;
        for (const auto& op : path.ops) {
          LockMode m = is_write(op.kind) ? LockMode::kExclusive : LockMode::kShared;
          auto [it, fresh] = mode.emplace(op.table_id, m);
          if (!fresh && m == LockMode::kExclusive) it->second = m;
        }
        std::vector<int> lock_order;
        std::set<int> locked;
        for (size_t i = 0; i < path.ops.size(); ++i) {
          const auto& op = path.ops[i];
          if (locked.insert(op.table_id).second) {
            SlwNode ln;
            LockMode m = mode[op.table_id];
            ln.kind = m == LockMode::kExclusive ? NodeKind::kExclusiveLock : NodeKind::kSharedLock;
            ln.items = {{op.table_id, m}};
            chain.hops.push_back(g.add_node(ln));
            lock_order.push_back(op.table_id);
          }
          SlwNode on;
          on.kind = NodeKind::kOperation;
          on.items = {{op.table_id, LockMode::kShared}};
          on.op_index = static_cast<int>(i);
          chain.hops.push_back(g.add_node(on));
        }
        for (int table : lock_order) {
          SlwNode un;
          un.kind = NodeKind::kUnlock;
          un.items = {{table, LockMode::kShared}};
          chain.hops.push_back(g.add_node(un));
        }
        g.chains.push_back(std::move(chain));
      }
    }
  }
  g.reindex();
  g.rebuild_w_edges();
  return g;
}

namespace {

struct LockAdjacency {
  std::vector<int> locks;                 // lock node ids
  std::map<int, int> index;               // node id -> index into locks
  std::vector<std::vector<int>> later;    // s-moves: strictly later lock nodes in same chain
  std::vector<std::vector<int>> w;        // w-neighbours
};

LockAdjacency lock_adjacency(const SlwGraph& g) {
  LockAdjacency a;
  for (size_t c = 0; c < g.chains.size(); ++c)
    for (int id : g.lock_nodes(static_cast<int>(c))) {
      a.index[id] = static_cast<int>(a.locks.size());
      a.locks.push_back(id);
    }
  a.later.resize(a.locks.size());
  a.w.resize(a.locks.size());
  for (size_t c = 0; c < g.chains.size(); ++c) {
    auto ls = g.lock_nodes(static_cast<int>(c));
    for (size_t i = 0; i < ls.size(); ++i)
      for (size_t j = i + 1; j < ls.size(); ++j) a.later[a.index[ls[i]]].push_back(a.index[ls[j]]);
  }
  for (const auto& [x, y] : g.w_edges) {
    auto ix = a.index.find(x), iy = a.index.find(y);
    if (ix == a.index.end() || iy == a.index.end()) continue;
    a.w[ix->second].push_back(iy->second);
    a.w[iy->second].push_back(ix->second);
  }
  return a;
}

}  // namespace

bool has_slw_cycle(const SlwGraph& g) {
  LockAdjacency a = lock_adjacency(g);
  const size_t n = a.locks.size();
  // Product graph: state 2*i means "at lock i, next step is an s-move",
  // 2*i+1 means "at lock i, next step is a w-edge".
  std::vector<std::vector<int>> adj(2 * n);
  for (size_t i = 0; i < n; ++i) {
    for (int j : a.later[i]) adj[2 * i].push_back(2 * j + 1);
    for (int j : a.w[i]) adj[2 * i + 1].push_back(2 * j);
  }
  std::vector<int> color(2 * n, 0);
  std::vector<std::pair<int, size_t>> stack;
  for (size_t s = 0; s < 2 * n; ++s) {
    if (color[s]) continue;
    stack.push_back({static_cast<int>(s), 0});
    color[s] = 1;
    while (!stack.empty()) {
      auto& [v, k] = stack.back();
      if (k < adj[static_cast<size_t>(v)].size()) {
        int u = adj[static_cast<size_t>(v)][k++];
        if (color[static_cast<size_t>(u)] == 1) return true;
        if (color[static_cast<size_t>(u)] == 0) {
          color[static_cast<size_t>(u)] = 1;
          stack.push_back({u, 0});
        }
      } else {
        color[static_cast<size_t>(v)] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

std::vector<SlwCycle> enumerate_slw_cycles(const SlwGraph& g, size_t limit) {
  LockAdjacency a = lock_adjacency(g);
  const int n = static_cast<int>(a.locks.size());
  std::vector<SlwCycle> out;
  std::vector<char> used(static_cast<size_t>(n), 0);
  std::vector<int> path;
  // Cycles are anchored at their smallest segment-start lock (by node id).
  std::function<void(int, int)> segment_from = [&](int start, int x) {
    for (int y : a.later[static_cast<size_t>(x)]) {
      if (used[static_cast<size_t>(y)]) continue;
      used[static_cast<size_t>(y)] = 1;
      path.push_back(y);
      for (int z : a.w[static_cast<size_t>(y)]) {
        if (out.size() >= limit) break;
        if (z == start) {
          SlwCycle c;
          for (int p : path) c.nodes.push_back(a.locks[static_cast<size_t>(p)]);
          out.push_back(std::move(c));
          continue;
        }
        if (used[static_cast<size_t>(z)] || a.locks[static_cast<size_t>(z)] < a.locks[static_cast<size_t>(start)])
          continue;
        used[static_cast<size_t>(z)] = 1;
        path.push_back(z);
        segment_from(start, z);
        path.pop_back();
        used[static_cast<size_t>(z)] = 0;
      }
      path.pop_back();
      used[static_cast<size_t>(y)] = 0;
    }
  };
  for (int s = 0; s < n && out.size() < limit; ++s) {
    used[static_cast<size_t>(s)] = 1;
    path = {s};
    segment_from(s, s);
    used[static_cast<size_t>(s)] = 0;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SlwCycle> detect_slw_cycles(const SlwGraph& g) {
  auto all = enumerate_slw_cycles(g);
  std::vector<std::set<int>> sets;
  for (const auto& c : all) sets.emplace_back(c.nodes.begin(), c.nodes.end());
  std::vector<SlwCycle> minimal;
  std::set<std::vector<std::tuple<int, int, int, int>>> signatures;
  for (size_t i = 0; i < all.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < all.size() && !dominated; ++j) {
      if (i == j || sets[j].size() >= sets[i].size()) continue;
      dominated = std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end());
    }
    if (dominated) continue;
    // Instance-insensitive signature, canonical over rotations by segment.
    std::vector<std::tuple<int, int, int, int>> segs;
    for (size_t k = 0; k + 1 < all[i].nodes.size(); k += 2) {
      const SlwNode& s = g.nodes[static_cast<size_t>(all[i].nodes[k])];
      const SlwNode& e = g.nodes[static_cast<size_t>(all[i].nodes[k + 1])];
      const auto& ch = g.chains[static_cast<size_t>(s.chain)];
      segs.emplace_back(ch.template_index, ch.path_id, s.position, e.position);
    }
    auto best = segs;
    for (size_t r = 1; r < segs.size(); ++r) {
      std::rotate(segs.begin(), segs.begin() + 1, segs.end());
      best = std::min(best, segs);
    }
    if (signatures.insert(best).second) minimal.push_back(all[i]);
  }
  return minimal;
}

SlwGraph combine_locks(const SlwGraph& g, const std::vector<int>& group) {
  if (group.empty()) return g;
  int chain = g.nodes.at(static_cast<size_t>(group.front())).chain;
  for (int id : group) {
    const SlwNode& n = g.nodes.at(static_cast<size_t>(id));
    if (!n.is_lock()) throw std::invalid_argument("combine_locks: node is not a lock node");
    if (n.chain != chain) throw std::invalid_argument("combine_locks: group spans chains");
  }
  SlwGraph out = g;
  std::set<int> members(group.begin(), group.end());
  auto& hops = out.chains[static_cast<size_t>(chain)].hops;
  int keep = -1;
  for (int id : hops)
    if (members.count(id)) {
      keep = id;
      break;
    }
  if (members.size() == 1) return out;
  SlwNode& merged = out.nodes[static_cast<size_t>(keep)];
  for (int id : group) {
    if (id == keep) continue;
    for (const auto& it : g.nodes[static_cast<size_t>(id)].items) {
      auto same = std::find_if(merged.items.begin(), merged.items.end(),
                               [&](const LockItem& x) { return x.table == it.table; });
      if (same == merged.items.end()) merged.items.push_back(it);
      else if (it.mode == LockMode::kExclusive) same->mode = LockMode::kExclusive;
    }
  }
  merged.atomic = true;
  bool any_x = std::any_of(merged.items.begin(), merged.items.end(),
                           [](const LockItem& i) { return i.mode == LockMode::kExclusive; });
  merged.kind = any_x ? NodeKind::kExclusiveLock : NodeKind::kSharedLock;
  hops.erase(std::remove_if(hops.begin(), hops.end(),
                            [&](int id) { return id != keep && members.count(id); }),
             hops.end());
  std::set<std::pair<int, int>> edges;
  for (auto [x, y] : g.w_edges) {
    if (members.count(x)) x = keep;
    if (members.count(y)) y = keep;
    if (x == y) continue;
    edges.insert({std::min(x, y), std::max(x, y)});
  }
  out.w_edges.assign(edges.begin(), edges.end());
  out.reindex();
  return out;
}

std::string to_dot(const SlwGraph& g) {
  std::ostringstream os;
  os << "digraph slw {\n  rankdir=LR;\n  node [fontsize=10];\n";
  for (size_t c = 0; c < g.chains.size(); ++c) {
    os << "  subgraph cluster_" << c << " {\n    label=\"" << g.chain_label(static_cast<int>(c))
       << "\";\n";
    for (int id : g.chains[c].hops) {
      const SlwNode& n = g.nodes[static_cast<size_t>(id)];
      const char* shape = n.is_lock() ? "box" : n.kind == NodeKind::kUnlock ? "diamond" : "ellipse";
      os << "    n" << id << " [label=\"" << hop_token(g, id) << "\", shape=" << shape << "];\n";
    }
    os << "  }\n";
  }
  for (const auto& [a, b] : g.s_edges()) os << "  n" << a << " -> n" << b << ";\n";
  for (const auto& [a, b] : g.w_edges)
    os << "  n" << a << " -> n" << b << " [style=dashed, dir=none, constraint=false];\n";
  os << "}\n";
  return os.str();
}

std::vector<std::string> check_structure(const SlwGraph& g) {
  std::vector<std::string> errors;
  for (size_t c = 0; c < g.chains.size(); ++c) {
    std::map<int, LockMode> held;
    std::set<int> released, seen_lock;
    for (int id : g.chains[c].hops) {
      const SlwNode& n = g.nodes[static_cast<size_t>(id)];
      std::string where = g.chain_label(static_cast<int>(c)) + " hop " + std::to_string(n.position);
      if (n.is_lock()) {
        for (const auto& it : n.items) {
          if (!seen_lock.insert(it.table).second)
            errors.push_back(where + ": second lock node on " + g.table_name(it.table));
          held[it.table] = it.mode;
        }
      } else if (n.kind == NodeKind::kUnlock) {
        for (const auto& it : n.items) {
          if (!held.count(it.table)) errors.push_back(where + ": unlock of a table not held");
          held.erase(it.table);
          released.insert(it.table);
        }
      } else {
        const TemplateOp& op = g.op(id);
        auto h = held.find(op.table_id);
        if (h == held.end()) errors.push_back(where + ": operation without a held lock");
        else if (is_write(op.kind) && h->second != LockMode::kExclusive)
          errors.push_back(where + ": write under a shared lock");
      }
    }
    for (const auto& [t, m] : held)
      errors.push_back(g.chain_label(static_cast<int>(c)) + ": lock on " + g.table_name(t) +
                       " never released");
  }
  return errors;
}

}  // namespace brook
