#include "brook/analyzer.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace brook {

Rational contention_score(const SlwGraph& g) {
  Rational total = 0;
  for (size_t c = 0; c < g.chains.size(); ++c) {
    const auto& hops = g.chains[c].hops;
    // ops_before[i] = number of operation hops at positions < i
    std::vector<int> ops_before(hops.size() + 1, 0);
    for (size_t i = 0; i < hops.size(); ++i)
      ops_before[i + 1] = ops_before[i] + (g.nodes[static_cast<size_t>(hops[i])].kind == NodeKind::kOperation);
    for (int id : hops) {
      const SlwNode& lock = g.nodes[static_cast<size_t>(id)];
      if (!lock.is_lock()) continue;
      for (const auto& item : lock.items) {
        int u = g.unlock_of(static_cast<int>(c), item.table);
        if (u < 0)
          throw std::logic_error("lock on " + g.table_name(item.table) + " in " +
                                 g.chain_label(static_cast<int>(c)) + " has no unlock");
        int held = ops_before[static_cast<size_t>(g.nodes[static_cast<size_t>(u)].position)] -
                   ops_before[static_cast<size_t>(lock.position) + 1];
        total += Rational(held, static_cast<long long>(g.ctx->schema[static_cast<size_t>(item.table)].population));
      }
    }
  }
  return total;
}

namespace {

// Identifies a node within a chain independently of the instance.
using HopKey = std::pair<int, int>;  // (0 op / 1 lock / 2 unlock, op index or first table)

HopKey hop_key(const SlwNode& n) {
  if (n.kind == NodeKind::kOperation) return {0, n.op_index};
  return {n.kind == NodeKind::kUnlock ? 2 : 1, n.items.front().table};
}

std::vector<int> siblings(const SlwGraph& g, int chain) {
  std::vector<int> out;
  const auto& c = g.chains[static_cast<size_t>(chain)];
  for (size_t i = 0; i < g.chains.size(); ++i)
    if (static_cast<int>(i) != chain && g.chains[i].template_index == c.template_index &&
        g.chains[i].path_id == c.path_id)
      out.push_back(static_cast<int>(i));
  return out;
}

// Copies the hop arrangement of `chain` onto the other instances of its template path.
void mirror(SlwGraph& g, int chain) {
  std::vector<HopKey> layout;
  for (int id : g.chains[static_cast<size_t>(chain)].hops) layout.push_back(hop_key(g.nodes[static_cast<size_t>(id)]));
  for (int s : siblings(g, chain)) {
    std::map<HopKey, int> ids;
    for (int id : g.chains[static_cast<size_t>(s)].hops) ids[hop_key(g.nodes[static_cast<size_t>(id)])] = id;
    std::vector<int> hops;
    hops.reserve(layout.size());
    for (const auto& k : layout) hops.push_back(ids.at(k));
    g.chains[static_cast<size_t>(s)].hops = std::move(hops);
  }
}

struct ChainLayout {
  std::vector<int> ops;           // op node ids in order
  std::vector<int> locks;         // lock node ids in original order
  std::vector<int> first_use;     // per lock: index into ops
  std::vector<int> earliest;      // per lock: lowest legal gap
  std::vector<bool> conflicting;  // per lock
  std::vector<int> unlocks;       // unlock node ids
};

ChainLayout layout_of(const SlwGraph& g, int chain) {
  ChainLayout L;
  std::set<int> with_edges;
  for (const auto& [a, b] : g.w_edges) {
    with_edges.insert(a);
    with_edges.insert(b);
  }
  for (int id : g.chains[static_cast<size_t>(chain)].hops) {
    const SlwNode& n = g.nodes[static_cast<size_t>(id)];
    if (n.kind == NodeKind::kOperation) L.ops.push_back(id);
    else if (n.kind == NodeKind::kUnlock) L.unlocks.push_back(id);
    else L.locks.push_back(id);
  }
  for (int id : L.locks) {
    const SlwNode& n = g.nodes[static_cast<size_t>(id)];
    int first = -1;
    for (size_t i = 0; i < L.ops.size(); ++i)
      if (n.has_table(g.op(L.ops[i]).table_id)) {
        first = static_cast<int>(i);
        break;
      }
    if (first < 0) throw std::logic_error("lock node guards no operation");
    int earliest = 0;
    for (int dep : g.op(L.ops[static_cast<size_t>(first)]).depends_on) {
      for (size_t i = 0; i < L.ops.size(); ++i)
        if (g.nodes[static_cast<size_t>(L.ops[i])].op_index == dep) earliest = std::max(earliest, static_cast<int>(i) + 1);
    }
    L.first_use.push_back(first);
    L.earliest.push_back(earliest);
    L.conflicting.push_back(with_edges.count(id) > 0);
  }
  return L;
}

// Hop list for one acquisition order of the conflicting locks, or empty when the order would
// move a lock ahead of the operations producing its key.
std::vector<int> arrange(const SlwGraph& g, const ChainLayout& L, const std::vector<int>& perm) {
  const size_t nl = L.locks.size();
  std::vector<int> gap(nl, -1);
  int next_gap = static_cast<int>(L.ops.size());
  for (auto it = perm.rbegin(); it != perm.rend(); ++it) {
    int k = *it;
    gap[static_cast<size_t>(k)] = std::min(L.first_use[static_cast<size_t>(k)], next_gap);
    if (gap[static_cast<size_t>(k)] < L.earliest[static_cast<size_t>(k)]) return {};
    next_gap = gap[static_cast<size_t>(k)];
  }
  for (size_t k = 0; k < nl; ++k)
    if (!L.conflicting[k]) gap[k] = L.first_use[k];
  std::vector<int> hops;
  std::vector<int> order;  // lock indices in acquisition order
  for (size_t j = 0; j < L.ops.size(); ++j) {
    for (int k : perm)
      if (gap[static_cast<size_t>(k)] == static_cast<int>(j)) {
        hops.push_back(L.locks[static_cast<size_t>(k)]);
        order.push_back(k);
      }
    for (size_t k = 0; k < nl; ++k)
      if (!L.conflicting[k] && gap[k] == static_cast<int>(j)) {
        hops.push_back(L.locks[k]);
        order.push_back(static_cast<int>(k));
      }
    hops.push_back(L.ops[j]);
  }
  std::vector<int> unlocks = L.unlocks;
  auto rank = [&](int unlock) {
    int t = g.nodes[static_cast<size_t>(unlock)].items.front().table;
    for (size_t i = 0; i < order.size(); ++i)
      if (g.nodes[static_cast<size_t>(L.locks[static_cast<size_t>(order[i])])].has_table(t)) return static_cast<int>(i);
    return static_cast<int>(order.size());
  };
  std::stable_sort(unlocks.begin(), unlocks.end(), [&](int a, int b) { return rank(a) < rank(b); });
  hops.insert(hops.end(), unlocks.begin(), unlocks.end());
  return hops;
}

std::size_t factorial(std::size_t k) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

CycleFreeResult generate_cycle_free(const SlwGraph& g0) {
  CycleFreeResult result;
  // One representative chain (instance 0) per template path.
  std::vector<int> reps;
  for (size_t c = 0; c < g0.chains.size(); ++c)
    if (g0.chains[c].instance == 0) reps.push_back(static_cast<int>(c));

  std::vector<std::vector<std::vector<int>>> options(reps.size());
  for (size_t r = 0; r < reps.size(); ++r) {
    ChainLayout L = layout_of(g0, reps[r]);
    std::vector<int> movable;
    for (size_t k = 0; k < L.locks.size(); ++k)
      if (L.conflicting[k]) movable.push_back(static_cast<int>(k));
    result.bound *= factorial(movable.size());
    std::vector<int> perm = movable;
    do {
      auto hops = arrange(g0, L, perm);
      if (!hops.empty()) options[r].push_back(std::move(hops));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  std::vector<size_t> pick(reps.size(), 0);
  for (const auto& o : options)
    if (o.empty()) return result;
  while (true) {
    SlwGraph g = g0;
    for (size_t r = 0; r < reps.size(); ++r) {
      g.chains[static_cast<size_t>(reps[r])].hops = options[r][pick[r]];
      mirror(g, reps[r]);
    }
    g.reindex();
    ++result.enumerated;
    if (result.enumerated > result.bound) throw std::logic_error("cycle-free enumeration exceeded its bound");
    if (!has_slw_cycle(g)) result.graphs.push_back(std::move(g));
    size_t r = 0;
    for (; r < reps.size(); ++r) {
      if (++pick[r] < options[r].size()) break;
      pick[r] = 0;
    }
    if (r == reps.size()) break;
  }
  return result;
}

namespace {

std::optional<SlwGraph> try_move_unlock(const SlwGraph& cur, int chain, int unlock) {
  const auto& hops = cur.chains[static_cast<size_t>(chain)].hops;
  int pos = cur.nodes[static_cast<size_t>(unlock)].position;
  int target = -1;
  for (int i = pos - 1; i >= 0; --i)
    if (cur.nodes[static_cast<size_t>(hops[static_cast<size_t>(i)])].kind == NodeKind::kOperation) {
      target = i;
      break;
    }
  if (target < 0) return std::nullopt;
  const TemplateOp& passed = cur.op(hops[static_cast<size_t>(target)]);
  if (cur.nodes[static_cast<size_t>(unlock)].has_table(passed.table_id)) return std::nullopt;
  if (passed.may_user_abort) return std::nullopt;

  SlwGraph next = cur;
  auto& h = next.chains[static_cast<size_t>(chain)].hops;
  h.erase(h.begin() + pos);
  h.insert(h.begin() + target, unlock);
  mirror(next, chain);
  next.reindex();
  if (!respects_key_availability(next, chain)) return std::nullopt;
  auto resolved = resolve_self_conflicts(next);
  if (!resolved) return std::nullopt;
  if (detect_sc_cycles(build_sc_graph(*resolved))) return std::nullopt;
  return resolved;
}

}  // namespace

SlwGraph greedy_early_lock_release(const SlwGraph& g, GreedyTrace* trace) {
  SlwGraph cur = g;
  Rational score = contention_score(cur);
  if (trace) trace->scores.push_back(score);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t c = 0; c < cur.chains.size(); ++c) {
      if (cur.chains[c].instance != 0) continue;
      std::vector<int> unlocks;
      for (int id : cur.chains[c].hops)
        if (cur.nodes[static_cast<size_t>(id)].kind == NodeKind::kUnlock) unlocks.push_back(id);
      for (int u : unlocks) {
        while (true) {
          if (trace) ++trace->attempted;
          auto next = try_move_unlock(cur, static_cast<int>(c), u);
          if (!next) break;
          Rational s = contention_score(*next);
          if (s >= score) break;
          cur = std::move(*next);
          score = s;
          changed = true;
          if (trace) trace->scores.push_back(score);
        }
      }
    }
  }
  return cur;
}

int early_unlock_count(const SlwGraph& g) {
  int count = 0;
  for (const auto& c : g.chains) {
    size_t tail = c.hops.size();
    while (tail > 0 && g.nodes[static_cast<size_t>(c.hops[tail - 1])].kind == NodeKind::kUnlock) --tail;
    for (size_t i = 0; i < tail; ++i)
      if (g.nodes[static_cast<size_t>(c.hops[i])].kind == NodeKind::kUnlock) ++count;
  }
  return count;
}

const SlwGraph& select_best_graph(const std::vector<SlwGraph>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_best_graph: no candidates");
  size_t best = 0;
  Rational best_score = contention_score(candidates[0]);
  int best_early = early_unlock_count(candidates[0]);
  std::string best_text = candidates[0].serialize();
  for (size_t i = 1; i < candidates.size(); ++i) {
    Rational s = contention_score(candidates[i]);
    if (s > best_score) continue;
    int early = early_unlock_count(candidates[i]);
    std::string text = candidates[i].serialize();
    bool better = s < best_score || early > best_early || (early == best_early && text < best_text);
    if (!better) continue;
    best = i;
    best_score = s;
    best_early = early;
    best_text = std::move(text);
  }
  return candidates[best];
}

std::vector<ExecutionPlan> extract_plans(const SlwGraph& g) {
  std::vector<ExecutionPlan> plans;
  for (size_t c = 0; c < g.chains.size(); ++c) {
    if (g.chains[c].instance != 0) continue;
    ExecutionPlan p;
    p.template_name = g.chain_template(static_cast<int>(c)).name;
    p.path_id = g.chains[c].path_id;
    for (int id : g.chains[c].hops) {
      const SlwNode& n = g.nodes[static_cast<size_t>(id)];
      PlanHop h;
      if (n.kind == NodeKind::kOperation) {
        h.kind = HopKind::kOperation;
        h.op_index = n.op_index;
      } else {
        h.kind = n.kind == NodeKind::kUnlock ? HopKind::kRelease : HopKind::kAcquire;
        h.items = n.items;
        h.atomic = n.atomic;
        if (h.kind == HopKind::kRelease)
          for (auto& it : h.items) it.mode = LockMode::kShared;
      }
      p.hops.push_back(std::move(h));
    }
    // Adjacent releases form one release event.
    std::vector<PlanHop> merged;
    for (auto& h : p.hops) {
      if (h.kind == HopKind::kRelease && !merged.empty() && merged.back().kind == HopKind::kRelease) {
        merged.back().items.insert(merged.back().items.end(), h.items.begin(), h.items.end());
        continue;
      }
      merged.push_back(std::move(h));
    }
    p.hops = std::move(merged);
    p.abort_horizon = static_cast<int>(p.hops.size());
    for (size_t i = 0; i < p.hops.size(); ++i)
      if (p.hops[i].kind == HopKind::kRelease) {
        p.abort_horizon = static_cast<int>(i);
        break;
      }
    plans.push_back(std::move(p));
  }
  return plans;
}

int slice_count(const ExecutionPlan& p) {
  int slices = 0;
  bool open = false;
  for (const auto& h : p.hops) {
    if (h.kind == HopKind::kRelease) {
      open = false;
      continue;
    }
    if (!open) ++slices;
    open = true;
  }
  return slices;
}

std::string serialize_plans(const std::vector<ExecutionPlan>& plans, const std::vector<TableRef>& schema,
                            const std::vector<TransactionTemplate>& templates) {
  auto name = [&](int t) -> const std::string& { return schema.at(static_cast<size_t>(t)).name; };
  std::ostringstream os;
  for (const auto& p : plans) {
    const TransactionTemplate* tmpl = nullptr;
    for (const auto& t : templates)
      if (t.name == p.template_name) tmpl = &t;
    os << "plan " << p.template_name << " path=" << p.path_id << " horizon=" << p.abort_horizon << "\n";
    for (const auto& h : p.hops) {
      switch (h.kind) {
        case HopKind::kAcquire:
          if (h.atomic) {
            os << "  acquire-atomic";
            for (const auto& it : h.items) os << " " << to_string(it.mode) << ":" << name(it.table);
          } else {
            os << "  acquire " << to_string(h.items.front().mode) << " " << name(h.items.front().table);
          }
          break;
        case HopKind::kOperation: {
          os << "  op " << h.op_index;
          if (tmpl) {
            const auto& op = tmpl->paths.at(static_cast<size_t>(p.path_id)).ops.at(static_cast<size_t>(h.op_index));
            os << " " << to_string(op.kind) << " " << op.table;
          }
          break;
        }
        case HopKind::kRelease:
          os << "  release";
          for (const auto& it : h.items) os << " " << name(it.table);
          break;
      }
      os << "\n";
    }
    os << "end\n";
  }
  return os.str();
}

std::string plans_to_dot(const std::vector<ExecutionPlan>& plans, const std::vector<TableRef>& schema,
                         const std::vector<TransactionTemplate>& templates) {
  std::istringstream text(serialize_plans(plans, schema, templates));
  std::ostringstream os;
  os << "digraph plans {\n  rankdir=LR;\n  node [fontname=\"Helvetica\", fontsize=10];\n";
  std::string line;
  int plan = -1, hop = 0;
  while (std::getline(text, line)) {
    if (line.rfind("plan ", 0) == 0) {
      ++plan;
      hop = 0;
      os << "  subgraph cluster_" << plan << " {\n    label=\"" << line.substr(5) << "\";\n";
    } else if (line == "end") {
      os << "  }\n";
    } else {
      std::string label = line.substr(line.find_first_not_of(' '));
      const char* shape = label.rfind("release", 0) == 0 ? "box" : label.rfind("op", 0) == 0 ? "ellipse" : "diamond";
      os << "    p" << plan << "_" << hop << " [label=\"" << label << "\", shape=" << shape << "];\n";
      if (hop > 0) os << "    p" << plan << "_" << hop - 1 << " -> p" << plan << "_" << hop << ";\n";
      ++hop;
    }
  }
  os << "}\n";
  return os.str();
}

std::vector<ExecutionPlan> parse_plans(std::string_view text, const std::vector<TableRef>& schema) {
  auto table_id = [&](const std::string& n, int line) {
    for (size_t i = 0; i < schema.size(); ++i)
      if (schema[i].name == n) return static_cast<int>(i);
    throw DslError(line, 1, "unknown table '" + n + "' in plan");
  };
  auto mode_of = [](const std::string& m, int line) {
    if (m == "S") return LockMode::kShared;
    if (m == "X") return LockMode::kExclusive;
    throw DslError(line, 1, "bad lock mode '" + m + "'");
  };
  std::vector<ExecutionPlan> plans;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  ExecutionPlan* cur = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream ls(raw);
    std::string word;
    if (!(ls >> word)) continue;
    if (word == "plan") {
      plans.emplace_back();
      cur = &plans.back();
      std::string path, horizon;
      ls >> cur->template_name >> path >> horizon;
      if (path.rfind("path=", 0) != 0 || horizon.rfind("horizon=", 0) != 0)
        throw DslError(line, 1, "expected 'plan <name> path=<n> horizon=<n>'");
      cur->path_id = std::stoi(path.substr(5));
      cur->abort_horizon = std::stoi(horizon.substr(8));
      continue;
    }
    if (!cur) throw DslError(line, 1, "hop outside a plan block");
    if (word == "end") {
      cur = nullptr;
      continue;
    }
    PlanHop h;
    if (word == "acquire") {
      std::string m, t;
      ls >> m >> t;
      h.kind = HopKind::kAcquire;
      h.items.push_back({table_id(t, line), mode_of(m, line)});
    } else if (word == "acquire-atomic") {
      h.kind = HopKind::kAcquire;
      h.atomic = true;
      std::string item;
      while (ls >> item) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw DslError(line, 1, "expected <mode>:<table>");
        h.items.push_back({table_id(item.substr(colon + 1), line), mode_of(item.substr(0, colon), line)});
      }
    } else if (word == "op") {
      h.kind = HopKind::kOperation;
      if (!(ls >> h.op_index)) throw DslError(line, 1, "expected op index");
    } else if (word == "release") {
      h.kind = HopKind::kRelease;
      std::string t;
      while (ls >> t) h.items.push_back({table_id(t, line), LockMode::kShared});
    } else {
      throw DslError(line, 1, "unknown plan hop '" + word + "'");
    }
    cur->hops.push_back(std::move(h));
  }
  if (cur) throw DslError(line, 1, "unterminated plan block");
  return plans;
}

namespace {

std::string rational_text(const Rational& r) { return r.str(); }

// Template whose removal is most likely to break the remaining cycles.
std::string most_cyclic_template(const SlwGraph& g) {
  std::map<std::string, int> hits;
  for (const auto& cyc : detect_slw_cycles(g)) {
    std::set<std::string> names;
    for (int id : cyc.nodes) names.insert(g.chain_template(g.nodes[static_cast<size_t>(id)].chain).name);
    for (const auto& n : names) ++hits[n];
  }
  std::string best;
  int most = 0;
  for (const auto& [name, n] : hits)
    if (n > most) {
      most = n;
      best = name;
    }
  return best;
}

}  // namespace

AnalysisResult analyze(const Workload& workload) {
  AnalysisResult res;
  res.workload = workload;
  auto errors = validate_schema(workload.templates, workload.schema);
  if (!errors.empty()) {
    std::string msg = "schema validation failed:";
    for (const auto& e : errors) msg += " [" + e.template_name + "] " + e.reason + ";";
    throw AnalysisError(msg);
  }

  CycleFreeResult cf;
  while (true) {
    res.initial = build_initial_slw_graph(res.workload.templates, res.workload.schema);
    cf = generate_cycle_free(res.initial);
    if (!cf.graphs.empty()) break;
    std::string victim = most_cyclic_template(res.initial);
    if (victim.empty()) throw AnalysisError("no cycle-free arrangement and no template to demote");
    for (auto& t : res.workload.templates)
      if (t.name == victim) t.kind = TemplateKind::kDynamic;
    res.dynamic_fallbacks.push_back(victim);
  }

  std::vector<SlwGraph> released;
  released.reserve(cf.graphs.size());
  std::size_t attempts = 0;
  for (const auto& g : cf.graphs) {
    GreedyTrace trace;
    released.push_back(greedy_early_lock_release(g, &trace));
    attempts += trace.attempted;
  }
  res.chosen = select_best_graph(released);
  res.sc = build_sc_graph(res.chosen);
  if (has_slw_cycle(res.chosen)) throw AnalysisError("chosen graph has an SLW-cycle");
  if (detect_sc_cycles(res.sc)) throw AnalysisError("chosen graph has an SC-cycle");
  auto structure = check_structure(res.chosen);
  if (!structure.empty()) throw AnalysisError("chosen graph is malformed: " + structure.front());
  res.plans = extract_plans(res.chosen);

  auto& r = res.report;
  r["templates"] = nlohmann::json::array();
  for (const auto& t : res.workload.templates)
    r["templates"].push_back({{"name", t.name},
                              {"kind", t.kind == TemplateKind::kStatic ? "static" : "dynamic"},
                              {"paths", t.paths.size()}});
  r["dynamic_fallbacks"] = res.dynamic_fallbacks;
  r["initial_cycles"] = detect_slw_cycles(res.initial).size();
  r["candidates"] = {{"bound", cf.bound},
                     {"enumerated", cf.enumerated},
                     {"cycle_free", cf.graphs.size()},
                     {"greedy_attempts", attempts}};
  Rational initial_score = contention_score(res.initial);
  Rational chosen_score = contention_score(res.chosen);
  r["score"] = {{"initial", rational_text(initial_score)},
                {"initial_value", initial_score.convert_to<double>()},
                {"chosen", rational_text(chosen_score)},
                {"chosen_value", chosen_score.convert_to<double>()}};
  r["chosen_graph"] = res.chosen.serialize();
  r["sc_graph"] = {{"slices", res.sc.slices.size()},
                   {"s_edges", res.sc.s_edges.size()},
                   {"c_edges", res.sc.c_edges.size()},
                   {"sc_cycle", false}};
  r["plans"] = nlohmann::json::array();
  for (const auto& p : res.plans)
    r["plans"].push_back({{"template", p.template_name},
                          {"path", p.path_id},
                          {"hops", p.hops.size()},
                          {"slices", slice_count(p)},
                          {"abort_horizon", p.abort_horizon}});
  return res;
}

}  // namespace brook
