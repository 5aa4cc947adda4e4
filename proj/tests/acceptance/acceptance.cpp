// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion names (AC1 ... AC10) as
// arguments to run a subset.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "brook/bench.hpp"
#include "brook/embedded_dsl.hpp"
#include "oracles.hpp"

using namespace brook;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool cond, const std::string& what) {
    if (!cond) pass = false;
    if (!cond) notes.push_back("failed: " + what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(prec);
  ss << v;
  return ss.str();
}

const ExecutionPlan* plan_named(const std::vector<ExecutionPlan>& plans, const std::string& name) {
  for (const auto& p : plans)
    if (p.template_name == name) return &p;
  return nullptr;
}

bool hop_has_table(const PlanHop& h, int table) {
  return std::any_of(h.items.begin(), h.items.end(), [&](const LockItem& i) { return i.table == table; });
}

int find_hop(const ExecutionPlan& p, HopKind kind, int table) {
  for (size_t i = 0; i < p.hops.size(); ++i)
    if (p.hops[i].kind == kind && hop_has_table(p.hops[i], table)) return static_cast<int>(i);
  return -1;
}

const TemplateOp& op_of(const Workload& w, const ExecutionPlan& p, int op) {
  const auto* t = w.find(p.template_name);
  return t->paths.at(static_cast<size_t>(p.path_id)).ops.at(static_cast<size_t>(op));
}

// Hop index of the last write to `table`, or -1.
int last_write(const Workload& w, const ExecutionPlan& p, int table) {
  int last = -1;
  for (size_t i = 0; i < p.hops.size(); ++i) {
    const auto& h = p.hops[i];
    if (h.kind != HopKind::kOperation) continue;
    const auto& op = op_of(w, p, h.op_index);
    if (op.table_id == table && is_write(op.kind)) last = static_cast<int>(i);
  }
  return last;
}

// True when `release` comes before any operation that follows hop `after`.
bool released_by_next_op(const ExecutionPlan& p, int release, int after) {
  if (release < 0) return false;
  if (release < after) return true;
  for (int i = after + 1; i < release; ++i)
    if (p.hops[static_cast<size_t>(i)].kind == HopKind::kOperation) return false;
  return true;
}

int first_release(const ExecutionPlan& p) {
  for (size_t i = 0; i < p.hops.size(); ++i)
    if (p.hops[i].kind == HopKind::kRelease) return static_cast<int>(i);
  return -1;
}

// No table is locked twice, and tables a plan writes are locked exclusively.
bool exclusive_for_writes(const Workload& w, const ExecutionPlan& p) {
  std::set<int> seen;
  for (const auto& h : p.hops) {
    if (h.kind != HopKind::kAcquire) continue;
    for (const auto& item : h.items) {
      if (!seen.insert(item.table).second) return false;
      bool written = false;
      for (const auto& o : p.hops)
        if (o.kind == HopKind::kOperation) {
          const auto& op = op_of(w, p, o.op_index);
          written = written || (op.table_id == item.table && is_write(op.kind));
        }
      if (written && item.mode != LockMode::kExclusive) return false;
    }
  }
  return true;
}

Outcome golden(const char* file, const AnalysisResult& r) {
  Outcome o;
  std::string expected = read_file(std::string(BROOK_GOLDEN_DIR) + "/" + file);
  std::string got = serialize_plans(r.plans, r.workload.schema, r.workload.templates);
  o.require(!expected.empty(), std::string("golden file ") + file + " readable");
  o.require(got == expected, std::string("plans match ") + file);
  o.require(parse_plans(expected, r.workload.schema) == r.plans, "golden parses back to the same plans");
  o.require(!detect_sc_cycles(build_sc_graph(r.chosen)), "SC-acyclic");
  o.require(!has_slw_cycle(r.chosen), "SLW-acyclic");
  o.require(r.dynamic_fallbacks.empty(), "no template demoted to dynamic");
  return o;
}

Outcome ac1() {
  AnalysisResult r = analyze(parse_workload(store_dsl()));
  Outcome o = golden("store.plan", r);
  const Workload& w = r.workload;
  int listings = w.table_index("Listings"), items = w.table_index("Items"), players = w.table_index("Players");
  const auto* add = plan_named(r.plans, "AddListing");
  const auto* buy = plan_named(r.plans, "BuyListing");
  o.require(add && buy, "AddListing and BuyListing plans present");
  if (!add || !buy) return o;

  int l = find_hop(*add, HopKind::kAcquire, listings);
  o.require(l == 0 && add->hops[0].items[0].mode == LockMode::kExclusive, "AddListing takes X Listings first");
  o.require(l < find_hop(*add, HopKind::kAcquire, items) && l < find_hop(*add, HopKind::kAcquire, players),
            "Listings lock precedes Items and Players");

  bool excl = true;
  for (const auto& p : r.plans) excl = excl && exclusive_for_writes(w, p);
  o.require(excl, "written tables locked exclusively, one lock per table");
  bool buy_excl = true;
  for (const auto& h : buy->hops)
    if (h.kind == HopKind::kAcquire)
      for (const auto& item : h.items) buy_excl = buy_excl && item.mode == LockMode::kExclusive;
  o.require(buy_excl, "BuyListing locks are all X");

  int items_write = last_write(w, *buy, items);
  o.require(items_write >= 0 && find_hop(*buy, HopKind::kRelease, items) == items_write + 1,
            "BuyListing releases Items right after its final Items write");
  o.require(slice_count(*add) == 3, "AddListing has three slices");
  o.note("AddListing slices=" + std::to_string(slice_count(*add)) + " horizon=" + std::to_string(add->abort_horizon) +
         "; BuyListing Items release at hop " + std::to_string(find_hop(*buy, HopKind::kRelease, items)));
  return o;
}

Outcome ac2() {
  AnalysisResult r = analyze(parse_workload(tpcc_dsl()));
  Outcome o = golden("tpcc.plan", r);
  const Workload& w = r.workload;
  int wh = w.table_index("Warehouse"), di = w.table_index("District"), cu = w.table_index("Customer");
  int st = w.table_index("Stock");
  const auto* pay = plan_named(r.plans, "Payment");
  const auto* no = plan_named(r.plans, "NewOrder");
  o.require(pay && no, "NewOrder and Payment plans present");
  if (!pay || !no) return o;

  // Payment touches District before Customer; the lock order is reversed.
  int first_c_op = -1, first_d_op = -1;
  for (const auto& h : pay->hops) {
    if (h.kind != HopKind::kOperation) continue;
    int t = op_of(w, *pay, h.op_index).table_id;
    if (t == cu && first_c_op < 0) first_c_op = h.op_index;
    if (t == di && first_d_op < 0) first_d_op = h.op_index;
  }
  o.require(first_d_op < first_c_op, "Payment uses District before Customer");
  o.require(find_hop(*pay, HopKind::kAcquire, cu) < find_hop(*pay, HopKind::kAcquire, di),
            "Payment acquires Customer before District");

  int pay_d = last_write(w, *pay, di);
  o.require(released_by_next_op(*pay, find_hop(*pay, HopKind::kRelease, di), pay_d), "Payment releases District after its last District write");
  o.require(released_by_next_op(*pay, find_hop(*pay, HopKind::kRelease, wh), pay_d), "Payment releases Warehouse by then");

  int no_d = last_write(w, *no, di);
  for (int t : {wh, cu, di})
    o.require(released_by_next_op(*no, find_hop(*no, HopKind::kRelease, t), no_d),
              "NewOrder releases " + w.schema[static_cast<size_t>(t)].name + " by its last District write");
  o.require(find_hop(*no, HopKind::kAcquire, st) >= 0 && find_hop(*no, HopKind::kAcquire, st) < first_release(*no),
            "NewOrder acquires Stock in its first slice");
  o.note("Payment slices=" + std::to_string(slice_count(*pay)) + " NewOrder slices=" + std::to_string(slice_count(*no)) +
         "; Warehouse released at hop " + std::to_string(find_hop(*pay, HopKind::kRelease, wh)) + ", District at hop " +
         std::to_string(find_hop(*pay, HopKind::kRelease, di)));
  return o;
}

std::uint64_t total_cc_aborts(const RunResult& r) {
  std::uint64_t n = 0;
  for (auto v : r.cc_aborts) n += v;
  return n;
}

std::string describe(const RunResult& r) {
  std::ostringstream ss;
  ss << to_string(r.protocol) << ": committed=" << r.committed << " tput=" << fmt(r.throughput, 0)
     << "/s p95=" << fmt(r.p95_us, 0) << "us cc_aborts=" << total_cc_aborts(r) << " retries=" << r.retries
     << " wasted=" << fmt(r.wasted_frac, 4);
  return ss.str();
}

void check_deadlock_free(Outcome& o, const BenchReport& rep, const std::string& label) {
  for (const auto& r : rep.runs) {
    o.require(total_cc_aborts(r) == 0, label + " zero CC aborts");
    o.require(r.retries == 0, label + " zero retries");
    o.require(r.violations.empty(), label + " no invariant violations");
    o.require(r.committed > 0, label + " makes progress");
    o.require(r.watchdog.has_value(), label + " watchdog ran");
    if (r.watchdog) {
      o.require(r.watchdog->cyclic == 0 && r.watchdog->static_cyclic == 0, label + " every snapshot acyclic");
      o.require(r.watchdog->max_wait_ns < 10'000'000'000LL, label + " no wait over 10 s");
      o.note(label + " " + describe(r) + " snapshots=" + std::to_string(r.watchdog->snapshots) +
             " max_wait=" + fmt(r.watchdog->max_wait_ns / 1e6, 1) + "ms");
    }
  }
}

Outcome ac3() {
  Outcome o;
  json store = {{"workload", "store"}, {"protocol", "brook2pl"}, {"threads", 8},      {"duration_s", 30},
                {"hot_count", 32},     {"p_hot", 1.0},          {"watchdog", true}, {"liveness_timeout_s", 10}};
  check_deadlock_free(o, run_bench(parse_bench_config(store)), "store");
  json tpcc = store;
  tpcc["workload"] = "tpcc";
  tpcc["hot_count"] = 2;
  tpcc["tpcc"] = {{"warehouses", 2}};
  check_deadlock_free(o, run_bench(parse_bench_config(tpcc)), "tpcc");
  return o;
}

// Small real histories: three workers, four transactions each, on a tiny hot set.
bool engine_histories_agree(Protocol protocol, int rounds, std::uint64_t seed, int& compared) {
  WorkloadContext ctx = WorkloadContext::store();
  StoreSizes sizes{40, 5, 20};
  AnalysisResult a = analyze(ctx.workload());
  MixSpec mix;
  mix.entries = {{"AddListing", 1}, {"BuyListing", 1}};
  bool agree = true;
  for (int round = 0; round < rounds; ++round) {
    auto store = make_store(ctx);
    load_store_dataset(*store, sizes, seed + static_cast<std::uint64_t>(round));
    EngineOptions opts;
    opts.protocol = protocol;
    opts.record_history = true;
    opts.lock_shards = 64;
    Engine engine(*store, ctx.workload(), a.plans, opts);
    std::vector<Engine::Worker> workers(3);
    std::vector<std::thread> threads;
    for (int t = 0; t < 3; ++t) {
      workers[static_cast<size_t>(t)].id = t;
      threads.emplace_back([&, t] {
        StoreGenerator gen(ctx, *store, sizes, {4, 1.0, seed * 31 + static_cast<std::uint64_t>(round * 3 + t)}, mix, t,
                           3);
        for (int i = 0; i < 4; ++i) {
          auto p = gen.next();
          engine.run(*p, workers[static_cast<size_t>(t)]);
        }
      });
    }
    for (auto& th : threads) th.join();
    auto h = Engine::merge_history(workers);
    agree = agree && check_serializable(h) == oracle::serial_order_exists(h);
    ++compared;
  }
  return agree;
}

Outcome ac4() {
  Outcome o;
  json cfg = {{"workload", "store"},
              {"protocols", {"brook2pl", "wound_wait", "bamboo", "sorted_locks", "occ"}},
              {"threads", 4},
              {"duration_s", 5},
              {"hot_count", 32},
              {"p_hot", 0.9},
              {"record_history", true}};
  for (const auto& r : run_bench(parse_bench_config(cfg)).runs) {
    o.require(r.serializable == true, std::string(to_string(r.protocol)) + " store history serializable");
    o.note(std::string(to_string(r.protocol)) + " store history txns=" + std::to_string(r.history_txns.value_or(0)));
  }
  json tpcc = cfg;
  tpcc["workload"] = "tpcc";
  tpcc["hot_count"] = 1;
  tpcc["p_hot"] = 1.0;
  for (const auto& r : run_bench(parse_bench_config(tpcc)).runs) {
    o.require(r.serializable == true, std::string(to_string(r.protocol)) + " tpcc history serializable");
    o.note(std::string(to_string(r.protocol)) + " tpcc history txns=" + std::to_string(r.history_txns.value_or(0)));
  }

  // Payment releases Warehouse between reading and writing it: lost updates on the warehouse row.
  json faulty = {{"workload", "tpcc"},      {"protocol", "brook2pl"},     {"threads", 4},
                 {"duration_s", 5},         {"hot_count", 1},             {"p_hot", 1.0},
                 {"record_history", true},  {"inject_faulty_plan", true}, {"mix", {{"Payment", 1}}}};
  auto bad = run_bench(parse_bench_config(faulty));
  o.require(!bad.runs.empty() && bad.runs[0].serializable == false, "corrupted plan is caught as non-serializable");
  if (!bad.runs.empty())
    for (const auto& v : bad.runs[0].violations) o.note("corrupted plan: " + v);

  std::mt19937_64 rng(4242);
  int disagreements = 0, non_serializable = 0;
  for (int round = 0; round < 5000; ++round) {
    int txns = static_cast<int>(rng() % 12) + 1;
    int keys = static_cast<int>(rng() % 4) + 1;
    std::vector<HistoryEvent> h;
    std::uint64_t seq = 1;
    std::vector<int> remaining(static_cast<size_t>(txns));
    for (auto& n : remaining) n = static_cast<int>(rng() % 5) + 1;
    int live = txns;
    while (live > 0) {
      int t = static_cast<int>(rng() % static_cast<std::uint64_t>(txns));
      auto& left = remaining[static_cast<size_t>(t)];
      if (left == 0) continue;
      if (--left == 0) {
        h.push_back({seq++, static_cast<std::uint64_t>(t + 1), 0, 0, rng() % 6 ? HistoryKind::kCommit : HistoryKind::kAbort});
        --live;
      } else {
        h.push_back({seq++, static_cast<std::uint64_t>(t + 1), static_cast<std::uint32_t>(rng() % 2),
                     rng() % static_cast<std::uint64_t>(keys), rng() % 2 ? HistoryKind::kRead : HistoryKind::kWrite});
      }
    }
    bool expected = oracle::serial_order_exists(h);
    if (!expected) ++non_serializable;
    if (check_serializable(h) != expected) ++disagreements;
  }
  o.require(disagreements == 0, "graph checker agrees with brute force on random histories");
  o.require(non_serializable > 0, "random histories include non-serializable ones");

  int compared = 0;
  bool engine_ok = true;
  for (Protocol p : {Protocol::kBrook2PL, Protocol::kWoundWait, Protocol::kBamboo, Protocol::kSortedLocks, Protocol::kOcc})
    engine_ok = engine_histories_agree(p, 20, 100 + static_cast<std::uint64_t>(p), compared) && engine_ok;
  o.require(engine_ok, "graph checker agrees with brute force on recorded 12-transaction histories");
  o.note("random histories: 5000 (" + std::to_string(non_serializable) + " non-serializable), disagreements " +
         std::to_string(disagreements) + "; recorded histories compared: " + std::to_string(compared));
  return o;
}

Outcome ac5() {
  Outcome o;
  std::mt19937_64 rng(5150);
  int slw_bad = 0, slw_cyclic = 0;
  for (int i = 0; i < 1000; ++i) {
    SlwGraph g = oracle::random_lock_graph(rng, 10, 4, 0.1 + 0.05 * (i % 8));
    auto expected = oracle::slw_cycles(g);
    bool ok = enumerate_slw_cycles(g) == expected && has_slw_cycle(g) == !expected.empty() &&
              detect_slw_cycles(g).empty() == expected.empty();
    for (const auto& m : detect_slw_cycles(g)) ok = ok && std::binary_search(expected.begin(), expected.end(), m);
    if (!expected.empty()) ++slw_cyclic;
    if (!ok) ++slw_bad;
  }
  int sc_bad = 0, sc_cyclic = 0;
  for (int i = 0; i < 1000; ++i) {
    ScGraph sc = oracle::random_sc_graph(rng, 8, 4, 0.05 + 0.05 * (i % 6));
    bool expected = oracle::sc_cycle(sc);
    if (expected) ++sc_cyclic;
    if (detect_sc_cycles(sc) != expected) ++sc_bad;
  }
  o.require(slw_bad == 0, "SLW detector matches enumeration");
  o.require(sc_bad == 0, "SC detector matches enumeration");
  o.note("SLW: 1000 graphs, " + std::to_string(slw_cyclic) + " cyclic, " + std::to_string(slw_bad) +
         " disagreements; SC: 1000 graphs, " + std::to_string(sc_cyclic) + " cyclic, " + std::to_string(sc_bad) +
         " disagreements");
  return o;
}

SlwGraph single_chain(std::string_view src) {
  Workload w = parse_workload(src);
  SlwGraph g = build_initial_slw_graph(w.templates, w.schema);
  g.chains.resize(1);
  return g;
}

Outcome ac6() {
  Outcome o;
  auto full = [](std::string_view src) {
    Workload w = parse_workload(src);
    return build_initial_slw_graph(w.templates, w.schema);
  };
  const char* one = "Table A population=10\nTransaction T(k):\n  Write(A, k)\n  Write(A, k)\n";
  Rational s1 = contention_score(single_chain(one));
  o.require(s1 == Rational(2, 10), "XL(A) op op U(A) with |A|=10 scores 2/10");
  o.require(contention_score(full(one)) == 2 * s1, "two identical chains score double");

  const char* two = "Table A population=10\nTable B population=4\nTransaction T(k):\n  Read(A, k)\n  Write(B, k)\n  Read(A, k)\n";
  o.require(contention_score(single_chain(two)) == Rational(3, 10) + Rational(2, 4), "A over three ops, B over two");
  o.require(contention_score(full(two)) == Rational(8, 5), "two chains of the two-table template");

  const char* three = "Table A population=7\nTable B population=3\nTransaction T(k):\n  Read(A, k)\n  Read(A, k)\n"
                      "  Write(B, k)\n  Write(B, k)\n  Write(B, k)\n";
  SlwGraph g3 = single_chain(three);
  o.require(contention_score(g3) == Rational(5, 7) + Rational(3, 3), "A held to the end, B over three ops");
  // Releasing A right after its last use shortens its term to two ops.
  int a_unlock = g3.unlock_of(0, 0);
  auto& hops = g3.chains[0].hops;
  auto it = std::find(hops.begin(), hops.end(), a_unlock);
  if (it != hops.end()) {
    hops.erase(it);
    int after_second_read = -1, reads = 0;
    for (size_t i = 0; i < hops.size(); ++i)
      if (g3.nodes[static_cast<size_t>(hops[i])].kind == NodeKind::kOperation && ++reads == 2) after_second_read = static_cast<int>(i);
    hops.insert(hops.begin() + after_second_read + 1, a_unlock);
    g3.reindex();
    o.require(contention_score(g3) == Rational(2, 7) + Rational(1), "early A release scores 2/7 + 1");
  } else {
    o.require(false, "A unlock present");
  }

  for (auto src : {store_dsl(), tpcc_dsl()}) {
    SlwGraph g = full(src);
    SlwGraph doubled = g;
    // Append a third copy of every chain's template instance by duplicating chains.
    auto orig_chains = g.chains;
    Rational base = contention_score(g);
    for (auto ch : orig_chains) {
      SlwChain copy = ch;
      copy.instance += 2;
      copy.hops.clear();
      for (int id : ch.hops) {
        SlwNode n = g.nodes[static_cast<size_t>(id)];
        copy.hops.push_back(doubled.add_node(n));
      }
      doubled.chains.push_back(copy);
    }
    doubled.reindex();
    o.require(contention_score(doubled) == 2 * base, "duplicating every chain doubles a shipped workload's score");
  }
  o.note("single chain 2/10 = " + s1.str());
  return o;
}

Outcome ac7() {
  Outcome o;
  using TC = TxnClass;
  struct Case {
    TC req, holder;
    bool older;
    Decision expected;
  };
  const Case cases[] = {
      {TC::kStatic, TC::kStatic, true, Decision::kWait},         {TC::kStatic, TC::kStatic, false, Decision::kWait},
      {TC::kDynamic, TC::kDynamic, true, Decision::kAbortHolder}, {TC::kDynamic, TC::kDynamic, false, Decision::kWait},
      {TC::kDynamic, TC::kStatic, true, Decision::kAbortSelf},    {TC::kDynamic, TC::kStatic, false, Decision::kWait},
      {TC::kStatic, TC::kDynamic, true, Decision::kAbortHolder},  {TC::kStatic, TC::kDynamic, false, Decision::kWait},
  };
  int wrong = 0;
  for (const auto& c : cases)
    if (arbitrate(c.req, c.holder, c.older) != c.expected) ++wrong;
  o.require(wrong == 0, "all 8 arbitration cases");

  std::mt19937_64 rng(77);
  int differ = 0;
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t a = rng() % 1000, b = rng() % 1000;
    if (a == b) ++b;
    bool older = a < b;
    if (arbitrate(TC::kDynamic, TC::kDynamic, older) != wound_wait_decision(older)) ++differ;
  }
  o.require(differ == 0, "all-dynamic decisions equal wound-wait on 10^5 events");
  o.note("table mismatches " + std::to_string(wrong) + ", random mismatches " + std::to_string(differ));
  return o;
}

RunResult only(const BenchReport& r, Protocol p) {
  for (const auto& run : r.runs)
    if (run.protocol == p) return run;
  return {};
}

Outcome ac8() {
  Outcome o;
  o.note("hardware threads: " + std::to_string(std::thread::hardware_concurrency()));
  json tpcc = {{"workload", "tpcc"},     {"protocols", {"brook2pl", "wound_wait", "occ"}},
               {"threads", 16},          {"duration_s", 30},
               {"hot_count", 4},         {"p_hot", 1.0},
               {"tpcc", {{"warehouses", 4}}}};
  BenchReport t = run_bench(parse_bench_config(tpcc));
  RunResult b = only(t, Protocol::kBrook2PL), ww = only(t, Protocol::kWoundWait), occ = only(t, Protocol::kOcc);
  for (const auto& r : t.runs) o.note("tpcc " + describe(r));
  o.require(b.throughput >= 1.3 * ww.throughput, "Brook throughput >= 1.3x wound-wait (" +
                                                     fmt(ww.throughput > 0 ? b.throughput / ww.throughput : 0, 2) + "x)");
  o.require(b.throughput >= 1.3 * occ.throughput, "Brook throughput >= 1.3x OCC (" +
                                                      fmt(occ.throughput > 0 ? b.throughput / occ.throughput : 0, 2) + "x)");
  o.require(b.p95_us <= ww.p95_us, "Brook p95 <= wound-wait p95");

  json store = {{"workload", "store"}, {"protocols", {"brook2pl", "wound_wait", "bamboo"}},
                {"threads", 16},       {"duration_s", 10},
                {"hot_count", 64},     {"p_hot", 0.7}};
  BenchReport s = run_bench(parse_bench_config(store));
  for (const auto& r : s.runs) o.note("store " + describe(r));
  o.require(only(s, Protocol::kBrook2PL).wasted_frac == 0.0, "Brook wasted fraction is 0");
  o.require(only(s, Protocol::kWoundWait).wasted_frac > 0.0, "wound-wait wasted fraction > 0");
  o.require(only(s, Protocol::kBamboo).wasted_frac > 0.0, "Bamboo wasted fraction > 0");
  return o;
}

Outcome ac9() {
  Outcome o;
  WorkloadContext sctx = WorkloadContext::store();
  StoreSizes sizes{1000, 5, 400};
  auto store = make_store(sctx);
  load_store_dataset(*store, sizes, 1);
  MixSpec add;
  add.entries = {{"AddListing", 1}};
  for (double p : {0.1, 0.5, 0.9}) {
    StoreGenerator g(sctx, *store, sizes, {320, p, 11}, add, 0, 1);
    int hot = 0;
    constexpr int kN = 1000000;
    for (int i = 0; i < kN; ++i) {
      auto proc = g.next();
      if (static_cast<AddListingTxn*>(proc.get())->params().item < 320) ++hot;
    }
    double frac = static_cast<double>(hot) / kN;
    o.require(std::abs(frac - p) <= 0.01, "hot fraction within 0.01 of " + fmt(p, 1));
    o.note("p_hot=" + fmt(p, 1) + " observed " + fmt(frac, 4));
  }
  WorkloadContext tctx = WorkloadContext::tpcc();
  MixSpec no;
  no.entries = {{"NewOrder", 1}};
  TpccGenerator g(tctx, {4, true}, {4, 1.0, 12}, no, 0);
  int invalid = 0;
  constexpr int kN = 1000000;
  for (int i = 0; i < kN; ++i)
    if (static_cast<NewOrderTxn*>(g.new_order().get())->params().invalid_item) ++invalid;
  double rate = static_cast<double>(invalid) / kN;
  o.require(rate >= 0.008 && rate <= 0.012, "NewOrder invalid-item rate within 1% +- 0.2%");
  o.note("invalid-item rate " + fmt(rate, 5));
  return o;
}

Outcome ac10() {
  Outcome o;
  auto path = (std::filesystem::temp_directory_path() / "brook_acceptance.wal").string();
  json store = {{"workload", "store"},
                {"protocols", {"brook2pl", "wound_wait", "bamboo", "sorted_locks", "occ"}},
                {"threads", 4},
                {"duration_s", 2},
                {"warmup_s", 0.5},
                {"hot_count", 32},
                {"p_hot", 0.8},
                {"wal", "file"},
                {"wal_path", path},
                {"verify_wal", true}};
  json tpcc = store;
  tpcc["workload"] = "tpcc";
  tpcc["protocols"] = {"brook2pl", "bamboo"};
  tpcc["hot_count"] = 2;
  tpcc["tpcc"] = {{"warehouses", 2}};
  for (const auto& cfg : {store, tpcc})
    for (const auto& r : run_bench(parse_bench_config(cfg)).runs) {
      std::string label = cfg["workload"].get<std::string>() + " " + std::string(to_string(r.protocol));
      o.require(r.wal_replay_ok == true, label + " replay reproduces the state hash");
      o.note(label + " committed=" + std::to_string(r.committed) + " replay " +
             (r.wal_replay_ok == true ? "ok" : "mismatch"));
    }
  std::filesystem::remove(path);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}};
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    for (const auto& n : out.notes) std::cout << "  " << name << ": " << n << "\n";
    std::cout << name << (out.pass ? " PASS" : " FAIL") << std::endl;
    if (!out.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
