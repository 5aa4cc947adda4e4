#include "brook/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace brook {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for ") + key);
  }
}

MixSpec default_mix(const std::string& workload) {
  MixSpec m;
  if (workload == "tpcc")
    m.entries = {{"NewOrder", 1.0}, {"Payment", 1.0}};
  else
    m.entries = {{"AddListing", 1.0}, {"BuyListing", 1.0}};
  return m;
}

}  // namespace

BenchConfig parse_bench_config(const json& j) {
  static const std::set<std::string> known = {
      "workload", "protocol", "protocols", "threads", "duration_s", "warmup_s", "transactions_per_worker",
      "hot_count", "p_hot", "seed", "mix", "dynamic_fraction", "read_only_threads", "record_history",
      "watchdog", "watchdog_period_ms", "liveness_timeout_s", "wal", "wal_path", "verify_wal",
      "inject_faulty_plan", "store", "tpcc"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key " + k);

  BenchConfig c;
  c.workload = get_or<std::string>(j, "workload", c.workload);
  if (c.workload != "store" && c.workload != "tpcc") throw ConfigError("workload must be store or tpcc");

  std::vector<std::string> protos;
  if (j.contains("protocols")) protos = get_or<std::vector<std::string>>(j, "protocols", {});
  if (j.contains("protocol")) protos.push_back(get_or<std::string>(j, "protocol", ""));
  if (!protos.empty()) {
    c.protocols.clear();
    for (const auto& s : protos) {
      auto p = parse_protocol(s);
      if (!p) throw ConfigError("unknown protocol " + s);
      c.protocols.push_back(*p);
    }
  }
  c.threads = get_or<int>(j, "threads", c.threads);
  c.duration_s = get_or<double>(j, "duration_s", c.duration_s);
  c.warmup_s = get_or<double>(j, "warmup_s", c.warmup_s);
  c.transactions_per_worker = get_or<std::uint64_t>(j, "transactions_per_worker", 0);
  c.hot_count = get_or<std::uint64_t>(j, "hot_count", c.hot_count);
  if (j.contains("p_hot")) {
    if (j["p_hot"].is_array())
      c.p_hot = get_or<std::vector<double>>(j, "p_hot", {});
    else
      c.p_hot = {get_or<double>(j, "p_hot", 0.0)};
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.mix = default_mix(c.workload);
  if (j.contains("mix")) {
    if (!j["mix"].is_object()) throw ConfigError("mix must map template names to weights");
    c.mix.entries.clear();
    for (const auto& [name, w] : j["mix"].items()) {
      if (!w.is_number()) throw ConfigError("mix weight for " + name + " must be a number");
      c.mix.entries.push_back({name, w.get<double>()});
    }
  }
  c.mix.dynamic_fraction = get_or<double>(j, "dynamic_fraction", 0.0);
  c.read_only_threads = get_or<int>(j, "read_only_threads", 0);
  c.record_history = get_or<bool>(j, "record_history", false);
  c.watchdog = get_or<bool>(j, "watchdog", false);
  c.watchdog_period_ms = get_or<int>(j, "watchdog_period_ms", c.watchdog_period_ms);
  c.liveness_timeout_s = get_or<double>(j, "liveness_timeout_s", c.liveness_timeout_s);
  c.wal = get_or<std::string>(j, "wal", c.wal);
  c.wal_path = get_or<std::string>(j, "wal_path", c.wal_path);
  c.verify_wal = get_or<bool>(j, "verify_wal", false);
  c.inject_faulty_plan = get_or<bool>(j, "inject_faulty_plan", false);
  if (j.contains("store")) {
    const auto& s = j["store"];
    c.store.players = get_or<std::uint64_t>(s, "players", c.store.players);
    c.store.items_per_player = get_or<std::uint64_t>(s, "items_per_player", c.store.items_per_player);
    c.store.listings = get_or<std::uint64_t>(s, "listings", c.store.listings);
  }
  if (j.contains("tpcc")) {
    const auto& t = j["tpcc"];
    c.tpcc.warehouses = get_or<std::uint64_t>(t, "warehouses", c.tpcc.warehouses);
    c.tpcc.initial_orders = get_or<bool>(t, "initial_orders", c.tpcc.initial_orders);
  }

  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.read_only_threads < 0) throw ConfigError("read_only_threads must be non-negative");
  if (c.read_only_threads > 0 && c.workload != "store") throw ConfigError("read-only threads need the store workload");
  if (c.transactions_per_worker == 0 && !(c.duration_s > 0)) throw ConfigError("duration_s must be positive");
  if (c.warmup_s < 0) throw ConfigError("warmup_s must be non-negative");
  if (c.p_hot.empty()) throw ConfigError("p_hot needs at least one value");
  for (double p : c.p_hot)
    if (p < 0 || p > 1) throw ConfigError("p_hot must lie in [0, 1]");
  if (c.mix.dynamic_fraction < 0 || c.mix.dynamic_fraction > 1) throw ConfigError("dynamic_fraction must lie in [0, 1]");
  std::uint64_t population = c.workload == "store" ? c.store.items() : c.tpcc.warehouses;
  if (c.hot_count == 0 || c.hot_count > population) throw ConfigError("hot_count exceeds the table population");
  if (c.wal != "null" && c.wal != "memory" && c.wal != "file") throw ConfigError("wal must be null, memory or file");
  if (c.verify_wal && c.wal == "null") throw ConfigError("verify_wal needs a memory or file WAL");
  if (c.watchdog_period_ms < 1) throw ConfigError("watchdog_period_ms must be positive");
  return c;
}

json to_json(const BenchConfig& c) {
  json j;
  j["workload"] = c.workload;
  std::vector<std::string> protos;
  for (auto p : c.protocols) protos.emplace_back(to_string(p));
  j["protocols"] = protos;
  j["threads"] = c.threads;
  j["duration_s"] = c.duration_s;
  j["warmup_s"] = c.warmup_s;
  j["transactions_per_worker"] = c.transactions_per_worker;
  j["hot_count"] = c.hot_count;
  j["p_hot"] = c.p_hot;
  j["seed"] = c.seed;
  json mix = json::object();
  for (const auto& e : c.mix.entries) mix[e.name] = e.weight;
  j["mix"] = mix;
  j["dynamic_fraction"] = c.mix.dynamic_fraction;
  j["read_only_threads"] = c.read_only_threads;
  j["record_history"] = c.record_history;
  j["watchdog"] = c.watchdog;
  j["wal"] = c.wal;
  j["verify_wal"] = c.verify_wal;
  j["inject_faulty_plan"] = c.inject_faulty_plan;
  j["store"] = {{"players", c.store.players},
                {"items_per_player", c.store.items_per_player},
                {"listings", c.store.listings}};
  j["tpcc"] = {{"warehouses", c.tpcc.warehouses}, {"initial_orders", c.tpcc.initial_orders}};
  return j;
}

double percentile(const std::vector<std::uint32_t>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  rank = std::clamp<size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

bool inject_early_release(std::vector<ExecutionPlan>& plans, const Workload& workload) {
  for (auto& plan : plans) {
    const auto* t = workload.find(plan.template_name);
    if (!t) continue;
    const auto& ops = t->paths.at(static_cast<size_t>(plan.path_id)).ops;
    for (size_t h = 0; h < plan.hops.size(); ++h) {
      if (plan.hops[h].kind != HopKind::kRelease) continue;
      for (size_t it = 0; it < plan.hops[h].items.size(); ++it) {
        int table = plan.hops[h].items[it].table;
        std::vector<size_t> uses;
        for (size_t k = 0; k < h; ++k)
          if (plan.hops[k].kind == HopKind::kOperation && ops[static_cast<size_t>(plan.hops[k].op_index)].table_id == table)
            uses.push_back(k);
        if (uses.size() < 2 || ops[static_cast<size_t>(plan.hops[uses.back()].op_index)].kind != OpKind::kWrite)
          continue;
        PlanHop early;
        early.kind = HopKind::kRelease;
        early.items = {plan.hops[h].items[it]};
        plan.hops[h].items.erase(plan.hops[h].items.begin() + static_cast<long>(it));
        if (plan.hops[h].items.empty()) plan.hops.erase(plan.hops.begin() + static_cast<long>(h));
        plan.hops.insert(plan.hops.begin() + static_cast<long>(uses.front()) + 1, early);
        plan.abort_horizon = std::min(plan.abort_horizon, static_cast<int>(uses.front()) + 1);
        return true;
      }
    }
  }
  return false;
}

namespace {

struct WorkerStats {
  std::vector<std::uint32_t> latencies_us;
  std::uint64_t committed = 0, user_aborted = 0, retries = 0, static_cc = 0, dynamic_committed = 0;
  std::array<std::uint64_t, 5> cc{};
  std::int64_t useful = 0, lock_wait = 0, wasted = 0;
  std::int64_t last_done = 0;
};

std::int64_t total_balance(const Store& s) {
  std::int64_t sum = 0;
  s.table(static_cast<std::uint32_t>(s.table_id("Players"))).for_each([&](Key, const Row& r) { sum += r.cols[col::kBalance]; });
  return sum;
}

// Store: money only moves between players. TPC-C: each warehouse's ytd equals the sum over its
// districts, and Payment keeps customer balance + ytd at zero.
std::vector<std::string> consistency_violations(const WorkloadContext& ctx, const Store& s, std::int64_t balance) {
  std::vector<std::string> out;
  if (ctx.kind() == WorkloadContext::Kind::kStore) {
    if (total_balance(s) != balance) out.emplace_back("total player balance changed");
    return out;
  }
  std::map<Key, std::int64_t> district_ytd;
  s.table(ctx.table("District")).for_each([&](Key k, const Row& r) { district_ytd[k / tpcc::kDistricts] += r.cols[col::kYtd]; });
  bool ytd_ok = true;
  s.table(ctx.table("Warehouse")).for_each([&](Key w, const Row& r) { ytd_ok = ytd_ok && district_ytd[w] == r.cols[col::kYtd]; });
  if (!ytd_ok) out.emplace_back("warehouse ytd differs from the sum of its districts");
  bool customers_ok = true;
  s.table(ctx.table("Customer")).for_each([&](Key, const Row& r) {
    customers_ok = customers_ok && r.cols[col::kCustBalance] + r.cols[col::kCustYtd] == 0;
  });
  if (!customers_ok) out.emplace_back("customer balance and ytd out of step");
  return out;
}

void load(Store& s, const BenchConfig& cfg) {
  if (cfg.workload == "store")
    load_store_dataset(s, cfg.store, cfg.seed);
  else
    load_tpcc(s, cfg.tpcc, cfg.seed);
}

}  // namespace

RunResult run_point(const BenchConfig& cfg, const WorkloadContext& ctx, const std::vector<ExecutionPlan>& plans,
                    Protocol protocol, double p_hot) {
  RunResult res;
  res.protocol = protocol;
  res.p_hot = p_hot;

  std::shared_ptr<WalSink> sink;
  MemoryWalSink* memory = nullptr;
  if (cfg.wal == "memory") {
    auto m = std::make_shared<MemoryWalSink>();
    memory = m.get();
    sink = m;
  } else if (cfg.wal == "file") {
    sink = std::make_shared<FileWalSink>(cfg.wal_path);
  }
  auto store = make_store(ctx, sink);
  load(*store, cfg);
  const std::int64_t balance = ctx.kind() == WorkloadContext::Kind::kStore ? total_balance(*store) : 0;

  EngineOptions opts;
  opts.protocol = protocol;
  opts.record_history = cfg.record_history;
  Engine engine(*store, ctx.workload(), plans, opts);

  ContentionKnobs knobs{cfg.hot_count, p_hot, cfg.seed};
  MixSpec read_only_mix;
  read_only_mix.entries = {{"ReadItems", 1.0}};

  const int total = cfg.threads + cfg.read_only_threads;
  std::vector<Engine::Worker> workers(static_cast<size_t>(total));
  std::vector<WorkerStats> stats(static_cast<size_t>(total));
  std::atomic<bool> stop{false};
  const bool fixed = cfg.transactions_per_worker > 0;
  const std::int64_t start = steady_now_ns();
  const std::int64_t warm_end = fixed ? start : start + static_cast<std::int64_t>(cfg.warmup_s * 1e9);
  const std::int64_t measure_end = warm_end + static_cast<std::int64_t>(cfg.duration_s * 1e9);

  std::optional<Watchdog> dog;
  if (cfg.watchdog) {
    dog.emplace(engine.locks(), std::chrono::milliseconds(cfg.watchdog_period_ms));
    dog->start();
  }

  std::vector<std::string> errors(static_cast<size_t>(total));
  auto body = [&](int i) {
    auto& w = workers[static_cast<size_t>(i)];
    auto& st = stats[static_cast<size_t>(i)];
    w.id = i;
    try {
      bool read_only = i >= cfg.threads;
      std::unique_ptr<Generator> gen;
      if (cfg.workload == "store")
        gen = std::make_unique<StoreGenerator>(ctx, *store, cfg.store, knobs, read_only ? read_only_mix : cfg.mix, i,
                                               cfg.threads);
      else
        gen = std::make_unique<TpccGenerator>(ctx, cfg.tpcc, knobs, cfg.mix, i);
      for (std::uint64_t n = 0;; ++n) {
        if (fixed ? n >= cfg.transactions_per_worker : stop.load(std::memory_order_relaxed)) break;
        std::int64_t submitted = steady_now_ns();
        auto proc = gen->next();
        TxnOutcome out = engine.run(*proc, w);
        std::int64_t done = steady_now_ns();
        st.last_done = done;
        if (!fixed && (submitted < warm_end || done > measure_end)) continue;
        bool committed = out.status == TxnOutcome::Status::kCommitted;
        if (committed) {
          ++st.committed;
          st.latencies_us.push_back(static_cast<std::uint32_t>(std::min<std::int64_t>((done - submitted) / 1000, UINT32_MAX)));
          if (proc->txn_class() == TxnClass::kDynamic) ++st.dynamic_committed;
        } else {
          ++st.user_aborted;
        }
        st.retries += static_cast<std::uint64_t>(out.retries);
        for (size_t r = 0; r < st.cc.size(); ++r) {
          st.cc[r] += static_cast<std::uint64_t>(out.cc_aborts[r]);
          if (proc->txn_class() == TxnClass::kStatic) st.static_cc += static_cast<std::uint64_t>(out.cc_aborts[r]);
        }
        st.useful += out.useful_ns;
        st.lock_wait += out.lock_wait_ns;
        st.wasted += out.wasted_ns;
      }
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
      stop = true;
    }
  };

  std::vector<std::thread> threads;
  for (int i = 0; i < total; ++i) threads.emplace_back(body, i);
  if (!fixed) {
    while (steady_now_ns() < measure_end && !stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    stop = true;
  }
  for (auto& t : threads) t.join();
  if (dog) res.watchdog = dog->stop();
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("worker failed: " + e);

  std::int64_t last_done = start;
  for (const auto& st : stats) last_done = std::max(last_done, st.last_done);
  res.measured_s = fixed ? static_cast<double>(last_done - start) / 1e9 : cfg.duration_s;

  std::vector<std::uint32_t> lat;
  std::int64_t useful = 0, wait = 0, wasted = 0;
  for (int i = 0; i < total; ++i) {
    const auto& st = stats[static_cast<size_t>(i)];
    if (i >= cfg.threads) {
      res.read_only_committed += st.committed;
      continue;
    }
    lat.insert(lat.end(), st.latencies_us.begin(), st.latencies_us.end());
    res.committed += st.committed;
    res.user_aborted += st.user_aborted;
    res.retries += st.retries;
    res.static_cc_aborts += st.static_cc;
    res.dynamic_committed += st.dynamic_committed;
    for (size_t r = 0; r < res.cc_aborts.size(); ++r) res.cc_aborts[r] += st.cc[r];
    useful += st.useful;
    wait += st.lock_wait;
    wasted += st.wasted;
  }
  std::sort(lat.begin(), lat.end());
  res.p50_us = percentile(lat, 0.50);
  res.p95_us = percentile(lat, 0.95);
  res.p99_us = percentile(lat, 0.99);
  if (res.measured_s > 0) {
    res.throughput = static_cast<double>(res.committed) / res.measured_s;
    res.read_only_throughput = static_cast<double>(res.read_only_committed) / res.measured_s;
  }
  double sum = static_cast<double>(useful + wait + wasted);
  if (sum > 0) {
    res.useful_frac = static_cast<double>(useful) / sum;
    res.lock_wait_frac = static_cast<double>(wait) / sum;
    res.wasted_frac = static_cast<double>(wasted) / sum;
  }

  if (cfg.record_history) {
    auto events = Engine::merge_history(workers);
    std::set<std::uint64_t> txns;
    for (const auto& e : events)
      if (e.kind == HistoryKind::kCommit) txns.insert(e.txn);
    res.history_txns = txns.size();
    res.serializable = check_serializable(events);
    if (!*res.serializable) res.violations.emplace_back("history is not conflict-serializable");
  }
  if (protocol == Protocol::kBrook2PL && res.static_cc_aborts > 0)
    res.violations.push_back("static transactions were aborted " + std::to_string(res.static_cc_aborts) + " times");
  if (res.watchdog && protocol == Protocol::kBrook2PL) {
    if (res.watchdog->static_cyclic > 0) res.violations.emplace_back("wait-for cycle among static transactions");
    if (static_cast<double>(res.watchdog->max_wait_ns) > cfg.liveness_timeout_s * 1e9)
      res.violations.emplace_back("lock wait exceeded the liveness timeout");
  }
  for (auto& v : consistency_violations(ctx, *store, balance)) res.violations.push_back(std::move(v));
  if (cfg.verify_wal) {
    store->wal().flush();
    std::vector<std::uint8_t> bytes = memory ? memory->bytes() : read_file_bytes(cfg.wal_path);
    auto fresh = make_store(ctx);
    load(*fresh, cfg);
    replay_wal(decode_wal(bytes), *fresh);
    res.wal_replay_ok = fresh->state_hash() == store->state_hash();
    if (!*res.wal_replay_ok) res.violations.emplace_back("WAL replay does not reproduce the final state");
  }
  return res;
}

BenchReport run_bench(const BenchConfig& cfg, std::ostream* log) {
  BenchReport report;
  report.config = cfg;
  WorkloadContext ctx = cfg.workload == "store" ? WorkloadContext::store() : WorkloadContext::tpcc();
  std::vector<ExecutionPlan> plans;
  bool needs_plans = std::find(cfg.protocols.begin(), cfg.protocols.end(), Protocol::kBrook2PL) != cfg.protocols.end();
  if (needs_plans) {
    AnalysisResult analysis = analyze(ctx.workload());
    if (!analysis.dynamic_fallbacks.empty())
      throw ConfigError("templates fell back to dynamic execution: " + analysis.dynamic_fallbacks.front());
    plans = analysis.plans;
    if (cfg.inject_faulty_plan) {
      // Only templates the mix actually runs are candidates.
      std::vector<ExecutionPlan> mixed;
      std::vector<size_t> where;
      for (size_t i = 0; i < plans.size(); ++i)
        for (const auto& e : cfg.mix.entries)
          if (e.weight > 0 && e.name == plans[i].template_name) {
            mixed.push_back(plans[i]);
            where.push_back(i);
            break;
          }
      if (!inject_early_release(mixed, ctx.workload())) throw ConfigError("no plan offers a release to corrupt");
      for (size_t i = 0; i < mixed.size(); ++i) plans[where[i]] = mixed[i];
    }
  }
  for (Protocol p : cfg.protocols) {
    for (double ph : cfg.p_hot) {
      if (log) *log << "running " << to_string(p) << " p_hot=" << ph << std::endl;
      report.runs.push_back(run_point(cfg, ctx, plans, p, ph));
      const auto& r = report.runs.back();
      if (log)
        *log << "  committed=" << r.committed << " tps=" << std::fixed << std::setprecision(1) << r.throughput
             << " p95_us=" << r.p95_us << " retries=" << r.retries << std::defaultfloat << std::endl;
    }
  }
  return report;
}

bool BenchReport::ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunResult& r) { return r.violations.empty(); });
}

json BenchReport::to_json() const {
  json j;
  j["config"] = brook::to_json(config);
  j["runs"] = json::array();
  for (const auto& r : runs) {
    json x;
    x["protocol"] = std::string(to_string(r.protocol));
    x["p_hot"] = r.p_hot;
    x["measured_s"] = r.measured_s;
    x["committed"] = r.committed;
    x["user_aborted"] = r.user_aborted;
    x["throughput_tps"] = r.throughput;
    x["latency_us"] = {{"p50", r.p50_us}, {"p95", r.p95_us}, {"p99", r.p99_us}};
    x["retries"] = r.retries;
    x["aborts"] = {{"wound", r.cc_aborts[1]},
                   {"validation", r.cc_aborts[2]},
                   {"cascade", r.cc_aborts[3]},
                   {"timeout", r.cc_aborts[4]}};
    x["static_cc_aborts"] = r.static_cc_aborts;
    x["dynamic_committed"] = r.dynamic_committed;
    x["breakdown"] = {{"useful", r.useful_frac}, {"lock_wait", r.lock_wait_frac}, {"wasted", r.wasted_frac}};
    x["read_only"] = {{"committed", r.read_only_committed}, {"throughput_tps", r.read_only_throughput}};
    if (r.watchdog)
      x["watchdog"] = {{"snapshots", r.watchdog->snapshots},
                       {"cyclic", r.watchdog->cyclic},
                       {"static_cyclic", r.watchdog->static_cyclic},
                       {"max_wait_ms", static_cast<double>(r.watchdog->max_wait_ns) / 1e6}};
    if (r.serializable) x["serializable"] = *r.serializable;
    if (r.history_txns) x["history_txns"] = *r.history_txns;
    if (r.wal_replay_ok) x["wal_replay_ok"] = *r.wal_replay_ok;
    x["violations"] = r.violations;
    j["runs"].push_back(x);
  }
  j["ok"] = ok();
  return j;
}

std::string csv_header() {
  return "workload,protocol,threads,hot_count,p_hot,dynamic_fraction,measured_s,committed,user_aborted,"
         "throughput_tps,p50_us,p95_us,p99_us,retries,aborts_wound,aborts_validation,aborts_cascade,"
         "aborts_timeout,useful_frac,lock_wait_frac,wasted_frac,read_only_committed,read_only_tps,"
         "static_cc_aborts,violations";
}

std::string BenchReport::to_csv() const {
  std::ostringstream os;
  os << csv_header() << "\n";
  for (const auto& r : runs) {
    os << config.workload << ',' << to_string(r.protocol) << ',' << config.threads << ',' << config.hot_count << ','
       << r.p_hot << ',' << config.mix.dynamic_fraction << ',' << r.measured_s << ',' << r.committed << ','
       << r.user_aborted << ',' << r.throughput << ',' << r.p50_us << ',' << r.p95_us << ',' << r.p99_us << ','
       << r.retries << ',' << r.cc_aborts[1] << ',' << r.cc_aborts[2] << ',' << r.cc_aborts[3] << ','
       << r.cc_aborts[4] << ',' << r.useful_frac << ',' << r.lock_wait_frac << ',' << r.wasted_frac << ','
       << r.read_only_committed << ',' << r.read_only_throughput << ',' << r.static_cc_aborts << ','
       << r.violations.size() << "\n";
  }
  return os.str();
}

}  // namespace brook
