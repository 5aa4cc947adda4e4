#include "brook/engine.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace brook {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kBrook2PL: return "brook2pl";
    case Protocol::kWoundWait: return "wound_wait";
    case Protocol::kBamboo: return "bamboo";
    case Protocol::kSortedLocks: return "sorted_locks";
    case Protocol::kOcc: return "occ";
  }
  return "?";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  for (Protocol p : {Protocol::kBrook2PL, Protocol::kWoundWait, Protocol::kBamboo, Protocol::kSortedLocks,
                     Protocol::kOcc})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::vector<OpInfo> op_infos(const TemplatePath& path) {
  std::vector<OpInfo> out;
  out.reserve(path.ops.size());
  for (const auto& op : path.ops)
    out.push_back({static_cast<std::uint32_t>(op.table_id), op.kind, op.may_user_abort, op.depends_on});
  return out;
}

// Per acquire hop and member table: the guarded ops and whether several rows may be taken.
struct Engine::CompiledPlan {
  const ExecutionPlan* plan = nullptr;
  std::vector<std::vector<std::vector<int>>> guarded;  // [hop][item] -> op indices
  std::vector<std::vector<bool>> multi;                // [hop][item]
};

struct Engine::Shape {
  std::vector<LockMode> mode;  // per table
};

struct Engine::Attempt {
  struct Undo {
    std::uint32_t table;
    Key key;
    OpKind kind;
    std::optional<Row> before;
  };

  std::shared_ptr<Txn> txn;
  Worker* worker = nullptr;
  bool history = false;
  Outputs out;
  std::vector<char> executed;
  std::vector<Undo> undo;
  std::vector<LockKey> held;
  std::vector<LockMode> held_mode;
  std::int64_t lock_wait_ns = 0;
  bool user_abort = false;

  void event(Store& s, HistoryKind k, std::uint32_t table, Key key, std::uint64_t seq = 0) {
    if (!history) return;
    if (seq == 0) seq = s.history_seq().fetch_add(1);
    worker->history.push_back({seq, txn->id, table, key, k});
  }
};

namespace {

bool is_gate_free_multi(const std::vector<int>& ops, const TemplatePath& path) {
  std::set<std::string> exprs;
  for (int j : ops) {
    const auto& op = path.ops[static_cast<size_t>(j)];
    if (op.loop_id >= 0) return false;
    exprs.insert(op.key_expr);
  }
  return exprs.size() <= 1;
}

}  // namespace

Engine::Engine(Store& store, const Workload& workload, std::vector<ExecutionPlan> plans, EngineOptions opts)
    : store_(store), workload_(workload), plans_(std::move(plans)), opts_(opts), locks_(opts.lock_shards) {
  gate_tables_.assign(store_.table_count(), 0);
  for (const auto& plan : plans_) {
    int ti = -1;
    for (size_t i = 0; i < workload_.templates.size(); ++i)
      if (workload_.templates[i].name == plan.template_name) ti = static_cast<int>(i);
    if (ti < 0) throw std::invalid_argument("plan for unknown template " + plan.template_name);
    const auto& path = workload_.templates[static_cast<size_t>(ti)].paths.at(static_cast<size_t>(plan.path_id));
    auto cp = std::make_unique<CompiledPlan>();
    std::vector<char> done(path.ops.size(), 0);
    cp->plan = &plan;
    for (const auto& hop : plan.hops) {
      std::vector<std::vector<int>> per_item;
      std::vector<bool> multi;
      if (hop.kind == HopKind::kAcquire) {
        for (const auto& item : hop.items) {
          std::vector<int> ops;
          for (size_t j = 0; j < path.ops.size(); ++j)
            if (path.ops[j].table_id == item.table) ops.push_back(static_cast<int>(j));
          for (int j : ops)
            for (int d : path.ops[static_cast<size_t>(j)].depends_on)
              if (!done[static_cast<size_t>(d)]) gate_tables_[static_cast<size_t>(item.table)] = 1;
          multi.push_back(!is_gate_free_multi(ops, path));
          per_item.push_back(std::move(ops));
        }
      }
      if (hop.kind == HopKind::kOperation) done[static_cast<size_t>(hop.op_index)] = 1;
      cp->guarded.push_back(std::move(per_item));
      cp->multi.push_back(std::move(multi));
    }
    plan_index_[{ti, plan.path_id}] = cp.get();
    compiled_.push_back(std::move(cp));
  }
  // Static instances never wait on each other for rows of a table that only sees reads, or only
  // operations of one commutative group, so acquiring its rows piecemeal cannot deadlock.
  for (size_t t = 0; t < gate_tables_.size(); ++t) {
    if (!gate_tables_[t]) continue;
    bool all_reads = true, one_group = true;
    std::string group;
    for (const auto& tmpl : workload_.templates) {
      if (tmpl.kind != TemplateKind::kStatic) continue;
      for (const auto& path : tmpl.paths)
        for (const auto& op : path.ops) {
          if (op.table_id != static_cast<int>(t)) continue;
          all_reads = all_reads && op.kind == OpKind::kRead;
          if (op.commutative_group.empty() || (!group.empty() && group != op.commutative_group)) one_group = false;
          group = op.commutative_group;
        }
    }
    if (all_reads || one_group) gate_tables_[t] = 0;
  }
}

Engine::~Engine() = default;

const Engine::CompiledPlan& Engine::plan_for(const Procedure& p) const {
  auto it = plan_index_.find({p.template_index(), p.path_id()});
  if (it == plan_index_.end())
    throw std::invalid_argument("no execution plan for template index " + std::to_string(p.template_index()));
  return *it->second;
}

std::shared_ptr<const Engine::Shape> Engine::shape_for(const Procedure& p) {
  auto build = [&] {
    auto s = std::make_shared<Shape>();
    s->mode.assign(store_.table_count(), LockMode::kShared);
    const auto& ops = p.ops();
    for (size_t j = 0; j < ops.size(); ++j)
      if (is_write(ops[j].kind)) s->mode[ops[j].table] = LockMode::kExclusive;
    return s;
  };
  if (p.template_index() < 0) return build();
  std::lock_guard<std::mutex> g(shape_mu_);
  auto& slot = shapes_[{p.template_index(), p.path_id()}];
  if (!slot) slot = build();
  return slot;
}

namespace {

std::int64_t now_ns() { return steady_now_ns(); }

}  // namespace

TxnOutcome Engine::run(Procedure& p, Worker& w) {
  TxnOutcome outcome;
  const std::uint64_t ts = next_timestamp();
  const bool dynamic = p.txn_class() == TxnClass::kDynamic;
  WaitPolicy policy = WaitPolicy::kFifo;
  switch (opts_.protocol) {
    case Protocol::kBrook2PL: policy = WaitPolicy::kMixed; break;
    case Protocol::kWoundWait:
    case Protocol::kBamboo: policy = WaitPolicy::kWoundWait; break;
    default: break;
  }
  while (true) {
    Attempt a;
    a.txn = std::make_shared<Txn>(txn_counter_.fetch_add(1), ts, p.txn_class(), policy);
    a.worker = &w;
    a.history = opts_.record_history;
    a.out.assign(p.ops().size(), std::nullopt);
    a.executed.assign(p.ops().size(), 0);
    if (store_.wal().enabled()) store_.wal().append({0, a.txn->id, WalKind::kBegin, 0, 0, {}, {}});
    std::int64_t start = now_ns();
    AbortReason reason = AbortReason::kNone;
    switch (opts_.protocol) {
      case Protocol::kBrook2PL:
        reason = dynamic ? run_lock_as_you_go(p, a, false) : run_brook(p, a);
        break;
      case Protocol::kWoundWait: reason = run_lock_as_you_go(p, a, false); break;
      case Protocol::kBamboo: reason = run_lock_as_you_go(p, a, true); break;
      case Protocol::kSortedLocks: reason = run_sorted(p, a); break;
      case Protocol::kOcc: reason = run_occ(p, a); break;
    }
    std::int64_t dur = now_ns() - start;
    if (reason == AbortReason::kNone) {
      std::int64_t wait = std::min(a.lock_wait_ns, dur);
      outcome.lock_wait_ns += wait;
      outcome.useful_ns += dur - wait;
      if (a.user_abort) {
        outcome.status = TxnOutcome::Status::kUserAborted;
      } else {
        outcome.status = TxnOutcome::Status::kCommitted;
        p.committed();
      }
      return outcome;
    }
    outcome.wasted_ns += dur;
    ++outcome.cc_aborts[static_cast<size_t>(reason)];
    ++outcome.retries;
    if (outcome.retries <= 2)
      std::this_thread::yield();
    else
      std::this_thread::sleep_for(std::chrono::microseconds(1 << std::min(outcome.retries, 10)));
  }
}

namespace {

// Shared attempt mechanics; kept free so each protocol reads as a straight line.
struct Ops {
  Store& store;
  LockManager& locks;

  AcquireResult acquire(Engine::Worker&, std::shared_ptr<Txn>& t, std::vector<LockKey>& held,
                        std::vector<LockMode>& held_mode, std::int64_t& wait_ns, LockKey k, LockMode m,
                        std::chrono::nanoseconds timeout) {
    for (size_t i = 0; i < held.size(); ++i)
      if (held[i] == k && (held_mode[i] == LockMode::kExclusive || m == LockMode::kShared))
        return AcquireResult::kGranted;
    std::int64_t t0 = now_ns();
    AcquireResult r = locks.acquire(t, k, m, timeout);
    wait_ns += now_ns() - t0;
    if (r == AcquireResult::kGranted) {
      held.push_back(k);
      held_mode.push_back(m);
    }
    return r;
  }
};

}  // namespace

// Applies one operation against the live store. Returns false on a user abort.
static bool execute_op(Store& store, Procedure& p, Engine::Worker& w, bool history, Txn& txn,
                       std::vector<std::optional<Row>>& out, std::vector<char>& executed,
                       std::vector<std::tuple<std::uint32_t, Key, OpKind, std::optional<Row>>>* undo, int j,
                       Key key) {
  const OpInfo& info = p.ops()[static_cast<size_t>(j)];
  Table& tb = store.table(info.table);
  OpCall call;
  call.op = j;
  call.key = key;
  std::uint64_t seq = 0;
  call.row = tb.get(key, history ? &store.history_seq() : nullptr, &seq);
  if (history) w.history.push_back({seq, txn.id, info.table, key, HistoryKind::kRead});
  if (p.run(call, out) == OpStatus::kUserAbort) return false;
  if (is_write(info.kind)) {
    Table::Hooks hooks;
    hooks.wal = store.wal().enabled() ? &store.wal() : nullptr;
    hooks.seq_counter = history ? &store.history_seq() : nullptr;
    hooks.seq = &seq;
    hooks.txn = txn.id;
    hooks.table = info.table;
    std::optional<Row> after;
    switch (info.kind) {
      case OpKind::kWrite:
        if (!call.row) throw StorageError(tb.name() + ": write of absent key " + std::to_string(key));
        hooks.kind = WalKind::kWrite;
        after = call.new_row ? call.new_row : call.row;
        break;
      case OpKind::kInsert:
        hooks.kind = WalKind::kInsert;
        after = call.new_row ? call.new_row : Row{};
        break;
      case OpKind::kDelete: hooks.kind = WalKind::kDelete; break;
      case OpKind::kRead: break;
    }
    auto before = tb.apply(key, after, hooks);
    if (undo) undo->emplace_back(info.table, key, info.kind, before);
    if (history) w.history.push_back({seq, txn.id, info.table, key, HistoryKind::kWrite});
  }
  out[static_cast<size_t>(j)] = call.row;
  executed[static_cast<size_t>(j)] = 1;
  return true;
}

namespace {

void rollback(Store& store, Engine::Worker& w, bool history, Txn& txn,
              std::vector<std::tuple<std::uint32_t, Key, OpKind, std::optional<Row>>>& undo) {
  for (auto it = undo.rbegin(); it != undo.rend(); ++it) {
    auto& [table, key, kind, before] = *it;
    Table::Hooks hooks;
    hooks.wal = store.wal().enabled() ? &store.wal() : nullptr;
    hooks.txn = txn.id;
    hooks.table = table;
    hooks.kind = kind == OpKind::kInsert ? WalKind::kDelete : kind == OpKind::kDelete ? WalKind::kInsert : WalKind::kWrite;
    store.table(table).apply(key, before, hooks);
  }
  undo.clear();
  if (store.wal().enabled()) store.wal().append({0, txn.id, WalKind::kAbort, 0, 0, {}, {}});
  if (history) w.history.push_back({store.history_seq().fetch_add(1), txn.id, 0, 0, HistoryKind::kAbort});
}

void release_all(LockManager& locks, Store& store, Engine::Worker& w, bool history, Txn& txn,
                 std::vector<LockKey>& held, std::vector<LockMode>& held_mode) {
  for (const auto& k : held) {
    locks.release(txn, k);
    if (history) w.history.push_back({store.history_seq().fetch_add(1), txn.id, k.table, k.row, HistoryKind::kRelease});
  }
  held.clear();
  held_mode.clear();
}

void commit_record(Store& store, Engine::Worker& w, bool history, Txn& txn) {
  if (store.wal().enabled()) {
    store.wal().append({0, txn.id, WalKind::kCommit, 0, 0, {}, {}});
    store.wal().flush();
  }
  if (history) w.history.push_back({store.history_seq().fetch_add(1), txn.id, 0, 0, HistoryKind::kCommit});
}

bool begin_commit(Txn& t) {
  int expected = static_cast<int>(TxnPhase::kActive);
  if (t.aborted()) return false;
  return t.phase.compare_exchange_strong(expected, static_cast<int>(TxnPhase::kCommitting));
}

void finish(Txn& t, TxnPhase ph) {
  std::vector<std::shared_ptr<Txn>> deps;
  {
    std::lock_guard<std::mutex> g(t.m);
    t.phase.store(static_cast<int>(ph));
    deps.swap(t.dependents);
    t.cv.notify_all();
  }
  if (ph == TxnPhase::kCommitted) {
    for (auto& d : deps) {
      std::lock_guard<std::mutex> g(d->m);
      --d->pending_upstream;
      d->cv.notify_all();
    }
  }
}

// Aborts every transaction that read this one's retired writes and waits until they have
// rolled back, so later writers are undone first.
void cascade(Txn& t) {
  std::vector<std::shared_ptr<Txn>> deps;
  {
    std::lock_guard<std::mutex> g(t.m);
    t.phase.store(static_cast<int>(TxnPhase::kAborting));
    deps = t.dependents;
  }
  for (auto& d : deps) {
    d->wound(AbortReason::kCascade);
    {
      std::lock_guard<std::mutex> g(d->m);
      d->upstream_aborted = true;
      d->cv.notify_all();
    }
  }
  for (auto& d : deps)
    while (d->phase.load() != static_cast<int>(TxnPhase::kAborted) &&
           d->phase.load() != static_cast<int>(TxnPhase::kCommitted))
      std::this_thread::sleep_for(std::chrono::microseconds(20));
}

using UndoLog = std::vector<std::tuple<std::uint32_t, Key, OpKind, std::optional<Row>>>;

}  // namespace

AbortReason Engine::run_brook(Procedure& p, Attempt& a) {
  const CompiledPlan& cp = plan_for(p);
  const ExecutionPlan& plan = *cp.plan;
  const auto& ops = p.ops();
  Ops lk{store_, locks_};
  UndoLog undo;
  const size_t nt = store_.table_count();
  std::vector<std::vector<int>> pending(nt);
  std::vector<LockMode> table_mode(nt, LockMode::kShared);
  std::vector<char> gate_held(nt, 0);
  std::vector<std::optional<Key>> keys(ops.size());

  auto deps_ready = [&](int j) {
    for (int d : ops[static_cast<size_t>(j)].deps)
      if (!a.executed[static_cast<size_t>(d)] && p.active(d)) return false;
    return true;
  };
  auto take = [&](LockKey k, LockMode m) {
    AcquireResult r = lk.acquire(*a.worker, a.txn, a.held, a.held_mode, a.lock_wait_ns, k, m, {});
    if (r != AcquireResult::kGranted) throw std::logic_error("static plan lock request was refused");
    a.event(store_, HistoryKind::kLockGrant, k.table, k.row);
  };
  auto drop_gate = [&](std::uint32_t t) {
    if (!gate_held[t] || !pending[t].empty()) return;
    LockKey g{t, kGateRow};
    locks_.release(*a.txn, g);
    for (size_t i = 0; i < a.held.size(); ++i)
      if (a.held[i] == g) {
        a.held.erase(a.held.begin() + static_cast<long>(i));
        a.held_mode.erase(a.held_mode.begin() + static_cast<long>(i));
        break;
      }
    gate_held[t] = 0;
  };

  for (size_t h = 0; h < plan.hops.size(); ++h) {
    const PlanHop& hop = plan.hops[h];
    if (hop.kind == HopKind::kAcquire) {
      std::vector<std::pair<LockKey, LockMode>> rows;
      std::vector<std::uint32_t> gates;
      for (size_t i = 0; i < hop.items.size(); ++i) {
        auto t = static_cast<std::uint32_t>(hop.items[i].table);
        table_mode[t] = hop.items[i].mode;
        bool multi = cp.multi[h][i];
        int known = 0;
        for (int j : cp.guarded[h][i]) {
          if (!p.active(j)) continue;
          if (deps_ready(j)) {
            keys[static_cast<size_t>(j)] = p.key(j, a.out);
            rows.push_back({{t, *keys[static_cast<size_t>(j)]}, hop.items[i].mode});
            ++known;
          } else {
            pending[t].push_back(j);
          }
        }
        if (multi && gate_tables_[t] && (known > 1 || !pending[t].empty())) gates.push_back(t);
      }
      std::sort(gates.begin(), gates.end());
      for (auto t : gates) {
        take({t, kGateRow}, LockMode::kExclusive);
        gate_held[t] = 1;
      }
      std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
      for (const auto& [k, m] : rows) take(k, m);
      for (auto t : gates) drop_gate(t);
    } else if (hop.kind == HopKind::kOperation) {
      int j = hop.op_index;
      if (!p.active(j)) continue;
      std::uint32_t t = ops[static_cast<size_t>(j)].table;
      Key key = keys[static_cast<size_t>(j)] ? *keys[static_cast<size_t>(j)] : p.key(j, a.out);
      auto& pend = pending[t];
      auto it = std::find(pend.begin(), pend.end(), j);
      if (it != pend.end()) {
        take({t, key}, table_mode[t]);
        pend.erase(it);
        drop_gate(t);
      }
      if (!execute_op(store_, p, *a.worker, a.history, *a.txn, a.out, a.executed, &undo, j, key)) {
        if (static_cast<int>(h) >= plan.abort_horizon)
          throw std::logic_error(plan.template_name + ": user abort after the first release");
        rollback(store_, *a.worker, a.history, *a.txn, undo);
        release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
        finish(*a.txn, TxnPhase::kAborted);
        a.user_abort = true;
        return AbortReason::kNone;
      }
    } else {
      for (const auto& item : hop.items) {
        auto t = static_cast<std::uint32_t>(item.table);
        for (size_t i = 0; i < a.held.size();) {
          if (a.held[i].table == t) {
            locks_.release(*a.txn, a.held[i]);
            a.event(store_, HistoryKind::kRelease, t, a.held[i].row);
            a.held.erase(a.held.begin() + static_cast<long>(i));
            a.held_mode.erase(a.held_mode.begin() + static_cast<long>(i));
          } else {
            ++i;
          }
        }
        gate_held[t] = 0;
        pending[t].clear();
      }
    }
  }
  begin_commit(*a.txn);
  commit_record(store_, *a.worker, a.history, *a.txn);
  finish(*a.txn, TxnPhase::kCommitted);
  release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
  return AbortReason::kNone;
}

AbortReason Engine::run_lock_as_you_go(Procedure& p, Attempt& a, bool retire_after_last_write) {
  auto shape_ptr = shape_for(p);
  const Shape& shape = *shape_ptr;
  const auto& ops = p.ops();
  Ops lk{store_, locks_};
  UndoLog undo;
  const bool dynamic = p.txn_class() == TxnClass::kDynamic && opts_.protocol == Protocol::kBrook2PL;
  std::chrono::nanoseconds timeout = dynamic ? std::chrono::nanoseconds(opts_.dynamic_wait_timeout)
                                             : std::chrono::nanoseconds::zero();
  std::vector<int> last_write(store_.table_count(), -1);
  // Dynamic programs carry no last-write knowledge, so they hold exclusive locks to commit.
  if (retire_after_last_write && p.txn_class() == TxnClass::kStatic)
    for (size_t j = 0; j < ops.size(); ++j)
      if (p.active(static_cast<int>(j)) && is_write(ops[j].kind)) last_write[ops[j].table] = static_cast<int>(j);

  auto abort_with = [&](AbortReason why) {
    if (retire_after_last_write) cascade(*a.txn);
    rollback(store_, *a.worker, a.history, *a.txn, undo);
    release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
    finish(*a.txn, TxnPhase::kAborted);
    return why;
  };
  auto reason_of = [&](AcquireResult r) {
    if (r == AcquireResult::kTimedOut) return AbortReason::kTimeout;
    int why = a.txn->abort_reason.load();
    return why ? static_cast<AbortReason>(why) : AbortReason::kWound;
  };

  for (size_t jj = 0; jj < ops.size(); ++jj) {
    int j = static_cast<int>(jj);
    if (!p.active(j)) continue;
    if (a.txn->aborted()) return abort_with(static_cast<AbortReason>(a.txn->abort_reason.load()));
    std::uint32_t t = ops[jj].table;
    Key key = p.key(j, a.out);
    LockMode m = dynamic ? LockMode::kExclusive : shape.mode[t];
    AcquireResult r = lk.acquire(*a.worker, a.txn, a.held, a.held_mode, a.lock_wait_ns, {t, key}, m, timeout);
    if (r != AcquireResult::kGranted) return abort_with(reason_of(r));
    a.event(store_, HistoryKind::kLockGrant, t, key);
    if (!execute_op(store_, p, *a.worker, a.history, *a.txn, a.out, a.executed, &undo, j, key)) {
      abort_with(AbortReason::kNone);
      a.user_abort = true;
      return AbortReason::kNone;
    }
    if (retire_after_last_write && last_write[t] == j) {
      for (size_t i = 0; i < a.held.size(); ++i)
        if (a.held[i].table == t && a.held_mode[i] == LockMode::kExclusive) locks_.retire(*a.txn, a.held[i]);
    }
  }
  if (retire_after_last_write) {
    std::int64_t t0 = now_ns();
    std::unique_lock<std::mutex> g(a.txn->m);
    a.txn->cv.wait(g, [&] { return a.txn->pending_upstream == 0 || a.txn->aborted(); });
    g.unlock();
    a.lock_wait_ns += now_ns() - t0;
  }
  if (!begin_commit(*a.txn)) {
    int why = a.txn->abort_reason.load();
    return abort_with(why ? static_cast<AbortReason>(why) : AbortReason::kWound);
  }
  commit_record(store_, *a.worker, a.history, *a.txn);
  finish(*a.txn, TxnPhase::kCommitted);
  release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
  return AbortReason::kNone;
}

AbortReason Engine::run_sorted(Procedure& p, Attempt& a) {
  auto shape_ptr = shape_for(p);
  const Shape& shape = *shape_ptr;
  const auto& ops = p.ops();
  Ops lk{store_, locks_};
  UndoLog undo;

  // Reconnaissance: learn the key set from unlocked reads.
  Outputs peek(ops.size());
  std::vector<std::pair<LockKey, LockMode>> want;
  for (size_t jj = 0; jj < ops.size(); ++jj) {
    int j = static_cast<int>(jj);
    if (!p.active(j)) continue;
    Key key = p.key(j, peek);
    peek[jj] = store_.table(ops[jj].table).get(key);
    want.push_back({{ops[jj].table, key}, shape.mode[ops[jj].table]});
  }
  std::sort(want.begin(), want.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  want.erase(std::unique(want.begin(), want.end(), [](const auto& x, const auto& y) { return x.first == y.first; }),
             want.end());
  for (const auto& [k, m] : want) {
    lk.acquire(*a.worker, a.txn, a.held, a.held_mode, a.lock_wait_ns, k, m, {});
    a.event(store_, HistoryKind::kLockGrant, k.table, k.row);
  }
  for (size_t jj = 0; jj < ops.size(); ++jj) {
    int j = static_cast<int>(jj);
    if (!p.active(j)) continue;
    Key key = p.key(j, a.out);
    LockKey k{ops[jj].table, key};
    bool locked = std::any_of(want.begin(), want.end(), [&](const auto& x) { return x.first == k; });
    if (!locked) {
      rollback(store_, *a.worker, a.history, *a.txn, undo);
      release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
      finish(*a.txn, TxnPhase::kAborted);
      return AbortReason::kValidation;
    }
    if (!execute_op(store_, p, *a.worker, a.history, *a.txn, a.out, a.executed, &undo, j, key)) {
      rollback(store_, *a.worker, a.history, *a.txn, undo);
      release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
      finish(*a.txn, TxnPhase::kAborted);
      a.user_abort = true;
      return AbortReason::kNone;
    }
  }
  begin_commit(*a.txn);
  commit_record(store_, *a.worker, a.history, *a.txn);
  finish(*a.txn, TxnPhase::kCommitted);
  release_all(locks_, store_, *a.worker, a.history, *a.txn, a.held, a.held_mode);
  return AbortReason::kNone;
}

AbortReason Engine::run_occ(Procedure& p, Attempt& a) {
  const auto& ops = p.ops();
  struct ReadEntry {
    LockKey key;
    std::optional<std::uint64_t> version;
  };
  struct WriteEntry {
    LockKey key;
    OpKind kind;
    std::optional<Row> after;
  };
  std::vector<ReadEntry> reads;
  std::vector<WriteEntry> writes;
  auto buffered = [&](const LockKey& k) -> WriteEntry* {
    for (auto it = writes.rbegin(); it != writes.rend(); ++it)
      if (it->key == k) return &*it;
    return nullptr;
  };

  for (size_t jj = 0; jj < ops.size(); ++jj) {
    int j = static_cast<int>(jj);
    if (!p.active(j)) continue;
    const OpInfo& info = ops[jj];
    LockKey k{info.table, p.key(j, a.out)};
    OpCall call;
    call.op = j;
    call.key = k.row;
    if (WriteEntry* w = buffered(k)) {
      call.row = w->after;
    } else {
      std::uint64_t seq = 0;
      call.row = store_.table(info.table).get(k.row, a.history ? &store_.history_seq() : nullptr, &seq);
      a.event(store_, HistoryKind::kRead, info.table, k.row, seq);
      bool seen = std::any_of(reads.begin(), reads.end(), [&](const ReadEntry& r) { return r.key == k; });
      if (!seen) reads.push_back({k, call.row ? std::optional<std::uint64_t>(call.row->version) : std::nullopt});
    }
    if (p.run(call, a.out) == OpStatus::kUserAbort) {
      if (store_.wal().enabled()) store_.wal().append({0, a.txn->id, WalKind::kAbort, 0, 0, {}, {}});
      a.event(store_, HistoryKind::kAbort, 0, 0);
      a.user_abort = true;
      return AbortReason::kNone;
    }
    if (is_write(info.kind)) {
      std::optional<Row> after;
      if (info.kind == OpKind::kWrite) after = call.new_row ? call.new_row : call.row;
      if (info.kind == OpKind::kInsert) after = call.new_row ? call.new_row : Row{};
      if (info.kind == OpKind::kInsert && call.row) {
        a.event(store_, HistoryKind::kAbort, 0, 0);
        return AbortReason::kValidation;
      }
      writes.push_back({k, info.kind, after});
    }
    a.out[jj] = call.row;
    a.executed[jj] = 1;
  }

  std::lock_guard<std::mutex> g(occ_commit_);
  for (const auto& r : reads) {
    auto cur = store_.table(r.key.table).get(r.key.row);
    std::optional<std::uint64_t> v = cur ? std::optional<std::uint64_t>(cur->version) : std::nullopt;
    if (v != r.version) {
      if (store_.wal().enabled()) store_.wal().append({0, a.txn->id, WalKind::kAbort, 0, 0, {}, {}});
      a.event(store_, HistoryKind::kAbort, 0, 0);
      return AbortReason::kValidation;
    }
  }
  // Collapse to the final image per key, applied in first-write order.
  std::vector<LockKey> order;
  for (const auto& w : writes)
    if (std::find(order.begin(), order.end(), w.key) == order.end()) order.push_back(w.key);
  for (const auto& k : order) {
    const WriteEntry* last = buffered(k);
    Table& tb = store_.table(k.table);
    auto cur = tb.get(k.row);
    if (!cur && !last->after) continue;
    std::uint64_t seq = 0;
    Table::Hooks hooks;
    hooks.wal = store_.wal().enabled() ? &store_.wal() : nullptr;
    hooks.seq_counter = a.history ? &store_.history_seq() : nullptr;
    hooks.seq = &seq;
    hooks.txn = a.txn->id;
    hooks.table = k.table;
    hooks.kind = !last->after ? WalKind::kDelete : cur ? WalKind::kWrite : WalKind::kInsert;
    tb.apply(k.row, last->after, hooks);
    a.event(store_, HistoryKind::kWrite, k.table, k.row, seq);
  }
  commit_record(store_, *a.worker, a.history, *a.txn);
  return AbortReason::kNone;
}

std::vector<HistoryEvent> Engine::merge_history(std::vector<Worker>& workers) {
  std::vector<HistoryEvent> all;
  for (auto& w : workers) {
    all.insert(all.end(), w.history.begin(), w.history.end());
    w.history.clear();
  }
  std::sort(all.begin(), all.end(), [](const HistoryEvent& x, const HistoryEvent& y) { return x.seq < y.seq; });
  return all;
}

bool check_serializable(const std::vector<HistoryEvent>& events) {
  std::set<std::uint64_t> committed;
  for (const auto& e : events)
    if (e.kind == HistoryKind::kCommit) committed.insert(e.txn);
  std::vector<const HistoryEvent*> rw;
  for (const auto& e : events)
    if ((e.kind == HistoryKind::kRead || e.kind == HistoryKind::kWrite) && committed.count(e.txn)) rw.push_back(&e);
  std::sort(rw.begin(), rw.end(), [](const HistoryEvent* x, const HistoryEvent* y) { return x->seq < y->seq; });

  struct KeyState {
    std::uint64_t last_writer = 0;
    std::vector<std::uint64_t> readers;
  };
  std::map<std::pair<std::uint32_t, Key>, KeyState> state;
  std::map<std::uint64_t, std::set<std::uint64_t>> adj;
  auto edge = [&](std::uint64_t from, std::uint64_t to) {
    if (from != 0 && from != to) adj[from].insert(to);
  };
  for (const HistoryEvent* e : rw) {
    KeyState& ks = state[{e->table, e->key}];
    if (e->kind == HistoryKind::kRead) {
      edge(ks.last_writer, e->txn);
      ks.readers.push_back(e->txn);
    } else {
      edge(ks.last_writer, e->txn);
      for (auto r : ks.readers) edge(r, e->txn);
      ks.readers.clear();
      ks.last_writer = e->txn;
    }
  }
  // Kahn's algorithm: serializable iff the conflict graph is acyclic.
  std::map<std::uint64_t, int> indeg;
  for (auto t : committed) indeg[t] = 0;
  for (const auto& [from, tos] : adj)
    for (auto to : tos) ++indeg[to];
  std::vector<std::uint64_t> ready;
  for (const auto& [t, d] : indeg)
    if (d == 0) ready.push_back(t);
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto t = ready.back();
    ready.pop_back();
    ++seen;
    auto it = adj.find(t);
    if (it == adj.end()) continue;
    for (auto to : it->second)
      if (--indeg[to] == 0) ready.push_back(to);
  }
  return seen == indeg.size();
}

Watchdog::Watchdog(LockManager& locks, std::chrono::milliseconds period) : locks_(locks), period_(period) {}

Watchdog::~Watchdog() {
  if (running_) stop();
}

void Watchdog::start() {
  running_ = true;
  report_ = {};
  thread_ = std::thread([this] {
    while (running_.load()) {
      std::this_thread::sleep_for(period_);
      WaitForGraph g = locks_.snapshot();
      ++report_.snapshots;
      if (g.has_cycle()) ++report_.cyclic;
      if (g.has_static_cycle()) ++report_.static_cyclic;
      report_.max_wait_ns = std::max(report_.max_wait_ns, g.oldest_wait_ns);
    }
  });
}

Watchdog::Report Watchdog::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
  return report_;
}

}  // namespace brook
