#include "brook/lock_manager.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

namespace brook {

std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Decision arbitrate(TxnClass requester, TxnClass holder, bool requester_older) {
  if (requester == TxnClass::kStatic && holder == TxnClass::kStatic) return Decision::kWait;
  if (requester == TxnClass::kDynamic && holder == TxnClass::kDynamic)
    return requester_older ? Decision::kAbortHolder : Decision::kWait;
  if (requester == TxnClass::kDynamic) return requester_older ? Decision::kAbortSelf : Decision::kWait;
  return requester_older ? Decision::kAbortHolder : Decision::kWait;
}

Decision wound_wait_decision(bool requester_older) {
  return requester_older ? Decision::kAbortHolder : Decision::kWait;
}

bool Txn::wound(AbortReason why) {
  int ph = phase.load(std::memory_order_acquire);
  if (ph == static_cast<int>(TxnPhase::kCommitting) || ph == static_cast<int>(TxnPhase::kCommitted)) return false;
  int expected = 0;
  if (!abort_reason.compare_exchange_strong(expected, static_cast<int>(why))) return false;
  notify();
  return true;
}

void Txn::notify() {
  std::lock_guard<std::mutex> g(m);
  cv.notify_all();
}

struct LockManager::Request {
  std::shared_ptr<Txn> txn;
  LockMode mode;
  std::atomic<bool> granted{false};
};

struct LockManager::Entry {
  struct Holder {
    std::shared_ptr<Txn> txn;
    LockMode mode;
  };
  std::vector<Holder> holders;
  std::vector<Holder> retired;
  std::deque<Request*> queue;

  bool empty() const { return holders.empty() && retired.empty() && queue.empty(); }
};

struct LockManager::Shard {
  mutable std::mutex latch;
  std::unordered_map<LockKey, Entry, LockKeyHash> entries;
};

LockManager::LockManager(std::size_t shards) {
  shards_.reserve(shards);
  for (std::size_t i = 0; i < shards; ++i) shards_.push_back(std::make_unique<Shard>());
}

LockManager::~LockManager() = default;

LockManager::Shard& LockManager::shard_of(LockKey k) const {
  return *shards_[LockKeyHash{}(k) % shards_.size()];
}

namespace {

bool is_older(const Txn& a, const Txn& b) { return a.ts < b.ts || (a.ts == b.ts && a.id < b.id); }

bool rolling_back(const Txn& t) {
  int ph = t.phase.load();
  return t.aborted() || ph == static_cast<int>(TxnPhase::kAborting) || ph == static_cast<int>(TxnPhase::kAborted);
}

// Static requests under mixed arbitration queue FIFO like plain 2PL; the rest queue by age.
bool timestamp_ordered(const Txn& t) {
  return t.policy == WaitPolicy::kWoundWait || (t.policy == WaitPolicy::kMixed && t.cls == TxnClass::kDynamic);
}

}  // namespace

bool LockManager::grantable(const Entry& e, const Request& r) const {
  for (const auto& h : e.holders)
    if (h.txn.get() != r.txn.get() && !compatible(h.mode, r.mode)) return false;
  for (const auto& x : e.retired) {
    if (x.txn.get() == r.txn.get() || compatible(x.mode, r.mode)) continue;
    // Dirty data may be consumed only from an older, still-live writer.
    if (!is_older(*x.txn, *r.txn) || rolling_back(*x.txn)) return false;
  }
  return true;
}

void LockManager::add_dependencies(Entry& e, Request& r) {
  for (auto& x : e.retired) {
    if (x.txn.get() == r.txn.get() || compatible(x.mode, r.mode)) continue;
    std::lock_guard<std::mutex> g(x.txn->m);
    int ph = x.txn->phase.load();
    if (ph == static_cast<int>(TxnPhase::kCommitted) || ph == static_cast<int>(TxnPhase::kCommitting)) continue;
    if (ph == static_cast<int>(TxnPhase::kAborting) || ph == static_cast<int>(TxnPhase::kAborted)) {
      // The writer's cascade already ran; the reader must abort on its own.
      r.txn->wound(AbortReason::kCascade);
      std::lock_guard<std::mutex> g2(r.txn->m);
      r.txn->upstream_aborted = true;
      continue;
    }
    x.txn->dependents.push_back(r.txn);
    std::lock_guard<std::mutex> g2(r.txn->m);
    ++r.txn->pending_upstream;
  }
}

void LockManager::promote(Entry& e) {
  while (!e.queue.empty()) {
    Request* head = e.queue.front();
    if (grantable(e, *head)) {
      e.queue.pop_front();
      add_dependencies(e, *head);
      e.holders.push_back({head->txn, head->mode});
      grants_.fetch_add(1, std::memory_order_relaxed);
      head->granted.store(true, std::memory_order_release);
      head->txn->notify();
      continue;
    }
    // The head re-arbitrates against whoever holds the lock now.
    Txn& req = *head->txn;
    if (req.policy == WaitPolicy::kFifo) break;
    auto judge = [&](const Entry::Holder& h) {
      if (h.txn.get() == &req || compatible(h.mode, head->mode)) return;
      bool older = is_older(req, *h.txn);
      Decision d = req.policy == WaitPolicy::kMixed ? arbitrate(req.cls, h.txn->cls, older)
                                                    : wound_wait_decision(older);
      if (d == Decision::kAbortHolder) {
        if (h.txn->wound(AbortReason::kWound)) wounds_.fetch_add(1, std::memory_order_relaxed);
      } else if (d == Decision::kAbortSelf) {
        if (req.wound(AbortReason::kWound)) self_aborts_.fetch_add(1, std::memory_order_relaxed);
      }
    };
    for (const auto& h : e.holders) judge(h);
    for (const auto& x : e.retired) judge(x);
    break;
  }
}

AcquireResult LockManager::acquire(const std::shared_ptr<Txn>& t, LockKey key, LockMode mode,
                                   std::chrono::nanoseconds timeout) {
  Shard& s = shard_of(key);
  Request r;
  r.txn = t;
  r.mode = mode;
  {
    std::lock_guard<std::mutex> g(s.latch);
    Entry& e = s.entries[key];
    for (const auto& h : e.holders)
      if (h.txn.get() == t.get()) {
        if (h.mode == LockMode::kExclusive || mode == LockMode::kShared) return AcquireResult::kGranted;
        throw std::logic_error("lock upgrade requested");
      }
    for (const auto& x : e.retired)
      if (x.txn.get() == t.get()) return AcquireResult::kGranted;
    if (t->aborted()) {
      if (e.empty()) s.entries.erase(key);
      return AcquireResult::kAborted;
    }
    if (e.queue.empty() && grantable(e, r)) {
      add_dependencies(e, r);
      e.holders.push_back({t, mode});
      grants_.fetch_add(1, std::memory_order_relaxed);
      return AcquireResult::kGranted;
    }
    if (!timestamp_ordered(*t)) {
      e.queue.push_back(&r);
    } else {
      if (t->policy == WaitPolicy::kMixed) {
        for (const auto& h : e.holders) {
          if (compatible(h.mode, mode)) continue;
          if (arbitrate(t->cls, h.txn->cls, is_older(*t, *h.txn)) == Decision::kAbortSelf) {
            self_aborts_.fetch_add(1, std::memory_order_relaxed);
            t->wound(AbortReason::kWound);
            if (e.empty()) s.entries.erase(key);
            return AcquireResult::kAborted;
          }
        }
      }
      auto pos = std::find_if(e.queue.begin(), e.queue.end(), [&](const Request* q) {
        return timestamp_ordered(*q->txn) && is_older(*t, *q->txn);
      });
      e.queue.insert(pos, &r);
    }
    promote(e);
    if (r.granted.load(std::memory_order_acquire)) return AcquireResult::kGranted;
    waits_.fetch_add(1, std::memory_order_relaxed);
  }

  bool timed_out = false;
  {
    std::unique_lock<std::mutex> tl(t->m);
    t->wait_since_ns.store(steady_now_ns(), std::memory_order_relaxed);
    auto ready = [&] { return r.granted.load(std::memory_order_acquire) || t->aborted(); };
    if (timeout.count() > 0) {
      timed_out = !t->cv.wait_for(tl, timeout, ready);
    } else {
      t->cv.wait(tl, ready);
    }
    t->wait_since_ns.store(0, std::memory_order_relaxed);
  }
  if (r.granted.load(std::memory_order_acquire)) return AcquireResult::kGranted;

  std::lock_guard<std::mutex> g(s.latch);
  if (r.granted.load(std::memory_order_acquire)) return AcquireResult::kGranted;
  Entry& e = s.entries[key];
  e.queue.erase(std::remove(e.queue.begin(), e.queue.end(), &r), e.queue.end());
  promote(e);
  if (e.empty()) s.entries.erase(key);
  if (timed_out && !t->aborted()) {
    timeouts_.fetch_add(1, std::memory_order_relaxed);
    return AcquireResult::kTimedOut;
  }
  return AcquireResult::kAborted;
}

void LockManager::release(Txn& t, LockKey key) {
  Shard& s = shard_of(key);
  std::lock_guard<std::mutex> g(s.latch);
  auto it = s.entries.find(key);
  if (it == s.entries.end()) throw std::logic_error("release of a lock that is not held");
  Entry& e = it->second;
  auto drop = [&](std::vector<Entry::Holder>& v) {
    auto p = std::find_if(v.begin(), v.end(), [&](const Entry::Holder& h) { return h.txn.get() == &t; });
    if (p == v.end()) return false;
    v.erase(p);
    return true;
  };
  if (!drop(e.holders) && !drop(e.retired)) throw std::logic_error("release of a lock that is not held");
  promote(e);
  if (e.empty()) s.entries.erase(it);
}

void LockManager::retire(Txn& t, LockKey key) {
  Shard& s = shard_of(key);
  std::lock_guard<std::mutex> g(s.latch);
  auto it = s.entries.find(key);
  if (it == s.entries.end()) throw std::logic_error("retire of a lock that is not held");
  Entry& e = it->second;
  auto p = std::find_if(e.holders.begin(), e.holders.end(),
                        [&](const Entry::Holder& h) { return h.txn.get() == &t; });
  if (p == e.holders.end()) throw std::logic_error("retire of a lock that is not held");
  if (p->mode != LockMode::kExclusive) throw std::logic_error("only exclusive locks retire");
  e.retired.push_back(*p);
  e.holders.erase(p);
  retirements_.fetch_add(1, std::memory_order_relaxed);
  promote(e);
}

bool LockManager::holds(const Txn& t, LockKey key, LockMode mode) const {
  Shard& s = shard_of(key);
  std::lock_guard<std::mutex> g(s.latch);
  auto it = s.entries.find(key);
  if (it == s.entries.end()) return false;
  for (const auto& h : it->second.holders)
    if (h.txn.get() == &t && (h.mode == LockMode::kExclusive || mode == LockMode::kShared)) return true;
  for (const auto& h : it->second.retired)
    if (h.txn.get() == &t) return true;
  return false;
}

WaitForGraph LockManager::snapshot() const {
  std::vector<std::unique_lock<std::mutex>> held;
  held.reserve(shards_.size());
  for (const auto& s : shards_) held.emplace_back(s->latch);
  WaitForGraph g;
  std::map<std::uint64_t, TxnClass> cls;
  std::set<std::pair<std::uint64_t, std::uint64_t>> edges;
  std::int64_t now = steady_now_ns();
  for (const auto& s : shards_) {
    for (const auto& [key, e] : s->entries) {
      for (const auto& h : e.holders) cls[h.txn->id] = h.txn->cls;
      for (const auto& h : e.retired) cls[h.txn->id] = h.txn->cls;
      for (size_t i = 0; i < e.queue.size(); ++i) {
        const Request* q = e.queue[i];
        cls[q->txn->id] = q->txn->cls;
        std::int64_t since = q->txn->wait_since_ns.load(std::memory_order_relaxed);
        if (since > 0) g.oldest_wait_ns = std::max(g.oldest_wait_ns, now - since);
        for (const auto& h : e.holders)
          if (h.txn.get() != q->txn.get() && !compatible(h.mode, q->mode)) edges.insert({q->txn->id, h.txn->id});
        for (const auto& h : e.retired)
          if (h.txn.get() != q->txn.get() && !compatible(h.mode, q->mode)) edges.insert({q->txn->id, h.txn->id});
        for (size_t j = 0; j < i; ++j) {
          const Request* p = e.queue[j];
          if (p->txn.get() != q->txn.get() && !compatible(p->mode, q->mode)) edges.insert({q->txn->id, p->txn->id});
        }
      }
    }
  }
  for (const auto& [id, c] : cls) {
    g.txns.push_back(id);
    g.classes.emplace_back(id, c);
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

namespace {

bool cyclic(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& edges,
            const std::function<bool(std::uint64_t)>& keep) {
  std::map<std::uint64_t, std::vector<std::uint64_t>> adj;
  for (const auto& [a, b] : edges)
    if (keep(a) && keep(b)) adj[a].push_back(b);
  std::map<std::uint64_t, int> color;  // 0 white, 1 grey, 2 black
  std::function<bool(std::uint64_t)> dfs = [&](std::uint64_t v) {
    color[v] = 1;
    for (auto w : adj[v]) {
      int c = color[w];
      if (c == 1) return true;
      if (c == 0 && dfs(w)) return true;
    }
    color[v] = 2;
    return false;
  };
  for (const auto& [v, _] : adj)
    if (color[v] == 0 && dfs(v)) return true;
  return false;
}

}  // namespace

bool WaitForGraph::has_cycle() const {
  return cyclic(edges, [](std::uint64_t) { return true; });
}

bool WaitForGraph::has_static_cycle() const {
  std::set<std::uint64_t> stat;
  for (const auto& [id, c] : classes)
    if (c == TxnClass::kStatic) stat.insert(id);
  return cyclic(edges, [&](std::uint64_t id) { return stat.count(id) > 0; });
}

LockCounters LockManager::counters() const {
  LockCounters c;
  c.grants = grants_.load();
  c.waits = waits_.load();
  c.wounds = wounds_.load();
  c.self_aborts = self_aborts_.load();
  c.retirements = retirements_.load();
  c.timeouts = timeouts_.load();
  return c;
}

std::size_t LockManager::active_entries() const {
  std::size_t n = 0;
  for (const auto& s : shards_) {
    std::lock_guard<std::mutex> g(s->latch);
    n += s->entries.size();
  }
  return n;
}

}  // namespace brook
