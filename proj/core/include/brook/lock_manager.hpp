#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <utility>
#include <vector>

#include "brook/common.hpp"

namespace brook {

struct LockKey {
  std::uint32_t table = 0;
  std::uint64_t row = 0;

  bool operator==(const LockKey&) const = default;
  bool operator<(const LockKey& o) const { return table != o.table ? table < o.table : row < o.row; }
};

struct LockKeyHash {
  std::size_t operator()(const LockKey& k) const noexcept {
    std::uint64_t x = k.row * 0x9E3779B97F4A7C15ull ^ (static_cast<std::uint64_t>(k.table) << 56);
    x ^= x >> 31;
    return static_cast<std::size_t>(x * 0xBF58476D1CE4E5B9ull);
  }
};

// Sentinel row serializing multi-row acquisitions on one table.
inline constexpr std::uint64_t kGateRow = ~0ull;

enum class Decision { kWait, kAbortHolder, kAbortSelf };

// Static/dynamic arbitration on a conflict between a requester and one holder.
Decision arbitrate(TxnClass requester, TxnClass holder, bool requester_older);
// Classic wound-wait: an older requester wounds, a younger one waits.
Decision wound_wait_decision(bool requester_older);

enum class WaitPolicy {
  kFifo,       // plain queueing, never aborts anyone
  kWoundWait,  // timestamp-ordered queue, older requesters wound younger holders
  kMixed,      // static/dynamic arbitration
};

enum class AbortReason : int { kNone = 0, kWound, kValidation, kCascade, kTimeout };

enum class TxnPhase : int { kActive, kCommitting, kCommitted, kAborting, kAborted };

struct Txn {
  Txn(std::uint64_t id_, std::uint64_t ts_, TxnClass cls_, WaitPolicy policy_)
      : id(id_), ts(ts_), cls(cls_), policy(policy_) {}

  const std::uint64_t id;
  const std::uint64_t ts;  // smaller is older
  const TxnClass cls;
  const WaitPolicy policy;

  std::atomic<int> phase{static_cast<int>(TxnPhase::kActive)};
  std::atomic<int> abort_reason{0};
  std::atomic<std::int64_t> wait_since_ns{0};  // steady clock, 0 when not waiting

  std::mutex m;
  std::condition_variable cv;
  // Dirty-read dependencies (retired-lock protocol), guarded by m.
  std::vector<std::shared_ptr<Txn>> dependents;
  int pending_upstream = 0;
  bool upstream_aborted = false;

  bool aborted() const { return abort_reason.load(std::memory_order_acquire) != 0; }
  // Marks the txn for abort unless it already committed or began committing. Returns true
  // if this call set the flag.
  bool wound(AbortReason why);
  void notify();
};

enum class AcquireResult { kGranted, kAborted, kTimedOut };

struct LockCounters {
  std::uint64_t grants = 0;
  std::uint64_t waits = 0;
  std::uint64_t wounds = 0;
  std::uint64_t self_aborts = 0;
  std::uint64_t retirements = 0;
  std::uint64_t timeouts = 0;
};

struct WaitForGraph {
  std::vector<std::uint64_t> txns;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;  // waiter -> blocker
  std::vector<std::pair<std::uint64_t, TxnClass>> classes;
  std::int64_t oldest_wait_ns = 0;  // longest current wait

  bool has_cycle() const;
  // Cycle check restricted to static transactions.
  bool has_static_cycle() const;
};

class LockManager {
 public:
  explicit LockManager(std::size_t shards = 1024);
  ~LockManager();
  LockManager(const LockManager&) = delete;
  LockManager& operator=(const LockManager&) = delete;

  // Blocks until granted or the txn is aborted. A positive timeout bounds the wait.
  AcquireResult acquire(const std::shared_ptr<Txn>& t, LockKey key, LockMode mode,
                        std::chrono::nanoseconds timeout = std::chrono::nanoseconds::zero());
  // Releases a held or retired lock. Throws std::logic_error if `t` holds nothing on key.
  void release(Txn& t, LockKey key);
  // Moves an exclusive holder to the retired list so later requesters may proceed on its
  // dirty value; they become commit-dependent on `t`.
  void retire(Txn& t, LockKey key);

  bool holds(const Txn& t, LockKey key, LockMode mode) const;
  WaitForGraph snapshot() const;
  LockCounters counters() const;
  std::size_t active_entries() const;

 private:
  struct Request;
  struct Entry;
  struct Shard;

  Shard& shard_of(LockKey k) const;
  void promote(Entry& e);
  bool grantable(const Entry& e, const Request& r) const;
  void add_dependencies(Entry& e, Request& r);

  std::vector<std::unique_ptr<Shard>> shards_;
  mutable std::atomic<std::uint64_t> grants_{0}, waits_{0}, wounds_{0}, self_aborts_{0}, retirements_{0},
      timeouts_{0};
};

std::int64_t steady_now_ns();

}  // namespace brook
