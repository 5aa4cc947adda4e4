#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <thread>
#include <vector>

#include "brook/analyzer.hpp"
#include "brook/lock_manager.hpp"
#include "brook/storage.hpp"

namespace brook {

enum class Protocol { kBrook2PL, kWoundWait, kBamboo, kSortedLocks, kOcc };

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);

struct OpInfo {
  std::uint32_t table = 0;
  OpKind kind = OpKind::kRead;
  bool may_abort = false;
  std::vector<int> deps;
};

using Outputs = std::vector<std::optional<Row>>;

struct OpCall {
  int op = 0;
  Key key = 0;
  std::optional<Row> row;      // current value; absent for inserts and missing keys
  std::optional<Row> new_row;  // set by the procedure for Write and Insert
};

enum class OpStatus { kOk, kUserAbort };

// A bound transaction instance: a stored procedure plus its arguments.
class Procedure {
 public:
  virtual ~Procedure() = default;
  virtual TxnClass txn_class() const { return TxnClass::kStatic; }
  // Index into the engine's workload templates; -1 for ad-hoc dynamic programs.
  virtual int template_index() const = 0;
  virtual int path_id() const { return 0; }
  virtual const std::vector<OpInfo>& ops() const = 0;
  // False for expanded loop iterations this instance does not use.
  virtual bool active(int op) const {
    (void)op;
    return true;
  }
  // Called only once every dependency of `op` has executed.
  virtual Key key(int op, const Outputs& out) const = 0;
  virtual OpStatus run(OpCall& call, const Outputs& out) = 0;
  // Observes a successful commit (for generators that track created rows).
  virtual void committed() {}
};

// Operation shapes of one template path, for procedures backed by the DSL.
std::vector<OpInfo> op_infos(const TemplatePath& path);

enum class HistoryKind : std::uint8_t { kLockGrant, kRead, kWrite, kRelease, kCommit, kAbort };

struct HistoryEvent {
  std::uint64_t seq = 0;
  std::uint64_t txn = 0;
  std::uint32_t table = 0;
  Key key = 0;
  HistoryKind kind = HistoryKind::kRead;
};

// Conflict-graph test over committed transactions, ordered by event sequence per key.
bool check_serializable(const std::vector<HistoryEvent>& events);

struct TxnOutcome {
  enum class Status { kCommitted, kUserAborted };
  Status status = Status::kCommitted;
  int retries = 0;
  std::array<int, 5> cc_aborts{};  // indexed by AbortReason
  std::int64_t useful_ns = 0;
  std::int64_t lock_wait_ns = 0;
  std::int64_t wasted_ns = 0;
};

struct EngineOptions {
  Protocol protocol = Protocol::kBrook2PL;
  bool record_history = false;
  // Dynamic transactions in mixed mode give up a lock wait after this long and retry.
  std::chrono::milliseconds dynamic_wait_timeout{20};
  std::size_t lock_shards = 4096;
};

class Engine {
 public:
  struct Worker {
    int id = 0;
    std::vector<HistoryEvent> history;
  };

  // `plans` is required for Brook2PL and ignored otherwise.
  Engine(Store& store, const Workload& workload, std::vector<ExecutionPlan> plans, EngineOptions opts);
  ~Engine();

  TxnOutcome run(Procedure& p, Worker& w);

  LockManager& locks() { return locks_; }
  Store& store() { return store_; }
  const EngineOptions& options() const { return opts_; }
  const Workload& workload() const { return workload_; }
  std::uint64_t next_timestamp() { return ts_counter_.fetch_add(1); }

  static std::vector<HistoryEvent> merge_history(std::vector<Worker>& workers);

 private:
  struct CompiledPlan;
  struct Shape;
  struct Attempt;

  const CompiledPlan& plan_for(const Procedure& p) const;
  std::shared_ptr<const Shape> shape_for(const Procedure& p);

  AbortReason run_brook(Procedure& p, Attempt& a);
  AbortReason run_lock_as_you_go(Procedure& p, Attempt& a, bool retire_after_last_write);
  AbortReason run_sorted(Procedure& p, Attempt& a);
  AbortReason run_occ(Procedure& p, Attempt& a);

  Store& store_;
  Workload workload_;
  std::vector<ExecutionPlan> plans_;
  EngineOptions opts_;
  LockManager locks_;
  std::vector<std::unique_ptr<CompiledPlan>> compiled_;
  std::map<std::pair<int, int>, const CompiledPlan*> plan_index_;
  std::mutex shape_mu_;
  std::map<std::pair<int, int>, std::shared_ptr<const Shape>> shapes_;
  // Tables some plan locks row by row as keys become known; multi-row acquisitions on them take a gate.
  std::vector<char> gate_tables_;
  std::atomic<std::uint64_t> ts_counter_{1};
  std::atomic<std::uint64_t> txn_counter_{1};
  std::mutex occ_commit_;
};

class Watchdog {
 public:
  struct Report {
    std::size_t snapshots = 0;
    std::size_t cyclic = 0;         // snapshots containing any cycle
    std::size_t static_cyclic = 0;  // snapshots with a cycle among static transactions
    std::int64_t max_wait_ns = 0;
  };

  Watchdog(LockManager& locks, std::chrono::milliseconds period);
  ~Watchdog();
  void start();
  Report stop();

 private:
  LockManager& locks_;
  std::chrono::milliseconds period_;
  std::atomic<bool> running_{false};
  std::thread thread_;
  Report report_;
};

}  // namespace brook
