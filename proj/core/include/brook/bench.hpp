#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brook/workloads.hpp"

namespace brook {

struct BenchConfig {
  std::string workload = "store";  // store | tpcc
  std::vector<Protocol> protocols{Protocol::kBrook2PL};
  int threads = 4;
  double duration_s = 5.0;
  double warmup_s = 1.0;
  // When positive, each worker runs exactly this many transactions and nothing is excluded.
  std::uint64_t transactions_per_worker = 0;
  std::uint64_t hot_count = 32;
  std::vector<double> p_hot{0.1};
  std::uint64_t seed = 1;
  MixSpec mix;  // defaults to the workload's 50/50 pair
  int read_only_threads = 0;
  bool record_history = false;
  bool watchdog = false;
  int watchdog_period_ms = 20;
  double liveness_timeout_s = 10.0;
  std::string wal = "null";  // null | memory | file
  std::string wal_path = "brook.wal";
  bool verify_wal = false;
  // Test fixture: releases one lock before the last operation it guards.
  bool inject_faulty_plan = false;
  StoreSizes store;
  TpccSizes tpcc;
};

// Throws ConfigError on unknown keys' values, bad ranges, or unknown protocols.
BenchConfig parse_bench_config(const nlohmann::json& j);
nlohmann::json to_json(const BenchConfig& c);

struct RunResult {
  Protocol protocol = Protocol::kBrook2PL;
  double p_hot = 0;
  double measured_s = 0;
  std::uint64_t committed = 0;
  std::uint64_t user_aborted = 0;
  double throughput = 0;  // committed per second
  double p50_us = 0, p95_us = 0, p99_us = 0;
  std::uint64_t retries = 0;
  std::array<std::uint64_t, 5> cc_aborts{};  // indexed by AbortReason
  std::uint64_t static_cc_aborts = 0;
  std::uint64_t dynamic_committed = 0;
  double useful_frac = 0, lock_wait_frac = 0, wasted_frac = 0;
  std::uint64_t read_only_committed = 0;
  double read_only_throughput = 0;
  std::optional<Watchdog::Report> watchdog;
  std::optional<bool> serializable;
  std::optional<std::size_t> history_txns;
  std::optional<bool> wal_replay_ok;
  std::vector<std::string> violations;
};

struct BenchReport {
  BenchConfig config;
  std::vector<RunResult> runs;

  bool ok() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

std::string csv_header();

// Moves the release of one written table to just after the first operation it guards, leaving the
// write unprotected. Returns false when no plan offers such a release.
bool inject_early_release(std::vector<ExecutionPlan>& plans, const Workload& workload);

// Analyzes the configured workload once and runs every (protocol, p_hot) point.
BenchReport run_bench(const BenchConfig& cfg, std::ostream* log = nullptr);
RunResult run_point(const BenchConfig& cfg, const WorkloadContext& ctx, const std::vector<ExecutionPlan>& plans,
                    Protocol protocol, double p_hot);

// Sorted-sample percentile by nearest rank; 0 for an empty sample.
double percentile(const std::vector<std::uint32_t>& sorted, double q);

}  // namespace brook
