#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "brook/dsl.hpp"

namespace brook {

using Key = std::uint64_t;
inline constexpr std::size_t kRowColumns = 6;

struct Row {
  std::array<std::int64_t, kRowColumns> cols{};
  std::uint64_t version = 0;
  std::uint64_t last_writer = 0;

  bool operator==(const Row& o) const { return cols == o.cols; }
};

enum class WalKind : std::uint8_t { kBegin = 1, kWrite, kInsert, kDelete, kCommit, kAbort };

struct WalRecord {
  std::uint64_t lsn = 0;
  std::uint64_t txn = 0;
  WalKind kind = WalKind::kBegin;
  std::uint32_t table = 0;
  Key key = 0;
  std::optional<Row> before;
  std::optional<Row> after;
};

// Length-prefixed, little-endian: [u32 payload length][payload][u32 crc32 of payload].
std::vector<std::uint8_t> encode_wal_record(const WalRecord& r);
// Decodes consecutive records; stops at a truncated tail. Throws std::runtime_error on a CRC
// mismatch.
std::vector<WalRecord> decode_wal(const std::vector<std::uint8_t>& bytes);

class WalSink {
 public:
  virtual ~WalSink() = default;
  virtual void write(const std::vector<std::uint8_t>& bytes) = 0;
  virtual void flush() = 0;
};

class NullWalSink final : public WalSink {
 public:
  void write(const std::vector<std::uint8_t>&) override {}
  void flush() override {}
};

class MemoryWalSink final : public WalSink {
 public:
  void write(const std::vector<std::uint8_t>& bytes) override;
  void flush() override {}
  std::vector<std::uint8_t> bytes() const;

 private:
  mutable std::mutex m_;
  std::vector<std::uint8_t> buf_;
};

class FileWalSink final : public WalSink {
 public:
  explicit FileWalSink(const std::string& path);
  ~FileWalSink() override;
  void write(const std::vector<std::uint8_t>& bytes) override;
  void flush() override;

 private:
  std::FILE* f_ = nullptr;
  std::mutex m_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

class Wal {
 public:
  explicit Wal(std::shared_ptr<WalSink> sink);
  // Assigns the next LSN and writes the record; returns the LSN.
  std::uint64_t append(WalRecord r);
  void flush();
  bool enabled() const { return enabled_; }

 private:
  std::shared_ptr<WalSink> sink_;
  bool enabled_;
  std::mutex m_;
  std::uint64_t next_lsn_ = 1;
};

struct StorageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One table: fixed-width integer keys, single-version rows, sharded latches.
class Table {
 public:
  Table(std::string name, std::size_t shards);

  const std::string& name() const { return name_; }
  // When `seq_counter` is given, *seq receives a history sequence number taken under the latch.
  std::optional<Row> get(Key k, std::atomic<std::uint64_t>* seq_counter = nullptr,
                         std::uint64_t* seq = nullptr) const;
  // Applies `after` (nullopt deletes) and returns the before-image. The WAL record and the
  // history sequence number are taken under the row latch so their order matches apply order.
  struct Hooks {
    Wal* wal = nullptr;
    std::atomic<std::uint64_t>* seq_counter = nullptr;
    std::uint64_t* seq = nullptr;
    std::uint64_t txn = 0;
    std::uint32_t table = 0;
    WalKind kind = WalKind::kWrite;
  };
  std::optional<Row> apply(Key k, const std::optional<Row>& after, const Hooks& hooks);
  // Loader path: no logging, no latching discipline beyond the shard.
  void load(Key k, const Row& r);
  std::size_t size() const;
  std::uint64_t hash() const;
  template <class F>
  void for_each(F&& f) const {
    for (const auto& s : shards_) {
      std::lock_guard<std::mutex> g(s->latch);
      for (const auto& [k, r] : s->rows) f(k, r);
    }
  }

 private:
  struct Shard {
    mutable std::mutex latch;
    std::unordered_map<Key, Row> rows;
  };
  Shard& shard_of(Key k) const { return *shards_[(k * 0x9E3779B97F4A7C15ull >> 20) % shards_.size()]; }

  std::string name_;
  std::vector<std::unique_ptr<Shard>> shards_;
};

class Store {
 public:
  explicit Store(const std::vector<TableRef>& schema, std::shared_ptr<WalSink> sink = nullptr,
                 std::size_t shards_per_table = 256);

  std::size_t table_count() const { return tables_.size(); }
  Table& table(std::uint32_t id) { return *tables_.at(id); }
  const Table& table(std::uint32_t id) const { return *tables_.at(id); }
  int table_id(const std::string& name) const;
  const std::vector<TableRef>& schema() const { return schema_; }
  Wal& wal() { return wal_; }
  std::atomic<std::uint64_t>& history_seq() { return history_seq_; }

  // Order-independent digest of every row's table, key and columns.
  std::uint64_t state_hash() const;

 private:
  std::vector<TableRef> schema_;
  std::vector<std::unique_ptr<Table>> tables_;
  Wal wal_;
  std::atomic<std::uint64_t> history_seq_{1};
};

struct ReplayStats {
  std::size_t records = 0;
  std::size_t committed = 0;
  std::size_t aborted = 0;
  std::size_t applied = 0;
};

// Applies the after-images of committed transactions in LSN order; aborted and unfinished
// transactions are skipped.
ReplayStats replay_wal(const std::vector<WalRecord>& records, Store& store);

std::uint64_t mix64(std::uint64_t x);

}  // namespace brook
