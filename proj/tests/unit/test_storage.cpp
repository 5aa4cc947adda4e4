#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "brook/storage.hpp"

using namespace brook;

namespace {

const std::vector<TableRef> kSchema{{"A", 100}, {"B", 100}};

Row row_of(std::int64_t v) {
  Row r;
  r.cols[0] = v;
  r.cols[5] = -v;
  return r;
}

Table::Hooks hooks(Store& s, std::uint64_t txn, std::uint32_t table, WalKind kind) {
  Table::Hooks h;
  h.wal = &s.wal();
  h.txn = txn;
  h.table = table;
  h.kind = kind;
  return h;
}

void mark(Store& s, std::uint64_t txn, WalKind kind) {
  WalRecord r;
  r.txn = txn;
  r.kind = kind;
  s.wal().append(r);
}

}  // namespace

TEST_CASE("WAL records round-trip through the codec") {
  std::mt19937_64 rng(1);
  std::vector<std::uint8_t> bytes;
  std::vector<WalRecord> in;
  for (int i = 0; i < 500; ++i) {
    WalRecord r;
    r.lsn = rng();
    r.txn = rng();
    r.kind = static_cast<WalKind>(rng() % 6 + 1);
    r.table = static_cast<std::uint32_t>(rng() % 10);
    r.key = rng();
    if (rng() % 2) r.before = row_of(static_cast<std::int64_t>(rng()));
    if (rng() % 2) r.after = row_of(static_cast<std::int64_t>(rng()));
    auto enc = encode_wal_record(r);
    bytes.insert(bytes.end(), enc.begin(), enc.end());
    in.push_back(r);
  }
  auto out = decode_wal(bytes);
  REQUIRE(out.size() == in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    CHECK(out[i].lsn == in[i].lsn);
    CHECK(out[i].txn == in[i].txn);
    CHECK(out[i].kind == in[i].kind);
    CHECK(out[i].table == in[i].table);
    CHECK(out[i].key == in[i].key);
    CHECK(out[i].before == in[i].before);
    CHECK(out[i].after == in[i].after);
  }

  SUBCASE("truncated tail is dropped") {
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK(decode_wal(cut).size() == in.size() - 1);
  }
  SUBCASE("corrupted payload fails the checksum") {
    auto bad = bytes;
    bad[10] ^= 0x5A;
    CHECK_THROWS_AS(decode_wal(bad), std::runtime_error);
  }
}

TEST_CASE("insert, delete and write semantics") {
  Store s(kSchema);
  Table& a = s.table(0);
  CHECK_FALSE(a.apply(1, row_of(10), hooks(s, 1, 0, WalKind::kInsert)).has_value());
  CHECK_THROWS_AS(a.apply(1, row_of(11), hooks(s, 1, 0, WalKind::kInsert)), StorageError);
  auto before = a.apply(1, row_of(12), hooks(s, 1, 0, WalKind::kWrite));
  REQUIRE(before.has_value());
  CHECK(before->cols[0] == 10);
  auto now = a.get(1);
  REQUIRE(now.has_value());
  CHECK(now->cols[0] == 12);
  CHECK(now->version == 2);
  CHECK(now->last_writer == 1);
  a.apply(1, std::nullopt, hooks(s, 1, 0, WalKind::kDelete));
  CHECK_FALSE(a.get(1).has_value());
  CHECK_THROWS_AS(a.apply(1, std::nullopt, hooks(s, 1, 0, WalKind::kDelete)), StorageError);
  CHECK(s.table_id("B") == 1);
  CHECK(s.table_id("nope") < 0);
}

TEST_CASE("undo restores the before-image") {
  Store s(kSchema);
  for (Key k = 0; k < 20; ++k) s.table(0).load(k, row_of(static_cast<std::int64_t>(k)));
  std::uint64_t start = s.state_hash();
  // A transaction writes, deletes and inserts, then rolls back from its before-images.
  std::vector<std::pair<Key, std::optional<Row>>> undo;
  undo.push_back({3, s.table(0).apply(3, row_of(99), hooks(s, 7, 0, WalKind::kWrite))});
  undo.push_back({4, s.table(0).apply(4, std::nullopt, hooks(s, 7, 0, WalKind::kDelete))});
  undo.push_back({50, s.table(0).apply(50, row_of(5), hooks(s, 7, 0, WalKind::kInsert))});
  CHECK(s.state_hash() != start);
  for (auto it = undo.rbegin(); it != undo.rend(); ++it) s.table(0).apply(it->first, it->second, hooks(s, 7, 0, WalKind::kWrite));
  CHECK(s.state_hash() == start);
  for (Key k = 0; k < 20; ++k) CHECK(s.table(0).get(k)->cols[0] == static_cast<std::int64_t>(k));
}

TEST_CASE("state hash ignores insertion order and versions") {
  Store a(kSchema), b(kSchema);
  for (Key k = 0; k < 50; ++k) a.table(1).load(k, row_of(static_cast<std::int64_t>(k)));
  for (Key k = 50; k-- > 0;) {
    Row r = row_of(static_cast<std::int64_t>(k));
    r.version = 17;
    b.table(1).load(k, r);
  }
  CHECK(a.state_hash() == b.state_hash());
  b.table(1).load(3, row_of(4));
  CHECK(a.state_hash() != b.state_hash());
  Store c(kSchema);
  for (Key k = 0; k < 50; ++k) c.table(0).load(k, row_of(static_cast<std::int64_t>(k)));
  CHECK(a.state_hash() != c.state_hash());
}

TEST_CASE("replay applies committed transactions only") {
  auto sink = std::make_shared<MemoryWalSink>();
  Store live(kSchema, sink);
  Store fresh(kSchema);
  for (Key k = 0; k < 10; ++k) {
    live.table(0).load(k, row_of(0));
    fresh.table(0).load(k, row_of(0));
  }
  mark(live, 1, WalKind::kBegin);
  live.table(0).apply(1, row_of(5), hooks(live, 1, 0, WalKind::kWrite));
  live.table(1).apply(7, row_of(6), hooks(live, 1, 1, WalKind::kInsert));
  mark(live, 1, WalKind::kCommit);

  mark(live, 2, WalKind::kBegin);
  auto before = live.table(0).apply(2, row_of(8), hooks(live, 2, 0, WalKind::kWrite));
  live.table(0).apply(2, before, hooks(live, 2, 0, WalKind::kWrite));
  mark(live, 2, WalKind::kAbort);

  mark(live, 3, WalKind::kBegin);
  live.table(0).apply(3, std::nullopt, hooks(live, 3, 0, WalKind::kDelete));
  mark(live, 3, WalKind::kCommit);

  auto records = decode_wal(sink->bytes());
  ReplayStats st = replay_wal(records, fresh);
  CHECK(st.committed == 2);
  CHECK(st.aborted == 1);
  CHECK(st.applied == 3);
  CHECK(fresh.state_hash() == live.state_hash());
  for (size_t i = 1; i < records.size(); ++i) CHECK(records[i].lsn > records[i - 1].lsn);
}

TEST_CASE("file sink persists records") {
  auto path = (std::filesystem::temp_directory_path() / "brook_storage_test.wal").string();
  std::remove(path.c_str());
  {
    auto sink = std::make_shared<FileWalSink>(path);
    Store s(kSchema, sink);
    mark(s, 1, WalKind::kBegin);
    s.table(0).apply(1, row_of(1), hooks(s, 1, 0, WalKind::kInsert));
    mark(s, 1, WalKind::kCommit);
    s.wal().flush();
  }
  auto records = decode_wal(read_file_bytes(path));
  CHECK(records.size() == 3);
  CHECK(records[1].kind == WalKind::kInsert);
  std::remove(path.c_str());
}

TEST_CASE("null sink disables logging") {
  Store s(kSchema);
  CHECK_FALSE(s.wal().enabled());
  Store m(kSchema, std::make_shared<MemoryWalSink>());
  CHECK(m.wal().enabled());
}
