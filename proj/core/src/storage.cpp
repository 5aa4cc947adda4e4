#include "brook/storage.hpp"

#include <boost/crc.hpp>
#include <algorithm>
#include <set>
#include <stdexcept>

namespace brook {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

namespace {

void put_u8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;

  bool has(std::size_t n) const { return static_cast<std::size_t>(end - p) >= n; }
  std::uint8_t u8() { return *p++; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(*p++) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(*p++) << (8 * i);
    return v;
  }
};

void put_row(std::vector<std::uint8_t>& b, const Row& r) {
  for (auto c : r.cols) put_u64(b, static_cast<std::uint64_t>(c));
  put_u64(b, r.version);
}

Row get_row(Reader& rd) {
  Row r;
  for (auto& c : r.cols) c = static_cast<std::int64_t>(rd.u64());
  r.version = rd.u64();
  return r;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

}  // namespace

std::vector<std::uint8_t> encode_wal_record(const WalRecord& r) {
  std::vector<std::uint8_t> payload;
  payload.reserve(64);
  put_u64(payload, r.lsn);
  put_u64(payload, r.txn);
  put_u8(payload, static_cast<std::uint8_t>(r.kind));
  put_u32(payload, r.table);
  put_u64(payload, r.key);
  put_u8(payload, static_cast<std::uint8_t>((r.before ? 1 : 0) | (r.after ? 2 : 0)));
  if (r.before) put_row(payload, *r.before);
  if (r.after) put_row(payload, *r.after);
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 8);
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc32(payload.data(), payload.size()));
  return out;
}

std::vector<WalRecord> decode_wal(const std::vector<std::uint8_t>& bytes) {
  std::vector<WalRecord> out;
  Reader rd{bytes.data(), bytes.data() + bytes.size()};
  while (rd.has(4)) {
    std::uint32_t len = rd.u32();
    if (!rd.has(static_cast<std::size_t>(len) + 4)) break;
    const std::uint8_t* start = rd.p;
    Reader body{start, start + len};
    rd.p += len;
    std::uint32_t crc = rd.u32();
    if (crc != crc32(start, len)) throw std::runtime_error("WAL record " + std::to_string(out.size()) + ": CRC mismatch");
    WalRecord r;
    r.lsn = body.u64();
    r.txn = body.u64();
    r.kind = static_cast<WalKind>(body.u8());
    r.table = body.u32();
    r.key = body.u64();
    std::uint8_t flags = body.u8();
    if (flags & 1) r.before = get_row(body);
    if (flags & 2) r.after = get_row(body);
    out.push_back(std::move(r));
  }
  return out;
}

void MemoryWalSink::write(const std::vector<std::uint8_t>& bytes) {
  std::lock_guard<std::mutex> g(m_);
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> MemoryWalSink::bytes() const {
  std::lock_guard<std::mutex> g(m_);
  return buf_;
}

FileWalSink::FileWalSink(const std::string& path) : f_(std::fopen(path.c_str(), "wb")) {
  if (!f_) throw std::runtime_error("cannot open WAL file " + path);
}

FileWalSink::~FileWalSink() {
  if (f_) std::fclose(f_);
}

void FileWalSink::write(const std::vector<std::uint8_t>& bytes) {
  std::lock_guard<std::mutex> g(m_);
  std::fwrite(bytes.data(), 1, bytes.size(), f_);
}

void FileWalSink::flush() {
  std::lock_guard<std::mutex> g(m_);
  std::fflush(f_);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.insert(out.end(), buf, buf + n);
  std::fclose(f);
  return out;
}

Wal::Wal(std::shared_ptr<WalSink> sink)
    : sink_(sink ? std::move(sink) : std::make_shared<NullWalSink>()),
      enabled_(dynamic_cast<NullWalSink*>(sink_.get()) == nullptr) {}

std::uint64_t Wal::append(WalRecord r) {
  if (!enabled_) return 0;
  std::lock_guard<std::mutex> g(m_);
  r.lsn = next_lsn_++;
  sink_->write(encode_wal_record(r));
  return r.lsn;
}

void Wal::flush() {
  if (enabled_) sink_->flush();
}

Table::Table(std::string name, std::size_t shards) : name_(std::move(name)) {
  shards_.reserve(shards);
  for (std::size_t i = 0; i < shards; ++i) shards_.push_back(std::make_unique<Shard>());
}

std::optional<Row> Table::get(Key k, std::atomic<std::uint64_t>* seq_counter, std::uint64_t* seq) const {
  Shard& s = shard_of(k);
  std::lock_guard<std::mutex> g(s.latch);
  if (seq_counter && seq) *seq = seq_counter->fetch_add(1);
  auto it = s.rows.find(k);
  if (it == s.rows.end()) return std::nullopt;
  return it->second;
}

std::optional<Row> Table::apply(Key k, const std::optional<Row>& after, const Hooks& hooks) {
  Shard& s = shard_of(k);
  std::lock_guard<std::mutex> g(s.latch);
  auto it = s.rows.find(k);
  std::optional<Row> before;
  if (it != s.rows.end()) before = it->second;
  if (hooks.kind == WalKind::kInsert && before) throw StorageError(name_ + ": insert of existing key " + std::to_string(k));
  if (hooks.kind == WalKind::kDelete && !before) throw StorageError(name_ + ": delete of absent key " + std::to_string(k));
  std::optional<Row> stored;
  if (after) {
    Row r = *after;
    r.version = before ? before->version + 1 : 1;
    r.last_writer = hooks.txn;
    if (it != s.rows.end()) it->second = r;
    else s.rows.emplace(k, r);
    stored = r;
  } else if (it != s.rows.end()) {
    s.rows.erase(it);
  }
  if (hooks.wal) {
    WalRecord rec;
    rec.txn = hooks.txn;
    rec.kind = hooks.kind;
    rec.table = hooks.table;
    rec.key = k;
    rec.before = before;
    rec.after = stored;
    hooks.wal->append(std::move(rec));
  }
  if (hooks.seq_counter && hooks.seq) *hooks.seq = hooks.seq_counter->fetch_add(1);
  return before;
}

void Table::load(Key k, const Row& r) {
  Shard& s = shard_of(k);
  std::lock_guard<std::mutex> g(s.latch);
  s.rows[k] = r;
}

std::size_t Table::size() const {
  std::size_t n = 0;
  for (const auto& s : shards_) {
    std::lock_guard<std::mutex> g(s->latch);
    n += s->rows.size();
  }
  return n;
}

std::uint64_t Table::hash() const {
  std::uint64_t h = 0;
  for_each([&](Key k, const Row& r) {
    std::uint64_t x = mix64(k);
    for (auto c : r.cols) x = mix64(x ^ static_cast<std::uint64_t>(c));
    h += x;
  });
  return h;
}

Store::Store(const std::vector<TableRef>& schema, std::shared_ptr<WalSink> sink, std::size_t shards_per_table)
    : schema_(schema), wal_(std::move(sink)) {
  for (const auto& t : schema) tables_.push_back(std::make_unique<Table>(t.name, shards_per_table));
}

int Store::table_id(const std::string& name) const {
  for (size_t i = 0; i < schema_.size(); ++i)
    if (schema_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::uint64_t Store::state_hash() const {
  std::uint64_t h = 0;
  for (size_t i = 0; i < tables_.size(); ++i) h += mix64(tables_[i]->hash() ^ mix64(i + 1));
  return h;
}

ReplayStats replay_wal(const std::vector<WalRecord>& records, Store& store) {
  ReplayStats st;
  st.records = records.size();
  std::set<std::uint64_t> committed;
  for (const auto& r : records) {
    if (r.kind == WalKind::kCommit) committed.insert(r.txn);
    if (r.kind == WalKind::kAbort) ++st.aborted;
  }
  st.committed = committed.size();
  std::vector<const WalRecord*> ordered;
  for (const auto& r : records)
    if (committed.count(r.txn)) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const WalRecord* a, const WalRecord* b) { return a->lsn < b->lsn; });
  for (const WalRecord* r : ordered) {
    if (r->kind != WalKind::kWrite && r->kind != WalKind::kInsert && r->kind != WalKind::kDelete) continue;
    Table& t = store.table(r->table);
    Table::Hooks hooks;
    hooks.txn = r->txn;
    hooks.table = r->table;
    t.apply(r->key, r->after, hooks);
    ++st.applied;
  }
  return st;
}

}  // namespace brook
