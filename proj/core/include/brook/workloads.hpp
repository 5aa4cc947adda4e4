#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "brook/engine.hpp"

namespace brook {

struct ContentionKnobs {
  std::uint64_t hot_count = 1;
  double p_hot = 0.0;
  std::uint64_t seed = 1;
};

struct MixEntry {
  std::string name;
  double weight = 1.0;
};

struct MixSpec {
  std::vector<MixEntry> entries;
  double dynamic_fraction = 0.0;
};

struct StoreSizes {
  std::uint64_t players = 500000;
  std::uint64_t items_per_player = 5;
  std::uint64_t listings = 100000;

  std::uint64_t items() const { return players * items_per_player; }
};

struct TpccSizes {
  std::uint64_t warehouses = 1;
  bool initial_orders = true;  // 3000 orders per district with their lines
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Column layouts.
namespace col {
inline constexpr int kBalance = 0;                                          // Players
inline constexpr int kOwner = 0;                                            // Items
inline constexpr int kListingItem = 0, kListingPrice = 1, kListingSeller = 2;  // Listings
inline constexpr int kYtd = 0, kTax = 1, kNextOrderId = 2;                  // Warehouse, District
inline constexpr int kCustBalance = 0, kCustYtd = 1, kCustPayments = 2, kCustDiscount = 3;
inline constexpr int kItemPrice = 0;
inline constexpr int kStockQty = 0, kStockYtd = 1, kStockOrders = 2, kStockRemote = 3;
}  // namespace col

namespace tpcc {
inline constexpr std::uint64_t kDistricts = 10;
inline constexpr std::uint64_t kCustomers = 3000;
inline constexpr std::uint64_t kItems = 100000;
inline constexpr std::uint64_t kInitialOrders = 3000;
inline constexpr std::uint64_t kInitialNewOrders = 900;

inline Key district_key(std::uint64_t w, std::uint64_t d) { return w * kDistricts + d; }
inline Key customer_key(std::uint64_t w, std::uint64_t d, std::uint64_t c) {
  return district_key(w, d) * kCustomers + c;
}
inline Key stock_key(std::uint64_t w, std::uint64_t i) { return w * kItems + i; }
inline Key order_key(std::uint64_t w, std::uint64_t d, std::uint64_t o) { return district_key(w, d) << 32 | o; }
inline Key order_line_key(std::uint64_t w, std::uint64_t d, std::uint64_t o, std::uint64_t ol) {
  return order_key(w, d, o) * 16 + ol;
}
}  // namespace tpcc

// Parsed workload plus per-path operation shapes, checked against the hand-written procedures.
class WorkloadContext {
 public:
  enum class Kind { kStore, kTpcc };

  static WorkloadContext store();
  static WorkloadContext tpcc();
  WorkloadContext(Kind kind, Workload workload);

  Kind kind() const { return kind_; }
  const Workload& workload() const { return workload_; }
  int template_index(const std::string& name) const;
  const std::vector<OpInfo>& ops(int template_index) const { return ops_.at(static_cast<size_t>(template_index)); }
  std::uint32_t table(const std::string& name) const;

 private:
  Kind kind_;
  Workload workload_;
  std::vector<std::vector<OpInfo>> ops_;
};

std::unique_ptr<Store> make_store(const WorkloadContext& ctx, std::shared_ptr<WalSink> sink = nullptr);
void load_store_dataset(Store& store, const StoreSizes& sizes, std::uint64_t seed);
void load_tpcc(Store& store, const TpccSizes& sizes, std::uint64_t seed);

// Base for procedures backed by a DSL template.
class TemplateProcedure : public Procedure {
 public:
  TemplateProcedure(const WorkloadContext& ctx, const char* name);
  int template_index() const override { return tmpl_; }
  const std::vector<OpInfo>& ops() const override { return *ops_; }

 protected:
  const WorkloadContext* ctx_;
  int tmpl_;
  const std::vector<OpInfo>* ops_;
};

// Per-worker pool of listings known to be live, split by item hotness.
struct ListingPool {
  struct Entry {
    Key listing;
    Key item;
  };
  std::vector<Entry> hot, cold;
};

class AddListingTxn final : public TemplateProcedure {
 public:
  struct Params {
    Key player, item, listing;
    std::int64_t price;
  };
  AddListingTxn(const WorkloadContext& ctx, Params p, ListingPool* pool, bool hot);
  Key key(int op, const Outputs& out) const override;
  OpStatus run(OpCall& call, const Outputs& out) override;
  void committed() override;
  const Params& params() const { return p_; }
  bool hot() const { return hot_; }

 private:
  Params p_;
  ListingPool* pool_;
  bool hot_;
};

class BuyListingTxn final : public TemplateProcedure {
 public:
  struct Params {
    Key buyer, listing;
    Key expected_item;  // generator's view; the executed key comes from the listing row
  };
  BuyListingTxn(const WorkloadContext& ctx, Params p, bool hot);
  Key key(int op, const Outputs& out) const override;
  OpStatus run(OpCall& call, const Outputs& out) override;
  const Params& params() const { return p_; }
  bool hot() const { return hot_; }

 private:
  Params p_;
  bool hot_;
};

class ReadItemsTxn final : public TemplateProcedure {
 public:
  ReadItemsTxn(const WorkloadContext& ctx, std::vector<Key> items);
  bool active(int op) const override { return static_cast<size_t>(op) < items_.size(); }
  Key key(int op, const Outputs& out) const override;
  OpStatus run(OpCall& call, const Outputs& out) override;
  const std::vector<Key>& items() const { return items_; }
  std::int64_t checksum() const { return checksum_; }

 private:
  std::vector<Key> items_;
  std::int64_t checksum_ = 0;
};

class NewOrderTxn final : public TemplateProcedure {
 public:
  struct Line {
    std::uint64_t item;
    std::uint64_t supply_w;
    std::int64_t quantity;
  };
  struct Params {
    std::uint64_t w, d, c;
    std::vector<Line> lines;
    bool invalid_item = false;  // the last line names an unused item id
  };
  NewOrderTxn(const WorkloadContext& ctx, Params p);
  bool active(int op) const override;
  Key key(int op, const Outputs& out) const override;
  OpStatus run(OpCall& call, const Outputs& out) override;
  const Params& params() const { return p_; }

 private:
  Params p_;
  std::int64_t total_ = 0;
};

class PaymentTxn final : public TemplateProcedure {
 public:
  struct Params {
    std::uint64_t w, d, c_w, c_d, c;
    std::int64_t amount;
    Key history_id;
  };
  PaymentTxn(const WorkloadContext& ctx, Params p);
  Key key(int op, const Outputs& out) const override;
  OpStatus run(OpCall& call, const Outputs& out) override;
  const Params& params() const { return p_; }

 private:
  Params p_;
};

// Ad-hoc read-modify-write program over one table; never analyzed.
class DynamicRmwTxn final : public Procedure {
 public:
  DynamicRmwTxn(std::uint32_t table, std::vector<Key> keys);
  TxnClass txn_class() const override { return TxnClass::kDynamic; }
  int template_index() const override { return -1; }
  const std::vector<OpInfo>& ops() const override { return ops_; }
  Key key(int op, const Outputs& out) const override;
  OpStatus run(OpCall& call, const Outputs& out) override;
  const std::vector<Key>& keys() const { return keys_; }

 private:
  std::uint32_t table_;
  std::vector<Key> keys_;
  std::vector<OpInfo> ops_;
};

inline constexpr int kDynamicOps = 10;

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::unique_ptr<Procedure> next() = 0;
};

// Shared helpers: seeded RNG, hot/cold draws, mix selection.
class GeneratorBase : public Generator {
 public:
  GeneratorBase(const ContentionKnobs& knobs, const MixSpec& mix, int worker);
  bool draw_hot() { return unit_(rng_) < knobs_.p_hot; }
  // Uniform over [0, hot) when hot, else over [hot, n); the whole range when hot == n.
  std::uint64_t pick(bool hot, std::uint64_t hot_count, std::uint64_t n);
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);  // inclusive
  std::uint64_t nurand(std::uint64_t a, std::uint64_t x, std::uint64_t y, std::uint64_t c);
  // Index into mix.entries, or -1 for a dynamic transaction.
  int pick_template();
  std::mt19937_64& rng() { return rng_; }

 protected:
  ContentionKnobs knobs_;
  MixSpec mix_;
  int worker_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::uint64_t next_unique_ = 0;
  Key unique_id() { return (static_cast<Key>(worker_) + 1) << 40 | ++next_unique_; }
};

class StoreGenerator final : public GeneratorBase {
 public:
  // `store` is consulted only for a racy owner peek when building AddListing inputs.
  StoreGenerator(const WorkloadContext& ctx, Store& store, const StoreSizes& sizes, const ContentionKnobs& knobs,
                 const MixSpec& mix, int worker, int workers);
  std::unique_ptr<Procedure> next() override;
  std::unique_ptr<Procedure> add_listing(bool hot);
  std::unique_ptr<Procedure> buy_listing(bool hot);
  std::unique_ptr<Procedure> read_items();
  std::unique_ptr<Procedure> dynamic();
  ListingPool& pool() { return pool_; }

 private:
  const WorkloadContext& ctx_;
  Store& store_;
  StoreSizes sizes_;
  ListingPool pool_;
  std::uint32_t items_table_;
};

class TpccGenerator final : public GeneratorBase {
 public:
  TpccGenerator(const WorkloadContext& ctx, const TpccSizes& sizes, const ContentionKnobs& knobs, const MixSpec& mix,
                int worker);
  std::unique_ptr<Procedure> next() override;
  std::unique_ptr<Procedure> new_order();
  std::unique_ptr<Procedure> payment();
  std::unique_ptr<Procedure> dynamic();

 private:
  std::uint64_t warehouse();
  const WorkloadContext& ctx_;
  TpccSizes sizes_;
  std::uint32_t stock_table_;
};

// NURand run constants; fixed so streams are reproducible.
inline constexpr std::uint64_t kNurandCustomerC = 259;
inline constexpr std::uint64_t kNurandItemC = 7911;

}  // namespace brook
