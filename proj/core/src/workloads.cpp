#include "brook/workloads.hpp"

#include <algorithm>
#include <numeric>

#include "brook/embedded_dsl.hpp"

namespace brook {

namespace {

struct ExpectedOp {
  OpKind kind;
  const char* table;
};

std::vector<ExpectedOp> repeat(std::vector<ExpectedOp> block, int n) {
  std::vector<ExpectedOp> out;
  for (int i = 0; i < n; ++i) out.insert(out.end(), block.begin(), block.end());
  return out;
}

std::vector<ExpectedOp> concat(std::vector<std::vector<ExpectedOp>> parts) {
  std::vector<ExpectedOp> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

constexpr OpKind R = OpKind::kRead, W = OpKind::kWrite, I = OpKind::kInsert, D = OpKind::kDelete;

// The procedures below index ops by position; these shapes pin the DSL they were written against.
std::vector<std::pair<std::string, std::vector<ExpectedOp>>> expected_shapes(WorkloadContext::Kind kind) {
  if (kind == WorkloadContext::Kind::kStore)
    return {
        {"AddListing", {{R, "Items"}, {R, "Players"}, {I, "Listings"}}},
        {"BuyListing",
         {{R, "Listings"}, {R, "Players"}, {R, "Items"}, {R, "Players"}, {D, "Listings"}, {W, "Items"},
          {W, "Players"}, {W, "Players"}}},
        {"ReadItems", repeat({{R, "Items"}}, 20)},
    };
  return {
      {"NewOrder", concat({{{R, "Warehouse"}, {R, "Customer"}},
                           repeat({{R, "Item"}}, 15),
                           {{R, "District"}, {W, "District"}, {I, "Orders"}, {I, "NewOrder"}},
                           repeat({{R, "Stock"}, {W, "Stock"}, {I, "OrderLine"}}, 15)})},
      {"Payment",
       {{R, "Warehouse"}, {W, "Warehouse"}, {R, "District"}, {W, "District"}, {R, "Customer"}, {W, "Customer"},
        {I, "History"}}},
  };
}

std::int64_t as_i64(std::uint64_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

WorkloadContext::WorkloadContext(Kind kind, Workload workload) : kind_(kind), workload_(std::move(workload)) {
  ops_.resize(workload_.templates.size());
  for (size_t i = 0; i < workload_.templates.size(); ++i)
    if (!workload_.templates[i].paths.empty()) ops_[i] = op_infos(workload_.templates[i].paths[0]);
  for (const auto& [name, shape] : expected_shapes(kind)) {
    int ti = template_index(name);
    const auto& paths = workload_.templates[static_cast<size_t>(ti)].paths;
    if (paths.size() != 1 || paths[0].ops.size() != shape.size())
      throw std::logic_error(name + ": template does not match its procedure");
    for (size_t j = 0; j < shape.size(); ++j)
      if (paths[0].ops[j].kind != shape[j].kind || paths[0].ops[j].table != shape[j].table)
        throw std::logic_error(name + ": op " + std::to_string(j) + " does not match its procedure");
  }
}

WorkloadContext WorkloadContext::store() { return {Kind::kStore, parse_workload(store_dsl())}; }
WorkloadContext WorkloadContext::tpcc() { return {Kind::kTpcc, parse_workload(tpcc_dsl())}; }

int WorkloadContext::template_index(const std::string& name) const {
  for (size_t i = 0; i < workload_.templates.size(); ++i)
    if (workload_.templates[i].name == name) return static_cast<int>(i);
  throw ConfigError("unknown transaction template " + name);
}

std::uint32_t WorkloadContext::table(const std::string& name) const {
  int t = workload_.table_index(name);
  if (t < 0) throw ConfigError("unknown table " + name);
  return static_cast<std::uint32_t>(t);
}

std::unique_ptr<Store> make_store(const WorkloadContext& ctx, std::shared_ptr<WalSink> sink) {
  return std::make_unique<Store>(ctx.workload().schema, std::move(sink));
}

void load_store_dataset(Store& store, const StoreSizes& sizes, std::uint64_t seed) {
  if (sizes.players == 0 || sizes.items_per_player == 0) throw ConfigError("store needs players and items");
  std::mt19937_64 rng(seed);
  Table& players = store.table(static_cast<std::uint32_t>(store.table_id("Players")));
  Table& items = store.table(static_cast<std::uint32_t>(store.table_id("Items")));
  Table& listings = store.table(static_cast<std::uint32_t>(store.table_id("Listings")));
  for (std::uint64_t p = 0; p < sizes.players; ++p) {
    Row r;
    r.cols[col::kBalance] = 1000000;
    players.load(p, r);
  }
  std::uniform_int_distribution<std::int64_t> rarity(0, 99);
  for (std::uint64_t i = 0; i < sizes.items(); ++i) {
    Row r;
    r.cols[col::kOwner] = as_i64(i / sizes.items_per_player);
    r.cols[1] = rarity(rng);
    items.load(i, r);
  }
  std::uniform_int_distribution<std::uint64_t> any_item(0, sizes.items() - 1);
  std::uniform_int_distribution<std::int64_t> price(1, 100);
  for (std::uint64_t l = 1; l <= sizes.listings; ++l) {
    std::uint64_t item = any_item(rng);
    Row r;
    r.cols[col::kListingItem] = as_i64(item);
    r.cols[col::kListingPrice] = price(rng);
    r.cols[col::kListingSeller] = as_i64(item / sizes.items_per_player);
    listings.load(l, r);
  }
}

void load_tpcc(Store& store, const TpccSizes& sizes, std::uint64_t seed) {
  using namespace tpcc;
  if (sizes.warehouses == 0) throw ConfigError("TPC-C needs at least one warehouse");
  std::mt19937_64 rng(seed);
  auto rnd = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  auto tbl = [&](const char* n) -> Table& { return store.table(static_cast<std::uint32_t>(store.table_id(n))); };
  Table& wh = tbl("Warehouse");
  Table& dist = tbl("District");
  Table& cust = tbl("Customer");
  Table& item = tbl("Item");
  Table& stock = tbl("Stock");
  Table& orders = tbl("Orders");
  Table& new_order = tbl("NewOrder");
  Table& lines = tbl("OrderLine");
  Table& history = tbl("History");

  for (std::uint64_t i = 0; i < kItems; ++i) {
    Row r;
    r.cols[col::kItemPrice] = rnd(100, 10000);
    item.load(i, r);
  }
  Key history_id = 1;
  for (std::uint64_t w = 0; w < sizes.warehouses; ++w) {
    Row wr;
    wr.cols[col::kYtd] = 30000000;
    wr.cols[col::kTax] = rnd(0, 2000);
    wh.load(w, wr);
    for (std::uint64_t i = 0; i < kItems; ++i) {
      Row r;
      r.cols[col::kStockQty] = rnd(10, 100);
      stock.load(stock_key(w, i), r);
    }
    for (std::uint64_t d = 0; d < kDistricts; ++d) {
      Row dr;
      dr.cols[col::kYtd] = 3000000;
      dr.cols[col::kTax] = rnd(0, 2000);
      dr.cols[col::kNextOrderId] = sizes.initial_orders ? as_i64(kInitialOrders + 1) : 1;
      dist.load(district_key(w, d), dr);
      for (std::uint64_t c = 0; c < kCustomers; ++c) {
        Row cr;
        cr.cols[col::kCustBalance] = -1000;
        cr.cols[col::kCustYtd] = 1000;
        cr.cols[col::kCustPayments] = 1;
        cr.cols[col::kCustDiscount] = rnd(0, 5000);
        cust.load(customer_key(w, d, c), cr);
        Row hr;
        hr.cols[0] = as_i64(customer_key(w, d, c));
        hr.cols[1] = 1000;
        history.load(history_id++, hr);
      }
      if (!sizes.initial_orders) continue;
      std::vector<std::uint64_t> perm(kCustomers);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::uint64_t o = 1; o <= kInitialOrders; ++o) {
        auto ol_cnt = rnd(5, 15);
        Row orow;
        orow.cols[0] = as_i64(perm[o - 1]);
        orow.cols[1] = ol_cnt;
        orow.cols[2] = 1;
        orders.load(order_key(w, d, o), orow);
        if (o > kInitialOrders - kInitialNewOrders) new_order.load(order_key(w, d, o), Row{{1}});
        for (std::int64_t ol = 0; ol < ol_cnt; ++ol) {
          Row lr;
          lr.cols[0] = rnd(0, as_i64(kItems) - 1);
          lr.cols[1] = as_i64(w);
          lr.cols[2] = 5;
          lr.cols[3] = o > kInitialOrders - kInitialNewOrders ? rnd(1, 999999) : 0;
          lines.load(order_line_key(w, d, o, static_cast<std::uint64_t>(ol)), lr);
        }
      }
    }
  }
}

TemplateProcedure::TemplateProcedure(const WorkloadContext& ctx, const char* name)
    : ctx_(&ctx), tmpl_(ctx.template_index(name)), ops_(&ctx.ops(tmpl_)) {}

// ---- store ----

AddListingTxn::AddListingTxn(const WorkloadContext& ctx, Params p, ListingPool* pool, bool hot)
    : TemplateProcedure(ctx, "AddListing"), p_(p), pool_(pool), hot_(hot) {}

Key AddListingTxn::key(int op, const Outputs&) const {
  switch (op) {
    case 0: return p_.item;
    case 1: return p_.player;
    default: return p_.listing;
  }
}

OpStatus AddListingTxn::run(OpCall& call, const Outputs&) {
  switch (call.op) {
    case 0:
      if (!call.row || call.row->cols[col::kOwner] != as_i64(p_.player)) return OpStatus::kUserAbort;
      break;
    case 1: break;
    case 2: {
      Row r;
      r.cols[col::kListingItem] = as_i64(p_.item);
      r.cols[col::kListingPrice] = p_.price;
      r.cols[col::kListingSeller] = as_i64(p_.player);
      call.new_row = r;
      break;
    }
  }
  return OpStatus::kOk;
}

void AddListingTxn::committed() {
  if (pool_) (hot_ ? pool_->hot : pool_->cold).push_back({p_.listing, p_.item});
}

BuyListingTxn::BuyListingTxn(const WorkloadContext& ctx, Params p, bool hot)
    : TemplateProcedure(ctx, "BuyListing"), p_(p), hot_(hot) {}

Key BuyListingTxn::key(int op, const Outputs& out) const {
  switch (op) {
    case 0:
    case 4: return p_.listing;
    case 1:
    case 6: return p_.buyer;
    case 2:
    case 5: return static_cast<Key>(out[0]->cols[col::kListingItem]);
    default: return static_cast<Key>(out[2]->cols[col::kOwner]);
  }
}

OpStatus BuyListingTxn::run(OpCall& call, const Outputs& out) {
  switch (call.op) {
    case 0:
      if (!call.row) return OpStatus::kUserAbort;  // already sold
      break;
    case 1:
      if (!call.row || call.row->cols[col::kBalance] < out[0]->cols[col::kListingPrice]) return OpStatus::kUserAbort;
      break;
    case 2:
      if (!call.row || call.row->cols[col::kOwner] != out[0]->cols[col::kListingSeller] ||
          call.row->cols[col::kOwner] == as_i64(p_.buyer))
        return OpStatus::kUserAbort;
      break;
    case 3:
    case 4: break;
    case 5:
      call.new_row = *call.row;
      call.new_row->cols[col::kOwner] = as_i64(p_.buyer);
      break;
    case 6:
      call.new_row = *call.row;
      call.new_row->cols[col::kBalance] -= out[0]->cols[col::kListingPrice];
      break;
    case 7:
      call.new_row = *call.row;
      call.new_row->cols[col::kBalance] += out[0]->cols[col::kListingPrice];
      break;
  }
  return OpStatus::kOk;
}

ReadItemsTxn::ReadItemsTxn(const WorkloadContext& ctx, std::vector<Key> items)
    : TemplateProcedure(ctx, "ReadItems"), items_(std::move(items)) {
  if (items_.size() > ops_->size()) throw ConfigError("ReadItems batch exceeds its declared maximum");
}

Key ReadItemsTxn::key(int op, const Outputs&) const { return items_[static_cast<size_t>(op)]; }

OpStatus ReadItemsTxn::run(OpCall& call, const Outputs&) {
  if (call.row) checksum_ += call.row->cols[col::kOwner];
  return OpStatus::kOk;
}

// ---- TPC-C ----

namespace {
constexpr int kNoItemBase = 2, kNoDistrictRead = 17, kNoDistrictWrite = 18, kNoOrder = 19, kNoNewOrder = 20,
              kNoLineBase = 21, kMaxLines = 15;
}

NewOrderTxn::NewOrderTxn(const WorkloadContext& ctx, Params p) : TemplateProcedure(ctx, "NewOrder"), p_(std::move(p)) {
  if (p_.lines.empty() || p_.lines.size() > kMaxLines) throw ConfigError("NewOrder needs 1..15 order lines");
}

bool NewOrderTxn::active(int op) const {
  const auto n = static_cast<int>(p_.lines.size());
  if (op >= kNoItemBase && op < kNoDistrictRead) return op - kNoItemBase < n;
  if (op >= kNoLineBase) return (op - kNoLineBase) / 3 < n;
  return true;
}

Key NewOrderTxn::key(int op, const Outputs& out) const {
  using namespace tpcc;
  auto order_id = [&] { return static_cast<std::uint64_t>(out[kNoDistrictRead]->cols[col::kNextOrderId]); };
  if (op == 0) return p_.w;
  if (op == 1) return customer_key(p_.w, p_.d, p_.c);
  if (op < kNoDistrictRead) return p_.lines[static_cast<size_t>(op - kNoItemBase)].item;
  if (op == kNoDistrictRead || op == kNoDistrictWrite) return district_key(p_.w, p_.d);
  if (op == kNoOrder || op == kNoNewOrder) return order_key(p_.w, p_.d, order_id());
  auto k = static_cast<size_t>((op - kNoLineBase) / 3);
  const Line& line = p_.lines[k];
  if ((op - kNoLineBase) % 3 < 2) return stock_key(line.supply_w, line.item);
  return order_line_key(p_.w, p_.d, order_id(), k);
}

OpStatus NewOrderTxn::run(OpCall& call, const Outputs& out) {
  const int op = call.op;
  if (op < 2) return OpStatus::kOk;
  if (op < kNoDistrictRead) {
    if (!call.row) return OpStatus::kUserAbort;
    total_ += call.row->cols[col::kItemPrice] * p_.lines[static_cast<size_t>(op - kNoItemBase)].quantity;
    return OpStatus::kOk;
  }
  if (op == kNoDistrictWrite) {
    call.new_row = *call.row;
    call.new_row->cols[col::kNextOrderId] += 1;
  } else if (op == kNoOrder) {
    bool local = std::all_of(p_.lines.begin(), p_.lines.end(), [&](const Line& l) { return l.supply_w == p_.w; });
    call.new_row = Row{{as_i64(p_.c), as_i64(p_.lines.size()), local ? 1 : 0}};
  } else if (op == kNoNewOrder) {
    call.new_row = Row{{1}};
  } else if (op >= kNoLineBase) {
    const Line& line = p_.lines[static_cast<size_t>((op - kNoLineBase) / 3)];
    switch ((op - kNoLineBase) % 3) {
      case 0: break;
      case 1: {
        Row r = *call.row;
        auto& qty = r.cols[col::kStockQty];
        qty = qty >= line.quantity + 10 ? qty - line.quantity : qty - line.quantity + 91;
        r.cols[col::kStockYtd] += line.quantity;
        r.cols[col::kStockOrders] += 1;
        if (line.supply_w != p_.w) r.cols[col::kStockRemote] += 1;
        call.new_row = r;
        break;
      }
      case 2: {
        auto price = out[static_cast<size_t>(kNoItemBase + (op - kNoLineBase) / 3)]->cols[col::kItemPrice];
        call.new_row = Row{{as_i64(line.item), as_i64(line.supply_w), line.quantity, price * line.quantity}};
        break;
      }
    }
  }
  return OpStatus::kOk;
}

PaymentTxn::PaymentTxn(const WorkloadContext& ctx, Params p) : TemplateProcedure(ctx, "Payment"), p_(p) {}

Key PaymentTxn::key(int op, const Outputs&) const {
  using namespace tpcc;
  switch (op) {
    case 0:
    case 1: return p_.w;
    case 2:
    case 3: return district_key(p_.w, p_.d);
    case 4:
    case 5: return customer_key(p_.c_w, p_.c_d, p_.c);
    default: return p_.history_id;
  }
}

OpStatus PaymentTxn::run(OpCall& call, const Outputs&) {
  switch (call.op) {
    case 1:
    case 3:
      call.new_row = *call.row;
      call.new_row->cols[col::kYtd] += p_.amount;
      break;
    case 5:
      call.new_row = *call.row;
      call.new_row->cols[col::kCustBalance] -= p_.amount;
      call.new_row->cols[col::kCustYtd] += p_.amount;
      call.new_row->cols[col::kCustPayments] += 1;
      break;
    case 6:
      call.new_row = Row{{as_i64(tpcc::customer_key(p_.c_w, p_.c_d, p_.c)), p_.amount}};
      break;
    default: break;
  }
  return OpStatus::kOk;
}

DynamicRmwTxn::DynamicRmwTxn(std::uint32_t table, std::vector<Key> keys) : table_(table), keys_(std::move(keys)) {
  for (size_t i = 0; i < keys_.size(); ++i) ops_.push_back({table_, OpKind::kWrite, false, {}});
}

Key DynamicRmwTxn::key(int op, const Outputs&) const { return keys_[static_cast<size_t>(op)]; }

OpStatus DynamicRmwTxn::run(OpCall& call, const Outputs&) {
  if (!call.row) return OpStatus::kUserAbort;
  call.new_row = *call.row;
  call.new_row->cols[kRowColumns - 1] += 1;
  return OpStatus::kOk;
}

// ---- generators ----

GeneratorBase::GeneratorBase(const ContentionKnobs& knobs, const MixSpec& mix, int worker)
    : knobs_(knobs), mix_(mix), worker_(worker), rng_(knobs.seed + static_cast<std::uint64_t>(worker)) {
  if (knobs.p_hot < 0.0 || knobs.p_hot > 1.0) throw ConfigError("p_hot must lie in [0, 1]");
  if (mix.dynamic_fraction < 0.0 || mix.dynamic_fraction > 1.0)
    throw ConfigError("dynamic_fraction must lie in [0, 1]");
  double total = 0;
  for (const auto& e : mix_.entries) {
    if (e.weight < 0) throw ConfigError("negative mix weight for " + e.name);
    total += e.weight;
  }
  if (total <= 0 && mix.dynamic_fraction < 1.0) throw ConfigError("mix weights sum to zero");
  for (auto& e : mix_.entries) e.weight /= total;
}

std::uint64_t GeneratorBase::uniform(std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
}

std::uint64_t GeneratorBase::pick(bool hot, std::uint64_t hot_count, std::uint64_t n) {
  if (hot || hot_count >= n) return uniform(0, std::min(hot_count, n) - 1);
  return uniform(hot_count, n - 1);
}

std::uint64_t GeneratorBase::nurand(std::uint64_t a, std::uint64_t x, std::uint64_t y, std::uint64_t c) {
  return (((uniform(0, a) | uniform(x, y)) + c) % (y - x + 1)) + x;
}

int GeneratorBase::pick_template() {
  if (mix_.dynamic_fraction > 0 && unit_(rng_) < mix_.dynamic_fraction) return -1;
  double u = unit_(rng_), acc = 0;
  for (size_t i = 0; i < mix_.entries.size(); ++i) {
    acc += mix_.entries[i].weight;
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(mix_.entries.size()) - 1;
}

StoreGenerator::StoreGenerator(const WorkloadContext& ctx, Store& store, const StoreSizes& sizes,
                               const ContentionKnobs& knobs, const MixSpec& mix, int worker, int workers)
    : GeneratorBase(knobs, mix, worker),
      ctx_(ctx),
      store_(store),
      sizes_(sizes),
      items_table_(ctx.table("Items")) {
  if (knobs.hot_count == 0 || knobs.hot_count > sizes.items())
    throw ConfigError("hot_count must lie in [1, item count]");
  for (const auto& e : mix_.entries) ctx.template_index(e.name);
  std::vector<ListingPool::Entry> mine;
  store.table(ctx.table("Listings")).for_each([&](Key k, const Row& r) {
    if (k % static_cast<Key>(workers) == static_cast<Key>(worker))
      mine.push_back({k, static_cast<Key>(r.cols[col::kListingItem])});
  });
  std::sort(mine.begin(), mine.end(), [](const auto& a, const auto& b) { return a.listing < b.listing; });
  for (const auto& e : mine) (e.item < knobs.hot_count ? pool_.hot : pool_.cold).push_back(e);
}

std::unique_ptr<Procedure> StoreGenerator::next() {
  int t = pick_template();
  if (t < 0) return dynamic();
  const std::string& name = mix_.entries[static_cast<size_t>(t)].name;
  if (name == "ReadItems") return read_items();
  bool hot = draw_hot();
  if (name == "AddListing") return add_listing(hot);
  return buy_listing(hot);
}

std::unique_ptr<Procedure> StoreGenerator::add_listing(bool hot) {
  AddListingTxn::Params p;
  p.item = pick(hot, knobs_.hot_count, sizes_.items());
  auto row = store_.table(items_table_).get(p.item);
  p.player = row ? static_cast<Key>(row->cols[col::kOwner]) : p.item / sizes_.items_per_player;
  p.listing = unique_id();
  p.price = static_cast<std::int64_t>(uniform(1, 100));
  return std::make_unique<AddListingTxn>(ctx_, p, &pool_, hot);
}

std::unique_ptr<Procedure> StoreGenerator::buy_listing(bool hot) {
  auto& pool = hot ? pool_.hot : pool_.cold;
  if (pool.empty()) return add_listing(hot);
  size_t i = static_cast<size_t>(uniform(0, pool.size() - 1));
  ListingPool::Entry e = pool[i];
  pool[i] = pool.back();
  pool.pop_back();
  std::uint64_t hot_players = (knobs_.hot_count + sizes_.items_per_player - 1) / sizes_.items_per_player;
  BuyListingTxn::Params p;
  p.listing = e.listing;
  p.expected_item = e.item;
  p.buyer = pick(hot, hot_players, sizes_.players);
  return std::make_unique<BuyListingTxn>(ctx_, p, hot);
}

std::unique_ptr<Procedure> StoreGenerator::read_items() {
  std::vector<Key> items(20);
  for (auto& k : items) k = pick(true, knobs_.hot_count, sizes_.items());
  return std::make_unique<ReadItemsTxn>(ctx_, std::move(items));
}

std::unique_ptr<Procedure> StoreGenerator::dynamic() {
  std::vector<Key> keys(kDynamicOps);
  for (auto& k : keys) k = pick(draw_hot(), knobs_.hot_count, sizes_.items());
  return std::make_unique<DynamicRmwTxn>(items_table_, std::move(keys));
}

TpccGenerator::TpccGenerator(const WorkloadContext& ctx, const TpccSizes& sizes, const ContentionKnobs& knobs,
                             const MixSpec& mix, int worker)
    : GeneratorBase(knobs, mix, worker), ctx_(ctx), sizes_(sizes), stock_table_(ctx.table("Stock")) {
  if (knobs.hot_count == 0 || knobs.hot_count > sizes.warehouses)
    throw ConfigError("hot_count must lie in [1, warehouses]");
  for (const auto& e : mix_.entries) ctx.template_index(e.name);
}

std::uint64_t TpccGenerator::warehouse() { return pick(draw_hot(), knobs_.hot_count, sizes_.warehouses); }

std::unique_ptr<Procedure> TpccGenerator::next() {
  int t = pick_template();
  if (t < 0) return dynamic();
  if (mix_.entries[static_cast<size_t>(t)].name == "NewOrder") return new_order();
  return payment();
}

std::unique_ptr<Procedure> TpccGenerator::new_order() {
  using namespace tpcc;
  NewOrderTxn::Params p;
  p.w = warehouse();
  p.d = uniform(0, kDistricts - 1);
  p.c = nurand(1023, 1, kCustomers, kNurandCustomerC) - 1;
  auto n = uniform(5, 15);
  std::vector<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < n; ++k) {
    std::uint64_t item;
    do {
      item = nurand(8191, 1, kItems, kNurandItemC) - 1;
    } while (std::find(seen.begin(), seen.end(), item) != seen.end());
    seen.push_back(item);
    std::uint64_t supply = p.w;
    if (sizes_.warehouses > 1 && uniform(1, 100) == 1) {
      supply = uniform(0, sizes_.warehouses - 2);
      if (supply >= p.w) ++supply;
    }
    p.lines.push_back({item, supply, static_cast<std::int64_t>(uniform(1, 10))});
  }
  p.invalid_item = uniform(1, 100) == 1;
  if (p.invalid_item) p.lines.back().item = kItems;
  return std::make_unique<NewOrderTxn>(ctx_, std::move(p));
}

std::unique_ptr<Procedure> TpccGenerator::payment() {
  using namespace tpcc;
  PaymentTxn::Params p;
  p.w = warehouse();
  p.d = uniform(0, kDistricts - 1);
  if (sizes_.warehouses > 1 && uniform(1, 100) > 85) {
    p.c_w = uniform(0, sizes_.warehouses - 2);
    if (p.c_w >= p.w) ++p.c_w;
    p.c_d = uniform(0, kDistricts - 1);
  } else {
    p.c_w = p.w;
    p.c_d = p.d;
  }
  p.c = nurand(1023, 1, kCustomers, kNurandCustomerC) - 1;
  p.amount = static_cast<std::int64_t>(uniform(100, 500000));
  p.history_id = unique_id();
  return std::make_unique<PaymentTxn>(ctx_, p);
}

std::unique_ptr<Procedure> TpccGenerator::dynamic() {
  std::vector<Key> keys(kDynamicOps);
  for (auto& k : keys) k = tpcc::stock_key(warehouse(), nurand(8191, 1, tpcc::kItems, kNurandItemC) - 1);
  return std::make_unique<DynamicRmwTxn>(stock_table_, std::move(keys));
}

}  // namespace brook
