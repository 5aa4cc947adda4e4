#include <doctest.h>

#include <random>
#include <sstream>

#include "brook/dsl.hpp"
#include "brook/embedded_dsl.hpp"

using namespace brook;

namespace {

const char* kAddListing = R"(
Table Players population=500000
Table Items population=2500000
Table Listings population=100000

Transaction AddListing(PId, IId, price):
  item = Read(Items, IId) may_abort
  player = Read(Players, PId)
  Insert(Listings, listing_id(PId, IId)) commutes=listings
)";

bool same_body(const Workload& a, const Workload& b) {
  if (!(a.schema == b.schema) || a.templates.size() != b.templates.size()) return false;
  for (size_t i = 0; i < a.templates.size(); ++i) {
    const auto& x = a.templates[i];
    const auto& y = b.templates[i];
    if (x.name != y.name || x.params != y.params || x.kind != y.kind || !(x.body == y.body)) return false;
  }
  return true;
}

// Grammar-valid random workload: straight-line ops, conditionals and one optional loop.
std::string random_source(std::mt19937_64& rng) {
  const char* tables[] = {"A", "B", "C", "D"};
  const char* kinds[] = {"Read", "Write", "Insert", "Delete"};
  std::ostringstream os;
  for (const char* t : tables) os << "Table " << t << " population=" << (rng() % 1000 + 1) << "\n";
  int templates = static_cast<int>(rng() % 3) + 1;
  for (int t = 0; t < templates; ++t) {
    os << "\nTransaction T" << t << "(k, xs, flag):\n";
    int vars = 0;
    auto op = [&](const std::string& pad, bool nested, bool in_loop) {
      os << pad;
      bool named = !nested && rng() % 2 == 0;
      if (named) os << "v" << vars << " = ";
      std::string key = in_loop ? "x" : (vars > 0 && rng() % 2 ? "v" + std::to_string(rng() % vars) + ".col" : "k");
      os << kinds[rng() % 4] << "(" << tables[rng() % 4] << ", " << key << ")";
      if (rng() % 4 == 0) os << " commutes=g" << rng() % 2;
      if (rng() % 4 == 0) os << " may_abort";
      os << "\n";
      if (named) ++vars;
    };
    int n = static_cast<int>(rng() % 4) + 1;
    for (int i = 0; i < n; ++i) op("  ", false, false);
    if (rng() % 2) {
      os << "  if flag:\n";
      op("    ", true, false);
      os << "  else:\n";
      op("    ", true, false);
    }
    if (rng() % 2) {
      os << "  for x in xs[max=" << rng() % 3 + 1 << "]:\n";
      op("    ", true, true);
    }
  }
  return os.str();
}

}  // namespace

TEST_CASE("AddListing parses into three ops in source order") {
  Workload w = parse_workload(kAddListing);
  REQUIRE(w.templates.size() == 1);
  const auto& t = w.templates[0];
  CHECK(t.name == "AddListing");
  CHECK(t.params == std::vector<std::string>{"PId", "IId", "price"});
  REQUIRE(t.paths.size() == 1);
  const auto& ops = t.paths[0].ops;
  REQUIRE(ops.size() == 3);
  CHECK(ops[0].kind == OpKind::kRead);
  CHECK(ops[0].table == "Items");
  CHECK(ops[0].may_user_abort);
  CHECK(ops[1].table == "Players");
  CHECK(ops[2].kind == OpKind::kInsert);
  CHECK(ops[2].table == "Listings");
  CHECK(ops[2].commutative_group == "listings");
}

TEST_CASE("loop expands to the declared maximum") {
  Workload w = parse_workload(store_dsl());
  const auto* t = w.find("ReadItems");
  REQUIRE(t != nullptr);
  REQUIRE(t->paths.size() == 1);
  const auto& ops = t->paths[0].ops;
  REQUIRE(ops.size() == 20);
  for (size_t i = 0; i < ops.size(); ++i) {
    CHECK(ops[i].table == "Items");
    CHECK(ops[i].loop_iteration == static_cast<int>(i));
  }
}

TEST_CASE("data dependencies point at the producing op") {
  Workload w = parse_workload(store_dsl());
  const auto& ops = w.find("BuyListing")->paths[0].ops;
  // item = Read(Items, listing.item) depends on the listing read.
  CHECK(ops[2].depends_on == std::vector<int>{0});
  // owner = Read(Players, item.owner) depends on the item read.
  CHECK(ops[3].depends_on == std::vector<int>{2});
  CHECK(ops[5].depends_on == std::vector<int>{0});
}

TEST_CASE("if/else expands into one path per branch") {
  Workload w = parse_workload(R"(
Table A population=10
Table B population=10
Transaction T(k, flag):
  a = Read(A, k)
  if flag:
    Write(A, k)
  else:
    Write(B, a.x)
)");
  const auto& t = w.templates[0];
  REQUIRE(t.paths.size() == 2);
  CHECK(t.paths[0].ops.size() == 2);
  CHECK(t.paths[1].ops.size() == 2);
  CHECK(t.paths[0].ops[1].table != t.paths[1].ops[1].table);
}

TEST_CASE("syntax and reference errors") {
  SUBCASE("undeclared table") {
    try {
      parse_workload("Transaction T():\n  Write(A, k)\n");
      FAIL("expected an error");
    } catch (const DslError& e) {
      CHECK(std::string(e.what()).find("undeclared table") != std::string::npos);
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("reference to a later output") {
    CHECK_THROWS_AS(parse_workload("Table A population=1\nTransaction T(k):\n  Read(A, b.x)\n  b = Read(A, k)\n"),
                    DslError);
  }
  SUBCASE("malformed operation") {
    CHECK_THROWS_AS(parse_workload("Table A population=1\nTransaction T(k):\n  Read A, k\n"), DslError);
  }
  SUBCASE("unknown op kind") {
    CHECK_THROWS_AS(parse_workload("Table A population=1\nTransaction T(k):\n  Upsert(A, k)\n"), DslError);
  }
}

TEST_CASE("schema validation") {
  Workload store = parse_workload(store_dsl());
  CHECK(validate_schema(store.templates, store.schema).empty());
  Workload tpcc = parse_workload(tpcc_dsl());
  CHECK(validate_schema(tpcc.templates, tpcc.schema).empty());
  CHECK(validate_schema({}, {}).empty());

  auto missing = validate_schema(store.templates, {{"Players", 1}, {"Items", 1}});
  CHECK_FALSE(missing.empty());
  CHECK(missing[0].reason.find("Listings") != std::string::npos);
  CHECK_FALSE(validate_schema({}, {{"A", 0}}).empty());
}

TEST_CASE("pretty print round-trips the shipped workloads") {
  for (auto src : {store_dsl(), tpcc_dsl()}) {
    Workload a = parse_workload(src);
    Workload b = parse_workload(pretty_print(a));
    CHECK(same_body(a, b));
    CHECK(pretty_print(a) == pretty_print(b));
  }
}

TEST_CASE("round-trip and determinism on random sources") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    std::string src = random_source(rng);
    Workload a = parse_workload(src);
    Workload b = parse_workload(pretty_print(a));
    REQUIRE_MESSAGE(same_body(a, b), src);
    Workload again = parse_workload(src);
    for (size_t t = 0; t < a.templates.size(); ++t) {
      CHECK(a.templates[t].paths == again.templates[t].paths);
      // Dependencies only point backwards.
      for (const auto& path : a.templates[t].paths)
        for (size_t k = 0; k < path.ops.size(); ++k)
          for (int d : path.ops[k].depends_on) CHECK(d < static_cast<int>(k));
    }
  }
}
