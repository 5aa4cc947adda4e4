#include <doctest.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <random>
#include <set>
#include <thread>
#include <tuple>

#include "brook/lock_manager.hpp"

using namespace brook;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<Txn> txn(std::uint64_t id, std::uint64_t ts, TxnClass cls = TxnClass::kStatic,
                         WaitPolicy policy = WaitPolicy::kFifo) {
  return std::make_shared<Txn>(id, ts, cls, policy);
}

constexpr LockKey kA{0, 1};
constexpr LockKey kB{0, 2};

void wait_until(const std::function<bool()>& cond) {
  auto deadline = std::chrono::steady_clock::now() + 5s;
  while (!cond() && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(1ms);
  REQUIRE(cond());
}

}  // namespace

TEST_CASE("arbitration table") {
  using C = TxnClass;
  using D = Decision;
  // (requester, holder, requester older) -> decision
  CHECK(arbitrate(C::kStatic, C::kStatic, true) == D::kWait);
  CHECK(arbitrate(C::kStatic, C::kStatic, false) == D::kWait);
  CHECK(arbitrate(C::kDynamic, C::kDynamic, true) == D::kAbortHolder);
  CHECK(arbitrate(C::kDynamic, C::kDynamic, false) == D::kWait);
  CHECK(arbitrate(C::kDynamic, C::kStatic, true) == D::kAbortSelf);
  CHECK(arbitrate(C::kDynamic, C::kStatic, false) == D::kWait);
  CHECK(arbitrate(C::kStatic, C::kDynamic, true) == D::kAbortHolder);
  CHECK(arbitrate(C::kStatic, C::kDynamic, false) == D::kWait);
}

TEST_CASE("all-dynamic arbitration equals wound-wait on random conflicts") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> ts(1, 1000);
  int mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t a = ts(rng), b = ts(rng);
    bool older = a < b;
    if (arbitrate(TxnClass::kDynamic, TxnClass::kDynamic, older) != wound_wait_decision(older)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("all-dynamic lock manager behaves like wound-wait on identical schedules") {
  std::mt19937_64 rng(11);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    std::uint64_t hts = rng() % 100 + 1, rts = rng() % 100 + 1;
    if (hts == rts) continue;
    auto outcome = [&](TxnClass cls, WaitPolicy policy) {
      LockManager lm(4);
      auto holder = txn(1, hts, cls, policy);
      auto req = txn(2, rts, cls, policy);
      REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
      auto r = lm.acquire(req, kA, LockMode::kExclusive, 1ms);
      return std::make_tuple(r, holder->aborted(), req->aborted());
    };
    if (outcome(TxnClass::kDynamic, WaitPolicy::kMixed) != outcome(TxnClass::kStatic, WaitPolicy::kWoundWait))
      ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("mixed-policy conflicts through the lock manager") {
  LockManager lm(4);
  SUBCASE("static vs static waits without aborting") {
    auto holder = txn(1, 2, TxnClass::kStatic, WaitPolicy::kMixed);
    auto req = txn(2, 1, TxnClass::kStatic, WaitPolicy::kMixed);
    REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    CHECK(lm.acquire(req, kA, LockMode::kExclusive, 5ms) == AcquireResult::kTimedOut);
    CHECK_FALSE(holder->aborted());
    CHECK_FALSE(req->aborted());
  }
  SUBCASE("older dynamic requester against a static holder aborts itself") {
    auto holder = txn(1, 2, TxnClass::kStatic, WaitPolicy::kMixed);
    auto req = txn(2, 1, TxnClass::kDynamic, WaitPolicy::kMixed);
    REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    CHECK(lm.acquire(req, kA, LockMode::kExclusive) == AcquireResult::kAborted);
    CHECK_FALSE(holder->aborted());
    CHECK(lm.counters().self_aborts == 1);
  }
  SUBCASE("older dynamic requester wounds a younger dynamic holder") {
    auto holder = txn(1, 2, TxnClass::kDynamic, WaitPolicy::kMixed);
    auto req = txn(2, 1, TxnClass::kDynamic, WaitPolicy::kMixed);
    REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    std::thread victim([&] {
      wait_until([&] { return holder->aborted(); });
      lm.release(*holder, kA);
    });
    CHECK(lm.acquire(req, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    victim.join();
    CHECK(holder->abort_reason.load() == static_cast<int>(AbortReason::kWound));
  }
  SUBCASE("older static requester wounds a dynamic holder") {
    auto holder = txn(1, 2, TxnClass::kDynamic, WaitPolicy::kMixed);
    auto req = txn(2, 1, TxnClass::kStatic, WaitPolicy::kMixed);
    REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    CHECK(lm.acquire(req, kA, LockMode::kExclusive, 5ms) == AcquireResult::kTimedOut);
    CHECK(holder->aborted());
  }
  SUBCASE("younger requesters wait") {
    auto holder = txn(1, 1, TxnClass::kDynamic, WaitPolicy::kMixed);
    auto req = txn(2, 2, TxnClass::kDynamic, WaitPolicy::kMixed);
    REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    CHECK(lm.acquire(req, kA, LockMode::kExclusive, 5ms) == AcquireResult::kTimedOut);
    CHECK_FALSE(holder->aborted());
    CHECK_FALSE(req->aborted());
  }
}

TEST_CASE("grant rules") {
  LockManager lm(4);
  auto t1 = txn(1, 1), t2 = txn(2, 2);
  CHECK(lm.acquire(t1, kA, LockMode::kShared) == AcquireResult::kGranted);
  CHECK(lm.acquire(t2, kA, LockMode::kShared) == AcquireResult::kGranted);
  CHECK(lm.acquire(t1, kA, LockMode::kShared) == AcquireResult::kGranted);  // re-grant is a no-op
  CHECK_THROWS_AS(lm.acquire(t1, kA, LockMode::kExclusive), std::logic_error);
  CHECK(lm.acquire(t1, kB, LockMode::kExclusive) == AcquireResult::kGranted);
  CHECK(lm.acquire(t1, kB, LockMode::kShared) == AcquireResult::kGranted);
  CHECK(lm.holds(*t1, kB, LockMode::kExclusive));
  CHECK_FALSE(lm.holds(*t2, kB, LockMode::kShared));
  CHECK_THROWS_AS(lm.release(*t2, kB), std::logic_error);
  CHECK_THROWS_AS(lm.release(*t2, LockKey{9, 9}), std::logic_error);
  lm.release(*t1, kA);
  lm.release(*t2, kA);
  lm.release(*t1, kB);
  CHECK(lm.active_entries() == 0);
  CHECK(lm.snapshot().edges.empty());
}

TEST_CASE("FIFO release grants only the exclusive head") {
  LockManager lm(4);
  auto holder = txn(1, 1), writer = txn(2, 2), reader = txn(3, 3);
  REQUIRE(lm.acquire(holder, kA, LockMode::kExclusive) == AcquireResult::kGranted);
  std::atomic<int> writer_done{0}, reader_done{0};
  std::thread w([&] {
    CHECK(lm.acquire(writer, kA, LockMode::kExclusive) == AcquireResult::kGranted);
    writer_done = 1;
  });
  wait_until([&] { return lm.counters().waits == 1; });
  std::thread r([&] {
    CHECK(lm.acquire(reader, kA, LockMode::kShared) == AcquireResult::kGranted);
    reader_done = 1;
  });
  wait_until([&] { return lm.counters().waits == 2; });

  auto g = lm.snapshot();
  std::set<std::pair<std::uint64_t, std::uint64_t>> edges(g.edges.begin(), g.edges.end());
  CHECK(edges.count({2, 1}));
  CHECK(edges.count({3, 1}));
  CHECK(edges.count({3, 2}));
  CHECK_FALSE(g.has_cycle());

  lm.release(*holder, kA);
  w.join();
  std::this_thread::sleep_for(10ms);
  CHECK(writer_done == 1);
  CHECK(reader_done == 0);
  lm.release(*writer, kA);
  r.join();
  CHECK(reader_done == 1);
  lm.release(*reader, kA);
}

TEST_CASE("queued shared requests do not skip an exclusive waiter") {
  LockManager lm(4);
  auto r1 = txn(1, 1), w = txn(2, 2), r2 = txn(3, 3);
  REQUIRE(lm.acquire(r1, kA, LockMode::kShared) == AcquireResult::kGranted);
  std::thread tw([&] { CHECK(lm.acquire(w, kA, LockMode::kExclusive) == AcquireResult::kGranted); });
  wait_until([&] { return lm.counters().waits == 1; });
  // Compatible with the holder, but queued behind the writer.
  CHECK(lm.acquire(r2, kA, LockMode::kShared, 5ms) == AcquireResult::kTimedOut);
  lm.release(*r1, kA);
  tw.join();
  lm.release(*w, kA);
}

TEST_CASE("retired locks create commit dependencies") {
  LockManager lm(4);
  auto writer = txn(1, 1, TxnClass::kStatic, WaitPolicy::kWoundWait);
  auto r1 = txn(2, 2, TxnClass::kStatic, WaitPolicy::kWoundWait);
  auto r2 = txn(3, 3, TxnClass::kStatic, WaitPolicy::kWoundWait);
  auto downstream = txn(4, 4, TxnClass::kStatic, WaitPolicy::kWoundWait);
  REQUIRE(lm.acquire(writer, kA, LockMode::kExclusive) == AcquireResult::kGranted);
  CHECK_THROWS_AS(lm.retire(*r1, kA), std::logic_error);
  lm.retire(*writer, kA);
  CHECK(lm.acquire(r1, kA, LockMode::kShared) == AcquireResult::kGranted);
  CHECK(lm.acquire(r2, kA, LockMode::kShared) == AcquireResult::kGranted);
  CHECK(r1->pending_upstream == 1);
  CHECK(r2->pending_upstream == 1);

  // r1 writes B and retires it; downstream reads the dirty B.
  REQUIRE(lm.acquire(r1, kB, LockMode::kExclusive) == AcquireResult::kGranted);
  lm.retire(*r1, kB);
  CHECK(lm.acquire(downstream, kB, LockMode::kShared) == AcquireResult::kGranted);

  // Transitive closure of dependents from the writer.
  std::set<std::uint64_t> closure;
  std::function<void(Txn&)> visit = [&](Txn& t) {
    for (auto& d : t.dependents)
      if (closure.insert(d->id).second) visit(*d);
  };
  visit(*writer);
  CHECK(closure == std::set<std::uint64_t>{2, 3, 4});
  CHECK(lm.counters().retirements == 2);

  // An older requester may not consume a younger writer's dirty value.
  auto older = txn(5, 0, TxnClass::kStatic, WaitPolicy::kWoundWait);
  CHECK(lm.acquire(older, kB, LockMode::kShared, 5ms) == AcquireResult::kTimedOut);
}

TEST_CASE("dirty values of a rolling-back writer are not consumed") {
  LockManager lm(4);
  auto writer = txn(1, 1, TxnClass::kStatic, WaitPolicy::kWoundWait);
  auto reader = txn(2, 2, TxnClass::kStatic, WaitPolicy::kWoundWait);
  REQUIRE(lm.acquire(writer, kA, LockMode::kExclusive) == AcquireResult::kGranted);
  lm.retire(*writer, kA);
  // A user abort rolls back without setting an abort reason.
  writer->phase = static_cast<int>(TxnPhase::kAborting);
  CHECK(lm.acquire(reader, kA, LockMode::kShared, 5ms) == AcquireResult::kTimedOut);
  CHECK(writer->dependents.empty());
  CHECK(reader->pending_upstream == 0);

  auto later = txn(3, 3, TxnClass::kStatic, WaitPolicy::kWoundWait);
  std::atomic<bool> done{false};
  std::thread t([&] {
    CHECK(lm.acquire(later, kA, LockMode::kShared) == AcquireResult::kGranted);
    done = true;
  });
  std::this_thread::sleep_for(5ms);
  CHECK_FALSE(done);
  lm.release(*writer, kA);
  t.join();
  CHECK(done);
  CHECK(later->pending_upstream == 0);
}

TEST_CASE("aborted requesters are refused") {
  LockManager lm(4);
  auto t = txn(1, 1);
  t->wound(AbortReason::kWound);
  CHECK(lm.acquire(t, kA, LockMode::kShared) == AcquireResult::kAborted);
  CHECK(lm.active_entries() == 0);
}

TEST_CASE("committing transactions cannot be wounded") {
  auto t = txn(1, 1);
  t->phase = static_cast<int>(TxnPhase::kCommitting);
  CHECK_FALSE(t->wound(AbortReason::kWound));
  CHECK_FALSE(t->aborted());
}

TEST_CASE("wait-for graph cycle checks") {
  WaitForGraph g;
  g.edges = {{1, 2}, {2, 3}, {3, 1}};
  g.classes = {{1, TxnClass::kStatic}, {2, TxnClass::kStatic}, {3, TxnClass::kDynamic}};
  CHECK(g.has_cycle());
  CHECK_FALSE(g.has_static_cycle());
  g.classes[2].second = TxnClass::kStatic;
  CHECK(g.has_static_cycle());
  CHECK_FALSE(WaitForGraph{}.has_cycle());
}

TEST_CASE("a real deadlock shows up in the snapshot") {
  LockManager lm(4);
  auto t1 = txn(1, 1), t2 = txn(2, 2);
  REQUIRE(lm.acquire(t1, kA, LockMode::kExclusive) == AcquireResult::kGranted);
  REQUIRE(lm.acquire(t2, kB, LockMode::kExclusive) == AcquireResult::kGranted);
  std::thread a([&] { lm.acquire(t1, kB, LockMode::kExclusive, 300ms); });
  std::thread b([&] { lm.acquire(t2, kA, LockMode::kExclusive, 300ms); });
  wait_until([&] { return lm.counters().waits == 2; });
  auto g = lm.snapshot();
  CHECK(g.has_cycle());
  CHECK(g.has_static_cycle());
  CHECK(g.oldest_wait_ns >= 0);
  a.join();
  b.join();
  CHECK(lm.counters().timeouts == 2);
}

TEST_CASE("concurrent exclusive increments are mutually excluded") {
  LockManager lm(16);
  int counter = 0;
  std::atomic<std::uint64_t> ids{1};
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w)
    threads.emplace_back([&] {
      for (int i = 0; i < 2000; ++i) {
        auto t = txn(ids++, 0);
        REQUIRE(lm.acquire(t, kA, LockMode::kExclusive) == AcquireResult::kGranted);
        ++counter;
        lm.release(*t, kA);
      }
    });
  for (auto& t : threads) t.join();
  CHECK(counter == 8000);
  CHECK(lm.active_entries() == 0);
}
