#include <benchmark/benchmark.h>

#include <memory>

#include "brook/embedded_dsl.hpp"
#include "brook/workloads.hpp"

using namespace brook;

namespace {

void BM_LockAcquireRelease(benchmark::State& state) {
  LockManager lm;
  auto mode = state.range(0) ? LockMode::kExclusive : LockMode::kShared;
  std::uint64_t row = 0;
  for (auto _ : state) {
    auto t = std::make_shared<Txn>(row + 1, row + 1, TxnClass::kStatic, WaitPolicy::kFifo);
    LockKey k{0, row++ % 1024};
    benchmark::DoNotOptimize(lm.acquire(t, k, mode));
    lm.release(*t, k);
  }
}
BENCHMARK(BM_LockAcquireRelease)->Arg(0)->Arg(1);

void BM_AnalyzeStore(benchmark::State& state) {
  Workload w = parse_workload(store_dsl());
  for (auto _ : state) benchmark::DoNotOptimize(analyze(w).plans.size());
}
BENCHMARK(BM_AnalyzeStore)->Unit(benchmark::kMillisecond);

void BM_AnalyzeTpcc(benchmark::State& state) {
  Workload w = parse_workload(tpcc_dsl());
  for (auto _ : state) benchmark::DoNotOptimize(analyze(w).plans.size());
}
BENCHMARK(BM_AnalyzeTpcc)->Unit(benchmark::kMillisecond);

void BM_SlwCycleCheckTpcc(benchmark::State& state) {
  Workload w = parse_workload(tpcc_dsl());
  SlwGraph g = build_initial_slw_graph(w.templates, w.schema);
  for (auto _ : state) benchmark::DoNotOptimize(has_slw_cycle(g));
}
BENCHMARK(BM_SlwCycleCheckTpcc);

// Single-threaded engine cost per store transaction, by protocol.
void BM_StoreTxn(benchmark::State& state) {
  auto protocol = static_cast<Protocol>(state.range(0));
  WorkloadContext ctx = WorkloadContext::store();
  StoreSizes sizes{20000, 5, 5000};
  auto store = make_store(ctx);
  load_store_dataset(*store, sizes, 1);
  EngineOptions opts;
  opts.protocol = protocol;
  Engine engine(*store, ctx.workload(), analyze(ctx.workload()).plans, opts);
  MixSpec mix;
  mix.entries = {{"AddListing", 1}, {"BuyListing", 1}};
  StoreGenerator gen(ctx, *store, sizes, {64, 0.5, 3}, mix, 0, 1);
  Engine::Worker w;
  for (auto _ : state) {
    auto p = gen.next();
    benchmark::DoNotOptimize(engine.run(*p, w).status);
  }
  state.SetLabel(std::string(to_string(protocol)));
}
BENCHMARK(BM_StoreTxn)->DenseRange(0, 4);

void BM_NewOrderTxn(benchmark::State& state) {
  auto protocol = static_cast<Protocol>(state.range(0));
  WorkloadContext ctx = WorkloadContext::tpcc();
  auto store = make_store(ctx);
  load_tpcc(*store, {1, false}, 1);
  EngineOptions opts;
  opts.protocol = protocol;
  Engine engine(*store, ctx.workload(), analyze(ctx.workload()).plans, opts);
  MixSpec mix;
  mix.entries = {{"NewOrder", 1}};
  TpccGenerator gen(ctx, {1, false}, {1, 1.0, 3}, mix, 0);
  Engine::Worker w;
  for (auto _ : state) {
    auto p = gen.next();
    benchmark::DoNotOptimize(engine.run(*p, w).status);
  }
  state.SetLabel(std::string(to_string(protocol)));
}
BENCHMARK(BM_NewOrderTxn)->DenseRange(0, 4);

}  // namespace

BENCHMARK_MAIN();
