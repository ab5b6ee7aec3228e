#include "dmsim/dmcache.hpp"
#include "dmsim/dmlru.hpp"
#include "dmsim/dram.hpp"
#include "dmsim/engine.hpp"
#include "experiments.hpp"
#include "random_cfg.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace dmsim;

static void BM_SharedCacheAccess(benchmark::State& state) {
    const bool dm_mode = state.range(0) != 0;
    auto cfg = CacheConfig::shared_l2(4, 4);
    DmCache cache(cfg);
    std::mt19937_64 rng(1);
    std::vector<MemoryRequest> reqs;
    for (int i = 0; i < 1 << 16; ++i) {
        const CoreId c = rng() % 4;
        reqs.push_back({c, AccessKind::Read, ((std::uint64_t{c} << 28) + rng() % (1 << 16)) * 64,
                        dm_mode && rng() % 2, 0});
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cache.access(reqs[i]));
        i = (i + 1) & (reqs.size() - 1);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SharedCacheAccess)->Arg(0)->Arg(1);

static void BM_DramTick(benchmark::State& state) {
    DramConfig cfg;
    MemoryGeometry mem;
    DramController ctl(cfg, AddressMap(CacheGeometry{}, mem), 4);
    std::mt19937_64 rng(2);
    Cycle now = 0;
    std::uint64_t token = 0;
    for (auto _ : state) {
        MemoryRequest r{static_cast<CoreId>(rng() % 4), AccessKind::Read,
                        (rng() % mem.total_pages()) << 12, rng() % 2 == 0, now};
        ctl.enqueue(ctl.make_request(r, token++, now));
        benchmark::DoNotOptimize(ctl.tick(now));
        now += 20;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DramTick);

static void BM_MustAnalysis(benchmark::State& state) {
    std::mt19937_64 rng(3);
    gen::CfgShape shape;
    shape.max_nodes = static_cast<unsigned>(state.range(0));
    shape.max_blocks = 12;
    shape.assoc = 8;
    std::vector<dmlru::CfgProgram> progs;
    for (int i = 0; i < 64; ++i) progs.push_back(gen::random_cfg(rng, shape));
    const dmlru::AnalysisOptions opts{dmlru::UbVariant::Strict, dmlru::DGuard::Emended, true};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dmlru::must_analysis(progs[i], opts));
        i = (i + 1) % progs.size();
    }
}
BENCHMARK(BM_MustAnalysis)->Arg(6)->Arg(24);

static void BM_EngineHitRateExperiment(benchmark::State& state) {
    const auto cfg = experiment::hit_rate(static_cast<SimMode>(state.range(0)), 2);
    std::uint64_t accesses = 0;
    for (auto _ : state) {
        const auto rep = run(cfg);
        for (const auto& c : rep.cores) accesses += c.total.accesses;
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(accesses));
}
BENCHMARK(BM_EngineHitRateExperiment)
    ->Arg(static_cast<int>(SimMode::NoP))
    ->Arg(static_cast<int>(SimMode::DM))
    ->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
