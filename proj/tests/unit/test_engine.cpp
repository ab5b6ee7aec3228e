#include "dmsim/engine.hpp"
#include "dmsim/error.hpp"
#include "lru_oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace dmsim;

namespace {

Trace seq(std::uint64_t ws, std::uint64_t iters, VirtAddr base = 0,
          TraceKind kind = TraceKind::Sequential) {
    GenParams p;
    p.kind = kind;
    p.working_set = ws;
    p.iterations = iters;
    p.base = base;
    return gen_trace(p);
}

SimConfig single(SimMode mode, Trace t) {
    SimConfig cfg;
    cfg.mode = mode;
    cfg.cache = CacheConfig::shared_l2(1, 16);
    cfg.banks.private_banks[0] = {7};
    cfg.banks.shared_banks = {0, 1, 2, 3, 4, 5, 6};
    cfg.cores.push_back({"t0", std::move(t), {}, false, 0});
    return cfg;
}

} // namespace

TEST(Modes, ParseAndPrint) {
    for (auto m : {SimMode::NoP, SimMode::WP, SimMode::DM})
        EXPECT_EQ(parse_sim_mode(to_string(m)), m);
    EXPECT_THROW(parse_sim_mode("dm"), ValidationError);
    EXPECT_EQ(parse_bank_allocation("interleaved"), BankAllocation::Interleaved);
    EXPECT_THROW(parse_bank_allocation("colour"), ValidationError);
}

TEST(Engine, SequentialSweepFitsAfterFirstPass) {
    const auto rep = run(single(SimMode::NoP, seq(64 * 1024, 3)));
    ASSERT_EQ(rep.cores.size(), 1u);
    const auto& c = rep.cores[0];
    EXPECT_TRUE(c.finished);
    EXPECT_EQ(c.total.accesses, 3u * 1024);
    EXPECT_EQ(c.total.l2().misses, 1024u);
    EXPECT_EQ(c.total.l2().hits, 2u * 1024);
    EXPECT_EQ(c.total.dram_fetches, 1024u);
    EXPECT_EQ(c.total.l2_dm.accesses(), 0u);
    EXPECT_GT(c.runtime, 0u);
}

TEST(Engine, WpMarksEveryRequestDeterministic) {
    const auto rep = run(single(SimMode::WP, seq(8192, 2)));
    EXPECT_EQ(rep.cores[0].total.l2_be.accesses(), 0u);
    EXPECT_EQ(rep.cores[0].total.l2_dm.accesses(), 256u);
}

TEST(Engine, DmModeUsesRegions) {
    auto cfg = single(SimMode::DM, seq(4 * 4096, 1));
    cfg.cores[0].regions = DmRegionSet({{1, 2}});
    const auto rep = run(cfg);
    EXPECT_EQ(rep.cores[0].total.l2_dm.accesses(), 64u);
    EXPECT_EQ(rep.cores[0].total.l2_be.accesses(), 192u);
    EXPECT_EQ(rep.cores[0].dm_pages, 1u);
    EXPECT_EQ(rep.cores[0].pages, 4u);
}

TEST(Engine, RegionsRejectedOutsideDmMode) {
    for (auto m : {SimMode::NoP, SimMode::WP}) {
        auto cfg = single(m, seq(4096, 1));
        cfg.cores[0].regions = DmRegionSet::all();
        EXPECT_THROW(run(cfg), ValidationError);
    }
}

TEST(Engine, CleanupKeepsLinesAndReMarksWithoutRefetch) {
    Trace t{{RecordKind::Read, 0x0}, {RecordKind::Read, 0x40}, {RecordKind::Cleanup, 0},
            {RecordKind::Read, 0x0}, {RecordKind::EndOfTask, 0}};
    auto cfg = single(SimMode::DM, t);
    cfg.cores[0].regions = DmRegionSet::all();
    cfg.cleanup_latency = 500;
    const auto rep = run(cfg);
    const auto& c = rep.cores[0].total;
    EXPECT_EQ(c.cleanups, 1u);
    EXPECT_EQ(c.dm_lines_cleared, 2u);
    EXPECT_EQ(c.dram_fetches, 2u);
    EXPECT_EQ(c.l2_dm.hits, 1u);
    // Only 0x0 was re-marked.
    EXPECT_DOUBLE_EQ(rep.cores[0].dm_occupancy, 1.0 / (2048.0 * 16));
    EXPECT_GT(rep.cores[0].runtime, 500u);
}

TEST(Engine, LoopingCoRunnersAreNotMeasured) {
    auto cfg = SimConfig::quad_core(SimMode::WP);
    cfg.cores.push_back({"rt", seq(16 * 1024, 2), {}, false, 0});
    for (int i = 1; i < 4; ++i)
        cfg.cores.push_back({"bw" + std::to_string(i),
                             seq(4 * 1024, 1, 0x1000000 * i, TraceKind::BandwidthWrite), {},
                             true, 0});
    const auto rep = run(cfg);
    EXPECT_TRUE(rep.cores[0].measured);
    EXPECT_TRUE(rep.cores[0].finished);
    EXPECT_FALSE(rep.cores[1].measured);
    EXPECT_GT(rep.cores[1].passes, 0u);
    EXPECT_FALSE(rep.hit_cycle_limit);

    for (auto& c : cfg.cores) c.loop = true;
    EXPECT_THROW(run(cfg), ValidationError);
    cfg.max_cycles = 100000;
    const auto capped = run(cfg);
    EXPECT_TRUE(capped.hit_cycle_limit);
    EXPECT_LE(capped.end_time, 100000u + 1000);
}

TEST(Engine, BackPressureStillCompletes) {
    auto cfg = SimConfig::quad_core(SimMode::NoP);
    cfg.dram.queue_capacity = 1;
    cfg.allocation = BankAllocation::Interleaved;
    for (int i = 0; i < 4; ++i)
        cfg.cores.push_back({"c" + std::to_string(i),
                             seq(256 * 1024, 1, 0x1000000 * i, TraceKind::BandwidthWrite), {},
                             false, 0});
    cfg.cache.size = 64 * 1024;
    const auto rep = run(cfg);
    for (const auto& c : rep.cores) {
        EXPECT_TRUE(c.finished);
        EXPECT_EQ(c.total.dram_fetches, c.total.l2().misses + c.total.l2().bypasses);
    }
}

TEST(Engine, WarmupSplitsSteadyCounters) {
    auto cfg = single(SimMode::NoP, seq(8192, 4));
    cfg.cores[0].warmup_records = 128;
    const auto rep = run(cfg);
    EXPECT_EQ(rep.cores[0].steady.accesses, 3u * 128);
    EXPECT_EQ(rep.cores[0].steady.l2().misses, 0u);
}

TEST(Engine, DeterministicAcrossRuns) {
    auto cfg = SimConfig::quad_core(SimMode::DM);
    cfg.dram_log = true;
    for (int i = 0; i < 4; ++i) {
        GenParams p;
        p.kind = TraceKind::Random;
        p.working_set = 1 << 20;
        p.seed = 100 + i;
        p.base = 0x4000000ull * i;
        cfg.cores.push_back({"c" + std::to_string(i), gen_trace(p),
                             i % 2 ? DmRegionSet::all() : DmRegionSet{}, false, 0});
    }
    const auto a = run(cfg);
    const auto b = run(cfg);
    ASSERT_EQ(a.dram_log.size(), b.dram_log.size());
    EXPECT_EQ(a.end_time, b.end_time);
    for (std::size_t i = 0; i < a.cores.size(); ++i) {
        EXPECT_EQ(a.cores[i].runtime, b.cores[i].runtime);
        EXPECT_EQ(a.cores[i].total.l2().hits, b.cores[i].total.l2().hits);
    }
}

TEST(Engine, PartitionedAllocationKeepsDmTrafficOnPrivateBanks) {
    auto cfg = SimConfig::quad_core(SimMode::DM);
    cfg.dram_log = true;
    for (int i = 0; i < 4; ++i)
        cfg.cores.push_back({"c" + std::to_string(i), seq(1 << 20, 1, 0x4000000ull * i),
                             i < 2 ? DmRegionSet::all() : DmRegionSet{}, false, 0});
    const auto rep = run(cfg);
    ASSERT_FALSE(rep.dram_log.empty());
    for (const auto& e : rep.dram_log) {
        if (e.dm) EXPECT_EQ(e.bank, 4 + e.core);
        else EXPECT_LT(e.bank, 4u);
    }
}

TEST(Engine, WpSharedAccessesMatchPartitionedLruOracle) {
    auto cfg = SimConfig::quad_core(SimMode::WP);
    cfg.cache.size = 64 * 16 * 64;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 4; ++i) {
        GenParams p;
        p.kind = TraceKind::Random;
        p.working_set = 64 * 512;
        p.iterations = 4;
        p.seed = rng();
        p.base = 0x100000ull * i;
        cfg.cores.push_back({"c" + std::to_string(i), gen_trace(p), {}, false, 0});
    }
    oracle::WayPartitionedLru ref(64, {4, 4, 4, 4});
    const CacheGeometry g{64, 64};
    std::uint64_t checked = 0, mismatches = 0;
    RunHooks hooks;
    hooks.on_shared_access = [&](const MemoryRequest& r, const AccessOutcome& o) {
        ++checked;
        const bool hit = ref.access(r.core, g.set_index(r.paddr), g.tag(r.paddr));
        if (hit != (o.result == AccessResult::Hit)) ++mismatches;
    };
    run(cfg, hooks);
    EXPECT_EQ(checked, 4u * 2048);
    EXPECT_EQ(mismatches, 0u);
}

TEST(RtaExport, RoundTrip) {
    auto cfg = single(SimMode::DM, seq(4 * 4096, 2));
    cfg.cores[0].regions = DmRegionSet({{0, 2}});
    cfg.l1.enabled = true;
    const auto rep = run(cfg);
    const auto counts = export_rta(rep);
    ASSERT_EQ(counts.size(), 1u);
    EXPECT_EQ(counts[0].dm_misses, rep.cores[0].total.l2_dm.misses);
    EXPECT_EQ(counts[0].be_l1_misses, rep.cores[0].total.be_l1_misses);
    EXPECT_GT(counts[0].be_l1_misses, 0u);
    std::stringstream ss;
    write_rta_export(ss, counts);
    EXPECT_EQ(read_rta_export(ss), counts);
    std::istringstream bad("core=0 dm_misses=x\n");
    EXPECT_THROW(read_rta_export(bad), ValidationError);
}
