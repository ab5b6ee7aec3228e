#pragma once

#include "dmsim/addrspace.hpp"
#include "dmsim/core_model.hpp"
#include "dmsim/dmcache.hpp"
#include "dmsim/dram.hpp"
#include "dmsim/trace.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dmsim {

// NoP: one partition spanning every way, nothing deterministic.
// WP:  disjoint way partitions, every request treated as deterministic.
// DM:  disjoint way partitions, DM flag taken from the page table.
enum class SimMode : std::uint8_t { NoP, WP, DM };

std::string_view to_string(SimMode m);
SimMode parse_sim_mode(std::string_view s);

enum class BankAllocation : std::uint8_t {
    Partitioned, // DM pages to the owner's private banks, BE pages to shared banks
    Interleaved, // lowest free page in any bank, DM ignored
};

std::string_view to_string(BankAllocation a);
BankAllocation parse_bank_allocation(std::string_view s);

struct L1Config {
    bool enabled = false;
    std::uint64_t size = 16 * 1024;
    unsigned assoc = 2;
    Cycle hit_latency = 2;
};

struct CoreSetup {
    std::string name;
    Trace trace;
    DmRegionSet regions;
    // Restart the trace on END instead of finishing; the run ends when every
    // non-looping core has finished.
    bool loop = false;
    // Records executed (first pass) before the steady-state counters start.
    std::uint64_t warmup_records = 0;
    // Cycles of non-memory work before each record.
    Cycle think = 0;
};

struct SimConfig {
    SimMode mode = SimMode::DM;
    CacheConfig cache = CacheConfig::shared_l2();
    L1Config l1;
    DramConfig dram;
    std::uint64_t page_size = 4096;
    std::uint64_t bank_granule_pages = 1;
    BankPolicy banks;
    BankAllocation allocation = BankAllocation::Partitioned;
    std::vector<CoreSetup> cores;
    Cycle cleanup_latency = 2000;
    Cycle occupancy_interval = 0; // 0 disables sampling
    Cycle max_cycles = 0;         // 0 = no limit
    bool audit = false;
    bool dram_log = false;
    std::uint64_t seed = 0;

    MemoryGeometry memory_geometry() const;
    // The cache configuration after applying the mode.
    CacheConfig effective_cache() const;
    void validate() const;

    // Four cores, 2 MiB/16-way shared cache with four ways per core, 8 DRAM
    // banks: banks 4..7 private to cores 0..3, banks 0..3 shared.
    static SimConfig quad_core(SimMode mode);
};

struct CoreCounters {
    ClassCounters l2_dm;
    ClassCounters l2_be;
    std::uint64_t l1_hits = 0;
    std::uint64_t l1_misses = 0;
    std::uint64_t be_l1_misses = 0;
    std::uint64_t dram_fetches = 0; // demand reads
    std::uint64_t dram_writes = 0;  // write-backs and bypassed writes
    std::uint64_t cleanups = 0;
    std::uint64_t dm_lines_cleared = 0;
    std::uint64_t accesses = 0;

    ClassCounters l2() const {
        return {l2_dm.hits + l2_be.hits, l2_dm.misses + l2_be.misses,
                l2_dm.bypasses + l2_be.bypasses};
    }
};

struct CoreReport {
    CoreId core = 0;
    std::string name;
    bool measured = true; // false for looping co-runners
    bool finished = false;
    Cycle runtime = 0;
    std::uint64_t records = 0;
    std::uint64_t passes = 0;
    CoreCounters total;
    CoreCounters steady; // after warmup_records
    DramCoreStats dram;
    double dm_occupancy = 0.0; // at end of run
    std::uint64_t lines_owned = 0;
    std::uint64_t dm_pages = 0;
    std::uint64_t pages = 0;
    std::map<PageNumber, std::uint64_t> page_l1_misses; // by virtual page
};

struct OccupancySample {
    Cycle time = 0;
    std::vector<double> dm_occupancy; // per core partition
};

struct SimReport {
    SimMode mode = SimMode::DM;
    Cycle end_time = 0;
    bool hit_cycle_limit = false;
    std::vector<CoreReport> cores;
    std::vector<OccupancySample> occupancy;
    std::uint64_t cache_lines = 0;
    std::uint64_t isolation_violations = 0;
    std::uint64_t invariant_violations = 0;
    std::vector<ScheduleLogEntry> dram_log;
};

struct RunHooks {
    // Every demand access to the shared cache, in processing order.
    std::function<void(const MemoryRequest&, const AccessOutcome&)> on_shared_access;
};

SimReport run(const SimConfig& cfg, const RunHooks& hooks = {});

struct RtaCounts {
    CoreId core = 0;
    std::uint64_t dm_misses = 0;    // DM_i
    std::uint64_t be_l1_misses = 0; // BM_i

    friend bool operator==(const RtaCounts&, const RtaCounts&) = default;
};

std::vector<RtaCounts> export_rta(const SimReport& report);
// `core=<i> dm_misses=<n> be_l1_misses=<m>` per line.
void write_rta_export(std::ostream& os, const std::vector<RtaCounts>& counts);
std::vector<RtaCounts> read_rta_export(std::istream& is, const std::string& origin = "<rta>");

} // namespace dmsim
