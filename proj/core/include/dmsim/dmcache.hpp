#pragma once

#include "dmsim/core_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmsim {

struct CacheConfig {
    std::uint64_t size = 2ull << 20;
    unsigned assoc = 16;
    std::uint64_t line_size = 64;
    Cycle hit_latency = 12;
    // Way partition of each core; index = core id. Its length fixes the core count.
    std::vector<WayMask> part_mask;
    // Lets partitions overlap. Voids the isolation guarantee.
    bool allow_overlap = false;

    std::uint64_t num_sets() const { return size / (std::uint64_t{assoc} * line_size); }
    CacheGeometry geometry() const { return {line_size, num_sets()}; }
    unsigned num_cores() const { return static_cast<unsigned>(part_mask.size()); }

    void validate() const;

    // 2 MiB, 16 ways, 64 B lines, 12-cycle hits, `ways_per_core` contiguous
    // ways per core starting at way 0.
    static CacheConfig shared_l2(unsigned num_cores = 4, unsigned ways_per_core = 4);
};

struct CacheLine {
    bool valid = false;
    bool dirty = false;
    bool dm = false;
    std::uint16_t recency = 0; // 0 = MRU among the valid lines of the set
    CoreId owner = 0;          // last core to fill or DM-mark the line
    std::uint64_t tag = 0;

    friend bool operator==(const CacheLine&, const CacheLine&) = default;
};

enum class AccessResult : std::uint8_t { Hit, Miss, Bypass };

std::string_view to_string(AccessResult r);

struct Eviction {
    PhysAddr line_addr = 0;
    bool dirty = false;
    bool dm = false;
    CoreId owner = 0;
};

struct AccessOutcome {
    AccessResult result = AccessResult::Miss;
    Cycle latency = 0;
    unsigned way = 0; // meaningful for Hit and Miss
    std::optional<Eviction> evicted;
};

struct ClassCounters {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t bypasses = 0;

    std::uint64_t accesses() const { return hits + misses + bypasses; }
    double hit_rate() const {
        return accesses() ? static_cast<double>(hits) / static_cast<double>(accesses()) : 0.0;
    }
};

struct CoreCacheStats {
    ClassCounters dm;
    ClassCounters be;
    std::uint64_t evictions_caused = 0;   // victims chosen on this core's misses
    std::uint64_t evictions_suffered = 0; // this core's lines evicted by anyone
    std::uint64_t dm_lines_cleared = 0;
    std::uint64_t cleanups = 0;

    ClassCounters total() const {
        return {dm.hits + be.hits, dm.misses + be.misses, dm.bypasses + be.bypasses};
    }
};

struct CacheStats {
    std::vector<CoreCacheStats> per_core;
    // Audit mode only: DM line of core i evicted by core j != i.
    std::uint64_t isolation_violations = 0;
    // Audit mode only: DM line outside its owner's partition, or a broken
    // recency permutation.
    std::uint64_t invariant_violations = 0;
};

// Bit w set iff way w holds a valid DM line.
WayMask det_mask(std::span<const CacheLine> set);

// LRU way among `candidates`: an invalid way if there is one (lowest
// index), else the valid way with the largest recency.
std::optional<unsigned> lru_way(std::span<const CacheLine> set, WayMask candidates);

// Replacement decision on a miss. nullopt means bypass: a best-effort
// request found every way holding DM lines.
std::optional<unsigned> select_victim(std::span<const CacheLine> set, WayMask part_mask, bool dm);

// Shared set-associative cache with DM-aware replacement.
class DmCache {
public:
    explicit DmCache(CacheConfig cfg, bool audit = false);

    AccessOutcome access(const MemoryRequest& req);

    // Clears the DM bit of every line in `core`'s partition; returns the count.
    std::uint64_t dm_cleanup(CoreId core);

    std::span<const CacheLine> set_lines(std::uint64_t set) const;
    WayMask det_mask_of(std::uint64_t set) const { return det_mask(set_lines(set)); }
    std::optional<unsigned> select_victim_for(std::uint64_t set, CoreId core, bool dm) const;
    const CacheLine* find(PhysAddr paddr) const;

    std::uint64_t dm_lines_in_partition(CoreId core) const;
    // DM lines in the partition over the partition's capacity.
    double dm_occupancy(CoreId core) const;
    std::uint64_t lines_owned_by(CoreId core) const;
    std::uint64_t valid_lines() const;
    std::uint64_t total_lines() const { return lines_.size(); }

    // Recency permutation and partition confinement over the whole cache.
    bool check_invariants(std::string* why = nullptr) const;

    const CacheConfig& config() const { return cfg_; }
    const CacheGeometry& geometry() const { return geom_; }
    const CacheStats& stats() const { return stats_; }
    bool audit() const { return audit_; }

private:
    std::span<CacheLine> mutable_set(std::uint64_t set);
    bool check_set(std::uint64_t set, std::string* why) const;
    static void promote(std::span<CacheLine> set, unsigned way);

    CacheConfig cfg_;
    CacheGeometry geom_;
    std::vector<CacheLine> lines_;
    CacheStats stats_;
    bool audit_;
};

// Private per-core cache (the L1). Plain LRU with write-back; DM bits are
// not consulted.
class PrivateCache {
public:
    struct Result {
        bool hit = false;
        std::optional<PhysAddr> writeback; // dirty victim line address
    };

    PrivateCache(std::uint64_t size, unsigned assoc, std::uint64_t line_size, Cycle hit_latency);

    Result access(PhysAddr paddr, AccessKind kind);
    Cycle hit_latency() const { return inner_.config().hit_latency; }
    std::uint64_t hits() const { return inner_.stats().per_core[0].be.hits; }
    std::uint64_t misses() const { return inner_.stats().per_core[0].be.misses; }

private:
    DmCache inner_;
};

} // namespace dmsim
