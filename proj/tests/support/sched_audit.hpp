#pragma once

// Scheduling audits computed from a DRAM schedule log alone.

#include "dmsim/dram.hpp"

#include <random>
#include <span>

namespace audit {

struct SchedAudit {
    std::uint64_t grants = 0;
    std::uint64_t dm_grants = 0;
    std::uint64_t be_while_dm_ready = 0; // BE granted with DM pending under the cap
    std::uint64_t streak_over_cap = 0;   // DM grants beyond the cap while BE pending
    std::uint64_t rr_out_of_turn = 0;    // DM grant to a core other than the rotation's pick
    unsigned max_streak = 0;
};

inline SchedAudit audit_log(std::span<const dmsim::ScheduleLogEntry> log, unsigned num_cores,
                            unsigned cap) {
    SchedAudit a;
    unsigned streak = 0;
    unsigned pointer = 0;
    for (const auto& e : log) {
        ++a.grants;
        if (!e.dm) {
            if (e.dm_backlog != 0 && streak < cap) ++a.be_while_dm_ready;
            streak = 0;
            continue;
        }
        ++a.dm_grants;
        streak = e.be_pending ? streak + 1 : 0;
        if (streak > cap) ++a.streak_over_cap;
        if (streak > a.max_streak) a.max_streak = streak;

        int want = -1;
        int first = -1;
        for (unsigned i = 0; i < num_cores; ++i) {
            const unsigned c = (pointer + i) % num_cores;
            if (!(e.dm_backlog >> c & 1)) continue;
            if (first < 0) first = static_cast<int>(c);
            if (!(e.dm_head_busy >> c & 1)) {
                want = static_cast<int>(c);
                break;
            }
        }
        if (want < 0) want = first;
        if (want != static_cast<int>(e.core)) ++a.rr_out_of_turn;
        pointer = (e.core + 1) % num_cores;
    }
    return a;
}

// Random mixed DM/BE traffic from `num_cores` cores, drained to idle.
inline std::vector<dmsim::ScheduleLogEntry>
random_stream(std::mt19937_64& rng, const dmsim::DramConfig& cfg, unsigned num_cores,
              unsigned requests, double dm_prob) {
    using namespace dmsim;
    MemoryGeometry mem;
    mem.num_banks = cfg.num_banks;
    mem.pages_per_bank = cfg.rows_per_bank;
    DramController ctl(cfg, AddressMap(CacheGeometry{}, mem), num_cores, true);
    std::uniform_real_distribution<double> coin(0, 1);
    Cycle now = 0;
    unsigned sent = 0;
    std::uint64_t token = 0;
    while (sent < requests || !ctl.idle()) {
        const unsigned burst = sent < requests ? static_cast<unsigned>(rng() % 6) : 0;
        for (unsigned k = 0; k < burst && sent < requests; ++k) {
            MemoryRequest r;
            r.core = static_cast<CoreId>(rng() % num_cores);
            r.dm = coin(rng) < dm_prob;
            r.kind = coin(rng) < 0.3 ? AccessKind::Write : AccessKind::Read;
            // A handful of hot pages per bank gives both row hits and misses.
            r.paddr = ((rng() % (4 * cfg.num_banks)) << 12) | ((rng() % 64) << 6);
            if (ctl.enqueue(ctl.make_request(r, token++, now))) ++sent;
        }
        ctl.tick(now);
        const auto wake = ctl.next_wake(now);
        now += (sent < requests) ? 1 + rng() % 20 : (wake ? *wake - now : 1);
    }
    return ctl.log();
}

} // namespace audit
