#include "dmsim/engine.hpp"

#include "dmsim/error.hpp"

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

namespace dmsim {

std::string_view to_string(SimMode m) {
    switch (m) {
    case SimMode::NoP: return "NoP";
    case SimMode::WP: return "WP";
    case SimMode::DM: return "DM";
    }
    return "?";
}

SimMode parse_sim_mode(std::string_view s) {
    for (auto m : {SimMode::NoP, SimMode::WP, SimMode::DM})
        if (s == to_string(m)) return m;
    throw ValidationError("system.mode must be NoP, WP or DM, got '" + std::string(s) + "'");
}

std::string_view to_string(BankAllocation a) {
    return a == BankAllocation::Partitioned ? "partitioned" : "interleaved";
}

BankAllocation parse_bank_allocation(std::string_view s) {
    if (s == "partitioned") return BankAllocation::Partitioned;
    if (s == "interleaved") return BankAllocation::Interleaved;
    throw ValidationError("banks.policy must be partitioned or interleaved, got '" +
                          std::string(s) + "'");
}

MemoryGeometry SimConfig::memory_geometry() const {
    MemoryGeometry g;
    g.page_size = page_size;
    g.num_banks = dram.num_banks;
    g.pages_per_bank = dram.rows_per_bank;
    g.bank_granule_pages = bank_granule_pages;
    return g;
}

CacheConfig SimConfig::effective_cache() const {
    CacheConfig c = cache;
    if (mode == SimMode::NoP) {
        c.part_mask.assign(cores.size(), full_mask(c.assoc));
        c.allow_overlap = true;
    }
    return c;
}

void SimConfig::validate() const {
    if (cores.empty()) throw ValidationError("system: at least one core required");
    if (cores.size() > 64) throw ValidationError("system: at most 64 cores");
    if (mode != SimMode::NoP && cache.part_mask.size() != cores.size())
        throw ValidationError("cache: need one partition mask per core (" +
                              std::to_string(cores.size()) + "), got " +
                              std::to_string(cache.part_mask.size()));
    effective_cache().validate();
    dram.validate();
    memory_geometry().validate();
    if (l1.enabled) {
        CacheConfig l1c;
        l1c.size = l1.size;
        l1c.assoc = l1.assoc;
        l1c.line_size = cache.line_size;
        l1c.part_mask = {full_mask(l1.assoc)};
        l1c.validate();
    }
    bool any_measured = false;
    for (std::size_t c = 0; c < cores.size(); ++c) {
        const auto& core = cores[c];
        const std::string tag = "core" + std::to_string(c);
        if (mode != SimMode::DM && !core.regions.empty())
            throw ValidationError(tag + ": mode " + std::string(to_string(mode)) +
                                  " does not take DM regions");
        bool has_access = false;
        for (const auto& r : core.trace) {
            if (r.kind == RecordKind::EndOfTask) break;
            has_access = has_access || r.kind == RecordKind::Read || r.kind == RecordKind::Write;
        }
        if (core.loop && !has_access)
            throw ValidationError(tag + ": a looping trace needs at least one access before END");
        any_measured = any_measured || !core.loop;
    }
    if (!any_measured && max_cycles == 0)
        throw ValidationError("system: every core loops; set max_cycles or a measured core");
    if (allocation == BankAllocation::Partitioned) {
        banks.validate(dram.num_banks);
        if (mode == SimMode::DM)
            for (std::size_t c = 0; c < cores.size(); ++c)
                if (!cores[c].regions.empty() && !banks.private_banks.count(static_cast<CoreId>(c)))
                    throw ValidationError("banks.private." + std::to_string(c) +
                                          " missing for a core with DM regions");
    }
}

SimConfig SimConfig::quad_core(SimMode mode) {
    SimConfig cfg;
    cfg.mode = mode;
    cfg.cache = CacheConfig::shared_l2(4, 4);
    for (CoreId c = 0; c < 4; ++c) cfg.banks.private_banks[c] = {4 + c};
    cfg.banks.shared_banks = {0, 1, 2, 3};
    return cfg;
}

namespace {

enum class EventType : std::uint8_t { CoreStep, DramWake, DramDone, Sample };

struct Event {
    Cycle time;
    std::uint64_t seq;
    EventType type;
    CoreId core;
    std::uint64_t token;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
};

struct CoreRuntime {
    const CoreSetup* setup = nullptr;
    PageTable table;
    std::size_t idx = 0;
    std::uint64_t records = 0;
    std::uint64_t passes = 0;
    bool finished = false;
    bool step_pending = false;
    std::optional<std::uint64_t> waiting_token;
    unsigned backlogged = 0;
    Cycle ready_at = 0;
    Cycle runtime = 0;
    CoreCounters total;
    CoreCounters steady;
    std::map<PageNumber, std::uint64_t> page_misses;
};

struct Backlogged {
    DramRequest req;
    CoreId issuer;
};

class Simulator {
public:
    Simulator(const SimConfig& cfg, const RunHooks& hooks);
    SimReport run();

private:
    void allocate_pages();
    void schedule(Cycle t, EventType type, CoreId core = 0, std::uint64_t token = 0);
    void step_core(CoreId c, Cycle now);
    void do_access(CoreId c, const TraceRecord& rec, std::size_t index, bool steady, Cycle now);
    void writeback_to_l2(CoreId c, PhysAddr line, Cycle now);
    void post_write(CoreId issuer, const MemoryRequest& req, Cycle now);
    std::uint64_t submit(CoreId issuer, const MemoryRequest& req, Cycle now);
    void pump_dram(Cycle now);
    void try_resume(CoreId c, Cycle now);
    bool apply_mode(bool page_dm) const;
    template <class F> void count(CoreRuntime& k, bool steady, F&& f) {
        f(k.total);
        if (steady) f(k.steady);
    }

    const SimConfig& cfg_;
    const RunHooks& hooks_;
    AddressMap map_;
    DmCache cache_;
    DramController dram_;
    std::vector<PrivateCache> l1_;
    std::vector<CoreRuntime> cores_;
    std::unordered_map<PageNumber, bool> ppage_dm_;
    std::unordered_map<std::uint64_t, CoreId> demand_tokens_;
    std::deque<Backlogged> backlog_;
    std::set<Cycle> wakes_;
    std::priority_queue<Event, std::vector<Event>, Later> events_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_token_ = 1;
    std::size_t measured_left_ = 0;
    bool stop_ = false;
    Cycle end_time_ = 0;
    std::vector<OccupancySample> samples_;
};

Simulator::Simulator(const SimConfig& cfg, const RunHooks& hooks)
    : cfg_(cfg), hooks_(hooks),
      map_(CacheGeometry{cfg.cache.line_size, cfg.effective_cache().num_sets()},
           cfg.memory_geometry()),
      cache_(cfg.effective_cache(), cfg.audit),
      dram_(cfg.dram, map_, static_cast<unsigned>(cfg.cores.size()), cfg.dram_log) {
    cores_.resize(cfg.cores.size());
    for (std::size_t c = 0; c < cfg.cores.size(); ++c) {
        cores_[c].setup = &cfg.cores[c];
        cores_[c].table = PageTable(static_cast<CoreId>(c), cfg.page_size);
        cores_[c].table.declare_dm(cfg.cores[c].regions);
        if (!cfg.cores[c].loop) ++measured_left_;
        if (cfg.l1.enabled)
            l1_.emplace_back(cfg.l1.size, cfg.l1.assoc, cfg.cache.line_size, cfg.l1.hit_latency);
    }
    allocate_pages();
}

void Simulator::allocate_pages() {
    PhysicalAllocator alloc(map_);
    for (auto& k : cores_) {
        for (PageNumber vp : footprint_pages(k.setup->trace, cfg_.page_size)) {
            const PageNumber pp = cfg_.allocation == BankAllocation::Partitioned
                                      ? alloc_page(vp, k.table, cfg_.banks, alloc)
                                      : alloc_page_interleaved(vp, k.table, alloc);
            ppage_dm_[pp] = k.table.find(vp)->dm;
        }
    }
}

bool Simulator::apply_mode(bool page_dm) const {
    switch (cfg_.mode) {
    case SimMode::NoP: return false;
    case SimMode::WP: return true;
    case SimMode::DM: return page_dm;
    }
    return page_dm;
}

void Simulator::schedule(Cycle t, EventType type, CoreId core, std::uint64_t token) {
    events_.push(Event{t, next_seq_++, type, core, token});
}

void Simulator::try_resume(CoreId c, Cycle now) {
    auto& k = cores_[c];
    if (k.finished || k.step_pending || k.waiting_token || k.backlogged != 0) return;
    k.step_pending = true;
    schedule(std::max(now, k.ready_at) + k.setup->think, EventType::CoreStep, c);
}

std::uint64_t Simulator::submit(CoreId issuer, const MemoryRequest& req, Cycle now) {
    const std::uint64_t token = next_token_++;
    DramRequest r = dram_.make_request(req, token, now);
    if (backlog_.empty() && dram_.enqueue(r)) {
        pump_dram(now);
    } else {
        backlog_.push_back({r, issuer});
        ++cores_[issuer].backlogged;
    }
    return token;
}

void Simulator::post_write(CoreId issuer, const MemoryRequest& req, Cycle now) {
    auto& k = cores_[issuer];
    count(k, k.records > k.setup->warmup_records, [](CoreCounters& cc) { ++cc.dram_writes; });
    submit(issuer, req, now);
}

void Simulator::pump_dram(Cycle now) {
    for (;;) {
        for (const auto& g : dram_.tick(now))
            schedule(g.completion, EventType::DramDone, g.request.req.core, g.request.token);
        bool progressed = false;
        while (!backlog_.empty() && dram_.can_accept(backlog_.front().req.req.dm)) {
            auto b = backlog_.front();
            backlog_.pop_front();
            b.req.arrival = now;
            dram_.enqueue(b.req);
            --cores_[b.issuer].backlogged;
            try_resume(b.issuer, now);
            progressed = true;
        }
        if (!progressed) break;
    }
    if (auto w = dram_.next_wake(now); w && wakes_.insert(*w).second)
        schedule(*w, EventType::DramWake);
}

void Simulator::writeback_to_l2(CoreId c, PhysAddr line, Cycle now) {
    const auto it = ppage_dm_.find(map_.page_of(line));
    const bool dm = apply_mode(it != ppage_dm_.end() && it->second);
    const MemoryRequest wb{c, AccessKind::Write, line, dm, now};
    const auto out = cache_.access(wb);
    if (out.evicted && out.evicted->dirty)
        post_write(c, {out.evicted->owner, AccessKind::Write, out.evicted->line_addr,
                       out.evicted->dm, now},
                   now);
    if (out.result == AccessResult::Bypass) post_write(c, wb, now);
}

void Simulator::do_access(CoreId c, const TraceRecord& rec, std::size_t index, bool steady,
                          Cycle now) {
    auto& k = cores_[c];
    Translation tr;
    try {
        tr = translate(rec.vaddr, k.table);
    } catch (const PageFault& e) {
        throw PageFault("core " + std::to_string(c) + " record " + std::to_string(index) + ": " +
                        e.what());
    }
    const bool dm = apply_mode(tr.dm);
    const auto kind = rec.kind == RecordKind::Write ? AccessKind::Write : AccessKind::Read;
    const PageNumber vpage = rec.vaddr / cfg_.page_size;
    count(k, steady, [](CoreCounters& cc) { ++cc.accesses; });

    Cycle t = now;
    if (!l1_.empty()) {
        const auto r = l1_[c].access(tr.paddr, kind);
        t += l1_[c].hit_latency();
        if (r.writeback) writeback_to_l2(c, *r.writeback, t);
        if (r.hit) {
            count(k, steady, [](CoreCounters& cc) { ++cc.l1_hits; });
            k.ready_at = t;
            try_resume(c, now);
            return;
        }
        count(k, steady, [](CoreCounters& cc) { ++cc.l1_misses; });
    }
    ++k.page_misses[vpage];
    if (!dm) count(k, steady, [](CoreCounters& cc) { ++cc.be_l1_misses; });

    const MemoryRequest req{c, kind, tr.paddr, dm, t};
    const auto out = cache_.access(req);
    if (hooks_.on_shared_access) hooks_.on_shared_access(req, out);
    t += out.latency;
    count(k, steady, [&](CoreCounters& cc) {
        auto& cls = dm ? cc.l2_dm : cc.l2_be;
        switch (out.result) {
        case AccessResult::Hit: ++cls.hits; break;
        case AccessResult::Miss: ++cls.misses; break;
        case AccessResult::Bypass: ++cls.bypasses; break;
        }
    });
    if (out.evicted && out.evicted->dirty)
        post_write(c, {out.evicted->owner, AccessKind::Write, out.evicted->line_addr,
                       out.evicted->dm, t},
                   t);

    k.ready_at = t;
    const PhysAddr line = cache_.geometry().line_address(tr.paddr);
    if (out.result == AccessResult::Miss ||
        (out.result == AccessResult::Bypass && kind == AccessKind::Read)) {
        count(k, steady, [](CoreCounters& cc) { ++cc.dram_fetches; });
        const auto token = submit(c, {c, AccessKind::Read, line, dm, t}, t);
        k.waiting_token = token;
        demand_tokens_.emplace(token, c);
    } else if (out.result == AccessResult::Bypass) {
        post_write(c, {c, AccessKind::Write, line, dm, t}, t);
    }
    try_resume(c, now);
}

void Simulator::step_core(CoreId c, Cycle now) {
    auto& k = cores_[c];
    k.step_pending = false;
    if (k.finished) return;
    const Trace& trace = k.setup->trace;
    if (k.idx >= trace.size() || trace[k.idx].kind == RecordKind::EndOfTask) {
        ++k.passes;
        if (k.setup->loop) {
            k.idx = 0;
        } else {
            k.finished = true;
            k.runtime = now;
            if (--measured_left_ == 0) {
                stop_ = true;
                end_time_ = now;
            }
            return;
        }
    }
    const std::size_t index = k.idx++;
    const TraceRecord rec = trace[index];
    const bool steady = k.records >= k.setup->warmup_records;
    ++k.records;

    if (rec.kind == RecordKind::Cleanup) {
        const auto cleared = cache_.dm_cleanup(c);
        count(k, steady, [&](CoreCounters& cc) {
            ++cc.cleanups;
            cc.dm_lines_cleared += cleared;
        });
        k.ready_at = now + cfg_.cleanup_latency;
        try_resume(c, now);
        return;
    }
    do_access(c, rec, index, steady, now);
}

SimReport Simulator::run() {
    for (CoreId c = 0; c < cores_.size(); ++c) try_resume(c, 0);
    if (cfg_.occupancy_interval > 0) schedule(cfg_.occupancy_interval, EventType::Sample);

    SimReport rep;
    rep.mode = cfg_.mode;
    while (!events_.empty() && !stop_) {
        const Event e = events_.top();
        if (cfg_.max_cycles && e.time > cfg_.max_cycles) {
            rep.hit_cycle_limit = true;
            end_time_ = cfg_.max_cycles;
            break;
        }
        events_.pop();
        end_time_ = e.time;
        switch (e.type) {
        case EventType::CoreStep: step_core(e.core, e.time); break;
        case EventType::DramWake:
            wakes_.erase(e.time);
            pump_dram(e.time);
            break;
        case EventType::DramDone:
            if (auto it = demand_tokens_.find(e.token); it != demand_tokens_.end()) {
                auto& k = cores_[it->second];
                k.waiting_token.reset();
                k.ready_at = std::max(k.ready_at, e.time);
                const CoreId c = it->second;
                demand_tokens_.erase(it);
                try_resume(c, e.time);
            }
            break;
        case EventType::Sample: {
            OccupancySample s;
            s.time = e.time;
            for (CoreId c = 0; c < cores_.size(); ++c)
                s.dm_occupancy.push_back(cache_.dm_occupancy(c));
            samples_.push_back(std::move(s));
            schedule(e.time + cfg_.occupancy_interval, EventType::Sample);
            break;
        }
        }
    }
    if (!stop_ && !rep.hit_cycle_limit && measured_left_ > 0)
        throw ModelError("simulation stalled with unfinished cores");

    rep.end_time = end_time_;
    rep.occupancy = std::move(samples_);
    rep.cache_lines = cache_.total_lines();
    rep.isolation_violations = cache_.stats().isolation_violations;
    rep.invariant_violations = cache_.stats().invariant_violations;
    rep.dram_log = dram_.log();
    for (CoreId c = 0; c < cores_.size(); ++c) {
        const auto& k = cores_[c];
        CoreReport r;
        r.core = c;
        r.name = k.setup->name.empty() ? "core" + std::to_string(c) : k.setup->name;
        r.measured = !k.setup->loop;
        r.finished = k.finished;
        r.runtime = k.finished ? k.runtime : end_time_;
        r.records = k.records;
        r.passes = k.passes;
        r.total = k.total;
        r.steady = k.steady;
        r.dram = dram_.stats()[c];
        r.dm_occupancy = cache_.dm_occupancy(c);
        r.lines_owned = cache_.lines_owned_by(c);
        r.pages = k.table.entries().size();
        for (const auto& [vp, e] : k.table.entries()) r.dm_pages += e.dm ? 1 : 0;
        r.page_l1_misses = k.page_misses;
        rep.cores.push_back(std::move(r));
    }
    return rep;
}

} // namespace

SimReport run(const SimConfig& cfg, const RunHooks& hooks) {
    cfg.validate();
    Simulator sim(cfg, hooks);
    return sim.run();
}

std::vector<RtaCounts> export_rta(const SimReport& report) {
    std::vector<RtaCounts> out;
    for (const auto& c : report.cores)
        out.push_back({c.core, c.total.l2_dm.misses, c.total.be_l1_misses});
    return out;
}

void write_rta_export(std::ostream& os, const std::vector<RtaCounts>& counts) {
    for (const auto& c : counts)
        os << "core=" << c.core << " dm_misses=" << c.dm_misses
           << " be_l1_misses=" << c.be_l1_misses << '\n';
}

std::vector<RtaCounts> read_rta_export(std::istream& is, const std::string& origin) {
    std::vector<RtaCounts> out;
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
        if (line.empty() || line[0] == '#') continue;
        RtaCounts rc;
        unsigned long long core = 0, dm = 0, bm = 0;
        char tail = 0;
        if (std::sscanf(line.c_str(), "core=%llu dm_misses=%llu be_l1_misses=%llu %c", &core,
                        &dm, &bm, &tail) != 3)
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": expected `core=<i> dm_misses=<n> be_l1_misses=<m>`");
        rc.core = static_cast<CoreId>(core);
        rc.dm_misses = dm;
        rc.be_l1_misses = bm;
        out.push_back(rc);
    }
    return out;
}

} // namespace dmsim
