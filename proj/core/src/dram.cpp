#include "dmsim/dram.hpp"

#include "dmsim/error.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace dmsim {

std::string_view to_string(DramScheduler s) {
    return s == DramScheduler::TwoLevel ? "two_level" : "fr_fcfs";
}

DramScheduler parse_dram_scheduler(std::string_view s) {
    if (s == "two_level") return DramScheduler::TwoLevel;
    if (s == "fr_fcfs") return DramScheduler::FrFcfs;
    throw ValidationError("dram.scheduler must be two_level or fr_fcfs, got '" + std::string(s) +
                          "'");
}

void DramConfig::validate() const {
    if (!(t_row_hit > 0 && t_row_miss > t_row_hit))
        throw ValidationError("dram: need t_row_miss > t_row_hit > 0");
    if (dm_cap < 1) throw ValidationError("dram.dm_cap must be >= 1");
    if (queue_capacity < 1) throw ValidationError("dram.queue_capacity must be >= 1");
    if (!is_pow2(num_banks)) throw ValidationError("dram.banks must be a power of two");
}

std::size_t SchedulerState::dm_pending() const {
    std::size_t n = 0;
    for (const auto& q : dm_queues) n += q.size();
    return n;
}

bool enqueue(const DramRequest& req, SchedulerState& sched, const DramConfig& cfg) {
    const bool to_dm = req.req.dm && cfg.scheduler == DramScheduler::TwoLevel;
    if (to_dm) {
        if (sched.dm_pending() >= cfg.queue_capacity) return false;
        if (req.req.core >= sched.dm_queues.size())
            throw ModelError("DRAM request from unknown core " + std::to_string(req.req.core));
        auto r = req;
        r.seq = sched.next_seq++;
        sched.dm_queues[req.req.core].push_back(r);
        return true;
    }
    if (sched.be_queue.size() >= cfg.queue_capacity) return false;
    auto r = req;
    r.seq = sched.next_seq++;
    sched.be_queue.push_back(r);
    return true;
}

std::optional<DramRequest> schedule_next(SchedulerState& sched, std::span<const BankState> banks,
                                         Cycle now, const DramConfig& cfg) {
    const bool be_pending = !sched.be_queue.empty();
    const auto n = static_cast<CoreId>(sched.dm_queues.size());

    if (sched.dm_pending() > 0 && (!be_pending || sched.consec_dm < cfg.dm_cap)) {
        std::optional<CoreId> pick;
        std::optional<CoreId> first_nonempty;
        for (CoreId i = 0; i < n; ++i) {
            const CoreId c = (sched.rr_pointer + i) % n;
            const auto& q = sched.dm_queues[c];
            if (q.empty()) continue;
            if (!first_nonempty) first_nonempty = c;
            if (!banks[q.front().bank].busy(now)) {
                pick = c;
                break;
            }
        }
        const CoreId c = pick ? *pick : *first_nonempty;
        DramRequest r = sched.dm_queues[c].front();
        sched.dm_queues[c].pop_front();
        sched.rr_pointer = (c + 1) % n;
        sched.consec_dm = be_pending ? sched.consec_dm + 1 : 0;
        return r;
    }

    if (be_pending) {
        auto best = sched.be_queue.end();
        bool best_hit = false;
        for (auto it = sched.be_queue.begin(); it != sched.be_queue.end(); ++it) {
            const auto& bank = banks[it->bank];
            if (bank.busy(now)) continue;
            const bool hit = bank.open_row && *bank.open_row == it->row;
            // Queue is in arrival order, so the first hit (or first ready) is the oldest.
            if (best == sched.be_queue.end() || (hit && !best_hit)) {
                best = it;
                best_hit = hit;
                if (hit) break;
            }
        }
        if (best == sched.be_queue.end()) return std::nullopt;
        DramRequest r = *best;
        sched.be_queue.erase(best);
        sched.consec_dm = 0;
        return r;
    }
    return std::nullopt;
}

ServiceResult service(const DramRequest& req, std::span<BankState> banks, BusState& bus,
                      const DramConfig& cfg, Cycle now) {
    BankState& bank = banks[req.bank];
    ServiceResult out;
    out.start = std::max(now, bank.busy_until);
    out.row_hit = bank.open_row && *bank.open_row == req.row;
    const Cycle ready = out.start + (out.row_hit ? cfg.t_row_hit : cfg.t_row_miss);
    bank.open_row = req.row;
    bank.busy_until = ready;
    out.completion = std::max(ready, bus.free_at) + cfg.t_bus;
    bus.free_at = out.completion;
    return out;
}

void write_schedule_log_csv(std::ostream& os, std::span<const ScheduleLogEntry> log) {
    os << "grant_time,class,core,bank,row_hit,queue_wait\n";
    for (const auto& e : log)
        os << e.grant_time << ',' << (e.dm ? "dm" : "be") << ',' << e.core << ',' << e.bank << ','
           << (e.row_hit ? 1 : 0) << ',' << e.queue_wait << '\n';
}

DramController::DramController(DramConfig cfg, AddressMap map, unsigned num_cores, bool keep_log)
    : cfg_(cfg), map_(std::move(map)), sched_(num_cores), banks_(cfg.num_banks),
      stats_(num_cores), keep_log_(keep_log) {
    cfg_.validate();
    if (map_.memory().num_banks != cfg_.num_banks)
        throw ValidationError("dram.banks disagrees with the address map");
}

DramRequest DramController::make_request(const MemoryRequest& req, std::uint64_t token,
                                         Cycle now) const {
    if (!map_.contains(req.paddr))
        throw ModelError("physical address beyond configured memory");
    DramRequest r;
    r.req = req;
    r.token = token;
    const PageNumber page = map_.page_of(req.paddr);
    r.bank = map_.bank_of_page(page);
    // One row buffer per page.
    r.row = page;
    r.arrival = now;
    return r;
}

bool DramController::routes_to_dm(const MemoryRequest& req) const {
    return req.dm && cfg_.scheduler == DramScheduler::TwoLevel;
}

bool DramController::can_accept(bool dm) const {
    if (dm && cfg_.scheduler == DramScheduler::TwoLevel)
        return sched_.dm_pending() < cfg_.queue_capacity;
    return sched_.be_queue.size() < cfg_.queue_capacity;
}

bool DramController::enqueue(const DramRequest& req) {
    return dmsim::enqueue(req, sched_, cfg_);
}

std::vector<DramController::Grant> DramController::tick(Cycle now) {
    std::vector<Grant> grants;
    for (;;) {
        ScheduleLogEntry entry;
        entry.be_pending = !sched_.be_queue.empty();
        entry.consec_dm_before = sched_.consec_dm;
        for (CoreId c = 0; c < sched_.dm_queues.size(); ++c)
            if (!sched_.dm_queues[c].empty()) {
                entry.dm_backlog |= std::uint64_t{1} << c;
                if (banks_[sched_.dm_queues[c].front().bank].busy(now))
                    entry.dm_head_busy |= std::uint64_t{1} << c;
            }

        auto r = schedule_next(sched_, banks_, now, cfg_);
        if (!r) break;
        const auto res = service(*r, banks_, bus_, cfg_, now);

        auto& st = stats_[r->req.core];
        (routes_to_dm(r->req) ? st.dm_requests : st.be_requests)++;
        (r->req.kind == AccessKind::Read ? st.reads : st.writes)++;
        st.row_hits += res.row_hit ? 1 : 0;
        st.queue_wait += now - r->arrival;

        if (keep_log_) {
            entry.grant_time = now;
            entry.dm = routes_to_dm(r->req);
            entry.core = r->req.core;
            entry.bank = r->bank;
            entry.row_hit = res.row_hit;
            entry.queue_wait = now - r->arrival;
            entry.completion = res.completion;
            log_.push_back(entry);
        }
        grants.push_back({*r, res.completion});
    }
    return grants;
}

std::optional<Cycle> DramController::next_wake(Cycle now) const {
    std::optional<Cycle> wake;
    auto consider = [&](const DramRequest& r) {
        const Cycle t = banks_[r.bank].busy_until;
        if (t > now && (!wake || t < *wake)) wake = t;
    };
    for (const auto& q : sched_.dm_queues)
        for (const auto& r : q) consider(r);
    for (const auto& r : sched_.be_queue) consider(r);
    return wake;
}

} // namespace dmsim
