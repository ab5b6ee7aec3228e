#pragma once

#include "dmsim/core_model.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dmsim {

enum class DramScheduler : std::uint8_t {
    TwoLevel, // DM first (round-robin across cores), BE by FR-FCFS, DM streak capped
    FrFcfs,   // one FR-FCFS queue for everything; the DM flag is ignored
};

std::string_view to_string(DramScheduler s);
DramScheduler parse_dram_scheduler(std::string_view s);

struct DramConfig {
    unsigned num_banks = 8;
    std::uint64_t rows_per_bank = 8192;
    Cycle t_row_hit = 30;
    Cycle t_row_miss = 90;
    Cycle t_bus = 16;
    unsigned dm_cap = 30;
    std::size_t queue_capacity = 64; // per class
    DramScheduler scheduler = DramScheduler::TwoLevel;

    void validate() const;
};

// A request as held by the controller. `token` is opaque to the controller.
struct DramRequest {
    MemoryRequest req;
    std::uint64_t token = 0;
    unsigned bank = 0;
    std::uint64_t row = 0;
    Cycle arrival = 0;
    std::uint64_t seq = 0; // arrival order, assigned by enqueue
};

struct BankState {
    std::optional<std::uint64_t> open_row;
    Cycle busy_until = 0;

    bool busy(Cycle now) const { return busy_until > now; }
};

struct SchedulerState {
    std::vector<std::deque<DramRequest>> dm_queues; // one FIFO per core
    std::deque<DramRequest> be_queue;               // arrival order
    CoreId rr_pointer = 0;
    unsigned consec_dm = 0;
    std::uint64_t next_seq = 0;

    explicit SchedulerState(unsigned num_cores = 1) : dm_queues(num_cores) {}

    std::size_t dm_pending() const;
    bool empty() const { return be_queue.empty() && dm_pending() == 0; }
};

// Appends to the class queue. False means the queue is full (back-pressure).
bool enqueue(const DramRequest& req, SchedulerState& sched, const DramConfig& cfg);

// Picks the next request to issue, or nullopt. Removes it from its queue
// and updates the round-robin pointer and DM streak counter.
std::optional<DramRequest> schedule_next(SchedulerState& sched, std::span<const BankState> banks,
                                         Cycle now, const DramConfig& cfg);

struct BusState {
    Cycle free_at = 0;
};

struct ServiceResult {
    Cycle start = 0;
    Cycle completion = 0;
    bool row_hit = false;
};

// Open-row timing plus one shared data bus.
ServiceResult service(const DramRequest& req, std::span<BankState> banks, BusState& bus,
                      const DramConfig& cfg, Cycle now);

struct ScheduleLogEntry {
    Cycle grant_time = 0;
    bool dm = false;
    CoreId core = 0;
    unsigned bank = 0;
    bool row_hit = false;
    Cycle queue_wait = 0;
    Cycle completion = 0;
    // Queue state just before the grant; used by the scheduling audits.
    bool be_pending = false;
    std::uint64_t dm_backlog = 0; // bit c set iff core c had queued DM work
    std::uint64_t dm_head_busy = 0; // bit c set iff core c's oldest DM request hit a busy bank
    unsigned consec_dm_before = 0;
};

// `grant_time,class,core,bank,row_hit,queue_wait`
void write_schedule_log_csv(std::ostream& os, std::span<const ScheduleLogEntry> log);

struct DramCoreStats {
    std::uint64_t dm_requests = 0;
    std::uint64_t be_requests = 0;
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t row_hits = 0;
    Cycle queue_wait = 0;
};

class DramController {
public:
    struct Grant {
        DramRequest request;
        Cycle completion = 0;
    };

    DramController(DramConfig cfg, AddressMap map, unsigned num_cores, bool keep_log = false);

    // Builds the controller-side view (bank, row) of a memory request.
    DramRequest make_request(const MemoryRequest& req, std::uint64_t token, Cycle now) const;

    bool enqueue(const DramRequest& req);
    bool can_accept(bool dm) const;

    // Issues everything that can be issued at `now`.
    std::vector<Grant> tick(Cycle now);

    // Earliest future time at which a queued request's bank frees up.
    std::optional<Cycle> next_wake(Cycle now) const;

    bool idle() const { return sched_.empty(); }
    const DramConfig& config() const { return cfg_; }
    const SchedulerState& scheduler() const { return sched_; }
    std::span<const BankState> banks() const { return banks_; }
    const std::vector<ScheduleLogEntry>& log() const { return log_; }
    const std::vector<DramCoreStats>& stats() const { return stats_; }

private:
    bool routes_to_dm(const MemoryRequest& req) const;

    DramConfig cfg_;
    AddressMap map_;
    SchedulerState sched_;
    std::vector<BankState> banks_;
    BusState bus_;
    std::vector<DramCoreStats> stats_;
    std::vector<ScheduleLogEntry> log_;
    bool keep_log_;
};

} // namespace dmsim
