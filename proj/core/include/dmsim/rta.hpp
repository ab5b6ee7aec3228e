#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dmsim::rta {

using Cycles = std::uint64_t;

struct TaskParams {
    std::string name;
    Cycles C = 0;
    Cycles T = 0;
    Cycles D = 0;
    std::uint64_t dm = 0; // DM_i
    std::uint64_t bm = 0; // BM_i
    int priority = 0;     // smaller is higher
    std::optional<unsigned> core; // counts imported from this core's export

    void validate() const;
};

struct PlatformParams {
    Cycles rd_dm = 0;
    Cycles rd_bm = 0;

    // Empty when rd_dm <= rd_bm, else a warning text.
    std::string warning() const;
};

Cycles interference(const TaskParams& t, const PlatformParams& p);

struct TaskResult {
    std::string name;
    Cycles R = 0;
    bool schedulable = false;
    std::uint64_t iterations = 0;
};

struct RtaOptions {
    std::uint64_t max_iterations = 1'000'000;
};

// Tasks in any order; hp(i) is every task with a smaller priority value.
// Results come back in priority order.
std::vector<TaskResult> response_times(std::vector<TaskParams> tasks, const PlatformParams& p,
                                       const RtaOptions& opts = {});

// Reassigns priorities 0, 1, ... by deadline, ties by period then name.
void assign_deadline_monotonic(std::vector<TaskParams>& tasks);

struct TaskSet {
    std::vector<TaskParams> tasks;
    PlatformParams platform;
};

// `name C T D dm bm prio [core=<i>]` per task, `platform rd_dm rd_bm` once.
TaskSet parse_taskset(std::istream& in, const std::string& origin = "<taskset>");
TaskSet load_taskset(const std::string& path);

// `name,R,schedulable,iters`
void write_results_csv(std::ostream& os, const std::vector<TaskResult>& results);

} // namespace dmsim::rta
