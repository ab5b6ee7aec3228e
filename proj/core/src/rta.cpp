#include "dmsim/rta.hpp"

#include "dmsim/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace dmsim::rta {

void TaskParams::validate() const {
    const auto who = "task '" + name + "': ";
    if (C == 0) throw ValidationError(who + "C must be > 0");
    if (D == 0 || D > T) throw ValidationError(who + "need 0 < D <= T");
}

std::string PlatformParams::warning() const {
    if (rd_dm <= rd_bm) return {};
    return "rd_dm (" + std::to_string(rd_dm) + ") exceeds rd_bm (" + std::to_string(rd_bm) +
           "); the deterministic bound is expected to be the tighter one";
}

Cycles interference(const TaskParams& t, const PlatformParams& p) {
    return t.dm * p.rd_dm + t.bm * p.rd_bm;
}

std::vector<TaskResult> response_times(std::vector<TaskParams> tasks, const PlatformParams& p,
                                       const RtaOptions& opts) {
    std::set<int> prios;
    for (const auto& t : tasks) {
        t.validate();
        if (!prios.insert(t.priority).second)
            throw ValidationError("priority " + std::to_string(t.priority) + " used twice");
    }
    std::sort(tasks.begin(), tasks.end(),
              [](const TaskParams& a, const TaskParams& b) { return a.priority < b.priority; });

    std::vector<TaskResult> out;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& ti = tasks[i];
        const Cycles base = ti.C + interference(ti, p);
        TaskResult r{ti.name, base, false, 0};
        Cycles R = base;
        for (;;) {
            if (R > ti.D) break;
            if (++r.iterations > opts.max_iterations)
                throw ModelError("task '" + ti.name + "': recurrence did not converge within " +
                                 std::to_string(opts.max_iterations) + " iterations");
            Cycles next = base;
            for (std::size_t j = 0; j < i; ++j) {
                const auto& tj = tasks[j];
                next += (R + tj.T - 1) / tj.T * (tj.C + interference(tj, p));
            }
            if (next == R) {
                r.schedulable = true;
                break;
            }
            R = next;
        }
        r.R = R;
        out.push_back(r);
    }
    return out;
}

void assign_deadline_monotonic(std::vector<TaskParams>& tasks) {
    std::vector<std::size_t> order(tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = tasks[a];
        const auto& y = tasks[b];
        if (x.D != y.D) return x.D < y.D;
        if (x.T != y.T) return x.T < y.T;
        return x.name < y.name;
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        tasks[order[rank]].priority = static_cast<int>(rank);
}

TaskSet parse_taskset(std::istream& in, const std::string& origin) {
    TaskSet ts;
    bool have_platform = false;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        const auto where = origin + ":" + std::to_string(lineno) + ": ";
        std::string extra;
        if (head == "platform") {
            if (have_platform) throw ValidationError(where + "platform given twice");
            if (!(ls >> ts.platform.rd_dm >> ts.platform.rd_bm) || (ls >> extra))
                throw ValidationError(where + "expected `platform <rd_dm> <rd_bm>`");
            have_platform = true;
            continue;
        }
        TaskParams t;
        t.name = head;
        if (!(ls >> t.C >> t.T >> t.D >> t.dm >> t.bm >> t.priority))
            throw ValidationError(where + "expected `name C T D dm bm prio [core=<i>]`");
        if (ls >> extra) {
            unsigned core = 0;
            char tail = 0;
            if (std::sscanf(extra.c_str(), "core=%u%c", &core, &tail) != 1)
                throw ValidationError(where + "unexpected token '" + extra + "'");
            t.core = core;
            if (ls >> extra) throw ValidationError(where + "unexpected token '" + extra + "'");
        }
        try {
            t.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
        ts.tasks.push_back(t);
    }
    if (!have_platform) throw ValidationError(origin + ": missing `platform <rd_dm> <rd_bm>`");
    return ts;
}

TaskSet load_taskset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open task set '" + path + "'");
    return parse_taskset(in, path);
}

void write_results_csv(std::ostream& os, const std::vector<TaskResult>& results) {
    os << "name,R,schedulable,iters\n";
    for (const auto& r : results)
        os << r.name << ',' << r.R << ',' << (r.schedulable ? 1 : 0) << ',' << r.iterations
           << '\n';
}

} // namespace dmsim::rta
