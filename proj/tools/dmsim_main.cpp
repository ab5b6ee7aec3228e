#include "dmsim/config.hpp"
#include "dmsim/dmlru.hpp"
#include "dmsim/engine.hpp"
#include "dmsim/error.hpp"
#include "dmsim/rta.hpp"
#include "dmsim/trace.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace dmsim;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitModel = 3;

// Writes to `path`, or stdout for "" and "-".
template <class F> void emit(const std::string& path, F&& writer) {
    if (path.empty() || path == "-") {
        writer(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    writer(out);
}

struct GenArgs {
    std::string kind = "sequential";
    std::uint64_t ws = 4096;
    std::uint64_t iters = 1;
    std::uint64_t stride = 0;
    std::uint64_t seed = 0;
    std::uint64_t base = 0;
    std::uint64_t line = 64;
    std::string out;
};

void cmd_gen(const GenArgs& a) {
    GenParams p;
    p.kind = parse_trace_kind(a.kind);
    p.working_set = a.ws;
    p.iterations = a.iters;
    p.stride = a.stride;
    p.seed = a.seed;
    p.base = a.base;
    p.line_size = a.line;
    const auto t = gen_trace(p);
    emit(a.out, [&](std::ostream& os) { write_trace(os, t); });
}

struct SimArgs {
    std::vector<std::string> configs;
    std::string out = "dmsim_out";
    unsigned jobs = 1;
    std::string baseline;
};

void cmd_sim(const SimArgs& a) {
    // Validate everything before running anything.
    std::vector<SimConfig> cfgs;
    for (const auto& c : a.configs) cfgs.push_back(load_sim_config(c));
    std::map<std::string, Cycle> baseline;
    if (!a.baseline.empty()) baseline = load_baseline_runtimes(a.baseline);
    const auto* base = a.baseline.empty() ? nullptr : &baseline;

    auto dir_for = [&](std::size_t i) {
        return a.configs.size() == 1 ? fs::path(a.out)
                                     : fs::path(a.out) / fs::path(a.configs[i]).stem();
    };
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < cfgs.size();) {
            try {
                const auto rep = run(cfgs[i]);
                write_run_outputs(dir_for(i), cfgs[i], rep, a.configs[i], base);
                std::lock_guard lock(mu);
                std::cout << a.configs[i] << " -> " << dir_for(i).string() << '\n';
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(cfgs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct AnalyzeArgs {
    std::string cfg;
    std::string variant = "strict";
    std::string guard = "emended";
    bool persistence = false;
    std::string out;
};

void cmd_analyze(const AnalyzeArgs& a) {
    using namespace dmlru;
    AnalysisOptions o;
    o.ub = parse_ub_variant(a.variant);
    if (a.guard == "emended") o.guard = DGuard::Emended;
    else if (a.guard == "literal") o.guard = DGuard::Literal;
    else throw ValidationError("--guard must be emended or literal, got '" + a.guard + "'");
    o.persistence = a.persistence;
    const auto prog = load_cfg(a.cfg);
    const auto r = must_analysis(prog, o);
    emit(a.out, [&](std::ostream& os) { write_classification_csv(os, prog, r); });
}

struct RtaArgs {
    std::string taskset;
    std::string counts;
    bool deadline_monotonic = false;
    std::string out;
};

void cmd_rta(const RtaArgs& a) {
    auto ts = rta::load_taskset(a.taskset);
    if (!a.counts.empty()) {
        std::ifstream in(a.counts);
        if (!in) throw ValidationError("cannot open counts file '" + a.counts + "'");
        std::map<CoreId, RtaCounts> by_core;
        for (const auto& c : read_rta_export(in, a.counts)) by_core[c.core] = c;
        for (auto& t : ts.tasks) {
            if (!t.core) continue;
            const auto it = by_core.find(*t.core);
            if (it == by_core.end())
                throw ValidationError(a.taskset + ": task " + t.name + " names core " +
                                      std::to_string(*t.core) + ", absent from " + a.counts);
            t.dm = it->second.dm_misses;
            t.bm = it->second.be_l1_misses;
        }
    }
    if (a.deadline_monotonic) rta::assign_deadline_monotonic(ts.tasks);
    if (const auto w = ts.platform.warning(); !w.empty()) std::cerr << "warning: " << w << '\n';
    const auto results = rta::response_times(ts.tasks, ts.platform);
    emit(a.out, [&](std::ostream& os) { rta::write_results_csv(os, results); });
}

struct ReportArgs {
    std::vector<std::string> summaries;
    bool plot_data = false;
    std::string out;
};

void cmd_report(const ReportArgs& a) {
    if (!a.plot_data) throw ValidationError("report: nothing to do (use --plot-data)");
    std::vector<fs::path> paths;
    for (const auto& s : a.summaries) {
        const fs::path p(s);
        paths.push_back(fs::is_directory(p) ? p / "summary.txt" : p);
    }
    emit(a.out, [&](std::ostream& os) { write_plot_data(os, paths); });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic-memory multicore simulator and analysis toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic trace");
    g->add_option("--kind", gen.kind, "bandwidth_write | bandwidth_read | sequential | random");
    g->add_option("--ws", gen.ws, "Working set in bytes");
    g->add_option("--iters", gen.iters, "Passes over the working set");
    g->add_option("--stride", gen.stride, "Stride in bytes (default: line size)");
    g->add_option("--seed", gen.seed, "Seed for the random kind");
    g->add_option("--base", gen.base, "Base virtual address");
    g->add_option("--line-size", gen.line, "Cache line size");
    g->add_option("-o,--output", gen.out, "Output file (default stdout)");

    SimArgs sim;
    auto* s = app.add_subcommand("sim", "Run one or more experiment configs");
    s->add_option("configs", sim.configs, "Config files")->required();
    s->add_option("--out", sim.out, "Output directory (one subdirectory per config if several)");
    s->add_option("-j,--jobs", sim.jobs, "Parallel simulations");
    s->add_option("--baseline", sim.baseline, "summary.txt of solo runs, for slowdown");

    AnalyzeArgs an;
    auto* a = app.add_subcommand("analyze", "Classify CFG accesses with DM-LRU must analysis");
    a->add_option("cfg", an.cfg, "CFG file")->required();
    a->add_option("--variant", an.variant, "Best-effort update: literal | strict");
    a->add_option("--guard", an.guard, "Deterministic-region growth guard: emended | literal");
    a->add_flag("--persistence", an.persistence, "Classify persistent accesses in loops");
    a->add_option("-o,--output", an.out, "Output CSV (default stdout)");

    RtaArgs rt;
    auto* r = app.add_subcommand("rta", "Response-time analysis of a task set");
    r->add_option("taskset", rt.taskset, "Task-set file")->required();
    r->add_option("--counts", rt.counts, "rta_export.txt from a simulation");
    r->add_flag("--deadline-monotonic", rt.deadline_monotonic, "Reassign priorities by deadline");
    r->add_option("-o,--output", rt.out, "Output CSV (default stdout)");

    ReportArgs rep;
    auto* p = app.add_subcommand("report", "Post-process simulation outputs");
    p->add_option("summaries", rep.summaries, "summary.txt files or run directories")->required();
    p->add_flag("--plot-data", rep.plot_data, "Emit tidy CSV for plotting");
    p->add_option("-o,--output", rep.out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*g) cmd_gen(gen);
        else if (*s) cmd_sim(sim);
        else if (*a) cmd_analyze(an);
        else if (*r) cmd_rta(rt);
        else if (*p) cmd_report(rep);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitModel;
    }
    return 0;
}
