#include "dmsim/trace.hpp"

#include "dmsim/error.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace dmsim {

void write_trace(std::ostream& os, const Trace& trace) {
    os << "trace v1 " << trace.size() << '\n';
    for (const auto& r : trace) {
        switch (r.kind) {
        case RecordKind::Read: os << "R 0x" << std::hex << r.vaddr << std::dec << '\n'; break;
        case RecordKind::Write: os << "W 0x" << std::hex << r.vaddr << std::dec << '\n'; break;
        case RecordKind::Cleanup: os << "CLEANUP\n"; break;
        case RecordKind::EndOfTask: os << "END\n"; break;
        }
    }
}

Trace read_trace(std::istream& is, const std::string& origin) {
    std::string line;
    std::string magic, version;
    std::uint64_t count = 0;
    if (!std::getline(is, line)) throw ValidationError(origin + ": empty trace");
    {
        std::istringstream hs(line);
        if (!(hs >> magic >> version >> count) || magic != "trace" || version != "v1")
            throw ValidationError(origin + ":1: expected header `trace v1 <num_records>`");
    }
    Trace trace;
    trace.reserve(count);
    for (std::uint64_t lineno = 2; std::getline(is, line); ++lineno) {
        std::istringstream ls(line);
        std::string op;
        if (!(ls >> op)) continue;
        const auto where = origin + ":" + std::to_string(lineno);
        TraceRecord rec;
        if (op == "R" || op == "W") {
            rec.kind = op == "R" ? RecordKind::Read : RecordKind::Write;
            std::string addr;
            if (!(ls >> addr)) throw ValidationError(where + ": missing address");
            try {
                std::size_t used = 0;
                rec.vaddr = std::stoull(addr, &used, 16);
                if (used != addr.size()) throw std::invalid_argument(addr);
            } catch (const std::exception&) {
                throw ValidationError(where + ": bad hex address '" + addr + "'");
            }
        } else if (op == "CLEANUP") {
            rec.kind = RecordKind::Cleanup;
        } else if (op == "END") {
            rec.kind = RecordKind::EndOfTask;
        } else {
            throw ValidationError(where + ": unknown record '" + op + "'");
        }
        trace.push_back(rec);
    }
    if (trace.size() != count)
        throw ValidationError(origin + ": header announces " + std::to_string(count) +
                              " records, found " + std::to_string(trace.size()));
    return trace;
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open trace '" + path + "'");
    return read_trace(in, path);
}

void save_trace(const std::string& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write trace '" + path + "'");
    write_trace(out, trace);
}

std::string_view to_string(TraceKind k) {
    switch (k) {
    case TraceKind::BandwidthWrite: return "bandwidth_write";
    case TraceKind::BandwidthRead: return "bandwidth_read";
    case TraceKind::Sequential: return "sequential";
    case TraceKind::Random: return "random";
    }
    return "?";
}

TraceKind parse_trace_kind(std::string_view s) {
    for (auto k : {TraceKind::BandwidthWrite, TraceKind::BandwidthRead, TraceKind::Sequential,
                   TraceKind::Random})
        if (s == to_string(k)) return k;
    throw ValidationError("unknown trace kind '" + std::string(s) + "'");
}

Trace gen_trace(const GenParams& p) {
    if (!is_pow2(p.line_size)) throw ValidationError("line size must be a power of two");
    if (p.working_set == 0 || p.working_set % p.line_size != 0)
        throw ValidationError("working set (" + std::to_string(p.working_set) +
                              ") must be a non-zero multiple of the line size (" +
                              std::to_string(p.line_size) + ")");
    const std::uint64_t stride = p.stride ? p.stride : p.line_size;
    if (stride > p.working_set)
        throw ValidationError("stride exceeds the working set");
    if (p.iterations == 0) throw ValidationError("iterations must be >= 1");

    Trace t;
    if (p.kind == TraceKind::Random) {
        const std::uint64_t lines = p.working_set / p.line_size;
        std::mt19937_64 rng(p.seed);
        t.reserve(lines * p.iterations + 1);
        for (std::uint64_t i = 0; i < lines * p.iterations; ++i)
            t.push_back({RecordKind::Read, p.base + (rng() % lines) * p.line_size});
    } else {
        const auto kind =
            p.kind == TraceKind::BandwidthWrite ? RecordKind::Write : RecordKind::Read;
        const std::uint64_t per_pass = (p.working_set + stride - 1) / stride;
        t.reserve(per_pass * p.iterations + 1);
        for (std::uint64_t it = 0; it < p.iterations; ++it)
            for (std::uint64_t off = 0; off < p.working_set; off += stride)
                t.push_back({kind, p.base + off});
    }
    t.push_back({RecordKind::EndOfTask, 0});
    return t;
}

std::vector<PageNumber> footprint_pages(const Trace& trace, std::uint64_t page_size) {
    const auto shift = log2_exact(page_size);
    std::vector<PageNumber> pages;
    std::unordered_set<PageNumber> seen;
    for (const auto& r : trace) {
        if (r.kind != RecordKind::Read && r.kind != RecordKind::Write) continue;
        const PageNumber p = r.vaddr >> shift;
        if (seen.insert(p).second) pages.push_back(p);
    }
    return pages;
}

} // namespace dmsim
