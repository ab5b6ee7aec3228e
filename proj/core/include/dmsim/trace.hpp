#pragma once

#include "dmsim/core_model.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dmsim {

enum class RecordKind : std::uint8_t { Read, Write, Cleanup, EndOfTask };

struct TraceRecord {
    RecordKind kind = RecordKind::Read;
    VirtAddr vaddr = 0; // unused for Cleanup / EndOfTask

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

// Text format: header `trace v1 <num_records>`, then one of
// `R <hex>`, `W <hex>`, `CLEANUP`, `END` per line.
void write_trace(std::ostream& os, const Trace& trace);
Trace read_trace(std::istream& is, const std::string& origin = "<trace>");
Trace load_trace(const std::string& path);
void save_trace(const std::string& path, const Trace& trace);

enum class TraceKind : std::uint8_t { BandwidthWrite, BandwidthRead, Sequential, Random };

std::string_view to_string(TraceKind k);
TraceKind parse_trace_kind(std::string_view s);

struct GenParams {
    TraceKind kind = TraceKind::Sequential;
    std::uint64_t working_set = 4096; // bytes
    std::uint64_t iterations = 1;
    std::uint64_t stride = 0; // bytes; 0 = line size
    std::uint64_t seed = 0;
    std::uint64_t line_size = 64;
    VirtAddr base = 0;
};

// Synthetic IsolBench-style access streams. Bandwidth and sequential kinds
// sweep the working set at `stride`; random draws line addresses from a
// seeded generator. Every trace ends with END.
Trace gen_trace(const GenParams& p);

// Distinct virtual pages in first-touch order.
std::vector<PageNumber> footprint_pages(const Trace& trace, std::uint64_t page_size);

} // namespace dmsim
