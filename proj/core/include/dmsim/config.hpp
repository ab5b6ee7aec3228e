#pragma once

#include "dmsim/engine.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dmsim {

// INI experiment description. Sections: [system], [cache], [l1], [dram],
// [banks], [core0] ... [coreN]. Relative paths resolve against `base_dir`.
// See README for the key list.
SimConfig parse_sim_config(std::istream& in, const std::filesystem::path& base_dir,
                           const std::string& origin = "<config>");
SimConfig load_sim_config(const std::filesystem::path& path);

// Pages covering `fraction` of the profiled L1 misses, hottest first,
// merged into ranges.
DmRegionSet regions_covering(const std::map<PageNumber, std::uint64_t>& page_misses,
                             double fraction);

// page_l1_misses.csv rows for one core.
std::map<PageNumber, std::uint64_t> load_page_profile(const std::filesystem::path& path,
                                                       CoreId core);

struct OutputFile {
    std::string name;
    std::uint32_t crc32 = 0;
    std::uint64_t bytes = 0;
};

struct RunManifest {
    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    SimMode mode = SimMode::DM;
    std::vector<OutputFile> files;
};

// Runtime per core name, read from a summary.txt.
std::map<std::string, Cycle> load_baseline_runtimes(const std::filesystem::path& summary);

void write_summary(std::ostream& os, const SimReport& rep,
                   const std::map<std::string, Cycle>* baseline = nullptr);
// core,name,scope,class,hits,misses,bypasses,hit_rate
void write_counters_csv(std::ostream& os, const SimReport& rep);
// time,core,dm_occupancy
void write_occupancy_csv(std::ostream& os, const SimReport& rep);
// core,vpage,l1_misses
void write_page_profile_csv(std::ostream& os, const SimReport& rep);

// Writes every report file into `dir` and returns the manifest (also written).
RunManifest write_run_outputs(const std::filesystem::path& dir, const SimConfig& cfg,
                              const SimReport& rep, const std::string& config_path,
                              const std::map<std::string, Cycle>* baseline = nullptr);

std::uint32_t crc32_of(const std::string& bytes);

// Tidy CSV `run,mode,core,name,metric,value` from one or more summary files.
void write_plot_data(std::ostream& os, const std::vector<std::filesystem::path>& summaries);

} // namespace dmsim
