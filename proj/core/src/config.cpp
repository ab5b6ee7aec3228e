#include "dmsim/config.hpp"

#include "dmsim/error.hpp"

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

namespace dmsim {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

// One INI section; every key must be consumed or load fails.
class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::string str(const std::string& key, const std::string& def) {
        const auto* v = find(key);
        if (!v) return def;
        used_.insert(key);
        return *v;
    }

    std::string str(const std::string& key) {
        if (!has(key)) throw ValidationError(field(key) + " is required");
        return str(key, "");
    }

    std::uint64_t u64(const std::string& key, std::uint64_t def) {
        if (!has(key)) return def;
        const auto s = str(key, "");
        try {
            std::size_t used = 0;
            if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
            const auto v = std::stoull(s, &used, 0);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ValidationError(field(key) + ": expected a non-negative integer, got '" + s +
                                  "'");
        }
    }

    double real(const std::string& key, double def) {
        if (!has(key)) return def;
        const auto s = str(key, "");
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ValidationError(field(key) + ": expected a number, got '" + s + "'");
        }
    }

    bool flag(const std::string& key, bool def) {
        if (!has(key)) return def;
        const auto s = str(key, "");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ValidationError(field(key) + ": expected true or false, got '" + s + "'");
    }

    std::set<unsigned> list(const std::string& key) {
        std::set<unsigned> out;
        if (!has(key)) return out;
        std::stringstream ss(str(key, ""));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok.erase(0, tok.find_first_not_of(' '));
            tok.erase(tok.find_last_not_of(' ') + 1);
            if (tok.empty()) continue;
            try {
                std::size_t used = 0;
                out.insert(static_cast<unsigned>(std::stoul(tok, &used, 0)));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ValidationError(field(key) + ": bad list entry '" + tok + "'");
            }
        }
        return out;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        if (tree_)
            for (const auto& kv : *tree_) out.push_back(kv.first);
        return out;
    }

    void finish() const {
        if (!tree_) return;
        for (const auto& kv : *tree_)
            if (!used_.count(kv.first)) throw ValidationError(field(kv.first) + ": unknown key");
    }

    std::string field(const std::string& key) const { return name_ + "." + key; }

private:
    const std::string* find(const std::string& key) const {
        if (!tree_) return nullptr;
        for (const auto& kv : *tree_)
            if (kv.first == key) return &kv.second.data();
        return nullptr;
    }

    std::string name_;
    const pt::ptree* tree_;
    std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

template <class F> auto prefixed(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(field + ": " + e.what());
    }
}

} // namespace

SimConfig parse_sim_config(std::istream& in, const fs::path& base_dir, const std::string& origin) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(origin + ": " + e.message() + " (line " +
                              std::to_string(e.line()) + ")");
    }
    auto section = [&](const std::string& name) {
        const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
        return Section(name, child ? &*child : nullptr);
    };

    static const std::regex core_re("core([0-9]+)");
    std::set<std::string> known{"system", "cache", "l1", "dram", "banks"};
    std::map<unsigned, std::string> core_sections;
    for (const auto& kv : tree) {
        std::smatch m;
        if (std::regex_match(kv.first, m, core_re))
            core_sections[static_cast<unsigned>(std::stoul(m[1]))] = kv.first;
        else if (!known.count(kv.first))
            throw ValidationError(origin + ": unknown section [" + kv.first + "]");
    }
    if (core_sections.empty()) throw ValidationError(origin + ": no [coreN] sections");
    const auto ncores = static_cast<unsigned>(core_sections.size());
    if (core_sections.rbegin()->first != ncores - 1)
        throw ValidationError(origin + ": core sections must be numbered core0..core" +
                              std::to_string(ncores - 1));

    SimConfig cfg;
    auto sys = section("system");
    cfg.mode = prefixed("system.mode", [&] { return parse_sim_mode(sys.str("mode", "DM")); });
    cfg.seed = sys.u64("seed", 0);
    cfg.max_cycles = sys.u64("max_cycles", 0);
    cfg.cleanup_latency = sys.u64("cleanup_latency", cfg.cleanup_latency);
    cfg.occupancy_interval = sys.u64("occupancy_interval", 0);
    cfg.audit = sys.flag("audit", false);
    cfg.dram_log = sys.flag("dram_log", false);
    cfg.page_size = sys.u64("page_size", cfg.page_size);
    sys.finish();

    auto cache = section("cache");
    cfg.cache.size = cache.u64("size", cfg.cache.size);
    cfg.cache.assoc = static_cast<unsigned>(cache.u64("assoc", cfg.cache.assoc));
    cfg.cache.line_size = cache.u64("line_size", cfg.cache.line_size);
    cfg.cache.hit_latency = cache.u64("hit_latency", cfg.cache.hit_latency);
    cfg.cache.allow_overlap = cache.flag("allow_overlap", false);
    cfg.cache.part_mask.clear();
    bool any_mask = false;
    for (unsigned c = 0; c < ncores; ++c) any_mask = any_mask || cache.has("mask" + std::to_string(c));
    if (any_mask) {
        for (unsigned c = 0; c < ncores; ++c) {
            const auto key = "mask" + std::to_string(c);
            if (!cache.has(key)) throw ValidationError(cache.field(key) + " is required");
            cfg.cache.part_mask.push_back(cache.u64(key, 0));
        }
    } else {
        const auto per = cache.u64("ways_per_core", cfg.cache.assoc / ncores);
        if (per == 0 || per * ncores > cfg.cache.assoc)
            throw ValidationError(cache.field("ways_per_core") + ": " + std::to_string(ncores) +
                                  " cores x " + std::to_string(per) + " ways exceed assoc " +
                                  std::to_string(cfg.cache.assoc));
        for (unsigned c = 0; c < ncores; ++c)
            cfg.cache.part_mask.push_back(full_mask(static_cast<unsigned>(per)) << (c * per));
    }
    cache.finish();

    auto l1 = section("l1");
    cfg.l1.enabled = l1.flag("enabled", l1.has("size"));
    cfg.l1.size = l1.u64("size", cfg.l1.size);
    cfg.l1.assoc = static_cast<unsigned>(l1.u64("assoc", cfg.l1.assoc));
    cfg.l1.hit_latency = l1.u64("hit_latency", cfg.l1.hit_latency);
    l1.finish();

    auto dram = section("dram");
    cfg.dram.num_banks = static_cast<unsigned>(dram.u64("banks", cfg.dram.num_banks));
    cfg.dram.rows_per_bank = dram.u64("rows_per_bank", cfg.dram.rows_per_bank);
    cfg.dram.t_row_hit = dram.u64("t_row_hit", cfg.dram.t_row_hit);
    cfg.dram.t_row_miss = dram.u64("t_row_miss", cfg.dram.t_row_miss);
    cfg.dram.t_bus = dram.u64("t_bus", cfg.dram.t_bus);
    cfg.dram.dm_cap = static_cast<unsigned>(dram.u64("dm_cap", cfg.dram.dm_cap));
    cfg.dram.queue_capacity = dram.u64("queue_capacity", cfg.dram.queue_capacity);
    cfg.dram.scheduler = prefixed("dram.scheduler", [&] {
        return parse_dram_scheduler(dram.str("scheduler", "two_level"));
    });
    dram.finish();

    auto banks = section("banks");
    cfg.allocation = prefixed("banks.policy", [&] {
        return parse_bank_allocation(banks.str("policy", "partitioned"));
    });
    cfg.bank_granule_pages = banks.u64("granule_pages", 1);
    bool explicit_banks = banks.has("shared");
    for (unsigned c = 0; c < ncores; ++c) explicit_banks = explicit_banks || banks.has("private" + std::to_string(c));
    if (explicit_banks) {
        cfg.banks.shared_banks = banks.list("shared");
        for (unsigned c = 0; c < ncores; ++c) {
            const auto key = "private" + std::to_string(c);
            if (banks.has(key)) cfg.banks.private_banks[c] = banks.list(key);
        }
    } else if (ncores < cfg.dram.num_banks) {
        // Top `ncores` banks private, one per core; the rest shared.
        const unsigned first_private = cfg.dram.num_banks - ncores;
        for (unsigned b = 0; b < first_private; ++b) cfg.banks.shared_banks.insert(b);
        for (unsigned c = 0; c < ncores; ++c) cfg.banks.private_banks[c] = {first_private + c};
    }
    banks.finish();

    for (unsigned c = 0; c < ncores; ++c) {
        auto sec = section(core_sections.at(c));
        CoreSetup core;
        core.name = sec.str("name", "core" + std::to_string(c));
        if (sec.has("trace")) {
            const auto path = resolve(base_dir, sec.str("trace"));
            core.trace = prefixed(sec.field("trace"), [&] { return load_trace(path.string()); });
        } else if (sec.has("kind")) {
            GenParams g;
            g.kind = prefixed(sec.field("kind"), [&] { return parse_trace_kind(sec.str("kind")); });
            g.working_set = sec.u64("ws", g.working_set);
            g.iterations = sec.u64("iterations", g.iterations);
            g.stride = sec.u64("stride", 0);
            g.seed = sec.u64("seed", cfg.seed + c);
            g.base = sec.u64("base", 0);
            g.line_size = cfg.cache.line_size;
            core.trace = prefixed(sec.field("kind"), [&] { return gen_trace(g); });
        } else {
            throw ValidationError(sec.field("trace") + " (or an inline `kind`) is required");
        }
        const bool dm_all = sec.flag("dm_all", false);
        const bool has_regions = sec.has("regions");
        const bool has_profile = sec.has("dm_profile");
        if (int(dm_all) + int(has_regions) + int(has_profile) > 1)
            throw ValidationError(sec.field("regions") +
                                  ": give at most one of regions, dm_all, dm_profile");
        if (dm_all) core.regions = DmRegionSet::all();
        if (has_regions) {
            const auto path = resolve(base_dir, sec.str("regions"));
            core.regions =
                prefixed(sec.field("regions"), [&] { return load_region_file(path.string()); });
        }
        if (has_profile) {
            const auto path = resolve(base_dir, sec.str("dm_profile"));
            const double cov = sec.real("dm_coverage", 0.98);
            if (!(cov > 0.0 && cov <= 1.0))
                throw ValidationError(sec.field("dm_coverage") + ": must be in (0, 1]");
            const auto pcore = static_cast<CoreId>(sec.u64("dm_profile_core", c));
            core.regions = prefixed(sec.field("dm_profile"), [&] {
                return regions_covering(load_page_profile(path, pcore), cov);
            });
        }
        core.loop = sec.flag("loop", false);
        core.warmup_records = sec.u64("warmup_records", 0);
        core.think = sec.u64("think", 0);
        sec.finish();
        cfg.cores.push_back(std::move(core));
    }

    cfg.validate();
    return cfg;
}

SimConfig load_sim_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    return parse_sim_config(in, path.parent_path(), path.string());
}

DmRegionSet regions_covering(const std::map<PageNumber, std::uint64_t>& page_misses,
                             double fraction) {
    std::vector<std::pair<PageNumber, std::uint64_t>> pages(page_misses.begin(),
                                                            page_misses.end());
    std::stable_sort(pages.begin(), pages.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::uint64_t total = 0;
    for (const auto& p : pages) total += p.second;
    std::set<PageNumber> chosen;
    std::uint64_t covered = 0;
    for (const auto& [page, misses] : pages) {
        if (static_cast<double>(covered) >= fraction * static_cast<double>(total)) break;
        chosen.insert(page);
        covered += misses;
    }
    std::vector<DmRegionSet::Range> ranges;
    for (auto p : chosen) {
        if (!ranges.empty() && ranges.back().second == p) ranges.back().second = p + 1;
        else ranges.emplace_back(p, p + 1);
    }
    return DmRegionSet(std::move(ranges));
}

std::map<PageNumber, std::uint64_t> load_page_profile(const fs::path& path, CoreId core) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open page profile '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line != "core,vpage,l1_misses")
        throw ValidationError(path.string() + ": expected header core,vpage,l1_misses");
    std::map<PageNumber, std::uint64_t> out;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        unsigned long long c = 0, page = 0, misses = 0;
        if (std::sscanf(line.c_str(), "%llu,%llx,%llu", &c, &page, &misses) != 3)
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad row");
        if (c == core) out[page] += misses;
    }
    return out;
}

std::map<std::string, Cycle> load_baseline_runtimes(const fs::path& summary) {
    pt::ptree tree;
    try {
        pt::read_ini(summary.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError("baseline '" + summary.string() + "': " + e.message());
    }
    std::map<std::string, Cycle> out;
    for (const auto& [sec, body] : tree) {
        if (sec.rfind("core", 0) != 0) continue;
        const auto name = body.get_optional<std::string>("name");
        const auto rt = body.get_optional<Cycle>("runtime");
        if (name && rt) out[*name] = *rt;
    }
    return out;
}

namespace {

std::string fixed(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

} // namespace

void write_summary(std::ostream& os, const SimReport& rep,
                   const std::map<std::string, Cycle>* baseline) {
    os << "[run]\n"
       << "mode = " << to_string(rep.mode) << '\n'
       << "end_time = " << rep.end_time << '\n'
       << "hit_cycle_limit = " << (rep.hit_cycle_limit ? 1 : 0) << '\n'
       << "cache_lines = " << rep.cache_lines << '\n'
       << "isolation_violations = " << rep.isolation_violations << '\n'
       << "invariant_violations = " << rep.invariant_violations << '\n';
    for (const auto& c : rep.cores) {
        const auto& t = c.total;
        const auto& s = c.steady;
        os << "\n[core" << c.core << "]\n"
           << "name = " << c.name << '\n'
           << "measured = " << (c.measured ? 1 : 0) << '\n'
           << "finished = " << (c.finished ? 1 : 0) << '\n'
           << "runtime = " << c.runtime << '\n'
           << "records = " << c.records << '\n'
           << "passes = " << c.passes << '\n'
           << "accesses = " << t.accesses << '\n'
           << "l1_hits = " << t.l1_hits << '\n'
           << "l1_misses = " << t.l1_misses << '\n'
           << "l2_accesses = " << t.l2().accesses() << '\n'
           << "l2_hits = " << t.l2().hits << '\n'
           << "l2_misses = " << t.l2().misses << '\n'
           << "l2_bypasses = " << t.l2().bypasses << '\n'
           << "l2_hit_rate = " << fixed(t.l2().hit_rate()) << '\n'
           << "dm_accesses = " << t.l2_dm.accesses() << '\n'
           << "dm_hit_rate = " << fixed(t.l2_dm.hit_rate()) << '\n'
           << "be_accesses = " << t.l2_be.accesses() << '\n'
           << "be_hit_rate = " << fixed(t.l2_be.hit_rate()) << '\n'
           << "steady_l2_accesses = " << s.l2().accesses() << '\n'
           << "steady_l2_hit_rate = " << fixed(s.l2().hit_rate()) << '\n'
           << "steady_dm_hit_rate = " << fixed(s.l2_dm.hit_rate()) << '\n'
           << "steady_be_hit_rate = " << fixed(s.l2_be.hit_rate()) << '\n'
           << "be_l1_misses = " << t.be_l1_misses << '\n'
           << "dram_fetches = " << t.dram_fetches << '\n'
           << "dram_writes = " << t.dram_writes << '\n'
           << "dram_row_hits = " << c.dram.row_hits << '\n'
           << "dram_queue_wait = " << c.dram.queue_wait << '\n'
           << "cleanups = " << t.cleanups << '\n'
           << "dm_lines_cleared = " << t.dm_lines_cleared << '\n'
           << "dm_occupancy = " << fixed(c.dm_occupancy) << '\n'
           << "lines_owned = " << c.lines_owned << '\n'
           << "cache_share = "
           << fixed(rep.cache_lines ? static_cast<double>(c.lines_owned) /
                                          static_cast<double>(rep.cache_lines)
                                    : 0.0)
           << '\n'
           << "pages = " << c.pages << '\n'
           << "dm_pages = " << c.dm_pages << '\n';
        if (baseline && c.measured) {
            const auto it = baseline->find(c.name);
            if (it != baseline->end() && it->second > 0)
                os << "slowdown = "
                   << fixed(static_cast<double>(c.runtime) / static_cast<double>(it->second))
                   << '\n';
        }
    }
}

void write_counters_csv(std::ostream& os, const SimReport& rep) {
    os << "core,name,scope,class,hits,misses,bypasses,hit_rate\n";
    for (const auto& c : rep.cores) {
        for (const auto& [scope, cc] : {std::pair<const char*, const CoreCounters*>{"total", &c.total},
                                        {"steady", &c.steady}}) {
            for (const auto& [cls, k] : {std::pair<const char*, ClassCounters>{"dm", cc->l2_dm},
                                         {"be", cc->l2_be},
                                         {"all", cc->l2()}})
                os << c.core << ',' << c.name << ',' << scope << ',' << cls << ',' << k.hits << ','
                   << k.misses << ',' << k.bypasses << ',' << fixed(k.hit_rate()) << '\n';
        }
    }
}

void write_occupancy_csv(std::ostream& os, const SimReport& rep) {
    os << "time,core,dm_occupancy\n";
    for (const auto& s : rep.occupancy)
        for (std::size_t c = 0; c < s.dm_occupancy.size(); ++c)
            os << s.time << ',' << c << ',' << fixed(s.dm_occupancy[c]) << '\n';
}

void write_page_profile_csv(std::ostream& os, const SimReport& rep) {
    os << "core,vpage,l1_misses\n";
    for (const auto& c : rep.cores)
        for (const auto& [page, n] : c.page_l1_misses)
            os << c.core << ",0x" << std::hex << page << std::dec << ',' << n << '\n';
}

std::uint32_t crc32_of(const std::string& bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

RunManifest write_run_outputs(const fs::path& dir, const SimConfig& cfg, const SimReport& rep,
                              const std::string& config_path,
                              const std::map<std::string, Cycle>* baseline) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "'");

    RunManifest m{config_path, dir.string(), cfg.seed, cfg.mode, {}};
    auto emit = [&](const std::string& name, auto&& writer) {
        std::ostringstream os;
        writer(os);
        const std::string bytes = os.str();
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw ValidationError("cannot write '" + (dir / name).string() + "'");
        out << bytes;
        m.files.push_back({name, crc32_of(bytes), bytes.size()});
    };
    emit("summary.txt", [&](std::ostream& os) { write_summary(os, rep, baseline); });
    emit("counters.csv", [&](std::ostream& os) { write_counters_csv(os, rep); });
    emit("rta_export.txt", [&](std::ostream& os) { write_rta_export(os, export_rta(rep)); });
    emit("page_l1_misses.csv", [&](std::ostream& os) { write_page_profile_csv(os, rep); });
    if (cfg.occupancy_interval > 0)
        emit("occupancy.csv", [&](std::ostream& os) { write_occupancy_csv(os, rep); });
    if (cfg.dram_log)
        emit("dram_schedule.csv",
             [&](std::ostream& os) { write_schedule_log_csv(os, rep.dram_log); });

    std::ofstream out(dir / "manifest.txt");
    if (!out) throw ValidationError("cannot write manifest in '" + dir.string() + "'");
    out << "config = " << m.config_path << '\n'
        << "output_dir = " << m.output_dir << '\n'
        << "seed = " << m.seed << '\n'
        << "mode = " << to_string(m.mode) << '\n';
    for (const auto& f : m.files) {
        char crc[9];
        std::snprintf(crc, sizeof crc, "%08x", f.crc32);
        out << "file " << f.name << " crc32=" << crc << " bytes=" << f.bytes << '\n';
    }
    return m;
}

void write_plot_data(std::ostream& os, const std::vector<fs::path>& summaries) {
    os << "run,mode,core,name,metric,value\n";
    for (const auto& path : summaries) {
        pt::ptree tree;
        try {
            pt::read_ini(path.string(), tree);
        } catch (const pt::ini_parser_error& e) {
            throw ValidationError("'" + path.string() + "': " + e.message());
        }
        const auto run = path.parent_path().filename().string();
        const auto mode = tree.get<std::string>("run.mode", "?");
        for (const auto& [sec, body] : tree) {
            if (sec.rfind("core", 0) != 0) continue;
            const auto name = body.get<std::string>("name", sec);
            for (const auto& [key, val] : body) {
                if (key == "name") continue;
                os << run << ',' << mode << ',' << sec.substr(4) << ',' << name << ',' << key
                   << ',' << val.data() << '\n';
            }
        }
    }
}

} // namespace dmsim
