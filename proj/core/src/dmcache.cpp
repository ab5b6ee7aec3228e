#include "dmsim/dmcache.hpp"

#include "dmsim/error.hpp"

#include <bit>
#include <sstream>

namespace dmsim {

std::string_view to_string(AccessResult r) {
    switch (r) {
    case AccessResult::Hit: return "hit";
    case AccessResult::Miss: return "miss";
    case AccessResult::Bypass: return "bypass";
    }
    return "?";
}

void CacheConfig::validate() const {
    if (assoc == 0 || assoc > kMaxWays)
        throw ValidationError("cache.assoc must be in [1, 64]");
    if (!is_pow2(line_size)) throw ValidationError("cache.line_size must be a power of two");
    if (size % (std::uint64_t{assoc} * line_size) != 0 || !is_pow2(num_sets()))
        throw ValidationError("cache.size must be assoc x line_size x (power-of-two sets)");
    if (part_mask.empty()) throw ValidationError("cache: at least one core partition required");
    const WayMask all = full_mask(assoc);
    WayMask seen = 0;
    for (std::size_t c = 0; c < part_mask.size(); ++c) {
        const WayMask m = part_mask[c];
        if (m == 0 || (m & ~all) != 0)
            throw ValidationError("cache.part_mask." + std::to_string(c) +
                                  " must be a non-empty subset of the ways");
        if (!allow_overlap && (seen & m) != 0)
            throw ValidationError("cache.part_mask." + std::to_string(c) +
                                  " overlaps another core's partition");
        seen |= m;
    }
}

CacheConfig CacheConfig::shared_l2(unsigned num_cores, unsigned ways_per_core) {
    CacheConfig cfg;
    for (unsigned c = 0; c < num_cores; ++c)
        cfg.part_mask.push_back(full_mask(ways_per_core) << (c * ways_per_core));
    return cfg;
}

WayMask det_mask(std::span<const CacheLine> set) {
    WayMask m = 0;
    for (std::size_t w = 0; w < set.size(); ++w)
        if (set[w].valid && set[w].dm) m |= WayMask{1} << w;
    return m;
}

std::optional<unsigned> lru_way(std::span<const CacheLine> set, WayMask candidates) {
    std::optional<unsigned> best;
    for (unsigned w = 0; w < set.size(); ++w) {
        if ((candidates >> w & 1) == 0) continue;
        if (!set[w].valid) return w;
        if (!best || set[w].recency > set[*best].recency) best = w;
    }
    return best;
}

std::optional<unsigned> select_victim(std::span<const CacheLine> set, WayMask part_mask,
                                      bool dm) {
    const WayMask ways = full_mask(static_cast<unsigned>(set.size()));
    const WayMask best_effort = ~det_mask(set) & ways;
    if (dm) {
        if ((part_mask & best_effort) != 0) return lru_way(set, part_mask & best_effort);
        return lru_way(set, part_mask & ways);
    }
    if (best_effort == 0) return std::nullopt;
    return lru_way(set, best_effort);
}

DmCache::DmCache(CacheConfig cfg, bool audit)
    : cfg_(std::move(cfg)), audit_(audit) {
    cfg_.validate();
    geom_ = cfg_.geometry();
    lines_.resize(geom_.num_sets * cfg_.assoc);
    stats_.per_core.resize(cfg_.num_cores());
}

std::span<const CacheLine> DmCache::set_lines(std::uint64_t set) const {
    return {lines_.data() + set * cfg_.assoc, cfg_.assoc};
}

std::span<CacheLine> DmCache::mutable_set(std::uint64_t set) {
    return {lines_.data() + set * cfg_.assoc, cfg_.assoc};
}

std::optional<unsigned> DmCache::select_victim_for(std::uint64_t set, CoreId core,
                                                   bool dm) const {
    return select_victim(set_lines(set), cfg_.part_mask.at(core), dm);
}

void DmCache::promote(std::span<CacheLine> set, unsigned way) {
    const unsigned old_rank = set[way].valid ? set[way].recency : kMaxWays;
    for (unsigned w = 0; w < set.size(); ++w)
        if (w != way && set[w].valid && set[w].recency < old_rank) ++set[w].recency;
    set[way].recency = 0;
}

const CacheLine* DmCache::find(PhysAddr paddr) const {
    const auto set = set_lines(geom_.set_index(paddr));
    const auto tag = geom_.tag(paddr);
    for (const auto& l : set)
        if (l.valid && l.tag == tag) return &l;
    return nullptr;
}

AccessOutcome DmCache::access(const MemoryRequest& req) {
    if (req.core >= cfg_.num_cores())
        throw ModelError("request from core " + std::to_string(req.core) +
                         " but the cache has " + std::to_string(cfg_.num_cores()) + " cores");
    const std::uint64_t set_idx = geom_.set_index(req.paddr);
    const std::uint64_t tag = geom_.tag(req.paddr);
    auto set = mutable_set(set_idx);
    auto& cs = stats_.per_core[req.core];
    auto& cls = req.dm ? cs.dm : cs.be;
    const WayMask part = cfg_.part_mask[req.core];
    const bool write = req.kind == AccessKind::Write;

    AccessOutcome out;
    for (unsigned w = 0; w < set.size(); ++w) {
        CacheLine& line = set[w];
        if (!line.valid || line.tag != tag) continue;
        ++cls.hits;
        promote(set, w);
        if (req.dm && (part >> w & 1)) {
            line.dm = true;
            line.owner = req.core;
        }
        line.dirty = line.dirty || write;
        out.result = AccessResult::Hit;
        out.latency = cfg_.hit_latency;
        out.way = w;
        if (audit_ && !check_set(set_idx, nullptr)) ++stats_.invariant_violations;
        return out;
    }

    const auto victim = select_victim(set, part, req.dm);
    out.latency = cfg_.hit_latency;
    if (!victim) {
        ++cls.bypasses;
        out.result = AccessResult::Bypass;
        return out;
    }
    ++cls.misses;
    CacheLine& line = set[*victim];
    if (line.valid) {
        out.evicted = Eviction{geom_.recompose(line.tag, set_idx, 0), line.dirty, line.dm,
                               line.owner};
        ++cs.evictions_caused;
        ++stats_.per_core[line.owner].evictions_suffered;
        if (audit_ && line.dm && line.owner != req.core) ++stats_.isolation_violations;
    }
    promote(set, *victim);
    line.valid = true;
    line.tag = tag;
    line.dirty = write;
    line.dm = req.dm;
    line.owner = req.core;
    out.result = AccessResult::Miss;
    out.way = *victim;
    if (audit_ && !check_set(set_idx, nullptr)) ++stats_.invariant_violations;
    return out;
}

std::uint64_t DmCache::dm_cleanup(CoreId core) {
    const WayMask part = cfg_.part_mask.at(core);
    std::uint64_t cleared = 0;
    for (std::uint64_t s = 0; s < geom_.num_sets; ++s) {
        auto set = mutable_set(s);
        for (unsigned w = 0; w < set.size(); ++w) {
            if ((part >> w & 1) && set[w].valid && set[w].dm) {
                set[w].dm = false;
                ++cleared;
            }
        }
    }
    stats_.per_core[core].dm_lines_cleared += cleared;
    ++stats_.per_core[core].cleanups;
    return cleared;
}

std::uint64_t DmCache::dm_lines_in_partition(CoreId core) const {
    const WayMask part = cfg_.part_mask.at(core);
    std::uint64_t n = 0;
    for (std::uint64_t s = 0; s < geom_.num_sets; ++s)
        n += static_cast<std::uint64_t>(std::popcount(det_mask_of(s) & part));
    return n;
}

double DmCache::dm_occupancy(CoreId core) const {
    const auto capacity =
        geom_.num_sets * static_cast<std::uint64_t>(std::popcount(cfg_.part_mask.at(core)));
    return static_cast<double>(dm_lines_in_partition(core)) / static_cast<double>(capacity);
}

std::uint64_t DmCache::lines_owned_by(CoreId core) const {
    std::uint64_t n = 0;
    for (const auto& l : lines_) n += (l.valid && l.owner == core) ? 1 : 0;
    return n;
}

std::uint64_t DmCache::valid_lines() const {
    std::uint64_t n = 0;
    for (const auto& l : lines_) n += l.valid ? 1 : 0;
    return n;
}

bool DmCache::check_set(std::uint64_t s, std::string* why) const {
    const auto set = set_lines(s);
    std::uint64_t seen = 0;
    unsigned valid = 0;
    for (unsigned w = 0; w < set.size(); ++w) {
        const auto& l = set[w];
        if (!l.valid) continue;
        ++valid;
        if (l.recency >= set.size() || (seen >> l.recency & 1)) {
            if (why) *why = "set " + std::to_string(s) + ": recency is not a permutation";
            return false;
        }
        seen |= std::uint64_t{1} << l.recency;
        if (!l.dm) continue;
        if ((cfg_.part_mask[l.owner] >> w & 1) == 0) {
            if (why)
                *why = "set " + std::to_string(s) + " way " + std::to_string(w) +
                       ": DM line outside its owner's partition";
            return false;
        }
        if (!cfg_.allow_overlap) {
            for (CoreId c = 0; c < cfg_.num_cores(); ++c) {
                if (c != l.owner && (cfg_.part_mask[c] >> w & 1)) {
                    if (why) *why = "set " + std::to_string(s) + ": DM way shared by two cores";
                    return false;
                }
            }
        }
    }
    if (seen != full_mask(valid)) {
        if (why) *why = "set " + std::to_string(s) + ": recency ranks are not 0..n-1";
        return false;
    }
    return true;
}

bool DmCache::check_invariants(std::string* why) const {
    for (std::uint64_t s = 0; s < geom_.num_sets; ++s)
        if (!check_set(s, why)) return false;
    return true;
}

PrivateCache::PrivateCache(std::uint64_t size, unsigned assoc, std::uint64_t line_size,
                           Cycle hit_latency)
    : inner_([&] {
          CacheConfig c;
          c.size = size;
          c.assoc = assoc;
          c.line_size = line_size;
          c.hit_latency = hit_latency;
          c.part_mask = {full_mask(assoc)};
          return c;
      }()) {}

PrivateCache::Result PrivateCache::access(PhysAddr paddr, AccessKind kind) {
    const auto out = inner_.access({0, kind, paddr, false, 0});
    Result r;
    r.hit = out.result == AccessResult::Hit;
    if (out.evicted && out.evicted->dirty) r.writeback = out.evicted->line_addr;
    return r;
}

} // namespace dmsim
