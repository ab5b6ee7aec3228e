#pragma once

#include "dmsim/dmcache.hpp"

#include <algorithm>
#include <list>

namespace view {

// Tags of the valid lines in `mask`, most recently used first.
inline std::list<std::uint64_t> tags_by_recency(const dmsim::DmCache& c, std::uint64_t set,
                                                dmsim::WayMask mask) {
    std::vector<const dmsim::CacheLine*> lines;
    const auto s = c.set_lines(set);
    for (unsigned w = 0; w < s.size(); ++w)
        if ((mask >> w & 1) && s[w].valid) lines.push_back(&s[w]);
    std::sort(lines.begin(), lines.end(),
              [](auto* a, auto* b) { return a->recency < b->recency; });
    std::list<std::uint64_t> out;
    for (auto* l : lines) out.push_back(l->tag);
    return out;
}

} // namespace view
