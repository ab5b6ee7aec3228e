#pragma once

#include "dmsim/dmlru.hpp"
#include "dmsim/error.hpp"

#include <random>
#include <string>

namespace gen {

struct CfgShape {
    unsigned max_nodes = 6;
    unsigned max_blocks = 8;
    unsigned max_accesses_per_node = 3;
    unsigned assoc = 4;
    double dm_prob = 0.4;
    double clear_prob = 0.0;
    double branch_prob = 0.35;
    double loop_prob = 0.5;
};

// Forward chain with random forward branches and random loops. Backedges are
// only kept when they close a natural loop.
inline dmsim::dmlru::CfgProgram random_cfg(std::mt19937_64& rng, const CfgShape& shape) {
    using namespace dmsim::dmlru;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const unsigned n = 1 + static_cast<unsigned>(rng() % shape.max_nodes);
    const unsigned nblocks = 1 + static_cast<unsigned>(rng() % shape.max_blocks);

    CfgProgram p;
    p.assoc = shape.assoc;
    for (unsigned i = 0; i < n; ++i) {
        std::vector<Access> acc;
        const unsigned k = 1 + static_cast<unsigned>(rng() % shape.max_accesses_per_node);
        for (unsigned j = 0; j < k; ++j) {
            if (coin(rng) < shape.clear_prob) {
                acc.push_back({"", false, true});
                continue;
            }
            const auto b = std::string(1, static_cast<char>('a' + rng() % nblocks));
            acc.push_back({b, coin(rng) < shape.dm_prob, false});
        }
        p.add_node("n" + std::to_string(i), std::move(acc));
    }
    p.entry = 0;
    for (unsigned i = 0; i + 1 < n; ++i) {
        p.add_edge(i, i + 1);
        if (i + 2 < n && coin(rng) < shape.branch_prob)
            p.add_edge(i, i + 2 + static_cast<unsigned>(rng() % (n - i - 2)));
    }
    for (unsigned tries = 0; tries < 2; ++tries) {
        if (coin(rng) >= shape.loop_prob) continue;
        const unsigned to = static_cast<unsigned>(rng() % n);
        const unsigned from = to + static_cast<unsigned>(rng() % (n - to));
        if (p.succ[from].count(to)) continue;
        CfgProgram trial = p;
        trial.add_edge(from, to, true);
        try {
            trial.validate();
            p = std::move(trial);
        } catch (const dmsim::ValidationError&) {
        }
    }
    return p;
}

} // namespace gen
