#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dmsim::dmlru {

using Block = std::string;

// Must-analysis state for a fully-associative DM-LRU cache. A block absent
// from `ages` has age infinity. Ages below `d` are the deterministic region.
struct AbstractState {
    unsigned assoc = 4;
    unsigned d = 0;
    std::map<Block, unsigned> ages;

    std::optional<unsigned> age(const Block& b) const;
    unsigned b_size() const { return assoc - d; }
    bool well_formed() const;

    // `[{a,b}],[{c},{d},{e,f}]`: one brace group per age, deterministic
    // ages first. D = 0 prints as `[]`.
    std::string to_string() const;
    static AbstractState parse(std::string_view text);
    static AbstractState top(unsigned assoc) { return AbstractState{assoc, 0, {}}; }

    friend bool operator==(const AbstractState&, const AbstractState&) = default;
};

enum class UbVariant : std::uint8_t {
    Literal, // ages every younger block, deterministic ones included
    Strict,  // deterministic blocks saturate inside the deterministic region
};

enum class DGuard : std::uint8_t {
    Emended, // D grows while D < A
    Literal, // D grows while D < A-1, otherwise holds
};

std::string_view to_string(UbVariant v);
UbVariant parse_ub_variant(std::string_view s);

// With `keep_regions` every best-effort block is lifted to age >= D', so an
// age below D always means a deterministic line. The strict U_B relies on it.
AbstractState update_d(const AbstractState& q, const Block& a, DGuard guard = DGuard::Emended,
                       bool keep_regions = false);
AbstractState update_b(const AbstractState& q, const Block& a,
                       UbVariant variant = UbVariant::Literal);
// Context switch: every deterministic line becomes best-effort.
AbstractState clear_dm(const AbstractState& q);
AbstractState join(const AbstractState& q1, const AbstractState& q2, bool keep_regions = false);
// q1 is at least as precise as q2 (pointwise age <= and D <=).
bool less_equal(const AbstractState& q1, const AbstractState& q2);

struct Access {
    Block block; // empty for the clear pseudo-access
    bool dm = false;
    bool clear = false;

    friend bool operator==(const Access&, const Access&) = default;
};

struct CfgNode {
    std::string id;
    std::vector<Access> accesses;
};

struct CfgProgram {
    unsigned assoc = 4;
    std::size_t entry = 0;
    std::vector<CfgNode> nodes;
    std::vector<std::set<std::size_t>> succ;
    std::set<std::pair<std::size_t, std::size_t>> backedges;

    std::size_t index_of(const std::string& id) const;
    std::size_t add_node(std::string id, std::vector<Access> accesses);
    void add_edge(std::size_t from, std::size_t to, bool backedge = false);
    std::set<Block> blocks() const;

    // Edges in range, every node reachable from the entry, and every backedge
    // target dominating its source.
    void validate() const;
};

// `assoc <A>`, `entry <id>`, `node <id>: <blk>[!] ... [@clear]`,
// `edge <from> <to>`, `backedge <from> <to>`. `#` starts a comment.
CfgProgram parse_cfg(std::istream& in, const std::string& origin = "<cfg>");
CfgProgram load_cfg(const std::string& path);
void write_cfg(std::ostream& os, const CfgProgram& prog);

struct Loop {
    std::size_t header = 0;
    std::set<std::size_t> body; // includes the header
};

// Natural loops of the marked backedges, merged per header.
std::vector<Loop> find_loops(const CfgProgram& prog);

enum class SiteClass : std::uint8_t { AlwaysHit, Persistent, Unclassified };

std::string_view to_string(SiteClass c);

struct AnalysisOptions {
    UbVariant ub = UbVariant::Literal;
    DGuard guard = DGuard::Emended;
    bool persistence = false;
};

struct SiteResult {
    std::size_t node = 0;
    std::size_t index = 0; // position in the node's access list
    Block block;
    bool dm = false;
    SiteClass cls = SiteClass::Unclassified;
    AbstractState in; // state before the access, all contexts joined
};

struct AnalysisResult {
    std::vector<SiteResult> sites;
    std::vector<std::optional<AbstractState>> node_in;
    std::size_t iterations = 0;
};

AnalysisResult must_analysis(const CfgProgram& prog, const AnalysisOptions& opts = {});

// `node,index,block,dm,class`
void write_classification_csv(std::ostream& os, const CfgProgram& prog,
                              const AnalysisResult& result);

struct OracleSite {
    std::uint64_t visits = 0;
    bool all_hit = true;
    std::uint64_t steady_visits = 0;
    bool steady_all_hit = true; // visits with every enclosing loop past its first iteration
};

struct OracleLimits {
    std::size_t max_depth = 12;
    std::size_t max_blocks = 8;
    std::uint64_t max_paths = 50'000'000;
};

// Concrete DM-LRU age of every cached block: deterministic lines by
// recency, then best-effort lines by recency.
using ConcreteAges = std::map<Block, unsigned>;
struct OracleVisit {
    std::size_t site = 0;
    const ConcreteAges* before = nullptr;
    bool hit = false;
    bool steady = false;
};

// Brute force over every path of at most `max_depth` nodes from the entry,
// starting from an empty cache. Sites are indexed as in must_analysis.
std::vector<OracleSite>
concrete_oracle(const CfgProgram& prog, const OracleLimits& limits = {},
                const std::function<void(const OracleVisit&)>& observe = {});

} // namespace dmsim::dmlru
