#include "dmsim/dmlru.hpp"

#include "dmsim/dmcache.hpp"
#include "dmsim/error.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dmsim::dmlru {

std::optional<unsigned> AbstractState::age(const Block& b) const {
    const auto it = ages.find(b);
    if (it == ages.end()) return std::nullopt;
    return it->second;
}

bool AbstractState::well_formed() const {
    if (d > assoc) return false;
    return std::all_of(ages.begin(), ages.end(), [&](const auto& kv) { return kv.second < assoc; });
}

std::string AbstractState::to_string() const {
    std::vector<std::vector<Block>> by_age(assoc);
    for (const auto& [b, a] : ages) by_age[a].push_back(b);
    std::string out;
    auto group = [&](unsigned lo, unsigned hi) {
        out += '[';
        for (unsigned a = lo; a < hi; ++a) {
            if (a != lo) out += ',';
            out += '{';
            for (std::size_t i = 0; i < by_age[a].size(); ++i) {
                if (i) out += ',';
                out += by_age[a][i];
            }
            out += '}';
        }
        out += ']';
    };
    group(0, d);
    out += ',';
    group(d, assoc);
    return out;
}

AbstractState AbstractState::parse(std::string_view text) {
    auto fail = [&](const std::string& why) {
        return ValidationError("abstract state '" + std::string(text) + "': " + why);
    };
    std::vector<std::vector<std::vector<Block>>> regions;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < text.size() && text[i] == ' ') ++i;
    };
    auto expect = [&](char c) {
        skip_ws();
        if (i >= text.size() || text[i] != c) throw fail(std::string("expected '") + c + "'");
        ++i;
    };
    for (int r = 0; r < 2; ++r) {
        if (r == 1) expect(',');
        expect('[');
        regions.emplace_back();
        skip_ws();
        if (i < text.size() && text[i] == ']') {
            ++i;
            continue;
        }
        for (;;) {
            expect('{');
            std::vector<Block> blocks;
            std::string cur;
            for (; i < text.size() && text[i] != '}'; ++i) {
                if (text[i] == ',') {
                    if (cur.empty()) throw fail("empty block name");
                    blocks.push_back(cur);
                    cur.clear();
                } else if (text[i] != ' ') {
                    cur += text[i];
                }
            }
            if (!cur.empty()) blocks.push_back(cur);
            expect('}');
            regions.back().push_back(std::move(blocks));
            skip_ws();
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            expect(']');
            break;
        }
    }
    skip_ws();
    if (i != text.size()) throw fail("trailing characters");
    AbstractState q;
    q.d = static_cast<unsigned>(regions[0].size());
    q.assoc = static_cast<unsigned>(regions[0].size() + regions[1].size());
    if (q.assoc == 0) throw fail("associativity must be positive");
    unsigned age = 0;
    for (const auto& region : regions)
        for (const auto& blocks : region) {
            for (const auto& b : blocks)
                if (!q.ages.emplace(b, age).second) throw fail("block '" + b + "' listed twice");
            ++age;
        }
    return q;
}

std::string_view to_string(UbVariant v) { return v == UbVariant::Literal ? "literal" : "strict"; }

UbVariant parse_ub_variant(std::string_view s) {
    if (s == "literal") return UbVariant::Literal;
    if (s == "strict") return UbVariant::Strict;
    throw ValidationError("variant must be literal or strict, got '" + std::string(s) + "'");
}

namespace {

constexpr unsigned kInf = ~0u;

unsigned age_or_inf(const AbstractState& q, const Block& b) {
    const auto it = q.ages.find(b);
    return it == q.ages.end() ? kInf : it->second;
}

} // namespace

AbstractState update_d(const AbstractState& q, const Block& a, DGuard guard, bool keep_regions) {
    const unsigned A = q.assoc;
    const unsigned D = q.d;
    const unsigned qa = age_or_inf(q, a);
    const unsigned limit = guard == DGuard::Emended ? A : A - 1;
    const unsigned Dn = (D < limit && qa >= D) ? D + 1 : D;

    AbstractState out{A, Dn, {}};
    for (const auto& [b, qb] : q.ages) {
        if (b == a) continue;
        unsigned nb = kInf;
        if (qb < D) {
            if (qb >= qa) nb = qb;
            else if (qb + 1 < Dn) nb = qb + 1;
        } else {
            if (qa < D || qb >= qa) nb = qb;
            else if (qb + 1 < A) nb = qb + 1;
            if (keep_regions && nb < Dn) nb = Dn < A ? Dn : kInf;
        }
        if (nb != kInf) out.ages.emplace(b, nb);
    }
    out.ages[a] = 0;
    return out;
}

AbstractState update_b(const AbstractState& q, const Block& a, UbVariant variant) {
    const unsigned A = q.assoc;
    const unsigned D = q.d;
    const unsigned qa = age_or_inf(q, a);

    AbstractState out{A, D, {}};
    for (const auto& [b, qb] : q.ages) {
        if (b == a) continue;
        unsigned nb = kInf;
        if (qb >= qa) nb = qb;
        else if (variant == UbVariant::Strict && qb < D) nb = std::min(qb + 1, D - 1);
        else if (qb + 1 < A) nb = qb + 1;
        if (nb != kInf) out.ages.emplace(b, nb);
    }
    // With no best-effort way the access bypasses.
    if (D < A) out.ages[a] = D;
    return out;
}

AbstractState clear_dm(const AbstractState& q) {
    AbstractState out{q.assoc, 0, {}};
    // Lines stay cached, but a former DM line may now rank behind every
    // best-effort line, and any block may be a former DM line.
    for (const auto& [b, qb] : q.ages) out.ages.emplace(b, q.assoc - 1);
    return out;
}

AbstractState join(const AbstractState& q1, const AbstractState& q2, bool keep_regions) {
    if (q1.assoc != q2.assoc) throw ValidationError("join of states with different associativity");
    AbstractState out{q1.assoc, std::max(q1.d, q2.d), {}};
    for (const auto& [b, a1] : q1.ages) {
        const auto it = q2.ages.find(b);
        if (it == q2.ages.end()) continue;
        unsigned age = std::max(a1, it->second);
        if (keep_regions && (a1 >= q1.d || it->second >= q2.d)) age = std::max(age, out.d);
        if (age < out.assoc) out.ages.emplace(b, age);
    }
    return out;
}

bool less_equal(const AbstractState& q1, const AbstractState& q2) {
    if (q1.assoc != q2.assoc || q1.d > q2.d) return false;
    for (const auto& [b, a2] : q2.ages) {
        const auto it = q1.ages.find(b);
        if (it == q1.ages.end() || it->second > a2) return false;
    }
    return true;
}

std::size_t CfgProgram::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return i;
    throw ValidationError("unknown node '" + id + "'");
}

std::size_t CfgProgram::add_node(std::string id, std::vector<Access> accesses) {
    nodes.push_back({std::move(id), std::move(accesses)});
    succ.emplace_back();
    return nodes.size() - 1;
}

void CfgProgram::add_edge(std::size_t from, std::size_t to, bool backedge) {
    if (from >= nodes.size() || to >= nodes.size())
        throw ValidationError("edge " + std::to_string(from) + "->" + std::to_string(to) +
                              " references a missing node");
    succ[from].insert(to);
    if (backedge) backedges.emplace(from, to);
}

std::set<Block> CfgProgram::blocks() const {
    std::set<Block> out;
    for (const auto& n : nodes)
        for (const auto& a : n.accesses)
            if (!a.clear) out.insert(a.block);
    return out;
}

namespace {

std::vector<std::set<std::size_t>> dominators(const CfgProgram& p) {
    const std::size_t n = p.nodes.size();
    std::set<std::size_t> all;
    for (std::size_t i = 0; i < n; ++i) all.insert(i);
    std::vector<std::set<std::size_t>> dom(n, all);
    dom[p.entry] = {p.entry};
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t u = 0; u < n; ++u)
        for (auto v : p.succ[u]) pred[v].push_back(u);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t v = 0; v < n; ++v) {
            if (v == p.entry) continue;
            std::set<std::size_t> d = all;
            for (auto u : pred[v]) {
                std::set<std::size_t> x;
                std::set_intersection(d.begin(), d.end(), dom[u].begin(), dom[u].end(),
                                      std::inserter(x, x.end()));
                d = std::move(x);
            }
            d.insert(v);
            if (d != dom[v]) {
                dom[v] = std::move(d);
                changed = true;
            }
        }
    }
    return dom;
}

} // namespace

void CfgProgram::validate() const {
    if (assoc == 0 || assoc > 64) throw ValidationError("cfg: assoc must be in [1, 64]");
    if (nodes.empty()) throw ValidationError("cfg: no nodes");
    if (entry >= nodes.size()) throw ValidationError("cfg: missing entry");
    if (succ.size() != nodes.size()) throw ValidationError("cfg: successor table out of sync");
    for (std::size_t u = 0; u < nodes.size(); ++u)
        for (auto v : succ[u])
            if (v >= nodes.size()) throw ValidationError("cfg: dangling edge from " + nodes[u].id);
    for (const auto& [u, v] : backedges)
        if (u >= nodes.size() || v >= nodes.size() || !succ[u].count(v))
            throw ValidationError("cfg: backedge without a matching edge");

    std::vector<bool> seen(nodes.size(), false);
    std::vector<std::size_t> stack{entry};
    seen[entry] = true;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto v : succ[u])
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (!seen[i]) throw ValidationError("cfg: node " + nodes[i].id + " unreachable from entry");

    const auto dom = dominators(*this);
    for (std::size_t u = 0; u < nodes.size(); ++u)
        for (auto v : succ[u]) {
            const bool marked = backedges.count({u, v}) != 0;
            const bool closes = dom[u].count(v) != 0;
            if (marked && !closes)
                throw ValidationError("cfg: backedge " + nodes[u].id + "->" + nodes[v].id +
                                      ": target does not dominate source");
            if (!marked && closes)
                throw ValidationError("cfg: edge " + nodes[u].id + "->" + nodes[v].id +
                                      " closes a loop; mark it as backedge");
        }
}

CfgProgram parse_cfg(std::istream& in, const std::string& origin) {
    CfgProgram p;
    std::optional<std::string> entry;
    std::optional<unsigned> assoc;
    struct PendingEdge {
        std::string from, to;
        bool back;
        int line;
    };
    std::vector<PendingEdge> edges;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        const auto where = origin + ":" + std::to_string(lineno) + ": ";
        if (kw == "assoc") {
            unsigned a = 0;
            if (!(ls >> a) || a == 0) throw ValidationError(where + "assoc needs a positive integer");
            assoc = a;
        } else if (kw == "entry") {
            std::string id;
            if (!(ls >> id)) throw ValidationError(where + "entry needs a node id");
            entry = id;
        } else if (kw == "node") {
            std::string id;
            if (!(ls >> id) || id.back() != ':' || id.size() < 2)
                throw ValidationError(where + "expected `node <id>: <blk>[!] ...`");
            id.pop_back();
            for (const auto& n : p.nodes)
                if (n.id == id) throw ValidationError(where + "node '" + id + "' defined twice");
            std::vector<Access> acc;
            std::string tok;
            while (ls >> tok) {
                if (tok == "@clear") {
                    acc.push_back({"", false, true});
                    continue;
                }
                Access a;
                if (tok.back() == '!') {
                    a.dm = true;
                    tok.pop_back();
                }
                if (tok.empty() || tok.find_first_of("!@{},[]") != std::string::npos)
                    throw ValidationError(where + "bad block name '" + tok + "'");
                a.block = tok;
                acc.push_back(a);
            }
            p.add_node(id, std::move(acc));
        } else if (kw == "edge" || kw == "backedge") {
            PendingEdge e{"", "", kw == "backedge", lineno};
            if (!(ls >> e.from >> e.to))
                throw ValidationError(where + kw + " needs <from> <to>");
            edges.push_back(e);
        } else {
            throw ValidationError(where + "unknown directive '" + kw + "'");
        }
    }
    if (!assoc) throw ValidationError(origin + ": missing `assoc`");
    if (!entry) throw ValidationError(origin + ": missing `entry`");
    p.assoc = *assoc;
    auto resolve = [&](const std::string& id, int lineno) {
        for (std::size_t i = 0; i < p.nodes.size(); ++i)
            if (p.nodes[i].id == id) return i;
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": unknown node '" + id +
                              "'");
    };
    p.entry = resolve(*entry, 0);
    for (const auto& e : edges) p.add_edge(resolve(e.from, e.line), resolve(e.to, e.line), e.back);
    p.validate();
    return p;
}

CfgProgram load_cfg(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open cfg '" + path + "'");
    return parse_cfg(in, path);
}

void write_cfg(std::ostream& os, const CfgProgram& p) {
    os << "assoc " << p.assoc << '\n' << "entry " << p.nodes.at(p.entry).id << '\n';
    for (const auto& n : p.nodes) {
        os << "node " << n.id << ':';
        for (const auto& a : n.accesses) {
            if (a.clear) os << " @clear";
            else os << ' ' << a.block << (a.dm ? "!" : "");
        }
        os << '\n';
    }
    for (std::size_t u = 0; u < p.nodes.size(); ++u)
        for (auto v : p.succ[u])
            os << (p.backedges.count({u, v}) ? "backedge " : "edge ") << p.nodes[u].id << ' '
               << p.nodes[v].id << '\n';
}

std::vector<Loop> find_loops(const CfgProgram& p) {
    std::vector<std::vector<std::size_t>> pred(p.nodes.size());
    for (std::size_t u = 0; u < p.nodes.size(); ++u)
        for (auto v : p.succ[u]) pred[v].push_back(u);
    std::map<std::size_t, std::set<std::size_t>> by_header;
    for (const auto& [src, h] : p.backedges) {
        auto& body = by_header[h];
        body.insert(h);
        std::vector<std::size_t> stack;
        if (body.insert(src).second) stack.push_back(src);
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (auto w : pred[u])
                if (body.insert(w).second) stack.push_back(w);
        }
    }
    std::vector<Loop> loops;
    for (auto& [h, body] : by_header) loops.push_back({h, std::move(body)});
    return loops;
}

std::string_view to_string(SiteClass c) {
    switch (c) {
    case SiteClass::AlwaysHit: return "always_hit";
    case SiteClass::Persistent: return "persistent";
    case SiteClass::Unclassified: return "unclassified";
    }
    return "?";
}

namespace {

// Bit l of a context: the node sits in the first iteration of loop l.
using Context = std::uint64_t;

struct LoopInfo {
    std::vector<Loop> loops;
    std::vector<Context> member; // per node: loops containing it

    explicit LoopInfo(const CfgProgram& p, bool enabled) : member(p.nodes.size(), 0) {
        if (!enabled) return;
        loops = find_loops(p);
        if (loops.size() > 64) throw ValidationError("cfg: more than 64 loops");
        for (std::size_t l = 0; l < loops.size(); ++l)
            for (auto n : loops[l].body) member[n] |= Context{1} << l;
    }

    Context enter_entry(std::size_t entry) const { return member[entry]; }

    Context step(std::size_t u, Context cu, std::size_t v) const {
        Context cv = 0;
        for (std::size_t l = 0; l < loops.size(); ++l) {
            const Context bit = Context{1} << l;
            if (!(member[v] & bit)) continue;
            if (!(member[u] & bit)) cv |= bit;
            else if (v != loops[l].header) cv |= cu & bit;
        }
        return cv;
    }
};

AbstractState transfer(AbstractState q, const CfgNode& n, const AnalysisOptions& o,
                       std::vector<AbstractState>* before = nullptr) {
    for (const auto& a : n.accesses) {
        if (before) before->push_back(q);
        if (a.clear) q = clear_dm(q);
        else if (a.dm) q = update_d(q, a.block, o.guard, o.ub == UbVariant::Strict);
        else q = update_b(q, a.block, o.ub);
    }
    return q;
}

struct Fixpoint {
    std::map<std::pair<std::size_t, Context>, AbstractState> in;
    std::size_t iterations = 0;
};

Fixpoint solve(const CfgProgram& p, const AnalysisOptions& o, const LoopInfo& li) {
    Fixpoint fx;
    std::deque<std::pair<std::size_t, Context>> work;
    std::set<std::pair<std::size_t, Context>> queued;
    const std::pair<std::size_t, Context> start{p.entry, li.enter_entry(p.entry)};
    fx.in.emplace(start, AbstractState::top(p.assoc));
    work.push_back(start);
    queued.insert(start);
    while (!work.empty()) {
        const auto key = work.front();
        work.pop_front();
        queued.erase(key);
        ++fx.iterations;
        const AbstractState out = transfer(fx.in.at(key), p.nodes[key.first], o);
        for (auto v : p.succ[key.first]) {
            const std::pair<std::size_t, Context> next{v, li.step(key.first, key.second, v)};
            auto it = fx.in.find(next);
            bool changed = false;
            if (it == fx.in.end()) {
                fx.in.emplace(next, out);
                changed = true;
            } else {
                AbstractState j = join(it->second, out, o.ub == UbVariant::Strict);
                if (j != it->second) {
                    it->second = std::move(j);
                    changed = true;
                }
            }
            if (changed && queued.insert(next).second) work.push_back(next);
        }
    }
    return fx;
}

} // namespace

AnalysisResult must_analysis(const CfgProgram& p, const AnalysisOptions& o) {
    p.validate();
    AnalysisResult res;
    const LoopInfo plain_loops(p, false);
    const Fixpoint plain = solve(p, o, plain_loops);
    res.iterations = plain.iterations;
    res.node_in.resize(p.nodes.size());
    for (const auto& [key, q] : plain.in) res.node_in[key.first] = q;

    std::optional<LoopInfo> peel_loops;
    std::optional<Fixpoint> peeled;
    if (o.persistence) {
        peel_loops.emplace(p, true);
        peeled = solve(p, o, *peel_loops);
        res.iterations += peeled->iterations;
    }

    for (std::size_t n = 0; n < p.nodes.size(); ++n) {
        const auto& node = p.nodes[n];
        std::vector<AbstractState> before;
        if (res.node_in[n]) transfer(*res.node_in[n], node, o, &before);

        std::vector<AbstractState> steady_before;
        const bool in_loop = peel_loops && peel_loops->member[n] != 0;
        if (in_loop) {
            if (auto it = peeled->in.find({n, 0}); it != peeled->in.end())
                transfer(it->second, node, o, &steady_before);
        }

        for (std::size_t i = 0; i < node.accesses.size(); ++i) {
            const auto& a = node.accesses[i];
            if (a.clear) continue;
            SiteResult s;
            s.node = n;
            s.index = i;
            s.block = a.block;
            s.dm = a.dm;
            if (!before.empty()) s.in = before[i];
            if (!before.empty() && before[i].age(a.block)) s.cls = SiteClass::AlwaysHit;
            else if (!steady_before.empty() && steady_before[i].age(a.block))
                s.cls = SiteClass::Persistent;
            res.sites.push_back(std::move(s));
        }
    }
    return res;
}

void write_classification_csv(std::ostream& os, const CfgProgram& p, const AnalysisResult& r) {
    os << "node,index,block,dm,class\n";
    for (const auto& s : r.sites)
        os << p.nodes[s.node].id << ',' << s.index << ',' << s.block << ',' << (s.dm ? 1 : 0)
           << ',' << to_string(s.cls) << '\n';
}

namespace {

struct OracleRun {
    const CfgProgram& p;
    const OracleLimits& limits;
    const std::function<void(const OracleVisit&)>& observe;
    LoopInfo li;
    std::map<Block, PhysAddr> addr;
    std::map<PhysAddr, Block> name;
    std::vector<std::vector<std::size_t>> site_of; // node, access index -> site
    std::vector<OracleSite> sites;
    std::uint64_t paths = 0;

    OracleRun(const CfgProgram& prog, const OracleLimits& lim,
              const std::function<void(const OracleVisit&)>& obs)
        : p(prog), limits(lim), observe(obs), li(prog, true) {
        std::size_t k = 0;
        for (const auto& b : p.blocks()) {
            addr[b] = k * 64;
            name[k * 64] = b;
            ++k;
        }
        site_of.resize(p.nodes.size());
        std::size_t s = 0;
        for (std::size_t n = 0; n < p.nodes.size(); ++n)
            for (const auto& a : p.nodes[n].accesses) site_of[n].push_back(a.clear ? SIZE_MAX : s++);
        sites.resize(s);
    }

    ConcreteAges ages(const DmCache& c) const {
        std::vector<const CacheLine*> lines;
        for (const auto& l : c.set_lines(0))
            if (l.valid) lines.push_back(&l);
        std::sort(lines.begin(), lines.end(), [](const CacheLine* x, const CacheLine* y) {
            if (x->dm != y->dm) return x->dm;
            return x->recency < y->recency;
        });
        ConcreteAges out;
        for (unsigned i = 0; i < lines.size(); ++i)
            out[name.at(c.geometry().recompose(lines[i]->tag, 0, 0))] = i;
        return out;
    }

    void visit(std::size_t n, Context ctx, DmCache cache, std::size_t depth) {
        const bool steady = ctx == 0;
        const auto& node = p.nodes[n];
        for (std::size_t i = 0; i < node.accesses.size(); ++i) {
            const auto& a = node.accesses[i];
            if (a.clear) {
                cache.dm_cleanup(0);
                continue;
            }
            std::optional<ConcreteAges> before;
            if (observe) before = ages(cache);
            const auto out = cache.access(MemoryRequest{0, AccessKind::Read, addr.at(a.block), a.dm, 0});
            const bool hit = out.result == AccessResult::Hit;
            auto& s = sites[site_of[n][i]];
            ++s.visits;
            s.all_hit = s.all_hit && hit;
            if (steady) {
                ++s.steady_visits;
                s.steady_all_hit = s.steady_all_hit && hit;
            }
            if (observe) observe(OracleVisit{site_of[n][i], &*before, hit, steady});
        }
        if (depth >= limits.max_depth || p.succ[n].empty()) {
            if (++paths > limits.max_paths)
                throw ValidationError("oracle: more than " + std::to_string(limits.max_paths) +
                                      " paths; lower max_depth");
            return;
        }
        for (auto v : p.succ[n]) visit(v, li.step(n, ctx, v), cache, depth + 1);
    }
};

} // namespace

std::vector<OracleSite> concrete_oracle(const CfgProgram& p, const OracleLimits& limits,
                                        const std::function<void(const OracleVisit&)>& observe) {
    p.validate();
    const auto nblocks = p.blocks().size();
    if (nblocks > limits.max_blocks)
        throw ValidationError("oracle: " + std::to_string(nblocks) + " blocks exceed the limit of " +
                              std::to_string(limits.max_blocks));
    if (limits.max_depth == 0 || limits.max_depth > 32)
        throw ValidationError("oracle: max_depth must be in [1, 32]");
    OracleRun run(p, limits, observe);
    CacheConfig cfg;
    cfg.assoc = p.assoc;
    cfg.line_size = 64;
    cfg.size = std::uint64_t{p.assoc} * 64;
    cfg.part_mask = {full_mask(p.assoc)};
    run.visit(p.entry, run.li.enter_entry(p.entry), DmCache(cfg), 1);
    return run.sites;
}

} // namespace dmsim::dmlru
