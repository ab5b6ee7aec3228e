#include "dmsim/addrspace.hpp"

#include "dmsim/error.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace dmsim {

namespace {

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

std::uint64_t parse_hex(const std::string& tok, const std::string& where) {
    try {
        std::size_t used = 0;
        auto v = std::stoull(tok, &used, 16);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(where + ": expected hex number, got '" + tok + "'");
    }
}

} // namespace

DmRegionSet::DmRegionSet(std::vector<Range> ranges) : ranges_(std::move(ranges)) {
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
        const auto& [lo, hi] = ranges_[i];
        if (lo >= hi)
            throw ValidationError("DM region [" + hex(lo) + ", " + hex(hi) + ") is empty");
        if (i > 0 && ranges_[i - 1].second > lo)
            throw ValidationError("DM regions must be sorted and non-overlapping (at " + hex(lo) +
                                  ")");
    }
}

DmRegionSet DmRegionSet::all() {
    return DmRegionSet({{0, std::numeric_limits<PageNumber>::max()}});
}

bool DmRegionSet::contains(PageNumber vpage) const {
    auto it = std::upper_bound(ranges_.begin(), ranges_.end(), vpage,
                               [](PageNumber p, const Range& r) { return p < r.first; });
    if (it == ranges_.begin()) return false;
    --it;
    return vpage >= it->first && vpage < it->second;
}

DmRegionSet parse_region_file(std::istream& in, const std::string& origin) {
    std::vector<DmRegionSet::Range> ranges;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw) || kw[0] == '#') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (kw != "dm") throw ValidationError(where + ": unknown directive '" + kw + "'");
        std::string a, b, extra;
        if (!(ls >> a >> b) || (ls >> extra))
            throw ValidationError(where + ": expected `dm <start> <end>`");
        ranges.emplace_back(parse_hex(a, where), parse_hex(b, where));
    }
    return DmRegionSet(std::move(ranges));
}

DmRegionSet load_region_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open region file '" + path + "'");
    return parse_region_file(in, path);
}

PageTable::PageTable(CoreId owner, std::uint64_t page_size)
    : owner_(owner), page_size_(page_size) {
    if (!is_pow2(page_size)) throw ValidationError("page size must be a power of two");
}

const PageEntry* PageTable::find(PageNumber vpage) const {
    auto it = entries_.find(vpage);
    return it == entries_.end() ? nullptr : &it->second;
}

void PageTable::map(PageNumber vpage, PageEntry entry) {
    auto [it, inserted] = entries_.emplace(vpage, entry);
    if (!inserted)
        throw ModelError("core " + std::to_string(owner_) + ": virtual page " + hex(vpage) +
                         " is already mapped");
}

void PageTable::declare_dm(const DmRegionSet& regions) {
    regions_ = regions;
    for (auto& [vpage, entry] : entries_)
        if (regions_.contains(vpage)) entry.dm = true;
}

PageTable declare_dm(const DmRegionSet& regions, PageTable table) {
    table.declare_dm(regions);
    return table;
}

void BankPolicy::validate(unsigned num_banks) const {
    if (shared_banks.empty()) throw ValidationError("banks.shared must name at least one bank");
    std::set<unsigned> seen(shared_banks);
    for (unsigned b : shared_banks)
        if (b >= num_banks) throw ValidationError("banks.shared: bank " + std::to_string(b) +
                                                  " out of range");
    for (const auto& [core, banks] : private_banks) {
        if (banks.empty())
            throw ValidationError("banks.private." + std::to_string(core) + " is empty");
        for (unsigned b : banks) {
            if (b >= num_banks)
                throw ValidationError("banks.private." + std::to_string(core) + ": bank " +
                                      std::to_string(b) + " out of range");
            if (!seen.insert(b).second)
                throw ValidationError("bank " + std::to_string(b) +
                                      " assigned to more than one bank class");
        }
    }
}

const std::set<unsigned>& BankPolicy::eligible(CoreId core, bool dm) const {
    if (!dm) return shared_banks;
    auto it = private_banks.find(core);
    if (it == private_banks.end())
        throw ValidationError("core " + std::to_string(core) +
                              " has deterministic pages but no private banks");
    return it->second;
}

PhysicalAllocator::PhysicalAllocator(const AddressMap& map) : free_(map.memory().num_banks) {
    const auto total = map.memory().total_pages();
    for (PageNumber p = 0; p < total; ++p) {
        auto& bank = free_[map.bank_of_page(p)];
        bank.insert(bank.end(), p);
    }
}

void PhysicalAllocator::record(PageNumber page, unsigned bank) {
    free_[bank].erase(page);
    log_.emplace_back(page, bank);
}

PageNumber PhysicalAllocator::take(const std::set<unsigned>& banks, const std::string& what) {
    const std::set<PageNumber>* best_set = nullptr;
    unsigned best_bank = 0;
    for (unsigned b : banks) {
        if (b >= free_.size() || free_[b].empty()) continue;
        if (!best_set || *free_[b].begin() < *best_set->begin()) {
            best_set = &free_[b];
            best_bank = b;
        }
    }
    if (!best_set) throw OutOfMemory("out of physical pages in " + what + " banks");
    PageNumber page = *best_set->begin();
    record(page, best_bank);
    return page;
}

PageNumber PhysicalAllocator::take_any() {
    std::set<unsigned> every;
    for (unsigned b = 0; b < free_.size(); ++b) every.insert(b);
    return take(every, "any");
}

bool PhysicalAllocator::is_free(PageNumber page) const {
    return std::any_of(free_.begin(), free_.end(),
                       [page](const auto& s) { return s.count(page) != 0; });
}

PageNumber alloc_page(PageNumber vpage, PageTable& table, const BankPolicy& policy,
                      PhysicalAllocator& alloc) {
    if (table.find(vpage))
        throw ModelError("core " + std::to_string(table.owner_core()) + ": virtual page " +
                         hex(vpage) + " is already mapped");
    const bool dm = table.is_dm_page(vpage);
    const auto& banks = policy.eligible(table.owner_core(), dm);
    const PageNumber ppage = alloc.take(
        banks, dm ? "private (core " + std::to_string(table.owner_core()) + ")" : "shared");
    table.map(vpage, {ppage, dm});
    return ppage;
}

PageNumber alloc_page_interleaved(PageNumber vpage, PageTable& table, PhysicalAllocator& alloc) {
    if (table.find(vpage))
        throw ModelError("core " + std::to_string(table.owner_core()) + ": virtual page " +
                         hex(vpage) + " is already mapped");
    const PageNumber ppage = alloc.take_any();
    table.map(vpage, {ppage, table.is_dm_page(vpage)});
    return ppage;
}

Translation translate(VirtAddr vaddr, const PageTable& table) {
    const auto shift = log2_exact(table.page_size());
    const PageNumber vpage = vaddr >> shift;
    const PageEntry* e = table.find(vpage);
    if (!e)
        throw PageFault("core " + std::to_string(table.owner_core()) + ": page fault at " +
                        hex(vaddr));
    return {(e->ppage << shift) | (vaddr & (table.page_size() - 1)), e->dm};
}

} // namespace dmsim
