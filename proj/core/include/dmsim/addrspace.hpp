#pragma once

#include "dmsim/core_model.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dmsim {

// Half-open virtual page ranges declared deterministic. Sorted and
// non-overlapping; the constructor rejects anything else.
class DmRegionSet {
public:
    using Range = std::pair<PageNumber, PageNumber>;

    DmRegionSet() = default;
    explicit DmRegionSet(std::vector<Range> ranges);

    // Every page deterministic.
    static DmRegionSet all();

    bool contains(PageNumber vpage) const;
    bool empty() const { return ranges_.empty(); }
    const std::vector<Range>& ranges() const { return ranges_; }

    friend bool operator==(const DmRegionSet&, const DmRegionSet&) = default;

private:
    std::vector<Range> ranges_;
};

// Region file: `dm <hex start> <hex end>` lines, `#` comments.
DmRegionSet parse_region_file(std::istream& in, const std::string& origin = "<regions>");
DmRegionSet load_region_file(const std::string& path);

struct PageEntry {
    PageNumber ppage = 0;
    bool dm = false;

    friend bool operator==(const PageEntry&, const PageEntry&) = default;
};

class PageTable {
public:
    explicit PageTable(CoreId owner = 0, std::uint64_t page_size = 4096);

    CoreId owner_core() const { return owner_; }
    std::uint64_t page_size() const { return page_size_; }
    const DmRegionSet& regions() const { return regions_; }
    const std::map<PageNumber, PageEntry>& entries() const { return entries_; }

    const PageEntry* find(PageNumber vpage) const;
    bool is_dm_page(PageNumber vpage) const { return regions_.contains(vpage); }

    // Installs a mapping. Used by alloc_page; exposed for identity-mapped setups.
    void map(PageNumber vpage, PageEntry entry);

    // Replaces the declared regions and re-marks existing mappings inside
    // them. Mappings outside keep their flag (downgrade is not modelled).
    void declare_dm(const DmRegionSet& regions);

    friend bool operator==(const PageTable&, const PageTable&) = default;

private:
    CoreId owner_;
    std::uint64_t page_size_;
    DmRegionSet regions_;
    std::map<PageNumber, PageEntry> entries_;
};

// Functional form: returns the updated table.
PageTable declare_dm(const DmRegionSet& regions, PageTable table);

struct BankPolicy {
    std::map<CoreId, std::set<unsigned>> private_banks;
    std::set<unsigned> shared_banks;

    void validate(unsigned num_banks) const;

    // Deterministic pages of `core` come from its private banks, everything
    // else from the shared ones.
    const std::set<unsigned>& eligible(CoreId core, bool dm) const;
};

// Free physical pages, per bank, handed out lowest address first.
class PhysicalAllocator {
public:
    explicit PhysicalAllocator(const AddressMap& map);

    // Lowest free page among `banks`, or throws OutOfMemory naming `what`.
    PageNumber take(const std::set<unsigned>& banks, const std::string& what);
    // Lowest free page in any bank.
    PageNumber take_any();

    bool is_free(PageNumber page) const;
    std::size_t free_pages(unsigned bank) const { return free_[bank].size(); }
    const std::vector<std::pair<PageNumber, unsigned>>& log() const { return log_; }

private:
    void record(PageNumber page, unsigned bank);

    std::vector<std::set<PageNumber>> free_;
    std::vector<std::pair<PageNumber, unsigned>> log_;
};

// Maps `vpage` according to the table's DM regions and the bank policy.
PageNumber alloc_page(PageNumber vpage, PageTable& table, const BankPolicy& policy,
                      PhysicalAllocator& alloc);

// Maps `vpage` ignoring DM: any bank, lowest page first. Models a
// bank-oblivious (buddy-style) kernel allocator.
PageNumber alloc_page_interleaved(PageNumber vpage, PageTable& table, PhysicalAllocator& alloc);

struct Translation {
    PhysAddr paddr = 0;
    bool dm = false;

    friend bool operator==(const Translation&, const Translation&) = default;
};

Translation translate(VirtAddr vaddr, const PageTable& table);

} // namespace dmsim
