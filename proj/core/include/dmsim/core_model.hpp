#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace dmsim {

using CoreId = std::uint32_t;
using Cycle = std::uint64_t;
using PhysAddr = std::uint64_t;
using VirtAddr = std::uint64_t;
using PageNumber = std::uint64_t;
using WayMask = std::uint64_t;

inline constexpr unsigned kMaxWays = 64;

enum class AccessKind : std::uint8_t { Read, Write };

std::string_view to_string(AccessKind kind);

// One memory access as it travels from a core through the shared cache to
// DRAM. The dm flag is stamped at translation time from the page table.
struct MemoryRequest {
    CoreId core = 0;
    AccessKind kind = AccessKind::Read;
    PhysAddr paddr = 0;
    bool dm = false;
    Cycle issue_time = 0;

    friend bool operator==(const MemoryRequest&, const MemoryRequest&) = default;
};

struct AddressParts {
    std::uint64_t tag = 0;
    std::uint64_t set_index = 0;
    std::uint64_t line_offset = 0;
    PageNumber page_number = 0;
    unsigned bank_index = 0;

    friend bool operator==(const AddressParts&, const AddressParts&) = default;
};

constexpr bool is_pow2(std::uint64_t v) { return v != 0 && std::has_single_bit(v); }

constexpr unsigned log2_exact(std::uint64_t v) {
    return static_cast<unsigned>(std::countr_zero(v));
}

constexpr WayMask full_mask(unsigned ways) {
    return ways >= kMaxWays ? ~WayMask{0} : ((WayMask{1} << ways) - 1);
}

// Line/set slicing for one cache level.
struct CacheGeometry {
    std::uint64_t line_size = 64;
    std::uint64_t num_sets = 2048;

    void validate(std::string_view what) const;

    unsigned offset_bits() const { return log2_exact(line_size); }
    unsigned set_bits() const { return log2_exact(num_sets); }

    std::uint64_t line_offset(PhysAddr a) const { return a & (line_size - 1); }
    std::uint64_t set_index(PhysAddr a) const { return (a >> offset_bits()) & (num_sets - 1); }
    std::uint64_t tag(PhysAddr a) const { return a >> (offset_bits() + set_bits()); }
    PhysAddr line_address(PhysAddr a) const { return a & ~(line_size - 1); }

    PhysAddr recompose(std::uint64_t tag, std::uint64_t set, std::uint64_t offset) const {
        return (tag << (offset_bits() + set_bits())) | (set << offset_bits()) | offset;
    }
};

// Physical memory layout: pages and their DRAM banks. With an explicit
// page_bank_map the modular rule is ignored.
struct MemoryGeometry {
    std::uint64_t page_size = 4096;
    unsigned num_banks = 8;
    std::uint64_t pages_per_bank = 8192;
    // Consecutive pages that share a bank before moving to the next one.
    std::uint64_t bank_granule_pages = 1;
    std::optional<std::vector<unsigned>> page_bank_map;

    void validate() const;

    std::uint64_t total_pages() const { return pages_per_bank * num_banks; }
    PhysAddr memory_size() const { return total_pages() * page_size; }
};

class AddressMap {
public:
    AddressMap() : AddressMap(CacheGeometry{}, MemoryGeometry{}) {}
    AddressMap(CacheGeometry cache, MemoryGeometry memory);

    AddressParts decompose(PhysAddr paddr) const;
    PhysAddr recompose(const AddressParts& parts) const;

    PageNumber page_of(PhysAddr paddr) const { return paddr >> page_bits_; }
    std::uint64_t page_offset(PhysAddr paddr) const { return paddr & (memory_.page_size - 1); }
    PhysAddr page_base(PageNumber page) const { return page << page_bits_; }
    unsigned bank_of_page(PageNumber page) const;
    bool contains(PhysAddr paddr) const { return paddr < memory_.memory_size(); }

    const CacheGeometry& cache() const { return cache_; }
    const MemoryGeometry& memory() const { return memory_; }

private:
    CacheGeometry cache_;
    MemoryGeometry memory_;
    unsigned page_bits_ = 12;
};

} // namespace dmsim
