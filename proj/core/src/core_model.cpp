#include "dmsim/core_model.hpp"

#include "dmsim/error.hpp"

#include <string>

namespace dmsim {

std::string_view to_string(AccessKind kind) {
    return kind == AccessKind::Read ? "R" : "W";
}

void CacheGeometry::validate(std::string_view what) const {
    if (!is_pow2(line_size))
        throw ValidationError(std::string(what) + ".line_size must be a power of two");
    if (!is_pow2(num_sets))
        throw ValidationError(std::string(what) + ": set count must be a power of two");
}

void MemoryGeometry::validate() const {
    if (!is_pow2(page_size)) throw ValidationError("dram.page_size must be a power of two");
    if (!is_pow2(num_banks)) throw ValidationError("dram.banks must be a power of two");
    if (!is_pow2(pages_per_bank))
        throw ValidationError("dram.rows_per_bank must be a power of two");
    if (!is_pow2(bank_granule_pages))
        throw ValidationError("dram.bank_granule must be a power of two");
    if (page_bank_map) {
        if (page_bank_map->size() != total_pages())
            throw ValidationError("explicit page->bank map must cover every physical page");
        for (unsigned b : *page_bank_map)
            if (b >= num_banks) throw ValidationError("page->bank map names a bank out of range");
    }
}

AddressMap::AddressMap(CacheGeometry cache, MemoryGeometry memory)
    : cache_(cache), memory_(std::move(memory)) {
    cache_.validate("cache");
    memory_.validate();
    page_bits_ = log2_exact(memory_.page_size);
}

unsigned AddressMap::bank_of_page(PageNumber page) const {
    if (memory_.page_bank_map) return (*memory_.page_bank_map)[page % memory_.total_pages()];
    return static_cast<unsigned>((page / memory_.bank_granule_pages) % memory_.num_banks);
}

AddressParts AddressMap::decompose(PhysAddr paddr) const {
    AddressParts p;
    p.line_offset = cache_.line_offset(paddr);
    p.set_index = cache_.set_index(paddr);
    p.tag = cache_.tag(paddr);
    p.page_number = page_of(paddr);
    p.bank_index = bank_of_page(p.page_number);
    return p;
}

PhysAddr AddressMap::recompose(const AddressParts& parts) const {
    return cache_.recompose(parts.tag, parts.set_index, parts.line_offset);
}

} // namespace dmsim
