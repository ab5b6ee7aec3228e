#include "dmsim/core_model.hpp"
#include "dmsim/error.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dmsim;

TEST(CacheGeometry, SlicesAddress) {
    const CacheGeometry g{64, 2048};
    const PhysAddr a = 0x12345678;
    EXPECT_EQ(g.line_offset(a), 0x38u);
    EXPECT_EQ(g.set_index(a), (0x12345678u >> 6) & 2047u);
    EXPECT_EQ(g.tag(a), 0x12345678u >> 17);
    EXPECT_EQ(g.line_address(a), 0x12345640u);
}

TEST(AddressMap, DecomposeRecomposeRoundTrip) {
    const AddressMap map(CacheGeometry{64, 2048}, MemoryGeometry{4096, 8, 8192, 1, {}});
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        const PhysAddr a = rng() % map.memory().memory_size();
        const auto parts = map.decompose(a);
        EXPECT_EQ(map.recompose(parts), a);
        EXPECT_EQ(parts.page_number, a >> 12);
        EXPECT_EQ(parts.bank_index, parts.page_number % 8);
    }
}

TEST(AddressMap, BankGranuleGroupsConsecutivePages) {
    const AddressMap map(CacheGeometry{}, MemoryGeometry{4096, 4, 64, 4, {}});
    EXPECT_EQ(map.bank_of_page(0), 0u);
    EXPECT_EQ(map.bank_of_page(3), 0u);
    EXPECT_EQ(map.bank_of_page(4), 1u);
    EXPECT_EQ(map.bank_of_page(16), 0u);
}

TEST(AddressMap, ExplicitPageBankMap) {
    MemoryGeometry m{4096, 2, 2, 1, std::vector<unsigned>{1, 1, 0, 0}};
    const AddressMap map(CacheGeometry{}, m);
    EXPECT_EQ(map.bank_of_page(0), 1u);
    EXPECT_EQ(map.bank_of_page(2), 0u);
}

TEST(AddressMap, RejectsBadGeometry) {
    EXPECT_THROW(AddressMap(CacheGeometry{48, 2048}, MemoryGeometry{}), ValidationError);
    EXPECT_THROW(AddressMap(CacheGeometry{64, 1000}, MemoryGeometry{}), ValidationError);
    EXPECT_THROW(AddressMap(CacheGeometry{}, MemoryGeometry{4000, 8, 8192, 1, {}}),
                 ValidationError);
    EXPECT_THROW(AddressMap(CacheGeometry{}, MemoryGeometry{4096, 6, 8192, 1, {}}),
                 ValidationError);
    EXPECT_THROW(AddressMap(CacheGeometry{},
                            MemoryGeometry{4096, 2, 2, 1, std::vector<unsigned>{0, 1, 2, 0}}),
                 ValidationError);
    EXPECT_THROW(AddressMap(CacheGeometry{},
                            MemoryGeometry{4096, 2, 2, 1, std::vector<unsigned>{0, 1}}),
                 ValidationError);
}

TEST(Masks, FullMask) {
    EXPECT_EQ(full_mask(0), 0u);
    EXPECT_EQ(full_mask(4), 0xFu);
    EXPECT_EQ(full_mask(64), ~WayMask{0});
}
