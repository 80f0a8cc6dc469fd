// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "npukit/tile_planner.hpp"

using namespace npukit;

namespace {

HardwareProfile profile_with(std::uint64_t sram, double util = 1.0) {
    HardwareProfile hw;
    hw.sram_bytes = sram;
    hw.utilization_target = util;
    hw.dram_bandwidth_bytes_per_us = 1000.0;
    hw.tensor_engine_macs_per_us = 1000.0;
    hw.vector_engine_elems_per_us = 1000.0;
    return hw;
}

}  // namespace

TEST_CASE("working_set unit dimensions") {
    CHECK(working_set(1, 1, 1, ElementType::fp32) == 20);
}

TEST_CASE("working_set hand evaluation") {
    // 169*40*2 (Q tile) + 2*77*40*2 (K and V) + 169*77*2 (scores) + 169*40*2 (out)
    CHECK(working_set(169, 77, 40, ElementType::fp16) == 65386);
}

TEST_CASE("working_set is linear in tile rows") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint64_t t = 1 + rng() % 512;
        const std::uint64_t n_k = 1 + rng() % 256;
        const std::uint64_t d = 1 + rng() % 256;
        for (auto dtype : {ElementType::fp32, ElementType::fp16, ElementType::int8}) {
            const std::uint64_t w = byte_width(dtype);
            CHECK(working_set(2 * t, n_k, d, dtype) - working_set(t, n_k, d, dtype) ==
                  t * (2 * d + n_k) * w);
        }
    }
}

TEST_CASE("plan for the 4096x77x40 fp16 block under a 64 KiB budget") {
    const HardwareProfile hw = profile_with(65536);
    CHECK(max_rows_per_tile(4096, 77, 40, ElementType::fp16, hw) == 169);

    const TilePlan plan = plan_tiles(4096, 77, 40, ElementType::fp16, hw);
    CHECK(plan.tile_count == 25);
    CHECK(plan.spans.size() == 25);
    CHECK(plan.working_set_bytes <= plan.sram_budget_bytes);
    CHECK(plan.sram_budget_bytes == 65536);

    std::uint64_t covered = 0, widest = 0, narrowest = ~0ull;
    for (const auto& s : plan.spans) {
        covered += s.row_count;
        widest = std::max(widest, s.row_count);
        narrowest = std::min(narrowest, s.row_count);
    }
    CHECK(covered == 4096);
    CHECK(widest - narrowest <= 1);
}

TEST_CASE("everything fits in one tile") {
    const TilePlan plan = plan_tiles(8, 4, 4, ElementType::fp32, profile_with(1 << 20));
    CHECK(plan.tile_count == 1);
    CHECK(plan.spans.front().row_start == 0);
    CHECK(plan.spans.front().row_count == 8);
}

TEST_CASE("K and V alone exceeding the budget is infeasible") {
    const HardwareProfile hw = profile_with(1024);
    // 2 * 64 * 64 * 4 bytes of K/V = 32 KiB >> 1 KiB
    CHECK_THROWS_AS(plan_tiles(128, 64, 64, ElementType::fp32, hw), InfeasibleError);
    try {
        plan_tiles(128, 64, 64, ElementType::fp32, hw);
    } catch (const InfeasibleError& e) {
        CHECK(e.required_bytes == working_set(1, 64, 64, ElementType::fp32));
        CHECK(e.available_bytes == 1024);
    }
}

TEST_CASE("utilization target shrinks the budget") {
    const TilePlan full = plan_tiles(4096, 77, 40, ElementType::fp16, profile_with(65536, 1.0));
    const TilePlan headroom =
        plan_tiles(4096, 77, 40, ElementType::fp16, profile_with(65536, 0.9));
    CHECK(headroom.sram_budget_bytes == 58982);  // floor(0.9 * 65536)
    CHECK(headroom.tile_count >= full.tile_count);
}

TEST_CASE("plans satisfy budget, minimality, and determinism") {
    std::mt19937 rng(9);
    int planned = 0;
    while (planned < 300) {
        const std::uint64_t n_q = 1 + rng() % 4096;
        const std::uint64_t n_k = 1 + rng() % 256;
        const std::uint64_t d = 1 + rng() % 256;
        const auto dtype = static_cast<ElementType>(rng() % 5);
        const HardwareProfile hw =
            profile_with(1024 + rng() % (1 << 22), 0.05 + (rng() % 96) / 100.0);

        TilePlan plan;
        try {
            plan = plan_tiles(n_q, n_k, d, dtype, hw);
        } catch (const InfeasibleError&) {
            continue;
        }
        ++planned;

        std::uint64_t widest = 0;
        for (const auto& s : plan.spans) widest = std::max(widest, s.row_count);
        CHECK(working_set(widest, n_k, d, dtype) <= hw.budget_bytes());
        CHECK(plan.working_set_bytes <= plan.sram_budget_bytes);

        if (plan.tile_count > 1) {
            const std::uint64_t fewer = plan.tile_count - 1;
            const std::uint64_t widest_if_fewer = (n_q + fewer - 1) / fewer;
            CHECK(working_set(widest_if_fewer, n_k, d, dtype) > hw.budget_bytes());
        }

        CHECK(plan == plan_tiles(n_q, n_k, d, dtype, hw));
    }
}

TEST_CASE("tile count never grows with more SRAM") {
    std::mt19937 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint64_t n_q = 1 + rng() % 2048;
        const std::uint64_t n_k = 1 + rng() % 128;
        const std::uint64_t d = 1 + rng() % 128;
        std::uint64_t sram = working_set(1, n_k, d, ElementType::fp16);
        std::uint64_t prev = ~0ull;
        for (int step = 0; step < 6; ++step) {
            const TilePlan plan =
                plan_tiles(n_q, n_k, d, ElementType::fp16, profile_with(sram));
            CHECK(plan.tile_count <= prev);
            prev = plan.tile_count;
            sram *= 2;
        }
    }
}

TEST_CASE("profile JSON loading") {
    const char* good = R"({
        "sram_bytes": 65536,
        "utilization_target": 0.8,
        "dram_bandwidth_bytes_per_us": 51200,
        "dma_setup_us": 0.1,
        "tensor_engine_macs_per_us": 17000000,
        "vector_engine_elems_per_us": 270000
    })";
    const HardwareProfile hw = profile_from_json_text(good);
    CHECK(hw.sram_bytes == 65536);
    CHECK(hw.utilization_target == 0.8);
    CHECK(hw.dma_setup_us == 0.1);

    SUBCASE("optional fields take their defaults") {
        const char* minimal = R"({
            "sram_bytes": 1024,
            "dram_bandwidth_bytes_per_us": 100,
            "tensor_engine_macs_per_us": 100,
            "vector_engine_elems_per_us": 100
        })";
        const HardwareProfile m = profile_from_json_text(minimal);
        CHECK(m.utilization_target == 0.9);
        CHECK(m.dma_setup_us == 0.0);
    }
    SUBCASE("unknown fields are rejected") {
        const char* extra = R"({
            "sram_bytes": 1024,
            "dram_bandwidth_bytes_per_us": 100,
            "tensor_engine_macs_per_us": 100,
            "vector_engine_elems_per_us": 100,
            "sram_banks": 4
        })";
        CHECK_THROWS_AS(profile_from_json_text(extra), IoError);
    }
    SUBCASE("missing required fields are rejected") {
        CHECK_THROWS_AS(profile_from_json_text(R"({"sram_bytes": 1024})"), IoError);
    }
    SUBCASE("invalid values are rejected") {
        const char* bad_util = R"({
            "sram_bytes": 1024,
            "utilization_target": 1.5,
            "dram_bandwidth_bytes_per_us": 100,
            "tensor_engine_macs_per_us": 100,
            "vector_engine_elems_per_us": 100
        })";
        CHECK_THROWS_AS(profile_from_json_text(bad_util), IoError);
    }
    SUBCASE("malformed JSON is rejected") {
        CHECK_THROWS_AS(profile_from_json_text("{nope"), IoError);
    }
}

TEST_CASE("shipped example profiles load") {
    CHECK(load_profile(std::string(NPUKIT_DATA_DIR) + "/profiles/npu_64k.json")
              .sram_bytes == 65536);
    CHECK(load_profile(std::string(NPUKIT_DATA_DIR) + "/profiles/npu_calibrated.json")
              .dram_bandwidth_bytes_per_us == 22610);
    CHECK(load_profile(std::string(NPUKIT_DATA_DIR) + "/profiles/npu_2m.json")
              .utilization_target == 0.9);
}
