// SPDX-License-Identifier: Apache-2.0
#include "npukit/tile_planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace npukit {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// spans

void validate_partition(const std::vector<TileSpan>& spans, std::uint64_t n_rows) {
    if (spans.empty()) throw ShapeError("tile plan has no spans");
    std::vector<TileSpan> sorted = spans;
    std::sort(sorted.begin(), sorted.end(),
              [](const TileSpan& a, const TileSpan& b) { return a.row_start < b.row_start; });
    std::uint64_t next = 0;
    for (const auto& s : sorted) {
        if (s.row_count == 0) throw ShapeError("tile span has zero rows");
        if (s.row_start != next)
            throw ShapeError("tile spans do not partition the query rows");
        next += s.row_count;
    }
    if (next != n_rows)
        throw ShapeError("tile spans cover " + std::to_string(next) +
                         " rows, expected " + std::to_string(n_rows));
}

std::vector<TileSpan> make_balanced_spans(std::uint64_t n_rows,
                                          std::uint64_t tile_count) {
    if (tile_count == 0 || tile_count > n_rows)
        throw ShapeError("tile count must be in [1, n_rows]");
    const std::uint64_t base = n_rows / tile_count;
    const std::uint64_t remainder = n_rows % tile_count;
    std::vector<TileSpan> spans;
    spans.reserve(tile_count);
    std::uint64_t start = 0;
    for (std::uint64_t i = 0; i < tile_count; ++i) {
        const std::uint64_t rows = base + (i < remainder ? 1 : 0);
        spans.push_back({start, rows});
        start += rows;
    }
    return spans;
}

// ---------------------------------------------------------------------------
// profile

void HardwareProfile::validate() const {
    if (sram_bytes == 0) throw Error("sram_bytes must be positive");
    if (!(utilization_target > 0.0) || utilization_target > 1.0)
        throw Error("utilization_target must be in (0, 1]");
    if (!(dram_bandwidth_bytes_per_us > 0.0))
        throw Error("dram_bandwidth_bytes_per_us must be positive");
    if (dma_setup_us < 0.0) throw Error("dma_setup_us must be non-negative");
    if (!(tensor_engine_macs_per_us > 0.0))
        throw Error("tensor_engine_macs_per_us must be positive");
    if (!(vector_engine_elems_per_us > 0.0))
        throw Error("vector_engine_elems_per_us must be positive");
}

std::uint64_t HardwareProfile::budget_bytes() const {
    return static_cast<std::uint64_t>(
        std::floor(utilization_target * static_cast<double>(sram_bytes)));
}

HardwareProfile profile_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("profile JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw IoError("profile JSON must be an object");

    static const std::set<std::string> known = {
        "sram_bytes",          "utilization_target",
        "dram_bandwidth_bytes_per_us", "dma_setup_us",
        "tensor_engine_macs_per_us",   "vector_engine_elems_per_us"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw IoError("profile JSON: unknown field '" + key + "'");
    for (const char* req : {"sram_bytes", "dram_bandwidth_bytes_per_us",
                            "tensor_engine_macs_per_us", "vector_engine_elems_per_us"})
        if (!j.contains(req)) throw IoError(std::string("profile JSON: missing field '") + req + "'");

    HardwareProfile hw;
    try {
        hw.sram_bytes = j.at("sram_bytes").get<std::uint64_t>();
        hw.dram_bandwidth_bytes_per_us = j.at("dram_bandwidth_bytes_per_us").get<double>();
        hw.tensor_engine_macs_per_us = j.at("tensor_engine_macs_per_us").get<double>();
        hw.vector_engine_elems_per_us = j.at("vector_engine_elems_per_us").get<double>();
        if (j.contains("utilization_target"))
            hw.utilization_target = j.at("utilization_target").get<double>();
        if (j.contains("dma_setup_us")) hw.dma_setup_us = j.at("dma_setup_us").get<double>();
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(std::string("profile JSON field type error: ") + e.what());
    }
    try {
        hw.validate();
    } catch (const Error& e) {
        throw IoError(std::string("profile JSON: ") + e.what());
    }
    return hw;
}

HardwareProfile load_profile(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open profile " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return profile_from_json_text(text);
}

std::string profile_to_json_text(const HardwareProfile& hw) {
    ordered_json j;
    j["sram_bytes"] = hw.sram_bytes;
    j["utilization_target"] = hw.utilization_target;
    j["dram_bandwidth_bytes_per_us"] = hw.dram_bandwidth_bytes_per_us;
    j["dma_setup_us"] = hw.dma_setup_us;
    j["tensor_engine_macs_per_us"] = hw.tensor_engine_macs_per_us;
    j["vector_engine_elems_per_us"] = hw.vector_engine_elems_per_us;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// planning

std::uint64_t working_set(std::uint64_t t_rows, std::uint64_t n_k,
                          std::uint64_t d, ElementType dtype) {
    if (t_rows == 0 || n_k == 0 || d == 0)
        throw ShapeError("working_set dimensions must be positive");
    const std::uint64_t w = byte_width(dtype);
    const std::uint64_t q_tile = t_rows * d * w;
    const std::uint64_t keys = n_k * d * w;
    const std::uint64_t values = n_k * d * w;
    const std::uint64_t score_tile = t_rows * n_k * w;
    const std::uint64_t out_tile = t_rows * d * w;
    return q_tile + keys + values + score_tile + out_tile;
}

std::uint64_t max_rows_per_tile(std::uint64_t n_q, std::uint64_t n_k,
                                std::uint64_t d, ElementType dtype,
                                const HardwareProfile& hw) {
    if (n_q == 0 || n_k == 0 || d == 0)
        throw ShapeError("plan dimensions must be positive");
    hw.validate();
    const std::uint64_t budget = hw.budget_bytes();
    const std::uint64_t single = working_set(1, n_k, d, dtype);
    if (single > budget) throw InfeasibleError(single, budget);

    // working_set is linear in t: fixed K/V bytes plus per-row bytes.
    const std::uint64_t w = byte_width(dtype);
    const std::uint64_t fixed = 2 * n_k * d * w;
    const std::uint64_t per_row = (2 * d + n_k) * w;
    const std::uint64_t t_max = (budget - fixed) / per_row;
    return std::min(t_max, n_q);
}

TilePlan plan_tiles(std::uint64_t n_q, std::uint64_t n_k, std::uint64_t d,
                    ElementType dtype, const HardwareProfile& hw) {
    const std::uint64_t t_max = max_rows_per_tile(n_q, n_k, d, dtype, hw);
    const std::uint64_t tile_count = (n_q + t_max - 1) / t_max;

    TilePlan plan;
    plan.spans = make_balanced_spans(n_q, tile_count);
    plan.tile_count = tile_count;
    plan.sram_budget_bytes = hw.budget_bytes();
    std::uint64_t widest = 0;
    for (const auto& s : plan.spans) widest = std::max(widest, s.row_count);
    plan.working_set_bytes = working_set(widest, n_k, d, dtype);
    return plan;
}

std::string tile_plan_to_json_text(const TilePlan& plan) {
    ordered_json j;
    j["tile_count"] = plan.tile_count;
    j["working_set_bytes"] = plan.working_set_bytes;
    j["sram_budget_bytes"] = plan.sram_budget_bytes;
    auto spans = ordered_json::array();
    for (const auto& s : plan.spans)
        spans.push_back({{"row_start", s.row_start}, {"row_count", s.row_count}});
    j["spans"] = std::move(spans);
    return j.dump(2);
}

}  // namespace npukit
