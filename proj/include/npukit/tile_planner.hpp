// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "npukit/tensor.hpp"
#include "npukit/tiling.hpp"

namespace npukit {

/// Capacities and rates of the modeled accelerator. Shipped profiles are
/// illustrative examples, not measured device data.
struct HardwareProfile {
    std::uint64_t sram_bytes = 0;
    double utilization_target = 0.9;  // fraction of SRAM the planner may use
    double dram_bandwidth_bytes_per_us = 0.0;
    double dma_setup_us = 0.0;  // fixed cost per DMA transfer
    double tensor_engine_macs_per_us = 0.0;
    double vector_engine_elems_per_us = 0.0;

    void validate() const;

    /// Planner byte budget: floor(utilization_target * sram_bytes).
    std::uint64_t budget_bytes() const;
};

/// Strict JSON loader: snake_case field names as declared above, unknown
/// fields rejected. utilization_target and dma_setup_us may be omitted and
/// take their defaults.
HardwareProfile load_profile(const std::string& path);
HardwareProfile profile_from_json_text(const std::string& text);
std::string profile_to_json_text(const HardwareProfile& hw);

/// Bytes a tile of t_rows query rows keeps resident: the Q tile, all of K
/// and V, the score tile, and the output tile.
std::uint64_t working_set(std::uint64_t t_rows, std::uint64_t n_k,
                          std::uint64_t d, ElementType dtype);

/// Largest tile row count whose working set fits the profile's budget
/// (capped at n_q). Throws InfeasibleError when even one row does not fit.
std::uint64_t max_rows_per_tile(std::uint64_t n_q, std::uint64_t n_k,
                                std::uint64_t d, ElementType dtype,
                                const HardwareProfile& hw);

/// Fewest balanced tiles such that every tile's working set fits the
/// budget. Deterministic in its inputs.
TilePlan plan_tiles(std::uint64_t n_q, std::uint64_t n_k, std::uint64_t d,
                    ElementType dtype, const HardwareProfile& hw);

std::string tile_plan_to_json_text(const TilePlan& plan);

}  // namespace npukit
