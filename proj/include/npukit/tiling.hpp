// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "npukit/errors.hpp"

namespace npukit {

/// Contiguous run of query rows handled by one tile.
struct TileSpan {
    std::uint64_t row_start = 0;
    std::uint64_t row_count = 0;

    bool operator==(const TileSpan&) const = default;
};

/// Query-axis partition of an attention block plus its SRAM accounting.
struct TilePlan {
    std::vector<TileSpan> spans;
    std::uint64_t tile_count = 0;
    std::uint64_t working_set_bytes = 0;   // largest tile's resident set
    std::uint64_t sram_budget_bytes = 0;   // utilization_target * sram_bytes

    bool operator==(const TilePlan&) const = default;
};

/// Throws ShapeError unless the spans partition [0, n_rows) exactly.
/// Spans may appear in any order; tiles touch disjoint output rows so
/// execution order never matters.
void validate_partition(const std::vector<TileSpan>& spans, std::uint64_t n_rows);

/// Balanced partition of n_rows into tile_count spans: sizes differ by at
/// most one row, with the larger spans leading.
std::vector<TileSpan> make_balanced_spans(std::uint64_t n_rows,
                                          std::uint64_t tile_count);

}  // namespace npukit
