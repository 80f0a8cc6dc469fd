// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npukit/attention.hpp"
#include "npukit/tensor.hpp"
#include "npukit/tile_planner.hpp"
#include "npukit/tiling.hpp"

namespace npukit {

// ---------------------------------------------------------------------------
// Operation graph

enum class OpKind : std::uint8_t { dma_load, dma_store, tensor_calc, vector_calc };

/// Tensors touched by a node. `scores` and `probs` are the attention score
/// matrix before and after the softmax.
enum class Operand : std::uint8_t { query, key, value, scores, probs, output };

std::string to_string(OpKind k);
std::string to_string(Operand o);

struct OpNode {
    OpKind kind;
    std::vector<Operand> roles;
    std::uint64_t bytes_moved = 0;  // DMA kinds only
    std::uint64_t transfers = 1;    // DMA transfer count (setup cost applies per transfer)
    double work = 0.0;              // MACs (tensor_calc) or elements (vector_calc)
    std::string label;

    bool is_dma() const { return kind == OpKind::dma_load || kind == OpKind::dma_store; }
    bool touches(Operand o) const;
};

struct AttentionDims {
    std::uint64_t n_q = 0;
    std::uint64_t n_k = 0;
    std::uint64_t d = 0;
};

struct GraphOptions {
    /// Per-tile compute overhead applied to calc nodes of tiled graphs
    /// (modeled work = base * (1 + compute_overhead)). Tunable, not a
    /// measured constant.
    double compute_overhead = 0.04;
    /// Load V once in total instead of once per tile.
    bool value_resident = false;
};

struct AttentionGraph {
    std::vector<OpNode> nodes;
    AttentionDims dims;
    ElementType dtype = ElementType::fp16;
    std::optional<TilePlan> tiled_with;

    /// Total DMA bytes attributed to nodes touching `o`.
    std::uint64_t dma_bytes_for(Operand o) const;
};

/// Untiled: the nine-row load/calc/store pipeline with every intermediate
/// spilled to DRAM. Tiled: score and prob DMA disappears, V is reloaded per
/// tile (unless value_resident), Q loads and output stores split into one
/// transfer per tile at unchanged total bytes.
AttentionGraph build_attention_graph(AttentionDims dims, ElementType dtype,
                                     std::optional<TilePlan> plan = std::nullopt,
                                     GraphOptions options = {});

/// Kernel fusion: the calc-softmax-calc chain becomes one on-chip region, so
/// DMA of the score/prob intermediates is deleted and the combined
/// probs+value load drops to a value-only load. Idempotent.
AttentionGraph fuse_attention(const AttentionGraph& g);

/// Run the numeric computation a graph describes. Graphs that spill the
/// score matrix use the full-matrix executor; fused/tiled graphs use the
/// tile-local executor.
Tensor execute_graph(const AttentionGraph& g, const AttentionInputs& in);

// ---------------------------------------------------------------------------
// Simulation

struct TrafficRow {
    std::string label;
    std::uint64_t bytes = 0;
    std::string engine;  // "dma" | "tensor" | "vector"
    double time_us = 0.0;
    double relative_pct = 0.0;
};

struct TrafficReport {
    std::string baseline = "self";  // what relative_pct is measured against
    std::vector<TrafficRow> rows;
    double total_time_us = 0.0;
    double total_relative_pct = 0.0;
};

/// Serial cost model: DMA time = transfers * dma_setup_us + bytes/bandwidth;
/// tensor work runs on the tensor engine, softmax on the vector engine.
/// relative_pct is computed against `baseline_total_us` when given (name it
/// via `baseline_name`), else against the report's own total.
TrafficReport simulate(const AttentionGraph& g, const HardwareProfile& hw,
                       std::optional<double> baseline_total_us = std::nullopt,
                       std::string baseline_name = "self");

std::string traffic_report_to_csv(const TrafficReport& r);
std::string traffic_report_to_json_text(const TrafficReport& r);

// ---------------------------------------------------------------------------
// Baseline cost table

/// Nine measured percentages for the untiled pipeline, in graph row order.
/// Loaded tables must sum to 100 +- 0.2.
struct BaselineCostTable {
    std::array<double, 9> percents{};

    static const std::array<std::string, 9>& row_labels();

    double sum() const;
    void validate() const;
};

BaselineCostTable baseline_table_from_json_text(const std::string& text);
BaselineCostTable load_baseline_table(const std::string& path);

/// Predicted tiled total, in percent of the untiled baseline: drops the
/// score/prob spill rows, replaces the probs+value load with
/// `v_load_percent`, scales the three calc rows by (1 + compute_overhead),
/// and sums what remains.
double apply_mlt_to_baseline(const BaselineCostTable& tbl, double v_load_percent,
                             double compute_overhead = 0.0);

}  // namespace npukit
