// SPDX-License-Identifier: Apache-2.0
#include "npukit/mem_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace npukit {

using nlohmann::ordered_json;

std::string to_string(OpKind k) {
    switch (k) {
        case OpKind::dma_load: return "dma_load";
        case OpKind::dma_store: return "dma_store";
        case OpKind::tensor_calc: return "tensor_calc";
        case OpKind::vector_calc: return "vector_calc";
    }
    return "?";
}

std::string to_string(Operand o) {
    switch (o) {
        case Operand::query: return "query";
        case Operand::key: return "key";
        case Operand::value: return "value";
        case Operand::scores: return "scores";
        case Operand::probs: return "probs";
        case Operand::output: return "output";
    }
    return "?";
}

bool OpNode::touches(Operand o) const {
    return std::find(roles.begin(), roles.end(), o) != roles.end();
}

std::uint64_t AttentionGraph::dma_bytes_for(Operand o) const {
    std::uint64_t total = 0;
    for (const auto& n : nodes)
        if (n.is_dma() && n.touches(o)) total += n.bytes_moved;
    return total;
}

// ---------------------------------------------------------------------------
// graph construction

namespace {

OpNode dma(OpKind kind, std::vector<Operand> roles, std::uint64_t bytes,
           std::uint64_t transfers, std::string label) {
    OpNode n;
    n.kind = kind;
    n.roles = std::move(roles);
    n.bytes_moved = bytes;
    n.transfers = transfers;
    n.label = std::move(label);
    return n;
}

OpNode calc(OpKind kind, std::vector<Operand> roles, double work, std::string label) {
    OpNode n;
    n.kind = kind;
    n.roles = std::move(roles);
    n.work = work;
    n.label = std::move(label);
    return n;
}

}  // namespace

AttentionGraph build_attention_graph(AttentionDims dims, ElementType dtype,
                                     std::optional<TilePlan> plan,
                                     GraphOptions options) {
    if (dims.n_q == 0 || dims.n_k == 0 || dims.d == 0)
        throw ShapeError("attention graph dimensions must be positive");
    if (options.compute_overhead < 0.0)
        throw Error("compute_overhead must be non-negative");
    if (plan) validate_partition(plan->spans, dims.n_q);

    const std::uint64_t w = byte_width(dtype);
    const std::uint64_t q_bytes = dims.n_q * dims.d * w;
    const std::uint64_t k_bytes = dims.n_k * dims.d * w;
    const std::uint64_t v_bytes = k_bytes;
    const std::uint64_t score_bytes = dims.n_q * dims.n_k * w;
    const std::uint64_t out_bytes = q_bytes;
    const double matmul_macs =
        static_cast<double>(dims.n_q) * static_cast<double>(dims.n_k) *
        static_cast<double>(dims.d);
    const double softmax_elems =
        static_cast<double>(dims.n_q) * static_cast<double>(dims.n_k);

    AttentionGraph g;
    g.dims = dims;
    g.dtype = dtype;

    if (!plan) {
        g.nodes = {
            dma(OpKind::dma_load, {Operand::query, Operand::key}, q_bytes + k_bytes, 1,
                "DMA load: query, key"),
            calc(OpKind::tensor_calc, {Operand::query, Operand::key, Operand::scores},
                 matmul_macs, "tensor calc: query x key^T -> scores"),
            dma(OpKind::dma_store, {Operand::scores}, score_bytes, 1, "DMA store: scores"),
            dma(OpKind::dma_load, {Operand::scores}, score_bytes, 1, "DMA load: scores"),
            calc(OpKind::vector_calc, {Operand::scores, Operand::probs}, softmax_elems,
                 "vector calc: softmax(scores) -> probs"),
            dma(OpKind::dma_store, {Operand::probs}, score_bytes, 1, "DMA store: probs"),
            dma(OpKind::dma_load, {Operand::probs, Operand::value}, score_bytes + v_bytes,
                1, "DMA load: probs, value"),
            calc(OpKind::tensor_calc, {Operand::probs, Operand::value, Operand::output},
                 matmul_macs, "tensor calc: probs x value -> output"),
            dma(OpKind::dma_store, {Operand::output}, out_bytes, 1, "DMA store: output"),
        };
        return g;
    }

    const std::uint64_t tiles = plan->tile_count;
    const double overhead = 1.0 + options.compute_overhead;
    const std::uint64_t v_loads = options.value_resident ? 1 : tiles;
    g.tiled_with = std::move(plan);
    g.nodes = {
        dma(OpKind::dma_load, {Operand::query, Operand::key}, q_bytes + k_bytes,
            tiles + 1, "DMA load: query, key"),
        calc(OpKind::tensor_calc, {Operand::query, Operand::key, Operand::scores},
             matmul_macs * overhead, "tensor calc: query x key^T -> scores"),
        calc(OpKind::vector_calc, {Operand::scores, Operand::probs},
             softmax_elems * overhead, "vector calc: softmax(scores) -> probs"),
        dma(OpKind::dma_load, {Operand::value}, v_bytes * v_loads, v_loads,
            "DMA load: value"),
        calc(OpKind::tensor_calc, {Operand::probs, Operand::value, Operand::output},
             matmul_macs * overhead, "tensor calc: probs x value -> output"),
        dma(OpKind::dma_store, {Operand::output}, out_bytes, tiles, "DMA store: output"),
    };
    return g;
}

AttentionGraph fuse_attention(const AttentionGraph& g) {
    AttentionGraph out;
    out.dims = g.dims;
    out.dtype = g.dtype;
    out.tiled_with = g.tiled_with;
    for (const auto& n : g.nodes) {
        if (n.is_dma() && (n.touches(Operand::scores) || n.touches(Operand::probs))) {
            // Intermediates stay on chip. A combined probs+value load keeps
            // its value part; pure score/prob spills disappear.
            if (n.kind == OpKind::dma_load && n.touches(Operand::value)) {
                const std::uint64_t v_bytes =
                    g.dims.n_k * g.dims.d * byte_width(g.dtype);
                out.nodes.push_back(dma(OpKind::dma_load, {Operand::value}, v_bytes,
                                        n.transfers, "DMA load: value"));
            }
            continue;
        }
        out.nodes.push_back(n);
    }
    return out;
}

Tensor execute_graph(const AttentionGraph& g, const AttentionInputs& in) {
    in.validate();
    if (in.n_q() != g.dims.n_q || in.n_k() != g.dims.n_k || in.d() != g.dims.d)
        throw ShapeError("attention inputs do not match graph dimensions");
    const bool spills_scores = std::any_of(
        g.nodes.begin(), g.nodes.end(), [](const OpNode& n) {
            return n.is_dma() && (n.touches(Operand::scores) || n.touches(Operand::probs));
        });
    if (spills_scores) return attention_reference(in);
    if (g.tiled_with) return attention_tiled(in, *g.tiled_with);
    // Fused but untiled: the whole block is one on-chip region.
    TilePlan single;
    single.spans = {{0, g.dims.n_q}};
    single.tile_count = 1;
    return attention_tiled(in, single);
}

// ---------------------------------------------------------------------------
// simulation

namespace {

const char* engine_of(OpKind k) {
    switch (k) {
        case OpKind::tensor_calc: return "tensor";
        case OpKind::vector_calc: return "vector";
        default: return "dma";
    }
}

double node_time_us(const OpNode& n, const HardwareProfile& hw) {
    switch (n.kind) {
        case OpKind::dma_load:
        case OpKind::dma_store:
            return static_cast<double>(n.transfers) * hw.dma_setup_us +
                   static_cast<double>(n.bytes_moved) / hw.dram_bandwidth_bytes_per_us;
        case OpKind::tensor_calc:
            return n.work / hw.tensor_engine_macs_per_us;
        case OpKind::vector_calc:
            return n.work / hw.vector_engine_elems_per_us;
    }
    return 0.0;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

TrafficReport simulate(const AttentionGraph& g, const HardwareProfile& hw,
                       std::optional<double> baseline_total_us,
                       std::string baseline_name) {
    hw.validate();
    TrafficReport r;
    r.rows.reserve(g.nodes.size());
    double total = 0.0;
    for (const auto& n : g.nodes) {
        TrafficRow row;
        row.label = n.label;
        row.bytes = n.bytes_moved;
        row.engine = engine_of(n.kind);
        row.time_us = node_time_us(n, hw);
        total += row.time_us;
        r.rows.push_back(std::move(row));
    }
    r.total_time_us = total;
    const double base = baseline_total_us.value_or(total);
    r.baseline = baseline_total_us ? std::move(baseline_name) : "self";
    for (auto& row : r.rows) row.relative_pct = row.time_us / base * 100.0;
    r.total_relative_pct = total / base * 100.0;
    return r;
}

std::string traffic_report_to_csv(const TrafficReport& r) {
    std::string out = "label,bytes,engine,time_us,relative_pct\n";
    for (const auto& row : r.rows) {
        out += csv_escape(row.label) + ',' + std::to_string(row.bytes) + ',' +
               row.engine + ',' + format_double(row.time_us) + ',' +
               format_double(row.relative_pct) + '\n';
    }
    std::uint64_t total_bytes = 0;
    for (const auto& row : r.rows) total_bytes += row.bytes;
    out += "total," + std::to_string(total_bytes) + ",," +
           format_double(r.total_time_us) + ',' + format_double(r.total_relative_pct) +
           '\n';
    return out;
}

std::string traffic_report_to_json_text(const TrafficReport& r) {
    ordered_json j;
    j["baseline"] = r.baseline;
    auto rows = ordered_json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"label", row.label},
                        {"bytes", row.bytes},
                        {"engine", row.engine},
                        {"time_us", row.time_us},
                        {"relative_pct", row.relative_pct}});
    }
    j["rows"] = std::move(rows);
    j["total_time_us"] = r.total_time_us;
    j["total_relative_pct"] = r.total_relative_pct;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// baseline cost table

const std::array<std::string, 9>& BaselineCostTable::row_labels() {
    static const std::array<std::string, 9> labels = {
        "DMA load: query, key",
        "tensor calc: query x key^T -> scores",
        "DMA store: scores",
        "DMA load: scores",
        "vector calc: softmax(scores) -> probs",
        "DMA store: probs",
        "DMA load: probs, value",
        "tensor calc: probs x value -> output",
        "DMA store: output",
    };
    return labels;
}

double BaselineCostTable::sum() const {
    double s = 0.0;
    for (double p : percents) s += p;
    return s;
}

void BaselineCostTable::validate() const {
    for (double p : percents)
        if (p < 0.0) throw Error("baseline table percentages must be non-negative");
    if (std::abs(sum() - 100.0) > 0.2)
        throw Error("baseline table percentages sum to " + std::to_string(sum()) +
                    ", expected 100 +- 0.2");
}

BaselineCostTable baseline_table_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("baseline table JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("percents") || !j["percents"].is_array())
        throw IoError("baseline table JSON must contain a 'percents' array");
    const auto& arr = j["percents"];
    if (arr.size() != 9)
        throw IoError("baseline table needs exactly 9 percentages, got " +
                      std::to_string(arr.size()));
    BaselineCostTable tbl;
    for (std::size_t i = 0; i < 9; ++i) {
        if (!arr[i].is_number())
            throw IoError("baseline table percents must be numbers");
        tbl.percents[i] = arr[i].get<double>();
    }
    if (j.contains("labels")) {
        const auto& labels = j["labels"];
        if (!labels.is_array() || labels.size() != 9)
            throw IoError("baseline table labels must be an array of 9 strings");
        for (std::size_t i = 0; i < 9; ++i)
            if (labels[i].get<std::string>() != BaselineCostTable::row_labels()[i])
                throw IoError("baseline table label " + std::to_string(i) +
                              " does not match the expected row schema");
    }
    try {
        tbl.validate();
    } catch (const Error& e) {
        throw IoError(std::string("baseline table: ") + e.what());
    }
    return tbl;
}

BaselineCostTable load_baseline_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open baseline table " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return baseline_table_from_json_text(text);
}

double apply_mlt_to_baseline(const BaselineCostTable& tbl, double v_load_percent,
                             double compute_overhead) {
    if (v_load_percent < 0.0 || v_load_percent > tbl.percents[6])
        throw Error("v_load_percent must lie in [0, probs+value load percent]");
    if (compute_overhead < 0.0) throw Error("compute_overhead must be non-negative");
    const double overhead = 1.0 + compute_overhead;
    // Kept rows: QK load, both matmuls, softmax, value-only load, output store.
    return tbl.percents[0] + tbl.percents[1] * overhead + tbl.percents[4] * overhead +
           v_load_percent + tbl.percents[7] * overhead + tbl.percents[8];
}

}  // namespace npukit
