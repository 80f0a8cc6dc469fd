// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npukit/attention.hpp"
#include "npukit/mem_model.hpp"
#include "npukit/quantizer.hpp"
#include "npukit/tile_planner.hpp"

namespace npukit {

inline constexpr const char* kToolName = "npukit";
inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Model descriptor

struct StageSpec {
    std::string name;  // encoder | unet | decoder
    std::vector<AttentionDims> blocks;
    double fixed_cost_us = 0.0;  // non-attention cost per pass
};

struct ModelDescriptor {
    std::string name;
    std::vector<StageSpec> stages;

    void validate() const;
};

ModelDescriptor descriptor_from_json_text(const std::string& text);
ModelDescriptor load_descriptor(const std::string& path);
std::string descriptor_to_json_text(const ModelDescriptor& m);

/// The bundled illustrative descriptor: fixed-cost encoder/decoder around a
/// four-block cross-attention stage shaped after common latent-diffusion
/// feature resolutions.
ModelDescriptor sd_proxy_descriptor();

// ---------------------------------------------------------------------------
// Run configuration and reports

struct RunConfig {
    std::uint64_t steps = 1;  // denoising iterations of the unet stage
    bool mlt = false;
    PrecisionPolicy precision{};
    HardwareProfile hw{};
    std::uint64_t seed = 0;
};

struct BlockReport {
    std::string stage;
    std::uint32_t index = 0;  // within its stage
    AttentionDims dims;
    ElementType traffic_dtype = ElementType::fp32;
    Precision precision = Precision::fp32;
    std::uint64_t tile_count = 0;  // 0 = untiled
    TrafficReport traffic;
    std::string output_file;  // set when outputs are dumped
};

struct StageReport {
    std::string name;
    double fixed_cost_us = 0.0;
    double per_pass_us = 0.0;
    std::uint64_t passes = 1;
    double time_us = 0.0;
};

struct BenchReport {
    std::string descriptor_name;
    std::string descriptor_hash;  // fnv1a over canonical descriptor JSON
    std::string profile_hash;     // fnv1a over canonical profile JSON
    std::uint64_t seed = 0;
    std::uint64_t steps = 1;
    bool mlt = false;
    PrecisionPolicy precision{};
    std::vector<StageReport> stages;
    std::vector<BlockReport> blocks;
    double total_time_us = 0.0;
};

/// A finished run: the modeled-time report plus the numeric block outputs
/// (index-aligned with report.blocks).
struct PipelineRun {
    BenchReport report;
    std::vector<Tensor> outputs;
};

/// Executes every attention block numerically on seeded inputs under the
/// stage's precision, simulates its DMA/compute traffic, and aggregates
/// modeled time. The unet stage runs `steps` passes; tiling (when mlt is on)
/// applies to the unet stage.
PipelineRun run_pipeline(const ModelDescriptor& m, const RunConfig& c);

std::string bench_report_to_json_text(const BenchReport& r);
std::string bench_report_to_csv(const BenchReport& r);

/// Writes each block output as "<stage>_<index>.tnsr" under dir and records
/// the file names in the report.
void dump_outputs(PipelineRun& run, const std::string& dir);

/// Loads a dumped report plus its output tensors (paths resolved relative
/// to the report file).
PipelineRun load_run(const std::string& report_path);

// ---------------------------------------------------------------------------
// Fidelity comparison

struct BlockFidelity {
    std::string stage;
    std::uint32_t index = 0;
    FidelityMetrics metrics;
};

struct FidelitySummary {
    std::vector<BlockFidelity> per_block;
    FidelityMetrics aggregate;  // over all block outputs pooled
};

/// Requires both runs to share descriptor, seed, and step count.
FidelitySummary compare_runs(const PipelineRun& reference, const PipelineRun& test);

std::string fidelity_summary_to_json_text(const FidelitySummary& s);

// ---------------------------------------------------------------------------
// Helpers

/// Deterministic uniform values in [-1, 1), independent of platform RNG
/// distribution details.
Tensor seeded_uniform(std::vector<std::uint64_t> shape, std::uint64_t seed);

/// Mixed-precision attention: INT8 per-channel symmetric weights (K, V),
/// INT16 per-tensor asymmetric activations (Q and the softmax output), FP32
/// softmax in between. Inputs must be FP32; params are min/max calibrated
/// from the tensors themselves.
Tensor w8a16_attention(const AttentionInputs& in);

std::uint64_t fnv1a64(std::string_view text);
std::string hash_hex(std::uint64_t h);

}  // namespace npukit
