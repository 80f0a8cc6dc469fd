// SPDX-License-Identifier: Apache-2.0
#include "npukit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

namespace npukit {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// descriptor

void ModelDescriptor::validate() const {
    if (stages.empty()) throw Error("descriptor has no stages");
    std::set<std::string> seen;
    for (const auto& s : stages) {
        if (s.name != "encoder" && s.name != "unet" && s.name != "decoder")
            throw Error("stage name must be encoder, unet, or decoder; got '" +
                        s.name + "'");
        if (!seen.insert(s.name).second)
            throw Error("duplicate stage name '" + s.name + "'");
        if (s.fixed_cost_us < 0.0) throw Error("fixed_cost_us must be non-negative");
        for (const auto& b : s.blocks)
            if (b.n_q == 0 || b.n_k == 0 || b.d == 0)
                throw Error("attention block dims must be positive");
    }
}

ModelDescriptor descriptor_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("descriptor JSON parse error: ") + e.what());
    }
    ModelDescriptor m;
    try {
        m.name = j.value("name", "unnamed");
        for (const auto& js : j.at("stages")) {
            StageSpec s;
            s.name = js.at("name").get<std::string>();
            s.fixed_cost_us = js.value("fixed_cost_us", 0.0);
            if (js.contains("blocks")) {
                for (const auto& jb : js.at("blocks")) {
                    AttentionDims d;
                    d.n_q = jb.at("n_q").get<std::uint64_t>();
                    d.n_k = jb.at("n_k").get<std::uint64_t>();
                    d.d = jb.at("d").get<std::uint64_t>();
                    s.blocks.push_back(d);
                }
            }
            m.stages.push_back(std::move(s));
        }
    } catch (const std::exception& e) {
        throw IoError(std::string("descriptor JSON: ") + e.what());
    }
    try {
        m.validate();
    } catch (const Error& e) {
        throw IoError(std::string("descriptor JSON: ") + e.what());
    }
    return m;
}

ModelDescriptor load_descriptor(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open descriptor " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return descriptor_from_json_text(text);
}

std::string descriptor_to_json_text(const ModelDescriptor& m) {
    ordered_json j;
    j["name"] = m.name;
    auto stages = ordered_json::array();
    for (const auto& s : m.stages) {
        ordered_json js;
        js["name"] = s.name;
        js["fixed_cost_us"] = s.fixed_cost_us;
        auto blocks = ordered_json::array();
        for (const auto& b : s.blocks)
            blocks.push_back({{"n_q", b.n_q}, {"n_k", b.n_k}, {"d", b.d}});
        js["blocks"] = std::move(blocks);
        stages.push_back(std::move(js));
    }
    j["stages"] = std::move(stages);
    return j.dump(2);
}

ModelDescriptor sd_proxy_descriptor() {
    ModelDescriptor m;
    m.name = "sd-proxy";
    m.stages = {
        {"encoder", {}, 50.0},
        {"unet",
         {{4096, 77, 40}, {1024, 77, 80}, {256, 77, 160}, {64, 77, 160}},
         10.0},
        {"decoder", {}, 480.0},
    };
    return m;
}

// ---------------------------------------------------------------------------
// helpers

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    for (int i = 60; i >= 0; i -= 4) s += digits[(h >> i) & 0xF];
    return s;
}

Tensor seeded_uniform(std::vector<std::uint64_t> shape, std::uint64_t seed) {
    Tensor t(std::move(shape), ElementType::fp32);
    std::mt19937_64 rng(seed);
    auto out = t.data<float>();
    for (auto& v : out) {
        // 24 random bits -> [-1, 1); avoids distribution objects whose
        // output is not pinned down by the standard.
        const auto bits = static_cast<std::uint32_t>(rng() >> 40);
        v = static_cast<float>(bits) * 0x1p-23f - 1.0f;
    }
    return t;
}

namespace {

std::uint64_t block_seed(std::uint64_t run_seed, std::size_t stage_index,
                         std::size_t block_index, std::uint64_t operand) {
    std::string key = std::to_string(run_seed) + "/" + std::to_string(stage_index) +
                      "/" + std::to_string(block_index) + "/" + std::to_string(operand);
    return fnv1a64(key);
}

AttentionInputs seeded_block_inputs(const AttentionDims& dims, std::uint64_t run_seed,
                                    std::size_t stage_index, std::size_t block_index) {
    Tensor q = seeded_uniform({dims.n_q, dims.d},
                              block_seed(run_seed, stage_index, block_index, 0));
    Tensor k = seeded_uniform({dims.n_k, dims.d},
                              block_seed(run_seed, stage_index, block_index, 1));
    Tensor v = seeded_uniform({dims.n_k, dims.d},
                              block_seed(run_seed, stage_index, block_index, 2));
    return AttentionInputs::make(std::move(q), std::move(k), std::move(v));
}

}  // namespace

// ---------------------------------------------------------------------------
// W8A16 attention

namespace {

Tensor quantize_weight_per_channel(const Tensor& w, QuantParams& params_out) {
    const Tensor samples[] = {w};
    params_out = make_params(calibrate(samples, Granularity::per_channel, 0),
                             QuantScheme::symmetric, 8);
    return quantize(w, params_out);
}

Tensor quantize_activation(const Tensor& x, QuantParams& params_out) {
    const Tensor samples[] = {x};
    params_out = make_params(calibrate(samples, Granularity::per_tensor),
                             QuantScheme::asymmetric, 16);
    return quantize(x, params_out);
}

}  // namespace

Tensor w8a16_attention(const AttentionInputs& in) {
    in.validate();
    if (in.q.dtype() != ElementType::fp32)
        throw TypeError("w8a16_attention expects FP32 inputs");

    // scores^T = K . Q^T with K as the INT8 weight and Q as the INT16
    // activation; per-channel weight scales sit on the rows of the first
    // operand, which is what qmatmul supports.
    QuantParams kp, qp;
    const Tensor kq = quantize_weight_per_channel(in.k, kp);
    const Tensor qtq = quantize_activation(transpose(in.q), qp);
    Tensor scores = transpose(qmatmul(kq, qtq, kp, qp));
    scores = scale_elements(scores, in.scale);

    const Tensor probs = softmax_rows(scores);  // stays FP32

    QuantParams vp, pp;
    const Tensor vtq = quantize_weight_per_channel(transpose(in.v), vp);
    const Tensor ptq = quantize_activation(transpose(probs), pp);
    return transpose(qmatmul(vtq, ptq, vp, pp));
}

// ---------------------------------------------------------------------------
// run_pipeline

namespace {

ElementType traffic_dtype_for(Precision p) {
    switch (p) {
        case Precision::fp32: return ElementType::fp32;
        case Precision::fp16: return ElementType::fp16;
        case Precision::w8a16: return ElementType::int16;  // activation width
    }
    return ElementType::fp32;
}

Tensor execute_block(const AttentionInputs& in, Precision precision,
                     const std::optional<TilePlan>& plan) {
    switch (precision) {
        case Precision::fp32:
            return plan ? attention_tiled(in, *plan) : attention_reference(in);
        case Precision::fp16: {
            AttentionInputs half{cast(in.q, ElementType::fp16),
                                 cast(in.k, ElementType::fp16),
                                 cast(in.v, ElementType::fp16), in.scale};
            return plan ? attention_tiled(half, *plan) : attention_reference(half);
        }
        case Precision::w8a16:
            // The integer path is tile-independent: results are identical
            // with or without tiling, so it always runs untiled.
            return w8a16_attention(in);
    }
    throw Error("unreachable precision");
}

}  // namespace

PipelineRun run_pipeline(const ModelDescriptor& m, const RunConfig& c) {
    m.validate();
    c.hw.validate();
    if (c.steps == 0) throw Error("steps must be >= 1");

    PipelineRun run;
    BenchReport& r = run.report;
    r.descriptor_name = m.name;
    r.descriptor_hash = hash_hex(fnv1a64(descriptor_to_json_text(m)));
    r.profile_hash = hash_hex(fnv1a64(profile_to_json_text(c.hw)));
    r.seed = c.seed;
    r.steps = c.steps;
    r.mlt = c.mlt;
    r.precision = c.precision;

    double total = 0.0;
    for (std::size_t si = 0; si < m.stages.size(); ++si) {
        const StageSpec& stage = m.stages[si];
        const Precision prec = c.precision.for_stage(stage.name);
        const ElementType traffic_dtype = traffic_dtype_for(prec);
        const bool tile_stage = c.mlt && stage.name == "unet";

        StageReport sr;
        sr.name = stage.name;
        sr.fixed_cost_us = stage.fixed_cost_us;
        double per_pass = stage.fixed_cost_us;

        for (std::size_t bi = 0; bi < stage.blocks.size(); ++bi) {
            const AttentionDims dims = stage.blocks[bi];
            std::optional<TilePlan> plan;
            if (tile_stage)
                plan = plan_tiles(dims.n_q, dims.n_k, dims.d, traffic_dtype, c.hw);

            const AttentionGraph graph =
                build_attention_graph(dims, traffic_dtype, plan);
            BlockReport br;
            br.stage = stage.name;
            br.index = static_cast<std::uint32_t>(bi);
            br.dims = dims;
            br.traffic_dtype = traffic_dtype;
            br.precision = prec;
            br.tile_count = plan ? plan->tile_count : 0;
            br.traffic = simulate(graph, c.hw);
            per_pass += br.traffic.total_time_us;

            const AttentionInputs in = seeded_block_inputs(dims, c.seed, si, bi);
            run.outputs.push_back(execute_block(in, prec, plan));
            r.blocks.push_back(std::move(br));
        }

        sr.per_pass_us = per_pass;
        sr.passes = stage.name == "unet" ? c.steps : 1;
        sr.time_us = per_pass * static_cast<double>(sr.passes);
        total += sr.time_us;
        r.stages.push_back(std::move(sr));
    }
    r.total_time_us = total;
    return run;
}

// ---------------------------------------------------------------------------
// report serialization

namespace {

ordered_json traffic_json(const TrafficReport& t) {
    return ordered_json::parse(traffic_report_to_json_text(t));
}

ordered_json precision_json(const PrecisionPolicy& p) {
    return ordered_json{{"encoder", to_string(p.encoder)},
                        {"unet", to_string(p.unet)},
                        {"decoder", to_string(p.decoder)}};
}

PrecisionPolicy precision_from_json(const ordered_json& j) {
    PrecisionPolicy p;
    p.encoder = precision_from_string(j.at("encoder").get<std::string>()).value();
    p.unet = precision_from_string(j.at("unet").get<std::string>()).value();
    p.decoder = precision_from_string(j.at("decoder").get<std::string>()).value();
    return p;
}

}  // namespace

std::string bench_report_to_json_text(const BenchReport& r) {
    ordered_json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["descriptor"] = r.descriptor_name;
    j["descriptor_hash"] = r.descriptor_hash;
    j["profile_hash"] = r.profile_hash;
    j["seed"] = r.seed;
    j["steps"] = r.steps;
    j["mlt"] = r.mlt;
    j["precision"] = precision_json(r.precision);

    auto stages = ordered_json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"name", s.name},
                          {"fixed_cost_us", s.fixed_cost_us},
                          {"per_pass_us", s.per_pass_us},
                          {"passes", s.passes},
                          {"time_us", s.time_us}});
    }
    j["stages"] = std::move(stages);

    auto blocks = ordered_json::array();
    for (const auto& b : r.blocks) {
        ordered_json jb{{"stage", b.stage},
                        {"index", b.index},
                        {"n_q", b.dims.n_q},
                        {"n_k", b.dims.n_k},
                        {"d", b.dims.d},
                        {"traffic_dtype", to_string(b.traffic_dtype)},
                        {"precision", to_string(b.precision)},
                        {"tile_count", b.tile_count},
                        {"traffic", traffic_json(b.traffic)}};
        if (!b.output_file.empty()) jb["output_file"] = b.output_file;
        blocks.push_back(std::move(jb));
    }
    j["blocks"] = std::move(blocks);
    j["total_time_us"] = r.total_time_us;
    return j.dump(2);
}

std::string bench_report_to_csv(const BenchReport& r) {
    std::string out = "stage,passes,per_pass_us,time_us\n";
    auto fmt = [](double v) {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ptr);
    };
    for (const auto& s : r.stages)
        out += s.name + ',' + std::to_string(s.passes) + ',' + fmt(s.per_pass_us) +
               ',' + fmt(s.time_us) + '\n';
    out += "total,,," + fmt(r.total_time_us) + '\n';
    return out;
}

void dump_outputs(PipelineRun& run, const std::string& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < run.report.blocks.size(); ++i) {
        BlockReport& b = run.report.blocks[i];
        const std::string file =
            b.stage + "_" + std::to_string(b.index) + ".tnsr";
        write_tnsr(run.outputs[i], (fs::path(dir) / file).string());
        b.output_file = file;
    }
}

PipelineRun load_run(const std::string& report_path) {
    std::ifstream f(report_path);
    if (!f) throw IoError("cannot open report " + report_path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("report JSON parse error: ") + e.what());
    }

    PipelineRun run;
    BenchReport& r = run.report;
    try {
        r.descriptor_name = j.at("descriptor").get<std::string>();
        r.descriptor_hash = j.at("descriptor_hash").get<std::string>();
        r.profile_hash = j.at("profile_hash").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.steps = j.at("steps").get<std::uint64_t>();
        r.mlt = j.at("mlt").get<bool>();
        r.precision = precision_from_json(j.at("precision"));
        r.total_time_us = j.at("total_time_us").get<double>();
        const fs::path base = fs::path(report_path).parent_path();
        for (const auto& jb : j.at("blocks")) {
            BlockReport b;
            b.stage = jb.at("stage").get<std::string>();
            b.index = jb.at("index").get<std::uint32_t>();
            b.dims = {jb.at("n_q").get<std::uint64_t>(),
                      jb.at("n_k").get<std::uint64_t>(),
                      jb.at("d").get<std::uint64_t>()};
            if (!jb.contains("output_file"))
                throw IoError("report block lacks output_file; rerun with an outputs dir");
            b.output_file = jb.at("output_file").get<std::string>();
            run.outputs.push_back(read_tnsr((base / b.output_file).string()));
            r.blocks.push_back(std::move(b));
        }
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(std::string("report JSON: ") + e.what());
    }
    return run;
}

// ---------------------------------------------------------------------------
// comparison

FidelitySummary compare_runs(const PipelineRun& reference, const PipelineRun& test) {
    const BenchReport& a = reference.report;
    const BenchReport& b = test.report;
    if (a.descriptor_hash != b.descriptor_hash)
        throw Error("compare_runs: descriptor mismatch");
    if (a.seed != b.seed) throw Error("compare_runs: seed mismatch");
    if (a.steps != b.steps) throw Error("compare_runs: step count mismatch");
    if (reference.outputs.size() != test.outputs.size() ||
        reference.outputs.size() != a.blocks.size())
        throw Error("compare_runs: block output counts differ");

    FidelitySummary s;
    std::uint64_t total_elems = 0;
    for (const auto& t : reference.outputs) total_elems += t.size();
    Tensor ref_all({std::max<std::uint64_t>(total_elems, 1)}, ElementType::fp32);
    Tensor test_all({std::max<std::uint64_t>(total_elems, 1)}, ElementType::fp32);

    std::uint64_t at = 0;
    for (std::size_t i = 0; i < reference.outputs.size(); ++i) {
        const Tensor ref32 = reference.outputs[i].dtype() == ElementType::fp32
                                 ? reference.outputs[i]
                                 : cast(reference.outputs[i], ElementType::fp32);
        const Tensor test32 = test.outputs[i].dtype() == ElementType::fp32
                                  ? test.outputs[i]
                                  : cast(test.outputs[i], ElementType::fp32);
        if (!ref32.same_shape(test32))
            throw ShapeError("compare_runs: block " + std::to_string(i) +
                             " output shapes differ");
        s.per_block.push_back(
            {a.blocks[i].stage, a.blocks[i].index, fidelity_metrics(ref32, test32)});
        for (std::uint64_t e = 0; e < ref32.size(); ++e, ++at) {
            ref_all.set_float(at, ref32.value_as_float(e));
            test_all.set_float(at, test32.value_as_float(e));
        }
    }
    s.aggregate = fidelity_metrics(ref_all, test_all);
    return s;
}

std::string fidelity_summary_to_json_text(const FidelitySummary& s) {
    auto metrics_json = [](const FidelityMetrics& m) {
        ordered_json j;
        j["cosine_similarity"] = m.cosine_similarity;
        if (std::isinf(m.snr_db))
            j["snr_db"] = "inf";
        else
            j["snr_db"] = m.snr_db;
        j["max_abs_err"] = m.max_abs_err;
        return j;
    };
    ordered_json j;
    auto blocks = ordered_json::array();
    for (const auto& b : s.per_block) {
        ordered_json jb{{"stage", b.stage}, {"index", b.index}};
        jb["metrics"] = metrics_json(b.metrics);
        blocks.push_back(std::move(jb));
    }
    j["per_block"] = std::move(blocks);
    j["aggregate"] = metrics_json(s.aggregate);
    return j.dump(2);
}

}  // namespace npukit
