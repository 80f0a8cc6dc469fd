// SPDX-License-Identifier: Apache-2.0
#include "npukit/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "npukit/mem_model.hpp"
#include "npukit/pipeline.hpp"
#include "npukit/quantizer.hpp"
#include "npukit/tile_planner.hpp"

namespace npukit {

namespace {

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot open " + out_path + " for writing");
    f << text;
    if (!f) throw IoError("write failed: " + out_path);
}

ElementType parse_dtype(const std::string& name) {
    const auto dt = element_type_from_string(name);
    if (!dt) throw Error("unknown dtype '" + name + "'");
    return *dt;
}

struct DimsArgs {
    std::uint64_t n_q = 0, n_k = 0, d = 0;
    std::string dtype = "fp16";

    void attach(CLI::App* cmd) {
        cmd->add_option("--nq", n_q, "query rows")->required();
        cmd->add_option("--nk", n_k, "key/value rows")->required();
        cmd->add_option("--d", d, "feature dimension")->required();
        cmd->add_option("--dtype", dtype, "element type (fp32|fp16|int8|int16|int32)")
            ->capture_default_str();
    }
};

PrecisionPolicy policy_for_mode(const std::string& mode) {
    if (mode == "fp32") return PrecisionPolicy::uniform(Precision::fp32);
    if (mode == "fp16") return PrecisionPolicy::uniform(Precision::fp16);
    if (mode == "w8a16") return PrecisionPolicy{};  // fp16 ends, w8a16 unet
    throw Error("unknown precision mode '" + mode + "'");
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"attention tiling planner, DMA/compute traffic simulator, and "
                 "mixed-precision pipeline harness"};
    app.require_subcommand(1);

    // --- plan ---------------------------------------------------------
    auto* plan_cmd = app.add_subcommand("plan", "choose a tile plan for one attention block");
    DimsArgs plan_dims;
    plan_dims.attach(plan_cmd);
    std::string plan_profile, plan_out;
    plan_cmd->add_option("--profile", plan_profile, "hardware profile JSON")->required();
    plan_cmd->add_option("--out", plan_out, "output path (default stdout)");
    plan_cmd->callback([&] {
        const HardwareProfile hw = load_profile(plan_profile);
        const TilePlan plan =
            plan_tiles(plan_dims.n_q, plan_dims.n_k, plan_dims.d,
                       parse_dtype(plan_dims.dtype), hw);
        emit(tile_plan_to_json_text(plan), plan_out);
    });

    // --- traffic ------------------------------------------------------
    auto* traffic_cmd =
        app.add_subcommand("traffic", "simulate DMA/compute traffic for one block");
    DimsArgs traffic_dims;
    traffic_dims.attach(traffic_cmd);
    std::string traffic_profile, traffic_out, traffic_format = "csv";
    bool traffic_mlt = false, traffic_fused = false, traffic_v_resident = false;
    double traffic_epsilon = 0.04;
    traffic_cmd->add_option("--profile", traffic_profile, "hardware profile JSON")->required();
    traffic_cmd->add_flag("--mlt", traffic_mlt,
                          "tile the block; report is relative to the untiled baseline");
    traffic_cmd->add_flag("--fused", traffic_fused,
                          "apply kernel fusion to the untiled graph");
    traffic_cmd->add_flag("--value-resident", traffic_v_resident,
                          "keep V in SRAM across tiles instead of reloading per tile");
    traffic_cmd->add_option("--epsilon", traffic_epsilon,
                            "per-tile compute overhead factor")
        ->capture_default_str();
    traffic_cmd->add_option("--format", traffic_format, "csv|json")->capture_default_str();
    traffic_cmd->add_option("--out", traffic_out, "output path (default stdout)");
    traffic_cmd->callback([&] {
        const HardwareProfile hw = load_profile(traffic_profile);
        const ElementType dtype = parse_dtype(traffic_dims.dtype);
        const AttentionDims dims{traffic_dims.n_q, traffic_dims.n_k, traffic_dims.d};
        GraphOptions opts;
        opts.compute_overhead = traffic_epsilon;
        opts.value_resident = traffic_v_resident;

        TrafficReport report;
        if (traffic_mlt) {
            const TilePlan plan = plan_tiles(dims.n_q, dims.n_k, dims.d, dtype, hw);
            const auto untiled = simulate(build_attention_graph(dims, dtype), hw);
            auto graph = build_attention_graph(dims, dtype, plan, opts);
            if (traffic_fused) graph = fuse_attention(graph);
            report = simulate(graph, hw, untiled.total_time_us, "untiled");
        } else {
            auto graph = build_attention_graph(dims, dtype);
            if (traffic_fused) graph = fuse_attention(graph);
            report = simulate(graph, hw);
        }
        if (traffic_format == "json")
            emit(traffic_report_to_json_text(report), traffic_out);
        else if (traffic_format == "csv")
            emit(traffic_report_to_csv(report), traffic_out);
        else
            throw Error("unknown format '" + traffic_format + "'");
    });

    // --- run ----------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "execute a model descriptor end to end");
    std::string run_model, run_profile, run_out, run_outputs_dir;
    std::string run_precision = "w8a16", run_format = "json";
    std::uint64_t run_steps = 1, run_seed = 0;
    bool run_mlt = false;
    run_cmd->add_option("--model", run_model,
                        "model descriptor JSON (default: built-in sd-proxy)");
    run_cmd->add_option("--profile", run_profile, "hardware profile JSON")->required();
    run_cmd->add_option("--steps", run_steps, "unet passes")->capture_default_str();
    run_cmd->add_flag("--mlt", run_mlt, "tile unet attention blocks");
    run_cmd->add_option("--precision", run_precision, "fp32|fp16|w8a16")
        ->capture_default_str();
    run_cmd->add_option("--seed", run_seed, "input seed")->capture_default_str();
    run_cmd->add_option("--format", run_format, "json|csv")->capture_default_str();
    run_cmd->add_option("--out", run_out, "report path (default stdout)");
    run_cmd->add_option("--outputs-dir", run_outputs_dir,
                        "dump block outputs as TNSR1 files (required for compare)");
    run_cmd->callback([&] {
        const ModelDescriptor model =
            run_model.empty() ? sd_proxy_descriptor() : load_descriptor(run_model);
        RunConfig cfg;
        cfg.hw = load_profile(run_profile);
        cfg.steps = run_steps;
        cfg.mlt = run_mlt;
        cfg.precision = policy_for_mode(run_precision);
        cfg.seed = run_seed;
        PipelineRun run = run_pipeline(model, cfg);
        if (!run_outputs_dir.empty()) dump_outputs(run, run_outputs_dir);
        if (run_format == "json")
            emit(bench_report_to_json_text(run.report), run_out);
        else if (run_format == "csv")
            emit(bench_report_to_csv(run.report), run_out);
        else
            throw Error("unknown format '" + run_format + "'");
    });

    // --- quantize -----------------------------------------------------
    auto* quant_cmd = app.add_subcommand("quantize", "quantize a TNSR1 tensor file");
    std::string quant_in, quant_out, quant_params_path, quant_params_out;
    std::string quant_scheme = "symmetric", quant_granularity = "per_tensor";
    int quant_bits = 8, quant_axis = 0;
    quant_cmd->add_option("input", quant_in, "input tensor (floating)")->required();
    quant_cmd->add_option("--out", quant_out, "output tensor path")->required();
    auto* params_opt =
        quant_cmd->add_option("--params", quant_params_path, "use existing params JSON");
    quant_cmd->add_option("--scheme", quant_scheme, "symmetric|asymmetric")
        ->capture_default_str()
        ->excludes(params_opt);
    quant_cmd->add_option("--bits", quant_bits, "8|16")->capture_default_str();
    quant_cmd->add_option("--granularity", quant_granularity, "per_tensor|per_channel")
        ->capture_default_str();
    quant_cmd->add_option("--axis", quant_axis, "per_channel axis")->capture_default_str();
    quant_cmd->add_option("--params-out", quant_params_out,
                          "write the (derived or given) params JSON here");
    quant_cmd->callback([&] {
        const Tensor input = read_tnsr(quant_in);
        QuantParams params;
        if (!quant_params_path.empty()) {
            params = load_quant_params(quant_params_path);
        } else {
            const Granularity gran = quant_granularity == "per_channel"
                                         ? Granularity::per_channel
                                         : Granularity::per_tensor;
            if (quant_granularity != "per_tensor" && quant_granularity != "per_channel")
                throw Error("unknown granularity '" + quant_granularity + "'");
            QuantScheme scheme;
            if (quant_scheme == "symmetric") scheme = QuantScheme::symmetric;
            else if (quant_scheme == "asymmetric") scheme = QuantScheme::asymmetric;
            else throw Error("unknown scheme '" + quant_scheme + "'");
            const Tensor samples[] = {input};
            params = make_params(
                calibrate(samples, gran, gran == Granularity::per_channel ? quant_axis : -1),
                scheme, quant_bits);
        }
        write_tnsr(quantize(input, params), quant_out);
        if (!quant_params_out.empty())
            emit(quant_params_to_json_text(params), quant_params_out);
    });

    // --- compare ------------------------------------------------------
    auto* compare_cmd =
        app.add_subcommand("compare", "fidelity of one run's outputs against another's");
    std::string cmp_ref, cmp_test, cmp_out;
    compare_cmd->add_option("reference", cmp_ref, "reference run report JSON")->required();
    compare_cmd->add_option("test", cmp_test, "test run report JSON")->required();
    compare_cmd->add_option("--out", cmp_out, "output path (default stdout)");
    compare_cmd->callback([&] {
        const PipelineRun ref = load_run(cmp_ref);
        const PipelineRun test = load_run(cmp_test);
        emit(fidelity_summary_to_json_text(compare_runs(ref, test)), cmp_out);
    });

    // --- calibrate-table ----------------------------------------------
    auto* table_cmd = app.add_subcommand(
        "calibrate-table", "predict the tiled total from an untiled baseline cost table");
    std::string table_path, table_out;
    double table_v_load = 0.0, table_epsilon = 0.04;
    table_cmd->add_option("table", table_path, "baseline cost table JSON")->required();
    table_cmd->add_option("--v-load", table_v_load,
                          "replacement percentage for the value-only load")
        ->required();
    table_cmd->add_option("--epsilon", table_epsilon, "per-tile compute overhead factor")
        ->capture_default_str();
    table_cmd->add_option("--out", table_out, "output path (default stdout)");
    table_cmd->callback([&] {
        const BaselineCostTable tbl = load_baseline_table(table_path);
        const double total = apply_mlt_to_baseline(tbl, table_v_load, table_epsilon);
        nlohmann::ordered_json j;
        j["predicted_total_percent"] = total;
        j["implied_gain_percent"] = 100.0 - total;
        j["v_load_percent"] = table_v_load;
        j["compute_overhead"] = table_epsilon;
        emit(j.dump(2), table_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace npukit
