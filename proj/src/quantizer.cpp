// SPDX-License-Identifier: Apache-2.0
#include "npukit/quantizer.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "npukit/errors.hpp"

namespace npukit {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// params

std::int64_t QuantParams::qmin() const {
    return scheme == QuantScheme::symmetric ? -qmax() : 0;
}

std::int64_t QuantParams::qmax() const {
    const std::int64_t full = (std::int64_t{1} << bit_width) - 1;
    return scheme == QuantScheme::symmetric ? (std::int64_t{1} << (bit_width - 1)) - 1
                                            : full;
}

ElementType QuantParams::storage_dtype() const {
    return bit_width == 8 ? ElementType::int8 : ElementType::int16;
}

void QuantParams::validate() const {
    if (bit_width != 8 && bit_width != 16)
        throw TypeError("bit_width must be 8 or 16");
    if (scales.empty() || scales.size() != zero_points.size())
        throw TypeError("scales and zero_points must be non-empty and equal-sized");
    for (double s : scales)
        if (!(s > 0.0)) throw TypeError("quantization scales must be positive");
    for (std::int64_t zp : zero_points) {
        if (scheme == QuantScheme::symmetric && zp != 0)
            throw TypeError("symmetric zero points must be 0");
        if (zp < qmin() || zp > qmax())
            throw TypeError("zero point outside the code range");
    }
    if (granularity == Granularity::per_channel && axis < 0)
        throw TypeError("per_channel params need a non-negative axis");
    if (granularity == Granularity::per_tensor && scales.size() != 1)
        throw TypeError("per_tensor params carry exactly one group");
}

namespace {

std::int64_t round_half_even(double v) {
    // FE_TONEAREST is the default mode and is never changed in this library.
    return static_cast<std::int64_t>(std::nearbyint(v));
}

struct GroupIndexer {
    std::uint64_t axis_dim = 1;
    std::uint64_t axis_stride = 1;

    static GroupIndexer make(const Tensor& t, Granularity g, int axis) {
        GroupIndexer idx;
        if (g == Granularity::per_tensor) return idx;
        if (axis < 0 || static_cast<std::size_t>(axis) >= t.rank())
            throw ShapeError("per_channel axis out of range for tensor rank " +
                             std::to_string(t.rank()));
        idx.axis_dim = t.dim(axis);
        idx.axis_stride = 1;
        for (std::size_t i = axis + 1; i < t.rank(); ++i) idx.axis_stride *= t.dim(i);
        return idx;
    }

    std::uint64_t group_of(std::uint64_t flat) const {
        return (flat / axis_stride) % axis_dim;
    }
};

void check_group_count(const Tensor& t, const QuantParams& p) {
    const std::uint64_t expected =
        p.granularity == Granularity::per_tensor ? 1 : t.dim(p.axis);
    if (p.groups() != expected)
        throw ShapeError("param group count " + std::to_string(p.groups()) +
                         " does not match tensor axis size " + std::to_string(expected));
}

void store_code(Tensor& t, std::uint64_t i, std::int64_t code, const QuantParams& p) {
    if (p.scheme == QuantScheme::symmetric) {
        t.set_int(i, code);
        return;
    }
    if (p.bit_width == 8) {
        t.set_int(i, static_cast<std::int8_t>(static_cast<std::uint8_t>(code)));
    } else {
        t.set_int(i, static_cast<std::int16_t>(static_cast<std::uint16_t>(code)));
    }
}

}  // namespace

// Asymmetric codes use the unsigned side of the storage type; reinterpret
// the stored bits accordingly.
std::int64_t quantized_code(const Tensor& q, std::uint64_t i, const QuantParams& p) {
    const std::int64_t raw = q.value_as_int(i);
    if (p.scheme == QuantScheme::symmetric) return raw;
    return p.bit_width == 8 ? static_cast<std::uint8_t>(raw)
                            : static_cast<std::uint16_t>(raw);
}

// ---------------------------------------------------------------------------
// calibration

CalibrationStats calibrate(std::span<const Tensor> samples, Granularity granularity,
                           int axis) {
    if (samples.empty()) throw Error("calibration needs at least one sample");
    const Tensor& first = samples.front();
    if (!is_floating(first.dtype()))
        throw TypeError("calibration samples must be floating");
    const auto idx = GroupIndexer::make(first, granularity, axis);
    const std::uint64_t groups =
        granularity == Granularity::per_tensor ? 1 : idx.axis_dim;

    CalibrationStats stats;
    stats.granularity = granularity;
    stats.axis = granularity == Granularity::per_channel ? axis : -1;
    stats.min_vals.assign(groups, std::numeric_limits<double>::infinity());
    stats.max_vals.assign(groups, -std::numeric_limits<double>::infinity());

    for (const Tensor& s : samples) {
        if (!s.same_shape(first) || s.dtype() != first.dtype())
            throw ShapeError("calibration samples must share shape and dtype");
        for (std::uint64_t i = 0; i < s.size(); ++i) {
            const std::uint64_t g = idx.group_of(i);
            const double v = s.value_as_float(i);
            stats.min_vals[g] = std::min(stats.min_vals[g], v);
            stats.max_vals[g] = std::max(stats.max_vals[g], v);
        }
        ++stats.sample_count;
    }
    return stats;
}

QuantParams make_params(const CalibrationStats& stats, QuantScheme scheme,
                        int bit_width) {
    if (stats.sample_count == 0 || stats.min_vals.empty())
        throw Error("make_params needs populated calibration stats");
    QuantParams p;
    p.scheme = scheme;
    p.bit_width = bit_width;
    p.granularity = stats.granularity;
    p.axis = stats.axis;
    const std::size_t groups = stats.min_vals.size();
    p.scales.resize(groups);
    p.zero_points.resize(groups);

    for (std::size_t g = 0; g < groups; ++g) {
        const double lo = stats.min_vals[g], hi = stats.max_vals[g];
        if (lo > hi) throw Error("calibration stats have min > max");
        if (scheme == QuantScheme::symmetric) {
            const double amax = std::max(std::abs(lo), std::abs(hi));
            p.scales[g] = amax > 0.0 ? amax / static_cast<double>(p.qmax()) : 1.0;
            p.zero_points[g] = 0;
        } else {
            // Extend the range so zero is exactly representable; otherwise
            // the zero point would leave the code range for one-sided
            // distributions.
            const double ext_lo = std::min(lo, 0.0), ext_hi = std::max(hi, 0.0);
            const double span = ext_hi - ext_lo;
            p.scales[g] =
                span > 0.0 ? span / static_cast<double>((std::int64_t{1} << bit_width) - 1)
                           : 1.0;
            const std::int64_t zp = round_half_even(-ext_lo / p.scales[g]);
            p.zero_points[g] = std::clamp(zp, p.qmin(), p.qmax());
        }
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// quantize / dequantize

Tensor quantize(const Tensor& t, const QuantParams& p) {
    if (!is_floating(t.dtype())) throw TypeError("quantize input must be floating");
    p.validate();
    check_group_count(t, p);
    const auto idx = GroupIndexer::make(t, p.granularity, p.axis);
    Tensor out(t.shape(), p.storage_dtype());
    for (std::uint64_t i = 0; i < t.size(); ++i) {
        const std::uint64_t g = idx.group_of(i);
        const double x = t.value_as_float(i);
        const std::int64_t q =
            round_half_even(x / p.scales[g]) + p.zero_points[g];
        store_code(out, i, std::clamp(q, p.qmin(), p.qmax()), p);
    }
    return out;
}

Tensor dequantize(const Tensor& q, const QuantParams& p) {
    p.validate();
    if (q.dtype() != p.storage_dtype())
        throw TypeError("quantized tensor dtype does not match params bit width");
    check_group_count(q, p);
    const auto idx = GroupIndexer::make(q, p.granularity, p.axis);
    Tensor out(q.shape(), ElementType::fp32);
    for (std::uint64_t i = 0; i < q.size(); ++i) {
        const std::uint64_t g = idx.group_of(i);
        const double code = static_cast<double>(quantized_code(q, i, p) - p.zero_points[g]);
        out.set_float(i, static_cast<float>(code * p.scales[g]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// integer matmul

Tensor qmatmul(const Tensor& wq, const Tensor& xq, const QuantParams& wp,
               const QuantParams& xp) {
    wp.validate();
    xp.validate();
    if (wp.scheme != QuantScheme::symmetric)
        throw TypeError("qmatmul weights must be symmetric");
    if (wp.bit_width != 8 || wq.dtype() != ElementType::int8)
        throw TypeError("qmatmul weights must be INT8");
    if (xp.bit_width != 16 || xq.dtype() != ElementType::int16)
        throw TypeError("qmatmul activations must be INT16");
    if (xp.granularity != Granularity::per_tensor)
        throw TypeError("qmatmul activations must be per-tensor quantized");
    if (wq.rank() != 2 || xq.rank() != 2)
        throw ShapeError("qmatmul operands must be rank 2");
    if (wq.dim(1) != xq.dim(0))
        throw ShapeError("qmatmul inner dimensions differ");
    if (wp.granularity == Granularity::per_channel && wp.axis != 0)
        throw TypeError("qmatmul per-channel weights must use axis 0 (rows)");
    check_group_count(wq, wp);

    const std::uint64_t m = wq.dim(0), k = wq.dim(1), n = xq.dim(1);
    const auto w = wq.data<std::int8_t>();
    const std::int64_t x_zp = xp.zero_points[0];
    const double x_scale = xp.scales[0];

    // Zero-point correction: sum_t w[i][t] * (x[t][j] - zp)
    //                       = sum_t w[i][t]*x[t][j] - zp * rowsum(w[i]).
    std::vector<std::int64_t> row_sums(m, 0);
    for (std::uint64_t i = 0; i < m; ++i)
        for (std::uint64_t t = 0; t < k; ++t) row_sums[i] += w[i * k + t];

    Tensor out({m, n}, ElementType::fp32);
    for (std::uint64_t i = 0; i < m; ++i) {
        const double w_scale =
            wp.granularity == Granularity::per_channel ? wp.scales[i] : wp.scales[0];
        for (std::uint64_t j = 0; j < n; ++j) {
            std::int64_t acc = 0;
            for (std::uint64_t t = 0; t < k; ++t) {
                const std::int64_t prod =
                    static_cast<std::int64_t>(w[i * k + t]) * quantized_code(xq, t * n + j, xp);
                if (__builtin_add_overflow(acc, prod, &acc))
                    throw OverflowError("qmatmul 64-bit accumulator overflow");
            }
            const double corrected = static_cast<double>(acc - x_zp * row_sums[i]);
            out.set_float(i * n + j,
                          static_cast<float>(corrected * w_scale * x_scale));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// fidelity

FidelityMetrics fidelity_metrics(const Tensor& reference, const Tensor& test) {
    if (!reference.same_shape(test))
        throw ShapeError("fidelity_metrics operands must share a shape");
    double dot = 0.0, ref_sq = 0.0, test_sq = 0.0, err_sq = 0.0, max_err = 0.0;
    for (std::uint64_t i = 0; i < reference.size(); ++i) {
        const double r = reference.value_as_float(i);
        const double t = test.value_as_float(i);
        dot += r * t;
        ref_sq += r * r;
        test_sq += t * t;
        err_sq += (r - t) * (r - t);
        max_err = std::max(max_err, std::abs(r - t));
    }
    if (ref_sq == 0.0)
        throw Error("fidelity undefined: reference has zero norm");

    FidelityMetrics m;
    m.cosine_similarity = test_sq == 0.0 ? 0.0 : dot / std::sqrt(ref_sq * test_sq);
    m.snr_db = err_sq == 0.0 ? std::numeric_limits<double>::infinity()
                             : 10.0 * std::log10(ref_sq / err_sq);
    m.max_abs_err = max_err;
    return m;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string scheme_name(QuantScheme s) {
    return s == QuantScheme::symmetric ? "symmetric" : "asymmetric";
}

std::string granularity_name(Granularity g) {
    return g == Granularity::per_tensor ? "per_tensor" : "per_channel";
}

}  // namespace

std::string quant_params_to_json_text(const QuantParams& p) {
    ordered_json j;
    j["scheme"] = scheme_name(p.scheme);
    j["bit_width"] = p.bit_width;
    j["granularity"] = granularity_name(p.granularity);
    if (p.granularity == Granularity::per_channel) j["axis"] = p.axis;
    j["scales"] = p.scales;
    j["zero_points"] = p.zero_points;
    return j.dump(2);
}

QuantParams quant_params_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("quant params JSON parse error: ") + e.what());
    }
    QuantParams p;
    try {
        const std::string scheme = j.at("scheme").get<std::string>();
        if (scheme == "symmetric") p.scheme = QuantScheme::symmetric;
        else if (scheme == "asymmetric") p.scheme = QuantScheme::asymmetric;
        else throw IoError("unknown scheme '" + scheme + "'");
        p.bit_width = j.at("bit_width").get<int>();
        const std::string gran = j.at("granularity").get<std::string>();
        if (gran == "per_tensor") p.granularity = Granularity::per_tensor;
        else if (gran == "per_channel") p.granularity = Granularity::per_channel;
        else throw IoError("unknown granularity '" + gran + "'");
        if (p.granularity == Granularity::per_channel) p.axis = j.at("axis").get<int>();
        p.scales = j.at("scales").get<std::vector<double>>();
        p.zero_points = j.at("zero_points").get<std::vector<std::int64_t>>();
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(std::string("quant params JSON: ") + e.what());
    }
    try {
        p.validate();
    } catch (const Error& e) {
        throw IoError(std::string("quant params JSON: ") + e.what());
    }
    return p;
}

QuantParams load_quant_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open quant params " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return quant_params_from_json_text(text);
}

// ---------------------------------------------------------------------------
// precision policy

std::string to_string(Precision p) {
    switch (p) {
        case Precision::fp32: return "fp32";
        case Precision::fp16: return "fp16";
        case Precision::w8a16: return "w8a16";
    }
    return "?";
}

std::optional<Precision> precision_from_string(const std::string& name) {
    if (name == "fp32") return Precision::fp32;
    if (name == "fp16") return Precision::fp16;
    if (name == "w8a16") return Precision::w8a16;
    return std::nullopt;
}

Precision PrecisionPolicy::for_stage(const std::string& stage_name) const {
    if (stage_name == "encoder") return encoder;
    if (stage_name == "unet") return unet;
    if (stage_name == "decoder") return decoder;
    throw Error("unknown stage '" + stage_name + "' in precision policy");
}

}  // namespace npukit
