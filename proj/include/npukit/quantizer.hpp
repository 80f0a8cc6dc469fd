// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npukit/tensor.hpp"

namespace npukit {

enum class QuantScheme : std::uint8_t { symmetric, asymmetric };
enum class Granularity : std::uint8_t { per_tensor, per_channel };

/// Scales and zero points for one quantized tensor.
///
/// Code ranges follow the scheme: symmetric codes live in [-qmax, qmax]
/// with qmax = 2^(bits-1) - 1 and zero point 0; asymmetric codes live in
/// the unsigned range [0, 2^bits - 1]. Asymmetric codes are stored as raw
/// bit patterns in the signed storage tensor, so reading them back requires
/// these params (quantizer operations do this internally).
struct QuantParams {
    QuantScheme scheme = QuantScheme::symmetric;
    int bit_width = 8;  // 8 or 16
    Granularity granularity = Granularity::per_tensor;
    int axis = -1;  // per_channel only
    std::vector<double> scales;
    std::vector<std::int64_t> zero_points;

    std::int64_t qmin() const;
    std::int64_t qmax() const;
    ElementType storage_dtype() const;
    std::size_t groups() const { return scales.size(); }
    void validate() const;
};

std::string quant_params_to_json_text(const QuantParams& p);
QuantParams quant_params_from_json_text(const std::string& text);
QuantParams load_quant_params(const std::string& path);

/// Running per-group min/max over calibration samples.
struct CalibrationStats {
    Granularity granularity = Granularity::per_tensor;
    int axis = -1;
    std::vector<double> min_vals;
    std::vector<double> max_vals;
    std::uint64_t sample_count = 0;
};

/// Exact min/max per group across all samples. Samples must be non-empty,
/// floating, and share one shape.
CalibrationStats calibrate(std::span<const Tensor> samples, Granularity granularity,
                           int axis = -1);

QuantParams make_params(const CalibrationStats& stats, QuantScheme scheme,
                        int bit_width);

/// q = clamp(round_half_even(x / scale) + zero_point, code range), applied
/// per group. Out-of-range inputs clamp; that is the defined behavior.
Tensor quantize(const Tensor& t, const QuantParams& p);

/// x_hat = (q - zero_point) * scale, as FP32.
Tensor dequantize(const Tensor& q, const QuantParams& p);

/// Scheme-aware code read: symmetric codes come back signed, asymmetric
/// codes as their unsigned reinterpretation.
std::int64_t quantized_code(const Tensor& q, std::uint64_t i, const QuantParams& p);

/// Integer matmul of INT8 weights (symmetric; per-tensor or per-channel on
/// rows) with INT16 activations (per-tensor), accumulated in 64-bit, with
/// the activation zero point corrected via weight row sums. Output is FP32,
/// scaled by weight_scale * activation_scale.
Tensor qmatmul(const Tensor& wq, const Tensor& xq, const QuantParams& wp,
               const QuantParams& xp);

struct FidelityMetrics {
    double cosine_similarity = 0.0;
    double snr_db = 0.0;  // +infinity when test == reference
    double max_abs_err = 0.0;
};

/// Cosine over flattened values, 10*log10(sum ref^2 / sum (ref-test)^2),
/// and the max absolute error. Throws on a zero-norm reference.
FidelityMetrics fidelity_metrics(const Tensor& reference, const Tensor& test);

// ---------------------------------------------------------------------------
// Precision policy

enum class Precision : std::uint8_t { fp32, fp16, w8a16 };

std::string to_string(Precision p);
std::optional<Precision> precision_from_string(const std::string& name);

/// Stage precision mapping. The default mirrors the deployment split:
/// FP16 encoder/decoder, W8A16 U-Net.
struct PrecisionPolicy {
    Precision encoder = Precision::fp16;
    Precision unet = Precision::w8a16;
    Precision decoder = Precision::fp16;

    Precision for_stage(const std::string& stage_name) const;

    static PrecisionPolicy uniform(Precision p) { return {p, p, p}; }
};

}  // namespace npukit
