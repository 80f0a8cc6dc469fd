// SPDX-License-Identifier: Apache-2.0
#include "npukit/attention.hpp"

#include <cstring>

namespace npukit {

void AttentionInputs::validate() const {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw ShapeError("attention operands must be rank 2");
    if (q.dtype() != k.dtype() || q.dtype() != v.dtype())
        throw ShapeError("attention operands must share a dtype");
    if (!is_floating(q.dtype()))
        throw TypeError("attention operands must be floating");
    if (q.dim(1) != k.dim(1))
        throw ShapeError("query and key feature dimensions differ");
    if (k.dim(0) != v.dim(0))
        throw ShapeError("key and value row counts differ");
    if (v.dim(1) != q.dim(1))
        throw ShapeError("value feature dimension differs from query");
    if (!(scale > 0.0f)) throw Error("attention scale must be positive");
}

namespace {

Tensor row_slice(const Tensor& t, std::uint64_t row_start, std::uint64_t row_count) {
    const std::uint64_t cols = t.dim(1);
    Tensor out({row_count, cols}, t.dtype());
    const std::size_t w = byte_width(t.dtype());
    std::memcpy(out.raw().data(), t.raw().data() + row_start * cols * w,
                row_count * cols * w);
    return out;
}

// One tile of the pipeline. k_t is the pre-transposed key matrix (d x n_k);
// sharing it between the reference and tiled paths keeps the per-element
// accumulation order identical.
Tensor attention_rows(const Tensor& q_rows, const Tensor& k_t, const Tensor& v,
                      float scale) {
    Tensor scores = scale_elements(matmul(q_rows, k_t, ElementType::fp32), scale);
    Tensor probs = softmax_rows(scores);
    return matmul(probs, v, ElementType::fp32);
}

}  // namespace

Tensor attention_reference(const AttentionInputs& in) {
    in.validate();
    const Tensor k_t = transpose(in.k);
    return attention_rows(in.q, k_t, in.v, in.scale);
}

Tensor attention_tiled(const AttentionInputs& in, const TilePlan& plan) {
    in.validate();
    validate_partition(plan.spans, in.n_q());

    const Tensor k_t = transpose(in.k);
    Tensor out({in.n_q(), in.d()}, in.q.dtype());
    const std::size_t w = byte_width(in.q.dtype());
    const std::uint64_t cols = in.d();
    for (const auto& span : plan.spans) {
        const Tensor q_tile = row_slice(in.q, span.row_start, span.row_count);
        const Tensor tile_out = attention_rows(q_tile, k_t, in.v, in.scale);
        std::memcpy(out.raw().data() + span.row_start * cols * w,
                    tile_out.raw().data(), span.row_count * cols * w);
    }
    return out;
}

}  // namespace npukit
