// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "npukit/tensor.hpp"
#include "npukit/tiling.hpp"

namespace npukit {

/// Operands of one cross-attention block: q is n_q x d, k and v are n_k x d.
/// scale multiplies the raw q.k^T scores; it defaults to 1/sqrt(d).
struct AttentionInputs {
    Tensor q;
    Tensor k;
    Tensor v;
    float scale = 0.0f;

    static AttentionInputs make(Tensor q, Tensor k, Tensor v) {
        const float s = 1.0f / std::sqrt(static_cast<float>(k.dim(1)));
        return AttentionInputs{std::move(q), std::move(k), std::move(v), s};
    }

    std::uint64_t n_q() const { return q.dim(0); }
    std::uint64_t n_k() const { return k.dim(0); }
    std::uint64_t d() const { return q.dim(1); }

    void validate() const;
};

/// softmax(scale * q.k^T) . v with the full n_q x n_k score matrix
/// materialized.
Tensor attention_reference(const AttentionInputs& in);

/// Same computation, executed one query-row tile at a time; the score slice
/// for a tile never leaves the tile. Row-for-row the accumulation order
/// matches attention_reference, so FP32 results are bitwise identical.
Tensor attention_tiled(const AttentionInputs& in, const TilePlan& plan);

}  // namespace npukit
