// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npukit/errors.hpp"
#include "npukit/fp16.hpp"

namespace npukit {

// ---------------------------------------------------------------------------
// Element types

enum class ElementType : std::uint8_t {
    fp32 = 0,
    fp16 = 1,
    int8 = 2,
    int16 = 3,
    int32 = 4,
};

constexpr std::size_t byte_width(ElementType t) {
    switch (t) {
        case ElementType::fp32: return 4;
        case ElementType::fp16: return 2;
        case ElementType::int8: return 1;
        case ElementType::int16: return 2;
        case ElementType::int32: return 4;
    }
    return 0;
}

constexpr bool is_floating(ElementType t) {
    return t == ElementType::fp32 || t == ElementType::fp16;
}

constexpr bool is_integer(ElementType t) { return !is_floating(t); }

/// Signed value range of an integer element type.
constexpr std::int64_t int_min(ElementType t) {
    switch (t) {
        case ElementType::int8: return -128;
        case ElementType::int16: return -32768;
        case ElementType::int32: return -2147483647LL - 1;
        default: return 0;
    }
}

constexpr std::int64_t int_max(ElementType t) {
    switch (t) {
        case ElementType::int8: return 127;
        case ElementType::int16: return 32767;
        case ElementType::int32: return 2147483647LL;
        default: return 0;
    }
}

std::string to_string(ElementType t);
std::optional<ElementType> element_type_from_string(const std::string& name);

// ---------------------------------------------------------------------------
// Tensor

/// Dense row-major tensor over one of the five element types. Storage is a
/// contiguous byte buffer; no views, no broadcasting. FP16 elements are raw
/// binary16 bit patterns (see fp16.hpp).
class Tensor {
  public:
    Tensor() = default;

    /// Zero-filled tensor. Dimensions must all be positive.
    Tensor(std::vector<std::uint64_t> shape, ElementType dtype);

    static Tensor from_floats(std::vector<std::uint64_t> shape,
                              std::span<const float> values);
    static Tensor from_ints(std::vector<std::uint64_t> shape, ElementType dtype,
                            std::span<const std::int64_t> values);

    ElementType dtype() const { return dtype_; }
    const std::vector<std::uint64_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::uint64_t dim(std::size_t i) const { return shape_.at(i); }
    std::uint64_t size() const { return size_; }
    std::uint64_t size_bytes() const { return size_ * byte_width(dtype_); }

    std::span<const std::byte> raw() const { return {data_.data(), data_.size()}; }
    std::span<std::byte> raw() { return {data_.data(), data_.size()}; }

    /// Typed access; T must match the dtype's storage type
    /// (float / uint16_t bit patterns / int8_t / int16_t / int32_t).
    template <typename T>
    std::span<const T> data() const;
    template <typename T>
    std::span<T> data();

    /// Element as float, decoding FP16 and widening integers. Valid for any dtype.
    float value_as_float(std::uint64_t i) const;
    /// Element as integer. Valid for integer dtypes only.
    std::int64_t value_as_int(std::uint64_t i) const;

    void set_float(std::uint64_t i, float v);  // floating dtypes; FP16 rounds
    void set_int(std::uint64_t i, std::int64_t v);  // integer dtypes; range-checked

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  private:
    std::vector<std::uint64_t> shape_;
    ElementType dtype_ = ElementType::fp32;
    std::uint64_t size_ = 0;
    std::vector<std::byte> data_;
};

// ---------------------------------------------------------------------------
// Kernels

/// C = A x B with deterministic left-to-right accumulation over the inner
/// index. Operand dtypes must both be floating or both be integer, and
/// `accumulate` must be of the same kind. Floating results are narrowed to
/// `out_dtype` (default: dtype of `a`); integer results to `out_dtype`
/// (default: `accumulate`). Integer accumulation is range-checked against
/// `accumulate` at every step and throws OverflowError instead of wrapping.
Tensor matmul(const Tensor& a, const Tensor& b, ElementType accumulate,
              std::optional<ElementType> out_dtype = std::nullopt);

/// Row-wise softmax with mandatory max subtraction. Floating input only.
Tensor softmax_rows(const Tensor& s_in);

/// Element type conversion. Float narrowing rounds to nearest-even and
/// saturates out-of-range magnitudes to the largest finite value. Casting a
/// non-integral float to an integer type is rejected (quantization owns that
/// path), as is any integer value that does not fit the target range.
Tensor cast(const Tensor& t, ElementType to);

/// New contiguous tensor holding the transpose of a rank-2 tensor.
Tensor transpose(const Tensor& t);

/// Multiply every element of a floating tensor by `factor` (FP16 re-rounds).
Tensor scale_elements(const Tensor& t, float factor);

// ---------------------------------------------------------------------------
// TNSR1 file format
//
//   magic "TNSR1" | dtype tag u8 | rank u8 | rank x u64-le dims | payload
//
// The payload is raw little-endian element data in row-major order.

void write_tnsr(const Tensor& t, const std::string& path);
Tensor read_tnsr(const std::string& path);

std::vector<std::byte> encode_tnsr(const Tensor& t);
Tensor decode_tnsr(std::span<const std::byte> bytes);

}  // namespace npukit
