// SPDX-License-Identifier: Apache-2.0
#include "npukit/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace npukit {

namespace {

std::uint64_t checked_element_count(const std::vector<std::uint64_t>& shape) {
    std::uint64_t n = 1;
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive");
        if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
            throw ShapeError("tensor element count overflows");
        n *= d;
    }
    return n;
}

template <typename T>
ElementType storage_dtype();
template <>
ElementType storage_dtype<float>() { return ElementType::fp32; }
template <>
ElementType storage_dtype<std::uint16_t>() { return ElementType::fp16; }
template <>
ElementType storage_dtype<std::int8_t>() { return ElementType::int8; }
template <>
ElementType storage_dtype<std::int16_t>() { return ElementType::int16; }
template <>
ElementType storage_dtype<std::int32_t>() { return ElementType::int32; }

}  // namespace

std::string to_string(ElementType t) {
    switch (t) {
        case ElementType::fp32: return "fp32";
        case ElementType::fp16: return "fp16";
        case ElementType::int8: return "int8";
        case ElementType::int16: return "int16";
        case ElementType::int32: return "int32";
    }
    return "?";
}

std::optional<ElementType> element_type_from_string(const std::string& name) {
    if (name == "fp32") return ElementType::fp32;
    if (name == "fp16") return ElementType::fp16;
    if (name == "int8") return ElementType::int8;
    if (name == "int16") return ElementType::int16;
    if (name == "int32") return ElementType::int32;
    return std::nullopt;
}

Tensor::Tensor(std::vector<std::uint64_t> shape, ElementType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
    size_ = checked_element_count(shape_);
    data_.assign(size_ * byte_width(dtype_), std::byte{0});
}

Tensor Tensor::from_floats(std::vector<std::uint64_t> shape,
                           std::span<const float> values) {
    Tensor t(std::move(shape), ElementType::fp32);
    if (values.size() != t.size())
        throw ShapeError("value count does not match shape");
    std::memcpy(t.data_.data(), values.data(), values.size() * sizeof(float));
    return t;
}

Tensor Tensor::from_ints(std::vector<std::uint64_t> shape, ElementType dtype,
                         std::span<const std::int64_t> values) {
    if (!is_integer(dtype)) throw TypeError("from_ints requires an integer dtype");
    Tensor t(std::move(shape), dtype);
    if (values.size() != t.size())
        throw ShapeError("value count does not match shape");
    for (std::uint64_t i = 0; i < t.size(); ++i) t.set_int(i, values[i]);
    return t;
}

template <typename T>
std::span<const T> Tensor::data() const {
    if (dtype_ != storage_dtype<T>())
        throw TypeError("typed access does not match tensor dtype " + to_string(dtype_));
    return {reinterpret_cast<const T*>(data_.data()), size_};
}

template <typename T>
std::span<T> Tensor::data() {
    if (dtype_ != storage_dtype<T>())
        throw TypeError("typed access does not match tensor dtype " + to_string(dtype_));
    return {reinterpret_cast<T*>(data_.data()), size_};
}

template std::span<const float> Tensor::data<float>() const;
template std::span<const std::uint16_t> Tensor::data<std::uint16_t>() const;
template std::span<const std::int8_t> Tensor::data<std::int8_t>() const;
template std::span<const std::int16_t> Tensor::data<std::int16_t>() const;
template std::span<const std::int32_t> Tensor::data<std::int32_t>() const;
template std::span<float> Tensor::data<float>();
template std::span<std::uint16_t> Tensor::data<std::uint16_t>();
template std::span<std::int8_t> Tensor::data<std::int8_t>();
template std::span<std::int16_t> Tensor::data<std::int16_t>();
template std::span<std::int32_t> Tensor::data<std::int32_t>();

float Tensor::value_as_float(std::uint64_t i) const {
    switch (dtype_) {
        case ElementType::fp32: return data<float>()[i];
        case ElementType::fp16: return fp16::decode(data<std::uint16_t>()[i]);
        case ElementType::int8: return static_cast<float>(data<std::int8_t>()[i]);
        case ElementType::int16: return static_cast<float>(data<std::int16_t>()[i]);
        case ElementType::int32: return static_cast<float>(data<std::int32_t>()[i]);
    }
    return 0.0f;
}

std::int64_t Tensor::value_as_int(std::uint64_t i) const {
    switch (dtype_) {
        case ElementType::int8: return data<std::int8_t>()[i];
        case ElementType::int16: return data<std::int16_t>()[i];
        case ElementType::int32: return data<std::int32_t>()[i];
        default: throw TypeError("value_as_int on floating tensor");
    }
}

void Tensor::set_float(std::uint64_t i, float v) {
    switch (dtype_) {
        case ElementType::fp32: data<float>()[i] = v; return;
        case ElementType::fp16: data<std::uint16_t>()[i] = fp16::encode(v); return;
        default: throw TypeError("set_float on integer tensor");
    }
}

void Tensor::set_int(std::uint64_t i, std::int64_t v) {
    if (!is_integer(dtype_)) throw TypeError("set_int on floating tensor");
    if (v < int_min(dtype_) || v > int_max(dtype_))
        throw TypeError("integer value " + std::to_string(v) +
                        " does not fit in " + to_string(dtype_));
    switch (dtype_) {
        case ElementType::int8: data<std::int8_t>()[i] = static_cast<std::int8_t>(v); return;
        case ElementType::int16: data<std::int16_t>()[i] = static_cast<std::int16_t>(v); return;
        case ElementType::int32: data<std::int32_t>()[i] = static_cast<std::int32_t>(v); return;
        default: return;
    }
}

// ---------------------------------------------------------------------------
// matmul

namespace {

void require_matrix(const Tensor& t, const char* name) {
    if (t.rank() != 2)
        throw ShapeError(std::string(name) + " must be rank 2, got rank " +
                         std::to_string(t.rank()));
}

Tensor matmul_float(const Tensor& a, const Tensor& b, ElementType accumulate,
                    ElementType out_dtype) {
    const std::uint64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n}, out_dtype);
    const bool round_steps = accumulate == ElementType::fp16;
    for (std::uint64_t i = 0; i < m; ++i) {
        for (std::uint64_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::uint64_t t = 0; t < k; ++t) {
                const float prod =
                    a.value_as_float(i * k + t) * b.value_as_float(t * n + j);
                acc += round_steps ? fp16::round_to_half(prod) : prod;
                if (round_steps) acc = fp16::round_to_half(acc);
            }
            c.set_float(i * n + j, acc);
        }
    }
    return c;
}

Tensor matmul_int(const Tensor& a, const Tensor& b, ElementType accumulate,
                  ElementType out_dtype) {
    const std::uint64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const std::int64_t lo = int_min(accumulate), hi = int_max(accumulate);
    Tensor c({m, n}, out_dtype);
    for (std::uint64_t i = 0; i < m; ++i) {
        for (std::uint64_t j = 0; j < n; ++j) {
            std::int64_t acc = 0;
            for (std::uint64_t t = 0; t < k; ++t) {
                std::int64_t prod;
                if (__builtin_mul_overflow(a.value_as_int(i * k + t),
                                           b.value_as_int(t * n + j), &prod) ||
                    __builtin_add_overflow(acc, prod, &acc) || acc < lo || acc > hi)
                    throw OverflowError("integer matmul accumulator left the " +
                                        to_string(accumulate) + " range");
            }
            if (acc < int_min(out_dtype) || acc > int_max(out_dtype))
                throw OverflowError("matmul result does not fit output dtype " +
                                    to_string(out_dtype));
            c.set_int(i * n + j, acc);
        }
    }
    return c;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, ElementType accumulate,
              std::optional<ElementType> out_dtype) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul inner dimensions differ: " +
                         std::to_string(a.dim(1)) + " vs " + std::to_string(b.dim(0)));
    const bool floating = is_floating(a.dtype());
    if (floating != is_floating(b.dtype()))
        throw TypeError("matmul operands must both be floating or both integer");
    if (floating != is_floating(accumulate))
        throw TypeError("matmul accumulate type kind must match operand kind");

    if (floating) {
        const ElementType out = out_dtype.value_or(a.dtype());
        if (!is_floating(out)) throw TypeError("float matmul needs a floating output dtype");
        return matmul_float(a, b, accumulate, out);
    }
    const ElementType out = out_dtype.value_or(accumulate);
    if (!is_integer(out)) throw TypeError("integer matmul needs an integer output dtype");
    return matmul_int(a, b, accumulate, out);
}

// ---------------------------------------------------------------------------
// softmax

Tensor softmax_rows(const Tensor& s_in) {
    require_matrix(s_in, "softmax input");
    if (!is_floating(s_in.dtype()))
        throw TypeError("softmax requires a floating tensor, got " + to_string(s_in.dtype()));
    const std::uint64_t rows = s_in.dim(0), cols = s_in.dim(1);
    Tensor out({rows, cols}, s_in.dtype());
    std::vector<float> scratch(cols);
    for (std::uint64_t i = 0; i < rows; ++i) {
        float row_max = -std::numeric_limits<float>::infinity();
        for (std::uint64_t j = 0; j < cols; ++j)
            row_max = std::max(row_max, s_in.value_as_float(i * cols + j));
        float denom = 0.0f;
        for (std::uint64_t j = 0; j < cols; ++j) {
            scratch[j] = std::exp(s_in.value_as_float(i * cols + j) - row_max);
            denom += scratch[j];
        }
        for (std::uint64_t j = 0; j < cols; ++j)
            out.set_float(i * cols + j, scratch[j] / denom);
    }
    return out;
}

// ---------------------------------------------------------------------------
// cast

namespace {

float saturate_to(float v, ElementType to) {
    if (to == ElementType::fp16) return fp16::round_to_half(v);
    if (std::isinf(v))
        return v > 0 ? std::numeric_limits<float>::max()
                     : -std::numeric_limits<float>::max();
    return v;
}

}  // namespace

Tensor cast(const Tensor& t, ElementType to) {
    Tensor out(t.shape(), to);
    const bool src_float = is_floating(t.dtype());
    for (std::uint64_t i = 0; i < t.size(); ++i) {
        if (is_floating(to)) {
            out.set_float(i, saturate_to(t.value_as_float(i), to));
        } else if (src_float) {
            const float v = t.value_as_float(i);
            if (!std::isfinite(v) || v != std::nearbyintf(v))
                throw TypeError("cast of non-integral float " + std::to_string(v) +
                                " to " + to_string(to) + " rejected");
            if (v < static_cast<float>(int_min(to)) || v > static_cast<float>(int_max(to)))
                throw TypeError("float value " + std::to_string(v) +
                                " out of range for " + to_string(to));
            out.set_int(i, static_cast<std::int64_t>(v));
        } else {
            out.set_int(i, t.value_as_int(i));  // set_int range-checks
        }
    }
    return out;
}

Tensor transpose(const Tensor& t) {
    require_matrix(t, "transpose input");
    const std::uint64_t m = t.dim(0), n = t.dim(1);
    Tensor out({n, m}, t.dtype());
    const std::size_t w = byte_width(t.dtype());
    const std::byte* src = t.raw().data();
    std::byte* dst = out.raw().data();
    for (std::uint64_t i = 0; i < m; ++i)
        for (std::uint64_t j = 0; j < n; ++j)
            std::memcpy(dst + (j * m + i) * w, src + (i * n + j) * w, w);
    return out;
}

Tensor scale_elements(const Tensor& t, float factor) {
    if (!is_floating(t.dtype()))
        throw TypeError("scale_elements requires a floating tensor");
    Tensor out(t.shape(), t.dtype());
    for (std::uint64_t i = 0; i < t.size(); ++i)
        out.set_float(i, t.value_as_float(i) * factor);
    return out;
}

// ---------------------------------------------------------------------------
// TNSR1

namespace {

constexpr char kMagic[5] = {'T', 'N', 'S', 'R', '1'};

void put_u64_le(std::vector<std::byte>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(std::span<const std::byte> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

// Element payload is little-endian by definition; we only build on
// little-endian hosts so it is a straight copy.
static_assert(std::endian::native == std::endian::little,
              "TNSR1 serialization assumes a little-endian host");

std::vector<std::byte> encode_tnsr(const Tensor& t) {
    std::vector<std::byte> out;
    out.reserve(7 + 8 * t.rank() + t.size_bytes());
    for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
    out.push_back(static_cast<std::byte>(static_cast<std::uint8_t>(t.dtype())));
    out.push_back(static_cast<std::byte>(static_cast<std::uint8_t>(t.rank())));
    for (auto d : t.shape()) put_u64_le(out, d);
    const auto payload = t.raw();
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Tensor decode_tnsr(std::span<const std::byte> bytes) {
    if (bytes.size() < 7) throw IoError("TNSR1: truncated header");
    for (std::size_t i = 0; i < 5; ++i)
        if (std::to_integer<char>(bytes[i]) != kMagic[i])
            throw IoError("TNSR1: bad magic");
    const auto tag = std::to_integer<std::uint8_t>(bytes[5]);
    if (tag > 4) throw IoError("TNSR1: unknown dtype tag " + std::to_string(tag));
    const auto dtype = static_cast<ElementType>(tag);
    const auto rank = std::to_integer<std::uint8_t>(bytes[6]);
    std::size_t at = 7;
    if (bytes.size() < at + 8ull * rank) throw IoError("TNSR1: truncated dims");
    std::vector<std::uint64_t> shape(rank);
    for (std::uint8_t i = 0; i < rank; ++i, at += 8) shape[i] = get_u64_le(bytes, at);

    Tensor t(std::move(shape), dtype);
    const std::size_t w = byte_width(dtype);
    if (bytes.size() != at + t.size() * w)
        throw IoError("TNSR1: payload size mismatch (expected " +
                      std::to_string(t.size() * w) + " bytes, got " +
                      std::to_string(bytes.size() - at) + ")");
    std::memcpy(t.raw().data(), bytes.data() + at, t.size() * w);
    return t;
}

void write_tnsr(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    const auto bytes = encode_tnsr(t);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

Tensor read_tnsr(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
    return decode_tnsr(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace npukit
