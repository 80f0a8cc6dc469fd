// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>

namespace npukit::fp16 {

// Software binary16. Values are kept as raw uint16_t bit patterns so results
// never depend on host FP16 hardware. Encoding rounds to nearest-even;
// magnitudes beyond the largest finite half (65504) clamp to it instead of
// producing infinity. NaN is preserved.

constexpr std::uint16_t kMaxFinite = 0x7BFF;  // 65504
constexpr std::uint16_t kQuietNan = 0x7E00;

inline std::uint16_t encode(float value) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
    const std::uint32_t abs = bits & 0x7FFFFFFFu;

    if (abs >= 0x7F800000u) {
        return abs > 0x7F800000u ? static_cast<std::uint16_t>(sign | kQuietNan)
                                 : static_cast<std::uint16_t>(sign | kMaxFinite);
    }

    const std::int32_t exp = static_cast<std::int32_t>(abs >> 23) - 127 + 15;
    const std::uint32_t mant = abs & 0x007FFFFFu;

    if (exp >= 31) {
        return static_cast<std::uint16_t>(sign | kMaxFinite);
    }
    if (exp <= 0) {
        // Subnormal half (or zero). Anything below half the smallest
        // subnormal rounds to zero.
        if (exp < -10) {
            return sign;
        }
        const std::uint32_t m = mant | 0x00800000u;
        const int shift = 14 - exp;  // 14..24
        std::uint32_t half_m = m >> shift;
        const std::uint32_t rem = m & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half_m & 1u))) {
            ++half_m;  // may carry into the exponent field, which is correct
        }
        return static_cast<std::uint16_t>(sign | half_m);
    }

    std::uint32_t half_m = mant >> 13;
    const std::uint32_t rem = mant & 0x1FFFu;
    std::int32_t half_e = exp;
    if (rem > 0x1000u || (rem == 0x1000u && (half_m & 1u))) {
        ++half_m;
        if (half_m == 0x400u) {
            half_m = 0;
            ++half_e;
            if (half_e >= 31) {
                return static_cast<std::uint16_t>(sign | kMaxFinite);
            }
        }
    }
    return static_cast<std::uint16_t>(sign | (half_e << 10) | half_m);
}

inline float decode(std::uint16_t h) {
    const std::uint32_t sign = (h >> 15) & 1u;
    const std::uint32_t exp = (h >> 10) & 0x1Fu;
    const std::uint32_t mant = h & 0x3FFu;
    std::uint32_t out;
    if (exp == 0) {
        if (mant == 0) {
            out = sign << 31;
            return std::bit_cast<float>(out);
        }
        // Normalize the subnormal into a float32 normal. A half subnormal is
        // mant * 2^-24; with the leading bit at position j the float32 biased
        // exponent is j - 24 + 127.
        int shifts = 0;
        std::uint32_t m = mant;
        while ((m & 0x400u) == 0) {
            m <<= 1;
            ++shifts;
        }
        out = (sign << 31) | (static_cast<std::uint32_t>(113 - shifts) << 23) |
              ((m & 0x3FFu) << 13);
        return std::bit_cast<float>(out);
    }
    if (exp == 31) {
        out = (sign << 31) | 0x7F800000u | (mant << 13);
        return std::bit_cast<float>(out);
    }
    out = (sign << 31) | ((exp - 15 + 127) << 23) | (mant << 13);
    return std::bit_cast<float>(out);
}

/// Round a float to the nearest representable binary16 value, returned as float.
inline float round_to_half(float value) { return decode(encode(value)); }

}  // namespace npukit::fp16
