// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace npukit {

/// Base class for all npukit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape, rank, or plan/dimension mismatches.
struct ShapeError : Error {
    using Error::Error;
};

/// Wrong element kind for an operation (e.g. softmax on integers),
/// or a value not representable in the requested type.
struct TypeError : Error {
    using Error::Error;
};

/// Integer accumulator left the declared accumulation range.
struct OverflowError : Error {
    using Error::Error;
};

/// No tile size fits the SRAM budget. Carries the byte accounting.
struct InfeasibleError : Error {
    std::uint64_t required_bytes;
    std::uint64_t available_bytes;

    InfeasibleError(std::uint64_t required, std::uint64_t available)
        : Error("infeasible tiling: single-row working set needs " +
                std::to_string(required) + " bytes but the SRAM budget is " +
                std::to_string(available) + " bytes"),
          required_bytes(required),
          available_bytes(available) {}
};

/// File open/read/write/parse failures.
struct IoError : Error {
    using Error::Error;
};

}  // namespace npukit
