#pragma once

#include <optional>
#include <string>

#include "mira/types.hpp"

namespace mira {

enum class ParamName { A, B, C, M1, M2 };

[[nodiscard]] std::string to_string(ParamName n);
[[nodiscard]] std::optional<ParamName> parse_param_name(const std::string& s);

/// `count` evenly spaced values from min to max inclusive. A single-value
/// axis (count == 1) sits at min.
struct Axis {
    ParamName name = ParamName::A;
    double min = 0.0;
    double max = 0.0;
    int count = 1;

    [[nodiscard]] double value(int i) const
    {
        if (count == 1 || i == 0) {
            return min;
        }
        if (i == count - 1) {
            return max;
        }
        return min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
};

/// Parse "NAME=min:max:count", e.g. "A=-0.5:2:400". Throws ContractViolation.
[[nodiscard]] Axis parse_axis(const std::string& spec);

/// Parse "min:max:count".
struct Range {
    double min = 0.0;
    double max = 0.0;
    int count = 2;
};
[[nodiscard]] Range parse_range(const std::string& spec);

/// Two-parameter scan definition. Both axes come from the same
/// parameterization: {A, C} (shifted) or {M1, M2} (original). The remaining
/// parameters are taken from `fixed`.
struct Grid2 {
    Axis axis1;
    Axis axis2;
    ShiftedParams fixed_shifted;
    MiraParams fixed_mira;

    /// Throws ContractViolation on malformed grids.
    void validate() const;

    [[nodiscard]] bool mira_family() const;
    [[nodiscard]] int columns() const { return axis1.count; }
    [[nodiscard]] int rows() const { return axis2.count; }
    [[nodiscard]] std::size_t cells() const
    {
        return static_cast<std::size_t>(axis1.count) * static_cast<std::size_t>(axis2.count);
    }

    /// Axis values of a cell. Row 0 holds axis2's maximum.
    [[nodiscard]] double axis1_value(int col) const { return axis1.value(col); }
    [[nodiscard]] double axis2_value(int row) const { return axis2.value(axis2.count - 1 - row); }

    /// Shifted parameters of a cell. For the original parameterization the
    /// O+ branch is shifted to the origin; empty when no fixed point exists.
    [[nodiscard]] std::optional<ShiftedParams> shifted_at(int col, int row) const;
};

} // namespace mira
