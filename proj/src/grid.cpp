#include "mira/grid.hpp"

#include <charconv>
#include <vector>

#include "mira/core_map.hpp"

namespace mira {
namespace {

double parse_double(const std::string& s, const std::string& context)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw ContractViolation("trailing characters in number '" + s + "' (" + context + ")");
        }
        return v;
    } catch (const std::logic_error&) {
        throw ContractViolation("not a number: '" + s + "' (" + context + ")");
    }
}

int parse_int(const std::string& s, const std::string& context)
{
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ContractViolation("not an integer: '" + s + "' (" + context + ")");
    }
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) {
            break;
        }
        start = pos + 1;
    }
    return parts;
}

bool is_shifted_axis(ParamName n) { return n == ParamName::A || n == ParamName::C; }
bool is_mira_axis(ParamName n) { return n == ParamName::M1 || n == ParamName::M2; }

void assign(ShiftedParams& p, ParamName n, double v)
{
    if (n == ParamName::A) {
        p.A = v;
    } else if (n == ParamName::C) {
        p.C = v;
    }
}

void assign(MiraParams& p, ParamName n, double v)
{
    if (n == ParamName::M1) {
        p.M1 = v;
    } else if (n == ParamName::M2) {
        p.M2 = v;
    }
}

} // namespace

std::string to_string(ParamName n)
{
    switch (n) {
    case ParamName::A: return "A";
    case ParamName::B: return "B";
    case ParamName::C: return "C";
    case ParamName::M1: return "M1";
    case ParamName::M2: return "M2";
    }
    return "?";
}

std::optional<ParamName> parse_param_name(const std::string& s)
{
    for (auto n : {ParamName::A, ParamName::B, ParamName::C, ParamName::M1, ParamName::M2}) {
        if (to_string(n) == s) {
            return n;
        }
    }
    return std::nullopt;
}

Range parse_range(const std::string& spec)
{
    const auto parts = split(spec, ':');
    if (parts.size() != 3) {
        throw ContractViolation("range must be min:max:count, got '" + spec + "'");
    }
    Range r;
    r.min = parse_double(parts[0], spec);
    r.max = parse_double(parts[1], spec);
    r.count = parse_int(parts[2], spec);
    if (r.count < 1) {
        throw ContractViolation("range count must be positive: '" + spec + "'");
    }
    return r;
}

Axis parse_axis(const std::string& spec)
{
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
        throw ContractViolation("axis must be NAME=min:max:count, got '" + spec + "'");
    }
    const auto name = parse_param_name(spec.substr(0, eq));
    if (!name) {
        throw ContractViolation("unknown axis parameter in '" + spec + "'");
    }
    const Range r = parse_range(spec.substr(eq + 1));
    return {*name, r.min, r.max, r.count};
}

bool Grid2::mira_family() const { return is_mira_axis(axis1.name); }

void Grid2::validate() const
{
    for (const Axis* ax : {&axis1, &axis2}) {
        if (!is_shifted_axis(ax->name) && !is_mira_axis(ax->name)) {
            throw ContractViolation("axis parameter must be one of A, C, M1, M2");
        }
        if (ax->count < 1) {
            throw ContractViolation("axis count must be at least 1");
        }
        if (ax->count > 1 && !(ax->min < ax->max)) {
            throw ContractViolation("axis " + to_string(ax->name) + " needs min < max");
        }
        if (!std::isfinite(ax->min) || !std::isfinite(ax->max)) {
            throw ContractViolation("axis bounds must be finite");
        }
    }
    if (axis1.name == axis2.name) {
        throw ContractViolation("grid axes must name distinct parameters");
    }
    if (is_shifted_axis(axis1.name) != is_shifted_axis(axis2.name)) {
        throw ContractViolation("grid axes must both be shifted (A, C) or both original (M1, M2)");
    }
}

std::optional<ShiftedParams> Grid2::shifted_at(int col, int row) const
{
    const double v1 = axis1_value(col);
    const double v2 = axis2_value(row);
    if (!mira_family()) {
        ShiftedParams p = fixed_shifted;
        assign(p, axis1.name, v1);
        assign(p, axis2.name, v2);
        return p;
    }
    MiraParams m = fixed_mira;
    assign(m, axis1.name, v1);
    assign(m, axis2.name, v2);
    try {
        return to_shifted(m, FixedPointBranch::Plus);
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

} // namespace mira
