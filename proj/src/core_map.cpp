#include "mira/core_map.hpp"

#include <algorithm>
#include <sstream>

namespace mira {

State step(const ShiftedParams& p, const State& s)
{
    const State next{s.y, s.z, p.B * s.x + p.C * s.y + p.A * s.z - s.y * s.y};
    return next.finite() ? next : State::escape_marker();
}

State step_mira(const MiraParams& p, const State& s)
{
    const State next{s.y, s.z, p.M1 + p.B * s.x + p.M2 * s.z - s.y * s.y};
    return next.finite() ? next : State::escape_marker();
}

State inverse_step(const ShiftedParams& p, const State& s)
{
    if (p.B == 0.0) {
        throw NonInvertibleError();
    }
    // s = (y, z, Bx + Cy + Az - y^2) of the preimage (x, y, z).
    const double y = s.x;
    const double z = s.y;
    const double x = (s.z - p.C * y - p.A * z + y * y) / p.B;
    const State prev{x, y, z};
    return prev.finite() ? prev : State::escape_marker();
}

Mat3 jacobian(const ShiftedParams& p, const State& s)
{
    Mat3 j;
    j << 0.0, 1.0, 0.0,
         0.0, 0.0, 1.0,
         p.B, p.C - 2.0 * s.y, p.A;
    return j;
}

Mat3 jacobian_mira(const MiraParams& p, const State& s)
{
    Mat3 j;
    j << 0.0, 1.0, 0.0,
         0.0, 0.0, 1.0,
         p.B, -2.0 * s.y, p.M2;
    return j;
}

Vec3 d_step_dA(const State& s) { return {0.0, 0.0, s.z}; }
Vec3 d_step_dC(const State& s) { return {0.0, 0.0, s.y}; }

// --- classification ---------------------------------------------------------

OrbitType classify(const Multipliers& mults, double unit_tol)
{
    OrbitType t;
    bool unstable_complex = false;
    int unstable_pos = 0;
    int unstable_neg = 0;
    for (const auto& mu : mults) {
        const double mod = std::abs(mu);
        const bool complex = std::fabs(mu.imag()) > 1e-12 * std::fmax(1.0, mod);
        if (complex) {
            t.has_complex_pair = true;
        }
        if (mod < 1.0 - unit_tol) {
            ++t.stable;
        } else if (mod > 1.0 + unit_tol) {
            ++t.unstable;
            if (complex) {
                unstable_complex = true;
            } else if (mu.real() > 0.0) {
                ++unstable_pos;
            } else {
                ++unstable_neg;
            }
        } else {
            ++t.neutral;
        }
    }
    if (t.unstable == 0) {
        t.unstable_signs = SignPattern::None;
    } else if (unstable_complex) {
        t.unstable_signs = SignPattern::ComplexPair;
    } else if (unstable_neg == 0) {
        t.unstable_signs = SignPattern::AllPositive;
    } else if (unstable_pos == 0) {
        t.unstable_signs = SignPattern::AllNegative;
    } else {
        t.unstable_signs = SignPattern::Mixed;
    }
    return t;
}

std::string to_string(SignPattern s)
{
    switch (s) {
    case SignPattern::None: return "none";
    case SignPattern::AllPositive: return "all-positive";
    case SignPattern::AllNegative: return "all-negative";
    case SignPattern::Mixed: return "mixed";
    case SignPattern::ComplexPair: return "complex-pair";
    }
    return "unknown";
}

std::string describe(const OrbitType& t)
{
    std::ostringstream os;
    os << '(' << t.stable << ',' << t.unstable << ')';
    if (t.neutral > 0) {
        os << " non-hyperbolic";
    } else if (t.unstable == 0) {
        os << (t.has_complex_pair ? " stable focus" : " stable node");
    } else if (t.stable == 0) {
        os << (t.has_complex_pair ? " repelling focus" : " repelling node");
    } else {
        os << (t.has_complex_pair ? " saddle-focus" : " saddle");
    }
    return os.str();
}

// --- fixed points -----------------------------------------------------------

Multipliers multipliers_at(const ShiftedParams& p, const State& fp)
{
    const State image = step(p, fp);
    const double residual = distance(image, fp);
    if (!(residual < 1e-8)) {
        throw ContractViolation("multipliers_at: state is not a fixed point (residual "
                                + std::to_string(residual) + ")");
    }
    return cubic_roots(-p.A, -(p.C - 2.0 * fp.y), -p.B);
}

std::vector<FixedPointInfo> fixed_points(const ShiftedParams& p, double unit_tol)
{
    const double w = p.A + p.B + p.C - 1.0;
    std::vector<FixedPointInfo> out;
    for (const State loc : {State{0.0, 0.0, 0.0}, State{w, w, w}}) {
        FixedPointInfo info;
        info.location = loc;
        info.multipliers = cubic_roots(-p.A, -(p.C - 2.0 * loc.y), -p.B);
        info.type = classify(info.multipliers, unit_tol);
        out.push_back(info);
    }
    return out;
}

std::vector<FixedPointInfo> fixed_points_mira(const MiraParams& p, double unit_tol)
{
    const double half = (1.0 - p.B - p.M2) / 2.0;
    const double radicand = half * half + p.M1;
    const double scale = std::fmax(std::fabs(p.M1), half * half);
    std::vector<FixedPointInfo> out;
    if (radicand < -4.0 * std::numeric_limits<double>::epsilon() * scale) {
        return out;
    }
    const double center = (p.M2 + p.B - 1.0) / 2.0;
    std::vector<double> xs;
    if (radicand <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
        xs.push_back(center);
    } else {
        const double root = std::sqrt(radicand);
        xs.push_back(center + root);
        xs.push_back(center - root);
    }
    for (double x : xs) {
        FixedPointInfo info;
        info.location = {x, x, x};
        info.multipliers = cubic_roots(-p.M2, 2.0 * x, -p.B);
        info.type = classify(info.multipliers, unit_tol);
        out.push_back(info);
    }
    return out;
}

// --- parameter conversion ---------------------------------------------------

MiraParams to_mira(const ShiftedParams& p)
{
    const double xs = -p.C / 2.0;
    return {xs * xs + (1.0 - p.A - p.B) * xs, p.A, p.B};
}

ShiftedParams to_shifted(const MiraParams& p, FixedPointBranch which)
{
    const double half = (1.0 - p.B - p.M2) / 2.0;
    const double radicand = half * half + p.M1;
    if (radicand < 0.0) {
        throw DomainError("to_shifted: no fixed point exists (radicand " + std::to_string(radicand) + ")");
    }
    const double root = std::sqrt(radicand);
    const double center = (p.M2 + p.B - 1.0) / 2.0;
    const double xs = which == FixedPointBranch::Plus ? center + root : center - root;
    return {p.M2, p.B, -2.0 * xs};
}

FixedPointBranch origin_branch(const ShiftedParams& p)
{
    return p.C <= 1.0 - p.A - p.B ? FixedPointBranch::Plus : FixedPointBranch::Minus;
}

State shift_to_mira(const ShiftedParams& p, const State& s)
{
    const double xs = -p.C / 2.0;
    return {s.x + xs, s.y + xs, s.z + xs};
}

State shift_from_mira(const ShiftedParams& p, const State& s)
{
    const double xs = -p.C / 2.0;
    return {s.x - xs, s.y - xs, s.z - xs};
}

} // namespace mira
