#pragma once

#include <string>
#include <vector>

#include "mira/types.hpp"

namespace mira {

/// Default tolerance on |mu| - 1 when classifying at analytically known
/// bifurcation points; sweeps over generic parameters use kSweepUnitTol.
inline constexpr double kDefaultUnitTol = 1e-9;
inline constexpr double kSweepUnitTol = 1e-6;

/// Sign structure of the unstable multipliers.
enum class SignPattern {
    None,        ///< no unstable multipliers
    AllPositive,
    AllNegative,
    Mixed,
    ComplexPair, ///< an unstable complex-conjugate pair
};

/// (n,m)-type of a fixed point or periodic orbit: n stable and m unstable
/// directions, plus the number of multipliers left on the unit circle.
struct OrbitType {
    int stable = 0;
    int unstable = 0;
    int neutral = 0;
    bool has_complex_pair = false;
    SignPattern unstable_signs = SignPattern::None;

    [[nodiscard]] bool on_unit_circle() const { return neutral > 0; }
    /// Complex pair among the unstable multipliers.
    [[nodiscard]] bool saddle_focus() const { return unstable_signs == SignPattern::ComplexPair && stable > 0; }

    friend bool operator==(const OrbitType&, const OrbitType&) = default;
};

struct FixedPointInfo {
    State location;
    Multipliers multipliers;
    OrbitType type;
};

[[nodiscard]] std::string to_string(SignPattern s);
/// Short human-readable label such as "(1,2) saddle-focus".
[[nodiscard]] std::string describe(const OrbitType& t);

// --- the map ---------------------------------------------------------------

/// (x,y,z) -> (y, z, Bx + Cy + Az - y^2). Overflow yields State::escape_marker().
[[nodiscard]] State step(const ShiftedParams& p, const State& s);
[[nodiscard]] State step_mira(const MiraParams& p, const State& s);

/// Algebraic inverse of step. Throws NonInvertibleError when B == 0.
[[nodiscard]] State inverse_step(const ShiftedParams& p, const State& s);

/// Companion-structured Jacobian; its determinant is B everywhere.
[[nodiscard]] Mat3 jacobian(const ShiftedParams& p, const State& s);
[[nodiscard]] Mat3 jacobian_mira(const MiraParams& p, const State& s);

/// Partial derivatives of step with respect to A and C.
[[nodiscard]] Vec3 d_step_dA(const State& s);
[[nodiscard]] Vec3 d_step_dC(const State& s);

// --- fixed points and multipliers -------------------------------------------

/// O+ (the origin) and O- = (A+B+C-1)(1,1,1), in that order.
[[nodiscard]] std::vector<FixedPointInfo> fixed_points(const ShiftedParams& p, double unit_tol = kDefaultUnitTol);

/// Zero, one (on the SN surface) or two fixed points; O+ first when two exist.
[[nodiscard]] std::vector<FixedPointInfo> fixed_points_mira(const MiraParams& p, double unit_tol = kDefaultUnitTol);

/// Roots of mu^3 - A mu^2 - (C - 2y*) mu - B at a fixed point. Throws
/// ContractViolation if fp is not fixed (residual above 1e-8).
[[nodiscard]] Multipliers multipliers_at(const ShiftedParams& p, const State& fp);

/// Roots of the monic cubic mu^3 + a mu^2 + b mu + c, sorted by descending
/// modulus (for a conjugate pair, positive imaginary part first).
[[nodiscard]] Multipliers cubic_roots(double a, double b, double c);

/// Eigenvalues of a general real 3x3 matrix via its characteristic cubic.
/// When the exact determinant is known (e.g. B^q for a monodromy matrix) pass
/// it to pin the constant coefficient.
[[nodiscard]] Multipliers eigenvalues(const Mat3& m);
[[nodiscard]] Multipliers eigenvalues(const Mat3& m, double exact_det);

[[nodiscard]] OrbitType classify(const Multipliers& mults, double unit_tol = kDefaultUnitTol);

// --- parameter conversion ---------------------------------------------------

enum class FixedPointBranch { Plus, Minus };

/// M2 = A, x* = -C/2, M1 = x*^2 + (1 - A - B) x*.
[[nodiscard]] MiraParams to_mira(const ShiftedParams& p);

/// Shift the chosen fixed point of the original form to the origin. Throws
/// DomainError when no fixed point exists.
[[nodiscard]] ShiftedParams to_shifted(const MiraParams& p, FixedPointBranch which = FixedPointBranch::Plus);

/// Branch of the original form that the shifted origin corresponds to:
/// Plus on or below the TR plane C = 1 - A - B, Minus above it.
[[nodiscard]] FixedPointBranch origin_branch(const ShiftedParams& p);

/// Map a state between the two coordinate systems for converted parameters.
[[nodiscard]] State shift_to_mira(const ShiftedParams& p, const State& s);
[[nodiscard]] State shift_from_mira(const ShiftedParams& p, const State& s);

} // namespace mira
