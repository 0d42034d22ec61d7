#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mira/core_map.hpp"
#include "mira/grid.hpp"

namespace mira {

// Closed-form bifurcation surfaces of the fixed points.
//
// In the original form (M1, M2, B) the surfaces bound the stability region of
// O+; in the shifted form (A, B, C) they are the planes/surface TR, PD1, NS1.
// Functions that are only defined on part of the parameter space return
// std::nullopt outside it.

/// SN: a multiplier equals +1.  M1 = -(1 - B - M2)^2 / 4.
[[nodiscard]] double sn_m1(double M2, double B);
/// PD: a multiplier equals -1.  M1 = (3(B+M2)^2 + 2(B+M2) - 1) / 4.
[[nodiscard]] double pd_m1(double M2, double B);
/// NS: a unit-modulus complex pair; defined for |M2 - B| < 2.
[[nodiscard]] std::optional<double> ns_m1(double M2, double B);

/// Transcritical exchange of stability between O+ and O-:  C = 1 - A - B.
[[nodiscard]] double tr_c(double A, double B);
/// PD1:  C = 1 + A + B.
[[nodiscard]] double pd1_c(double A, double B);
/// NS1:  C = B^2 - A B - 1, defined for -2 < A - B < 2.
[[nodiscard]] std::optional<double> ns1_c(double A, double B);

/// True when the origin of the shifted form is asymptotically stable by the
/// analytic region bounded by TR, PD1 and NS1.
[[nodiscard]] bool in_stability_region(const ShiftedParams& p);

/// Boundary value of M1 of the region where the nonwandering set is a
/// hyperbolic horseshoe with two-dimensional unstable manifolds:
///   s = r + sqrt(r^2 + 1/4),  M1 = s^2 - (1 - M2 - B) s,
///   r = (3 + 5k) / (3 + 4k) * (1 + k),  k = |B| + |M2|.
[[nodiscard]] double sh12_boundary_m1(double M2, double B);

/// Membership test M1 >= boundary. The inequality direction is a convention
/// (the region lies at large M1); use sh12_boundary_m1 to apply another.
[[nodiscard]] bool in_sh12(const MiraParams& p);

/// Strong/weak resonance point p:q on NS1 at fixed B:
///   A = B + 2 cos(2 pi p / q),  C = B^2 - A B - 1.
/// Requires q >= 3 and gcd(p, q) = 1; throws DomainError otherwise.
struct ResonancePoint {
    double A;
    double C;
};
[[nodiscard]] ResonancePoint resonance_point(double B, int p, int q);

// --- sampling ---------------------------------------------------------------

/// One sample of an analytic curve. `value` is meaningless when !in_domain.
struct CurveSample {
    double param;
    double value;
    bool in_domain;
};

enum class CurveKind { SN, PD, NS, TR, PD1, NS1, SH12 };

[[nodiscard]] std::string to_string(CurveKind k);
[[nodiscard]] std::optional<CurveKind> parse_curve_kind(const std::string& s);

/// Evaluate a curve on `count` evenly spaced points of its free parameter
/// (M2 for SN/PD/NS/SH12, A for TR/PD1/NS1) at fixed B.
[[nodiscard]] std::vector<CurveSample> sample_curve(CurveKind kind, double B, double lo, double hi, int count);

/// CSV with header `param,value,domain_flag`.
[[nodiscard]] std::string curve_csv(const std::vector<CurveSample>& samples);

// --- saddle chart -----------------------------------------------------------

/// Per-cell (n,m) type of the shifted origin over an (A, C) grid at fixed B.
struct SaddleChart {
    Grid2 grid;
    double unit_tol = kSweepUnitTol;
    /// Render order: rows from axis2 max downward, axis1 ascending.
    std::vector<OrbitType> cells;

    [[nodiscard]] const OrbitType& at(int col, int row) const
    {
        return cells[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.axis1.count)
                     + static_cast<std::size_t>(col)];
    }
};

/// Grid axes must be A and C; B comes from the grid's fixed parameters.
[[nodiscard]] SaddleChart saddle_chart(const Grid2& grid, double unit_tol = kSweepUnitTol, int threads = 1);

} // namespace mira
