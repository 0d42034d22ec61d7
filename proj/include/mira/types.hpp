#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mira {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Complex = std::complex<double>;

/// Three multipliers sorted by descending modulus.
using Multipliers = std::array<Complex, 3>;

/// Max-norm radius past which an orbit counts as escaped to infinity.
inline constexpr double kEscapeRadius = 1e6;

/// Parameters of the shifted form, in which O+ sits at the origin:
///   x' = y,  y' = z,  z' = B x + C y + A z - y^2.
struct ShiftedParams {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;

    /// True outside the orientable dissipative range 0 < B < 1. Numerics stay
    /// valid there; callers may want to warn.
    [[nodiscard]] bool outside_study_region() const { return !(B > 0.0 && B < 1.0); }

    friend bool operator==(const ShiftedParams&, const ShiftedParams&) = default;
};

/// Parameters of the original form:  z' = M1 + B x + M2 z - y^2.
struct MiraParams {
    double M1 = 0.0;
    double M2 = 0.0;
    double B = 0.0;

    [[nodiscard]] bool outside_study_region() const { return !(B > 0.0 && B < 1.0); }

    friend bool operator==(const MiraParams&, const MiraParams&) = default;
};

/// A point in phase space.
struct State {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    [[nodiscard]] Vec3 vec() const { return {x, y, z}; }
    static State from(const Vec3& v) { return {v[0], v[1], v[2]}; }

    [[nodiscard]] double max_norm() const
    {
        return std::fmax(std::fabs(x), std::fmax(std::fabs(y), std::fabs(z)));
    }
    [[nodiscard]] bool finite() const
    {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }

    /// Canonical marker returned when an evaluation overflowed.
    static State escape_marker()
    {
        constexpr double inf = std::numeric_limits<double>::infinity();
        return {inf, inf, inf};
    }

    friend bool operator==(const State&, const State&) = default;
};

/// Non-finite or outside the escape radius.
[[nodiscard]] inline bool escaped(const State& s)
{
    return !s.finite() || s.max_norm() > kEscapeRadius;
}

[[nodiscard]] inline double distance(const State& a, const State& b)
{
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

// Error hierarchy. Everything numeric the library refuses to do surfaces as a
// subclass of mira::Error so the CLI can map it to a single exit code.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inverse map requested with B = 0.
class NonInvertibleError : public Error {
public:
    NonInvertibleError() : Error("map is not invertible for B = 0") {}
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Requested value lies outside the domain where it is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed; carries the last residual it reached.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
          residual_(last_residual)
    {
    }
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

/// A computation hit a degenerate configuration it cannot resolve.
class DegenerateCaseError : public Error {
public:
    using Error::Error;
};

/// Orbit left the escape radius where a bounded orbit was required.
class EscapeError : public Error {
public:
    using Error::Error;
};

} // namespace mira
