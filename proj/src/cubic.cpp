#include <algorithm>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "mira/core_map.hpp"

namespace mira {
namespace {

// Below this normalized discriminant the closed form loses too many digits
// near a multiple root and the companion matrix is handed to QR instead.
constexpr double kDiscriminantFloor = 1e-12;

template <typename T>
T horner(double a, double b, double c, T x)
{
    return ((x + a) * x + b) * x + c;
}

template <typename T>
T horner_deriv(double a, double b, T x)
{
    return (3.0 * x + 2.0 * a) * x + b;
}

template <typename T>
T polish(double a, double b, double c, T x)
{
    for (int i = 0; i < 3; ++i) {
        const T f = horner(a, b, c, x);
        const T df = horner_deriv(a, b, x);
        if (std::abs(df) == 0.0) {
            break;
        }
        const T candidate = x - f / df;
        if (!(std::abs(horner(a, b, c, candidate)) < std::abs(f))) {
            break;
        }
        x = candidate;
    }
    return x;
}

Multipliers sorted(Multipliers r)
{
    std::sort(r.begin(), r.end(), [](const Complex& u, const Complex& v) {
        const double mu = std::abs(u);
        const double mv = std::abs(v);
        if (mu != mv) {
            return mu > mv;
        }
        if (u.imag() != v.imag()) {
            return u.imag() > v.imag();
        }
        return u.real() > v.real();
    });
    return r;
}

Multipliers companion_roots(double a, double b, double c)
{
    Mat3 companion;
    companion << -a, -b, -c,
                 1.0, 0.0, 0.0,
                 0.0, 1.0, 0.0;
    Eigen::EigenSolver<Mat3> solver(companion, false);
    Multipliers r;
    for (int i = 0; i < 3; ++i) {
        r[static_cast<std::size_t>(i)] = polish(a, b, c, Complex(solver.eigenvalues()[i]));
    }
    // Enforce exact conjugate symmetry.
    for (auto& mu : r) {
        if (std::fabs(mu.imag()) <= 1e-14 * std::fmax(1.0, std::abs(mu))) {
            mu = {mu.real(), 0.0};
        }
    }
    return sorted(r);
}

} // namespace

Multipliers cubic_roots(double a, double b, double c)
{
    const double shift = a / 3.0;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double half_q = q / 2.0;
    const double third_p = p / 3.0;
    const double disc = half_q * half_q + third_p * third_p * third_p;
    const double scale = std::fmax(half_q * half_q, std::fabs(third_p * third_p * third_p));

    if (scale == 0.0) {
        return {Complex(-shift), Complex(-shift), Complex(-shift)};
    }
    if (std::fabs(disc) < kDiscriminantFloor * scale) {
        return companion_roots(a, b, c);
    }

    Multipliers r;
    if (disc > 0.0) {
        // One real root; the stable Cardano branch avoids cancellation.
        const double sq = std::sqrt(disc);
        const double u = std::cbrt(-half_q - std::copysign(sq, half_q));
        const double t = u - p / (3.0 * u);
        const double real = polish(a, b, c, t - shift);

        double prod;
        double sum;
        if (std::fabs(real) > 1.0) {
            prod = -c / real;
            sum = (b - prod) / real;
        } else {
            sum = -a - real;
            prod = std::fabs(real) > 1e-8 ? -c / real : b - real * sum;
        }
        const double re = sum / 2.0;
        const double im2 = prod - re * re;
        if (im2 > 0.0) {
            Complex pair = polish(a, b, c, Complex(re, std::sqrt(im2)));
            r = {Complex(real), pair, std::conj(pair)};
        } else {
            // Rounding pushed a nearly-double real pair onto the real axis.
            const double d = std::sqrt(-im2);
            r = {Complex(real), Complex(polish(a, b, c, re + d)), Complex(polish(a, b, c, re - d))};
        }
    } else {
        const double m = 2.0 * std::sqrt(-third_p);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            const double t = m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0);
            r[static_cast<std::size_t>(k)] = Complex(polish(a, b, c, t - shift));
        }
    }
    return sorted(r);
}

Multipliers eigenvalues(const Mat3& m)
{
    return eigenvalues(m, m.determinant());
}

Multipliers eigenvalues(const Mat3& m, double exact_det)
{
    const double trace = m.trace();
    const double minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)
                        + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)
                        + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    return cubic_roots(-trace, minors, -exact_det);
}

} // namespace mira
