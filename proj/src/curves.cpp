#include "mira/curves.hpp"

#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include <omp.h>

namespace mira {

double sn_m1(double M2, double B)
{
    const double d = 1.0 - B - M2;
    return -d * d / 4.0;
}

double pd_m1(double M2, double B)
{
    const double s = B + M2;
    return (3.0 * s * s + 2.0 * s - 1.0) / 4.0;
}

std::optional<double> ns_m1(double M2, double B)
{
    if (!(std::fabs(M2 - B) < 2.0)) {
        return std::nullopt;
    }
    const double u = 2.0 - M2 - B + M2 * B - B * B;
    const double d = 1.0 - B - M2;
    return (u * u - d * d) / 4.0;
}

double tr_c(double A, double B) { return 1.0 - A - B; }
double pd1_c(double A, double B) { return 1.0 + A + B; }

std::optional<double> ns1_c(double A, double B)
{
    if (!(std::fabs(A - B) < 2.0)) {
        return std::nullopt;
    }
    return B * B - A * B - 1.0;
}

bool in_stability_region(const ShiftedParams& p)
{
    const auto ns = ns1_c(p.A, p.B);
    return ns && p.C > *ns && p.C < tr_c(p.A, p.B) && p.C < pd1_c(p.A, p.B);
}

double sh12_boundary_m1(double M2, double B)
{
    const double k = std::fabs(B) + std::fabs(M2);
    const double rho = (3.0 + 5.0 * k) / (3.0 + 4.0 * k) * (1.0 + k);
    const double s = rho + std::sqrt(rho * rho + 0.25);
    return s * s - (1.0 - M2 - B) * s;
}

bool in_sh12(const MiraParams& p) { return p.M1 >= sh12_boundary_m1(p.M2, p.B); }

ResonancePoint resonance_point(double B, int p, int q)
{
    if (q < 3) {
        throw DomainError("resonance_point: q must be at least 3 (q = 1, 2 are fold/flip points)");
    }
    if (p <= 0 || std::gcd(p, q) != 1) {
        throw DomainError("resonance_point: need p > 0 and gcd(p, q) = 1");
    }
    const double A = B + 2.0 * std::cos(2.0 * std::numbers::pi * p / q);
    return {A, B * B - A * B - 1.0};
}

std::string to_string(CurveKind k)
{
    switch (k) {
    case CurveKind::SN: return "SN";
    case CurveKind::PD: return "PD";
    case CurveKind::NS: return "NS";
    case CurveKind::TR: return "TR";
    case CurveKind::PD1: return "PD1";
    case CurveKind::NS1: return "NS1";
    case CurveKind::SH12: return "SH12";
    }
    return "?";
}

std::optional<CurveKind> parse_curve_kind(const std::string& s)
{
    for (auto k : {CurveKind::SN, CurveKind::PD, CurveKind::NS, CurveKind::TR, CurveKind::PD1,
                   CurveKind::NS1, CurveKind::SH12}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

std::vector<CurveSample> sample_curve(CurveKind kind, double B, double lo, double hi, int count)
{
    if (count < 1) {
        throw ContractViolation("sample_curve: count must be positive");
    }
    std::vector<CurveSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        CurveSample s{t, 0.0, true};
        switch (kind) {
        case CurveKind::SN: s.value = sn_m1(t, B); break;
        case CurveKind::PD: s.value = pd_m1(t, B); break;
        case CurveKind::TR: s.value = tr_c(t, B); break;
        case CurveKind::PD1: s.value = pd1_c(t, B); break;
        case CurveKind::SH12: s.value = sh12_boundary_m1(t, B); break;
        case CurveKind::NS:
        case CurveKind::NS1: {
            const auto v = kind == CurveKind::NS ? ns_m1(t, B) : ns1_c(t, B);
            s.in_domain = v.has_value();
            s.value = v.value_or(0.0);
            break;
        }
        }
        out.push_back(s);
    }
    return out;
}

std::string curve_csv(const std::vector<CurveSample>& samples)
{
    std::ostringstream os;
    os << "param,value,domain_flag\n";
    char buf[128];
    for (const auto& s : samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", s.param, s.value, s.in_domain ? 1 : 0);
        os << buf;
    }
    return os.str();
}

SaddleChart saddle_chart(const Grid2& grid, double unit_tol, int threads)
{
    grid.validate();
    if (grid.mira_family()) {
        throw ContractViolation("saddle_chart: grid axes must be A and C");
    }
    SaddleChart chart;
    chart.grid = grid;
    chart.unit_tol = unit_tol;
    chart.cells.resize(grid.cells());
    const int cols = grid.columns();
    const auto n = static_cast<long>(grid.cells());

#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : 1)
    for (long i = 0; i < n; ++i) {
        const int row = static_cast<int>(i / cols);
        const int col = static_cast<int>(i % cols);
        const ShiftedParams p = *grid.shifted_at(col, row);
        const auto mults = cubic_roots(-p.A, -p.C, -p.B);
        chart.cells[static_cast<std::size_t>(i)] = classify(mults, unit_tol);
    }
    return chart;
}

} // namespace mira
