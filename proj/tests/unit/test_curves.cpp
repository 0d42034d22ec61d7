#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mira/curves.hpp"

using namespace mira;

namespace {

double closest_to(const Multipliers& m, Complex target)
{
    double best = 1e300;
    for (const auto& mu : m) {
        best = std::min(best, std::abs(mu - target));
    }
    return best;
}

Grid2 ac_grid(double B, double a0, double a1, double c0, double c1, int n)
{
    Grid2 g;
    g.axis1 = {ParamName::A, a0, a1, n};
    g.axis2 = {ParamName::C, c0, c1, n};
    g.fixed_shifted = {0.0, B, 0.0};
    return g;
}

} // namespace

TEST_SUITE("curves")
{
    TEST_CASE("SN surface of the original form")
    {
        CHECK(sn_m1(0.6, 0.4) == 0.0);
        CHECK(sn_m1(0.0, 0.1) == doctest::Approx(-0.2025).epsilon(1e-15));
        const MiraParams m{sn_m1(0.2, 0.1), 0.2, 0.1};
        const auto fps = fixed_points_mira(m);
        REQUIRE(fps.size() == 1);
        CHECK(closest_to(fps[0].multipliers, {1.0, 0.0}) < 1e-9);
    }

    TEST_CASE("PD surface of the original form")
    {
        CHECK(pd_m1(-0.1, 0.1) == doctest::Approx(-0.25));
        CHECK(pd_m1(0.0, 0.1) == doctest::Approx(-0.1925).epsilon(1e-14));
        const MiraParams m{pd_m1(0.0, 0.1), 0.0, 0.1};
        const ShiftedParams p = to_shifted(m, FixedPointBranch::Minus);
        CHECK(closest_to(multipliers_at(p, {}), {-1.0, 0.0}) < 1e-9);
    }

    TEST_CASE("NS surface of the original form")
    {
        REQUIRE(ns_m1(0.0, 0.1).has_value());
        CHECK(*ns_m1(0.0, 0.1) == doctest::Approx(0.690525).epsilon(1e-14));
        CHECK(*ns_m1(0.0, 0.1) == doctest::Approx(to_mira({0.0, 0.1, -0.99}).M1).epsilon(1e-14));
        CHECK_FALSE(ns_m1(2.5, 0.5).has_value());
        CHECK_FALSE(ns_m1(-1.5, 0.5).has_value());
        for (double M2 : {-0.5, 0.0, 0.4, 1.2}) {
            const MiraParams m{*ns_m1(M2, 0.3), M2, 0.3};
            const auto mu = multipliers_at(to_shifted(m, FixedPointBranch::Plus), {});
            CHECK(std::fabs(std::abs(mu[0]) - 1.0) < 1e-9);
            CHECK(std::fabs(std::abs(mu[1]) - 1.0) < 1e-9);
            CHECK(std::abs(mu[2] - 0.3) < 1e-9);
        }
    }

    TEST_CASE("shifted-form planes")
    {
        CHECK(tr_c(0.0, 0.5) == 0.5);
        CHECK(pd1_c(0.0, 0.5) == 1.5);
        CHECK(*ns1_c(0.0, 0.1) == doctest::Approx(-0.99).epsilon(1e-15));
        CHECK(*ns1_c(0.3, 0.3) == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK_FALSE(ns1_c(2.5, 0.5).has_value());
        CHECK_FALSE(ns1_c(-1.5, 0.5).has_value());
    }

    TEST_CASE("cross-parameterization consistency")
    {
        for (double B : {0.1, 0.5, 0.7}) {
            for (double A = -1.3; A <= 2.0; A += 0.1) {
                const auto c = ns1_c(A, B);
                if (c) {
                    const MiraParams m = to_mira({A, B, *c});
                    CHECK(std::fabs(m.M1 - *ns_m1(m.M2, B)) < 1e-10);
                    const auto mu = multipliers_at({A, B, *c}, {});
                    CHECK(std::fabs(std::abs(mu[0]) - 1.0) < 1e-9);
                }
                const MiraParams tr = to_mira({A, B, tr_c(A, B)});
                CHECK(std::fabs(tr.M1 - sn_m1(tr.M2, B)) < 1e-10);
                CHECK(closest_to(multipliers_at({A, B, tr_c(A, B)}, {}), {1.0, 0.0}) < 1e-9);
                const MiraParams pd = to_mira({A, B, pd1_c(A, B)});
                CHECK(std::fabs(pd.M1 - pd_m1(pd.M2, B)) < 1e-10);
                // At A = B - 2 the root -1 is double and only good to sqrt(eps).
                const double pd_tol = std::fabs(A - (B - 2.0)) < 1e-9 ? 1e-7 : 1e-9;
                CHECK(closest_to(multipliers_at({A, B, pd1_c(A, B)}, {}), {-1.0, 0.0}) < pd_tol);
            }
        }
    }

    TEST_CASE("SH(1,2) boundary")
    {
        // Frozen from a 30-digit evaluation of the same closed form.
        CHECK(sh12_boundary_m1(0.0, 0.0) == doctest::Approx(2.36803398874989485).epsilon(1e-14));
        CHECK(sh12_boundary_m1(0.0, 0.1) == doctest::Approx(3.48460264313923880).epsilon(1e-14));
        CHECK(sh12_boundary_m1(0.3, 0.5) == doctest::Approx(16.1915943989423560).epsilon(1e-14));
        double prev = sh12_boundary_m1(0.0, 0.0);
        for (double k = 0.05; k < 3.0; k += 0.05) {
            const double v = sh12_boundary_m1(k / 2.0, k / 2.0);
            CHECK(v > prev);
            prev = v;
        }
        const double b = sh12_boundary_m1(0.2, 0.1);
        CHECK(in_sh12({b + 1.0, 0.2, 0.1}));
        CHECK(in_sh12({b, 0.2, 0.1}));
        CHECK_FALSE(in_sh12({b - 1.0, 0.2, 0.1}));
    }

    TEST_CASE("resonance points lie on NS1 with the right argument")
    {
        const auto r4 = resonance_point(0.3, 1, 4);
        CHECK(r4.A == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(r4.C == doctest::Approx(-1.0).epsilon(1e-15));
        const auto r3 = resonance_point(0.3, 1, 3);
        CHECK(r3.A == doctest::Approx(-0.7));
        CHECK(r3.C == doctest::Approx(-0.7));
        for (int q : {5, 6, 7}) {
            const auto r = resonance_point(0.5, 1, q);
            CHECK(r.C == doctest::Approx(*ns1_c(r.A, 0.5)).epsilon(1e-14));
            const auto mu = multipliers_at({r.A, 0.5, r.C}, {});
            CHECK(std::fabs(std::arg(mu[0]) - 2.0 * std::numbers::pi / q) < 1e-9);
            CHECK(std::fabs(std::abs(mu[0]) - 1.0) < 1e-9);
        }
        CHECK_THROWS_AS((void)resonance_point(0.5, 1, 2), DomainError);
        CHECK_THROWS_AS((void)resonance_point(0.5, 2, 4), DomainError);
    }

    TEST_CASE("curve sampling and CSV")
    {
        const auto s = sample_curve(CurveKind::NS1, 0.5, -2.0, 3.0, 6);
        REQUIRE(s.size() == 6);
        CHECK_FALSE(s[0].in_domain);
        CHECK(s[2].in_domain);
        CHECK(s[2].value == doctest::Approx(*ns1_c(0.0, 0.5)));
        const std::string csv = curve_csv(sample_curve(CurveKind::TR, 0.1, 0.0, 1.0, 2));
        CHECK(csv == "param,value,domain_flag\n0,0.90000000000000002,1\n1,-0.10000000000000001,1\n");
        CHECK(parse_curve_kind("SH12") == CurveKind::SH12);
        CHECK_FALSE(parse_curve_kind("XX").has_value());
    }

    TEST_CASE("saddle chart")
    {
        // A window strictly inside the stability region at B = 0.5.
        const auto inside = saddle_chart(ac_grid(0.5, 0.2, 0.4, -0.6, -0.2, 9));
        for (const auto& t : inside.cells) {
            CHECK(t.stable == 3);
        }
        const auto chart = saddle_chart(ac_grid(0.1, -0.5, 0.5, -2.0, 1.5, 21));
        for (int r = 0; r < chart.grid.rows(); ++r) {
            for (int c = 0; c < chart.grid.columns(); ++c) {
                const auto p = *chart.grid.shifted_at(c, r);
                // Nodes that land on PD1 up to rounding read as non-hyperbolic.
                if (in_stability_region(p)) {
                    CHECK(chart.at(c, r).unstable == 0);
                    CHECK(chart.at(c, r).stable + chart.at(c, r).neutral == 3);
                }
            }
        }
        Grid2 on_ns = ac_grid(0.1, 0.0, 1.0, -0.99, 0.0, 2);
        on_ns.axis1.count = 1;
        on_ns.axis2.count = 1;
        CHECK(saddle_chart(on_ns, 1e-9).cells[0].on_unit_circle());

        Grid2 sh = ac_grid(0.1, 0.0, 1.0, -1.7, 0.0, 2);
        sh.axis1.count = 1;
        sh.axis2.count = 1;
        const OrbitType t = saddle_chart(sh).cells[0];
        CHECK(t.stable == 1);
        CHECK(t.unstable == 2);
        CHECK(t.saddle_focus());

        CHECK(saddle_chart(ac_grid(0.1, -0.5, 0.5, -2.0, 1.5, 21), kSweepUnitTol, 4).cells == chart.cells);
    }
}
