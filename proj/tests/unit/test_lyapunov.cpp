#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mira/analysis.hpp"
#include "mira/lyapunov.hpp"

using namespace mira;

namespace {

Spectrum make(double l1, double l2, double l3)
{
    Spectrum s;
    s.lambda = {l1, l2, l3};
    return s;
}

Mat3 rotation(double a, double b)
{
    const Mat3 r1 = Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
    const Mat3 r2 = Eigen::AngleAxisd(b, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    return r1 * r2;
}

} // namespace

TEST_SUITE("lyapunov")
{
    TEST_CASE("stable fixed point: negative exponents and the sum rule")
    {
        const Spectrum s = spectrum({0.0, 0.1, -0.5}, default_initial_state());
        CHECK_FALSE(s.escaped);
        CHECK(s.lambda[0] < 0.0);
        CHECK(std::fabs(s.sum() - std::log(0.1)) < 1e-3);
        CHECK(s.lambda[0] >= s.lambda[1]);
        CHECK(s.lambda[1] >= s.lambda[2]);
    }

    TEST_CASE("hyperchaotic attractor spectrum")
    {
        const Spectrum s = spectrum({0.0, 0.1, -1.62}, default_initial_state(), {10'000, 1'000'000, 1});
        CHECK(std::fabs(s.lambda[0] - 0.132) < 0.02);
        CHECK(std::fabs(s.lambda[1] - 0.027) < 0.02);
        CHECK(std::fabs(s.lambda[2] + 2.462) < 0.02);
        CHECK(std::fabs(s.sum() - std::log(0.1)) < 1e-3);
    }

    TEST_CASE("escape is flagged with zero exponents")
    {
        const Spectrum s = spectrum({0.0, 0.1, 2.0}, {5, 5, 5});
        CHECK(s.escaped);
        CHECK(s.lambda == std::array<double, 3>{0.0, 0.0, 0.0});
        CHECK(classify_regime(s).regime == Regime::Divergent);
    }

    TEST_CASE("preconditions")
    {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS((void)spectrum({0, 0.1, -1}, {nan, 0, 0}), ContractViolation);
        CHECK_THROWS_AS((void)spectrum({0, 0.1, -1}, {0.1, 0, 0}, {10, 0, 1}), ContractViolation);
        CHECK_THROWS_AS((void)spectrum({0, 0.1, -1}, {0.1, 0, 0}, {10, 10, 0}), ContractViolation);
        CHECK_THROWS_AS(RegimeThresholds({0.01, 0.001}).validate(), ContractViolation);
    }

    TEST_CASE("renormalization interval and initial frame do not matter")
    {
        const ShiftedParams p{0.5, 0.5, -1.83};
        const LyapunovSettings base{10'000, 200'000, 1};
        const Spectrum ref = spectrum(p, default_initial_state(), base);
        for (int every : {5, 10}) {
            LyapunovSettings s = base;
            s.renorm_every = every;
            const Spectrum r = spectrum(p, default_initial_state(), s);
            for (int k = 0; k < 3; ++k) {
                CHECK(std::fabs(r.lambda[k] - ref.lambda[k]) < 1e-4);
            }
        }
        for (auto [a, b] : {std::pair{0.3, 1.1}, std::pair{2.0, -0.7}}) {
            const Spectrum r = spectrum(p, default_initial_state(), base, rotation(a, b));
            for (int k = 0; k < 3; ++k) {
                CHECK(std::fabs(r.lambda[k] - ref.lambda[k]) < 1e-4);
            }
        }
    }

    TEST_CASE("at a stable period-4 orbit the top exponent is the log multiplier rate")
    {
        const ShiftedParams p{0.0, 0.1, -1.3};
        const PeriodicOrbit orb = find_orbit(p, 4, {0.431863, 0.287578, -0.789265});
        REQUIRE(orb.type.stable == 3);
        const Spectrum s = spectrum(p, orb.points[0], {4, 4'000'000, 1});
        CHECK(std::fabs(s.lambda[0] - std::log(std::abs(orb.multipliers[0])) / 4.0) < 1e-6);
        CHECK(std::fabs(s.lambda[2] - std::log(std::abs(orb.multipliers[2])) / 4.0) < 1e-6);
    }

    TEST_CASE("regime classification")
    {
        CHECK(classify_regime(make(0.09, 0.005, -0.788)).regime == Regime::Hyperchaotic);
        const RegimeClass torus = classify_regime(make(0.033, -3.65e-5, -0.726));
        CHECK(torus.regime == Regime::Chaotic);
        CHECK(torus.flow_like);
        CHECK(label(torus) == "FlowLike");
        const RegimeClass chaos = classify_regime(make(0.13, -0.2, -2.2));
        CHECK(chaos.regime == Regime::Chaotic);
        CHECK_FALSE(chaos.flow_like);
        CHECK(classify_regime(make(-0.1, -0.2, -2.0)).regime == Regime::Periodic);
        CHECK(classify_regime(make(0.0002, -0.05, -2.0)).regime == Regime::Quasiperiodic);
        CHECK(classify_regime(make(0.0002, -0.0005, -2.0)).regime == Regime::Borderline);
        for (const char* l : {"Periodic", "Quasiperiodic", "Chaotic", "FlowLike", "Hyperchaotic", "Borderline",
                              "Divergent"}) {
            REQUIRE(parse_regime_label(l).has_value());
            CHECK(label(*parse_regime_label(l)) == l);
        }
        CHECK_FALSE(parse_regime_label("Red").has_value());
    }

    TEST_CASE("batch matches single calls and is order preserving")
    {
        const LyapunovSettings ls{2'000, 20'000, 1};
        std::vector<SpectrumTask> tasks;
        for (double C = -1.70; C <= -1.50; C += 0.02) {
            tasks.push_back({{0.0, 0.1, C}, default_initial_state()});
        }
        const auto batch = spectrum_batch(tasks, ls, 3);
        REQUIRE(batch.size() == tasks.size());
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const Spectrum one = spectrum(tasks[i].params, tasks[i].init, ls);
            CHECK(batch[i].lambda == one.lambda);
        }
        auto reversed = tasks;
        std::reverse(reversed.begin(), reversed.end());
        const auto rb = spectrum_batch(reversed, ls, 1);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            CHECK(rb[tasks.size() - 1 - i].lambda == batch[i].lambda);
        }
        const auto single = spectrum_batch({tasks[0]}, ls, 1);
        CHECK(single[0].lambda == spectrum(tasks[0].params, tasks[0].init, ls).lambda);
    }
}
