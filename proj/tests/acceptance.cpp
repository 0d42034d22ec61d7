// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mira/analysis.hpp"
#include "mira/curves.hpp"
#include "mira/lyapunov.hpp"
#include "mira/orbits.hpp"
#include "mira/sweep.hpp"
#include "oracle.hpp"

using namespace mira;

namespace {

struct Report {
    bool ok = true;
    std::ostringstream detail;

    void check(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail << " [fail: " << what << "]";
        }
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

const State kP4Guess01{0.431863, 0.287578, -0.789265};
const State kS4Guess01{0.238669, -0.776893, -0.324206};
const State kP4Guess05{-0.9245, -0.9245, 0.3245};
const State kS4Guess05{-1.054309, -0.121017, 0.454309};

// Distance-scan conventions shared by criteria 4 and 5: C scanned downward
// with inherited initial conditions and 10^6-point clouds.
ScanSettings scan_settings()
{
    ScanSettings s;
    s.transient = 10'000;
    s.samples = 1'000'000;
    s.policy = InitialPolicy::Inherit;
    return s;
}

TargetFn orbit_target(const ShiftedParams& seed_params, const State& guess, double range_end)
{
    const PeriodicOrbit orb = find_orbit(seed_params, 4, guess);
    return branch_target(continue_orbit(orb, ContinuationParam::C, range_end - 0.01));
}

ScanResult distance_scan(const ShiftedParams& base, const TargetFn& target, double tau, double c0, double c1, int n)
{
    ScanPredicate pred;
    pred.target = target;
    pred.tau = tau;
    return event_scan(base, ContinuationParam::C, linspace(c0, c1, n), pred, scan_settings());
}

/// First false -> true crossing.
double first_onset(const ScanResult& r)
{
    for (const auto& c : r.crossings) {
        if (c.from == "false" && c.to == "true") {
            return c.param;
        }
    }
    return NAN;
}

/// Onset of containment that persists to the end of the range.
double persistent_onset(const ScanResult& r)
{
    if (r.samples.empty() || r.samples.back().label != "true") {
        return NAN;
    }
    for (auto it = r.crossings.rbegin(); it != r.crossings.rend(); ++it) {
        if (it->to == "true") {
            return it->param;
        }
        break;
    }
    return NAN;
}

std::vector<double> sorted(std::array<double, 3> v)
{
    std::sort(v.begin(), v.end());
    return {v.begin(), v.end()};
}

// --- criteria --------------------------------------------------------------------------

struct Triple {
    double A, B, C;
    std::array<double, 3> lambda;
};

const std::vector<Triple> kCaptions{
    {0.0, 0.1, -1.525, {0.073, -0.22, -2.156}},   {0.0, 0.1, -1.62, {0.132, 0.027, -2.462}},
    {0.0, 0.1, -1.7, {0.160, 0.114, -2.577}},     {0.5, 0.5, -1.78, {0.036, 0.0187, -0.748}},
    {0.5, 0.5, -1.79, {0.072, 0.0315, -0.797}},   {0.5, 0.5, -1.83, {0.131, 0.0346, -0.858}},
    {-0.44, 0.7, -0.41, {0.017, -0.011, -0.363}}, {-0.44, 0.7, -0.44, {0.015, 0.004, -0.376}},
    {1.33, 0.5, -1.75, {0.033, -3.65e-5, -0.726}}, {1.33, 0.5, -1.89, {0.09, 0.005, -0.788}},
    {1.55, 0.7, -1.96, {0.0348, 0.0001, -0.392}}, {1.55, 0.7, -2.03, {0.107, 0.0, -0.463}},
};

void sum_rule(Report& r)
{
    std::mt19937 gen(20240611);
    std::uniform_real_distribution<double> a(-1.0, 2.0);
    std::uniform_real_distribution<double> c(-2.3, 0.5);
    const double bs[] = {0.1, 0.3, 0.5, 0.7};
    int accepted = 0;
    double worst = 0.0;
    for (int i = 0; accepted < 100; ++i) {
        const ShiftedParams p{a(gen), bs[i % 4], c(gen)};
        const Spectrum s = spectrum(p, default_initial_state(), {10'000, 1'000'000, 1});
        if (s.escaped) {
            continue;
        }
        ++accepted;
        worst = std::fmax(worst, std::fabs(s.sum() - std::log(p.B)));
    }
    r.check(worst < 1e-3, "worst |sum - ln B| = " + fmt(worst));
    double worst_caption = 0.0;
    for (const auto& t : kCaptions) {
        worst_caption = std::fmax(worst_caption, std::fabs(t.lambda[0] + t.lambda[1] + t.lambda[2] - std::log(t.B)));
    }
    r.check(worst_caption < 1e-3, "caption sum off by " + fmt(worst_caption));
    r.detail << " worst=" << fmt(worst) << " captions=" << fmt(worst_caption);
}

void caption_spectra(Report& r)
{
    double worst = 0.0;
    for (const auto& t : kCaptions) {
        const Spectrum s = spectrum({t.A, t.B, t.C}, default_initial_state(), {10'000, 1'000'000, 1});
        const auto got = sorted(s.lambda);
        const auto want = sorted(t.lambda);
        for (int k = 0; k < 3; ++k) {
            const double d = std::fabs(got[k] - want[k]);
            worst = std::fmax(worst, d);
            r.check(!s.escaped && d <= 0.02, "(" + fmt(t.A) + "," + fmt(t.B) + "," + fmt(t.C) + ") lambda off by "
                                                 + fmt(d));
        }
    }
    r.detail << " worst=" << fmt(worst);
}

void analytic_bifurcations(Report& r)
{
    const PeriodicOrbit origin = find_orbit({0.0, 0.1, 0.0}, 1, State{});
    const Branch up = continue_orbit(origin, ContinuationParam::C, 1.2);
    const Branch down = continue_orbit(origin, ContinuationParam::C, -1.2);
    const auto first = [](const Branch& b, EventKind k) {
        for (const auto& e : b.events) {
            if (e.kind == k) {
                return e.param;
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    const double tr = first(up, EventKind::TR);
    const double pd = first(up, EventKind::PD);
    const double ns = first(down, EventKind::NS);
    r.check(near(tr, tr_c(0.0, 0.1), 1e-6) && near(tr, 0.9, 1e-6), "TR at " + fmt(tr));
    r.check(near(pd, pd1_c(0.0, 0.1), 1e-6) && near(pd, 1.1, 1e-6), "PD at " + fmt(pd));
    r.check(near(ns, -0.99, 1e-6), "NS at " + fmt(ns));
    r.detail << " TR=" << fmt(tr) << " PD=" << fmt(pd) << " NS=" << fmt(ns);

    for (double B : {0.1, 0.5}) {
        const auto has = [](const Multipliers& m, Complex z) {
            bool a = false;
            bool b = false;
            for (const auto& mu : m) {
                a = a || std::abs(mu - z) < 1e-9;
                b = b || std::abs(mu - std::conj(z)) < 1e-9;
            }
            return a && b;
        };
        const Multipliers r4 = multipliers_at({B, B, -1.0}, State{});
        const Multipliers r3 = multipliers_at({B - 1.0, B, B - 1.0}, State{});
        r.check(has(r4, std::polar(1.0, std::numbers::pi / 2)), "R4 multipliers at B=" + fmt(B));
        r.check(has(r3, std::polar(1.0, 2 * std::numbers::pi / 3)), "R3 multipliers at B=" + fmt(B));
    }
}

void scenario_b01(Report& r)
{
    const ShiftedParams seed{0.0, 0.1, -1.3};
    const PeriodicOrbit p4 = find_orbit(seed, 4, kP4Guess01);
    const Branch branch = continue_orbit(p4, ContinuationParam::C, -1.7);
    double pd4 = NAN;
    for (const auto& e : branch.events) {
        if (e.kind == EventKind::PD && e.before.stable == 2 && e.before.unstable == 1 && e.after.stable == 1
            && e.after.unstable == 2) {
            pd4 = e.param;
            break;
        }
    }
    r.check(near(pd4, -1.616, 0.01), "C_PD4 = " + fmt(pd4));

    const double ha = first_onset(distance_scan(seed, orbit_target(seed, kP4Guess01, -1.60), 1e-2, -1.45, -1.60, 31));
    r.check(near(ha, -1.52, 0.02), "C_4HA = " + fmt(ha));
    const double cr = first_onset(distance_scan(seed, orbit_target(seed, kS4Guess01, -1.70), 0.1, -1.50, -1.70, 41));
    r.check(near(cr, -1.58, 0.02), "C_4cr = " + fmt(cr));
    const double ab
        = persistent_onset(distance_scan(seed, orbit_target(seed, kS4Guess01, -1.75), 1e-2, -1.55, -1.75, 41));
    r.check(near(ab, -1.65, 0.02), "C_4ab = " + fmt(ab));
    const double sh = persistent_onset(distance_scan(seed, fixed_target(State{}), 1e-2, -1.55, -1.75, 41));
    r.check(near(sh, -1.66, 0.02), "C_Sh = " + fmt(sh));
    r.detail << " PD4=" << fmt(pd4) << " 4HA=" << fmt(ha) << " 4cr=" << fmt(cr) << " 4ab=" << fmt(ab)
             << " Sh=" << fmt(sh);
}

void scenario_b05(Report& r)
{
    const ShiftedParams seed{0.5, 0.5, -1.6};
    const double sh4
        = persistent_onset(distance_scan(seed, orbit_target(seed, kP4Guess05, -1.84), 1e-2, -1.70, -1.84, 29));
    r.check(near(sh4, -1.762, 0.02), "C_4Sh = " + fmt(sh4));
    const double cr = first_onset(distance_scan(seed, orbit_target(seed, kS4Guess05, -1.84), 0.1, -1.70, -1.84, 29));
    r.check(near(cr, -1.789, 0.02), "C_4cr = " + fmt(cr));
    const LyapunovSettings ls{10'000, 1'000'000, 1};
    double jump = NAN;
    if (std::isfinite(cr)) {
        const double before = spectrum({0.5, 0.5, cr + 0.01}, default_initial_state(), ls).lambda[1];
        const double after = spectrum({0.5, 0.5, cr - 0.01}, default_initial_state(), ls).lambda[1];
        jump = after - before;
    }
    r.check(jump >= 0.005, "lambda2 jump across C_4cr = " + fmt(jump));
    const double ab = persistent_onset(distance_scan(seed, fixed_target(State{}), 1e-2, -1.70, -1.84, 29));
    r.check(near(ab, -1.820, 0.02), "C_ab = " + fmt(ab));

    const ShiftedParams weak{1.33, 0.5, -1.8};
    const double contain = persistent_onset(distance_scan(weak, fixed_target(State{}), 1e-2, -1.80, -1.90, 21));
    r.check(near(contain, -1.882, 0.02), "O+ containment at A=1.33 from " + fmt(contain));
    double lo = 1.0;
    double hi = -1.0;
    for (double C : {-1.882, -1.884, -1.886, -1.888}) {
        const double l2 = spectrum({1.33, 0.5, C}, default_initial_state(), ls).lambda[1];
        lo = std::fmin(lo, l2);
        hi = std::fmax(hi, l2);
    }
    r.check(lo > 0.0 && hi < 0.006, "lambda2 on (-1.89,-1.88) spans [" + fmt(lo) + "," + fmt(hi) + "]");
    r.detail << " 4Sh=" << fmt(sh4) << " 4cr=" << fmt(cr) << " jump=" << fmt(jump) << " ab=" << fmt(ab)
             << " contain=" << fmt(contain) << " l2=[" << fmt(lo) << "," << fmt(hi) << "]";
}

struct Window {
    double B, a0, a1, c0, c1;
};

void diagram_regression(Report& r)
{
    SweepSettings s;
    s.thresholds = {0.003, 0.003};
    const auto grid = [](const Window& w) {
        Grid2 g;
        g.axis1 = {ParamName::A, w.a0, w.a1, 200};
        g.axis2 = {ParamName::C, w.c0, w.c1, 200};
        g.fixed_shifted = {0.0, w.B, 0.0};
        return g;
    };
    for (const Window& w : {Window{0.1, -0.4, 0.6, -1.9, -0.9}, Window{0.5, 0.0, 1.2, -2.0, -1.0}}) {
        const Grid2 g = grid(w);
        const RegimeRaster raster = sweep_lyapunov(g, s);
        std::size_t hyper = 0;
        std::size_t hyper_inside = 0;
        std::size_t hyper_above = 0;
        double hyper_c = 0.0;
        double periodic_c = 0.0;
        std::size_t periodic = 0;
        for (int row = 0; row < g.rows(); ++row) {
            for (int col = 0; col < g.columns(); ++col) {
                const ShiftedParams p = *g.shifted_at(col, row);
                const Regime reg = raster.at(col, row).regime.regime;
                if (reg == Regime::Hyperchaotic) {
                    ++hyper;
                    hyper_c += p.C;
                    hyper_inside += in_stability_region(p) ? 1 : 0;
                    hyper_above += p.C >= -1.0 ? 1 : 0;
                } else if (reg == Regime::Periodic && !in_stability_region(p)) {
                    ++periodic;
                    periodic_c += p.C;
                }
            }
        }
        const std::string tag = "B=" + fmt(w.B);
        r.check(hyper > 0, tag + " no hyperchaotic cells");
        r.check(hyper_inside == 0, tag + " hyperchaos inside the stability region");
        r.check(hyper_above == 0, tag + " hyperchaos above the tongue root");
        if (hyper > 0 && periodic > 0) {
            r.check(hyper_c / hyper < periodic_c / periodic, tag + " hyperchaos not below the locked region");
        }
        r.detail << " " << tag << ":H=" << fmt(static_cast<double>(hyper) / g.cells()) << ",inside=" << hyper_inside;
    }
    const Grid2 g = grid({0.7, 0.8, 2.0, -2.2, -1.6});
    const RegimeRaster raster = sweep_lyapunov(g, s);
    std::size_t hyper = 0;
    double max_l2 = 0.0;
    for (const auto& c : raster.cells) {
        if (c.regime.regime == Regime::Hyperchaotic) {
            ++hyper;
            max_l2 = std::fmax(max_l2, c.spectrum.lambda[1]);
        }
    }
    r.check(hyper == 0, "B=0.7 window has " + std::to_string(hyper) + " hyperchaotic cells, max lambda2 "
                            + fmt(max_l2));
    r.detail << " B=0.7:H=" << hyper;
}

void determinism(Report& r)
{
    Grid2 g;
    g.axis1 = {ParamName::A, 0.0, 1.2, 40};
    g.axis2 = {ParamName::C, -2.0, -1.0, 40};
    g.fixed_shifted = {0.0, 0.5, 0.0};
    for (auto policy : {InitialPolicy::Fresh, InitialPolicy::Inherit}) {
        SweepSettings s;
        s.lyapunov = {2'000, 20'000, 1};
        s.policy = policy;
        const RegimeRaster one = sweep_lyapunov(g, s, 1);
        const RegimeRaster eight = sweep_lyapunov(g, s, 8);
        r.check(render(one) == render(eight) && write_csv(one) == write_csv(eight) && metadata(one) == metadata(eight),
                "regime raster differs across workers (" + to_string(policy) + ")");
        DistanceSettings ds;
        ds.samples = 10'000;
        ds.policy = policy;
        const DistanceRaster d1 = sweep_distance(g, DistanceTarget::OPlus, ds, 1);
        const DistanceRaster d8 = sweep_distance(g, DistanceTarget::OPlus, ds, 8);
        r.check(render(d1) == render(d8) && write_csv(d1) == write_csv(d8),
                "distance raster differs across workers (" + to_string(policy) + ")");
    }
    const auto cli = [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = cli::run(args, out, err);
        return std::to_string(code) + out.str();
    };
    const std::vector<std::vector<std::string>> commands{
        {"lyap", "--A", "0", "--B", "0.1", "--C", "-1.62", "--iterations", "100000"},
        {"tree", "--A", "0", "--B", "0.1", "--range", "-1.2:-1.7:26", "--points", "50", "--threads", "8"},
        {"event-scan", "--A", "0", "--B", "0.1", "--range", "-1.55:-1.75:11", "--predicate", "dist-O+", "--tau",
         "0.01", "--threads", "8"},
        {"orbit", "continue", "--A", "0", "--B", "0.1", "--C", "-1.3", "--q", "4", "--guess",
         "0.431863,0.287578,-0.789265", "--to", "-1.7"},
    };
    for (const auto& c : commands) {
        const std::string a = cli(c);
        r.check(a.rfind("0", 0) == 0 && a == cli(c), "CLI rerun differs: " + c[0]);
    }
}

void oracle_equivalence(Report& r)
{
    std::size_t compared = 0;
    double worst = 0.0;
    double worst_det = 0.0;
    for (const ShiftedParams& p : {ShiftedParams{0.0, 0.1, -1.3}, ShiftedParams{0.0, 0.1, 1.15},
                                   ShiftedParams{0.5, 0.5, -1.6}}) {
        for (int q : {1, 2, 4}) {
            const auto pts = oracle::fixed_points_of_iterate(p, q, -3.0, 3.0, 121);
            bool genuine = q == 1;
            for (const auto& x : pts) {
                const Vec3 guess = x + Vec3(1e-4, -1e-4, 1e-4);
                PeriodicOrbit orb;
                try {
                    orb = find_orbit(p, q, State::from(guess));
                } catch (const Error& e) {
                    r.check(false, "Newton failed near an oracle point: " + std::string(e.what()));
                    continue;
                }
                const double d = (orb.points[0].vec() - x).norm();
                worst = std::fmax(worst, d);
                const double det = orb.monodromy.determinant();
                worst_det = std::fmax(worst_det, std::fabs(det / std::pow(p.B, q) - 1.0));
                genuine = genuine || orb.detected_period == q;
                ++compared;
            }
            // Both fixed points are fixed points of every iterate.
            std::size_t fixed = 0;
            for (const auto& f : fixed_points(p)) {
                for (const auto& x : pts) {
                    fixed += (f.location.vec() - x).norm() < 1e-8 ? 1 : 0;
                }
            }
            r.check(fixed == 2, "oracle missed a fixed point, q=" + std::to_string(q));
            const bool expect_genuine = q == 1 || (q == 2 && p.C > 1.1) || (q == 4 && p.C < 0.0);
            if (expect_genuine) {
                r.check(genuine, "no genuine period-" + std::to_string(q) + " orbit at C=" + fmt(p.C));
            }
        }
    }
    r.check(worst < 1e-8, "Newton vs oracle distance " + fmt(worst));
    r.check(worst_det < 1e-8, "monodromy determinant relative error " + fmt(worst_det));
    r.detail << " points=" << compared << " worst=" << fmt(worst) << " det=" << fmt(worst_det);
}

double manifold_gap(const PeriodicOrbit& orbit)
{
    const AttractorCloud cloud = sample_attractor(orbit.params, default_initial_state(), 10'000, 100'000);
    double best = INFINITY;
    for (int branch : {1, -1}) {
        const ManifoldPolyline m = grow_manifold(orbit, ManifoldSide::Stable, branch);
        best = std::fmin(best, homoclinic_gap(m, cloud, 0.05));
    }
    return best;
}

void homoclinic(Report& r)
{
    const PeriodicOrbit p4 = find_orbit({0.5, 0.5, -1.6}, 4, kP4Guess05);
    const Branch branch = continue_orbit(p4, ContinuationParam::C, -1.78);
    const PeriodicOrbit& at = branch.nodes.back().orbit;
    r.check(near(branch.nodes.back().param, -1.78, 1e-12), "P4 continuation stopped early");
    const double g4 = manifold_gap(at);
    r.check(g4 < 1e-2, "P4 gap " + fmt(g4));
    const PeriodicOrbit o = find_orbit({1.33, 0.5, -1.89}, 1, State{});
    const double go = manifold_gap(o);
    r.check(go < 1e-2, "O+ gap " + fmt(go));
    r.detail << " P4=" << fmt(g4) << " O+=" << fmt(go);
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<void(Report&)>>> criteria{
        {"sum rule", sum_rule},
        {"caption spectra", caption_spectra},
        {"analytic bifurcations", analytic_bifurcations},
        {"scenario events B=0.1", scenario_b01},
        {"scenario events B=0.5", scenario_b05},
        {"diagram regression", diagram_regression},
        {"determinism", determinism},
        {"oracle equivalence", oracle_equivalence},
        {"homoclinic structure", homoclinic},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Report r;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(r);
        } catch (const std::exception& e) {
            r.ok = false;
            r.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %zu %s%s (%.1fs)\n", r.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.str().c_str(),
                    secs);
        std::fflush(stdout);
        failed += r.ok ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
