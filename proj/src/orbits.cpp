#include "mira/orbits.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mira {
namespace {

using Vec4 = Eigen::Vector4d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat4 = Eigen::Matrix4d;
using Mat5 = Eigen::Matrix<double, 5, 5>;

constexpr double kPeriodDetectTol = 1e-8;
// A corrector step larger than this is taken as a jump to another branch.
constexpr double kMaxCorrection = 0.05;

Vec3 displacement(const IterateJet& j, const Vec3& x) { return j.value - x; }

bool finite(const Vec3& v) { return v.allFinite(); }

int detect_period(const ShiftedParams& p, const Vec3& x, int q)
{
    for (int d = 1; d < q; ++d) {
        if (q % d != 0) {
            continue;
        }
        State s = State::from(x);
        for (int k = 0; k < d; ++k) {
            s = step(p, s);
        }
        if ((s.vec() - x).norm() < kPeriodDetectTol * (1.0 + x.norm())) {
            return d;
        }
    }
    return q;
}

/// Unit vector spanning the (numerical) kernel of a square matrix.
Vec3 null_vector(const Mat3& m)
{
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullV);
    return svd.matrixV().col(2);
}

template <int Rows>
Eigen::Matrix<double, Rows + 1, 1> kernel_of(const Eigen::Matrix<double, Rows, Rows + 1>& j)
{
    Eigen::HouseholderQR<Eigen::Matrix<double, Rows + 1, Rows>> qr(j.transpose());
    Eigen::Matrix<double, Rows + 1, Rows + 1> q = qr.householderQ();
    return q.col(Rows);
}

double pair_argument(const Multipliers& m)
{
    for (const auto& mu : m) {
        if (mu.imag() > 0.0) {
            return std::arg(mu);
        }
    }
    return 0.0;
}

// --- one-parameter machinery --------------------------------------------------

double select_test(const TestFunctions& t, EventKind k)
{
    switch (k) {
    case EventKind::SN:
    case EventKind::TR: return t.g_sn;
    case EventKind::PD: return t.g_pd;
    case EventKind::NS: return t.g_ns;
    }
    return 0.0;
}


struct Solver {
    ShiftedParams base;
    ContinuationParam cp;
    int q;

    ShiftedParams at(double c) const { return with_param(base, cp, c); }

    IterateJet jet(const Vec3& x, double c) const { return iterate_jet(at(c), x, q); }

    Vec3 d_dparam(const IterateJet& j) const { return cp == ContinuationParam::A ? j.d_dA : j.d_dC; }

    /// Newton at fixed parameter. Returns iterations used, or -1.
    int correct_fixed(Vec3& x, double c, double tol, int max_iter) const
    {
        const ShiftedParams p = at(c);
        for (int it = 0; it <= max_iter; ++it) {
            const IterateJet j = iterate_jet(p, x, q);
            const Vec3 r = displacement(j, x);
            if (!finite(r)) {
                return -1;
            }
            if (r.norm() < tol) {
                return it;
            }
            if (it == max_iter) {
                break;
            }
            const Vec3 dx = (j.jacobian - Mat3::Identity()).fullPivLu().solve(-r);
            if (!finite(dx)) {
                return -1;
            }
            x += dx;
        }
        return -1;
    }

    /// Newton on {F^q(x) - x = 0, d.(u - anchor) = 0} in u = (x, c).
    int correct_on_plane(Vec4& u, const Vec4& anchor, const Vec4& d, double tol, int max_iter) const
    {
        for (int it = 0; it <= max_iter; ++it) {
            const Vec3 x = u.head<3>();
            const IterateJet j = jet(x, u[3]);
            const Vec3 r = displacement(j, x);
            const double plane = d.dot(u - anchor);
            if (!finite(r) || !std::isfinite(plane)) {
                return -1;
            }
            if (r.norm() < tol && std::fabs(plane) < tol) {
                return it;
            }
            if (it == max_iter) {
                break;
            }
            Mat4 jm;
            jm.topLeftCorner<3, 3>() = j.jacobian - Mat3::Identity();
            jm.topRightCorner<3, 1>() = d_dparam(j);
            jm.bottomRows<1>() = d.transpose();
            Vec4 rhs;
            rhs << -r, -plane;
            const Vec4 du = jm.fullPivLu().solve(rhs);
            if (!du.allFinite()) {
                return -1;
            }
            u += du;
        }
        return -1;
    }

    /// Newton on {F^q(x) - x = 0, g = 0} in u = (x, c); the g row by central
    /// differences. Bisection alone resolves a fold only to sqrt(event_tol).
    bool polish(Vec4& u, EventKind kind, double tol, int max_iter) const
    {
        const auto g = [&](const Vec4& v) {
            return select_test(test_functions(jet(v.head<3>(), v[3]).jacobian), kind);
        };
        for (int it = 0; it <= max_iter; ++it) {
            const Vec3 x = u.head<3>();
            const IterateJet j = jet(x, u[3]);
            Vec4 r;
            r << displacement(j, x), select_test(test_functions(j.jacobian), kind);
            if (!r.allFinite()) {
                return false;
            }
            if (r.norm() < tol) {
                return true;
            }
            Mat4 jm;
            jm.topLeftCorner<3, 3>() = j.jacobian - Mat3::Identity();
            jm.topRightCorner<3, 1>() = d_dparam(j);
            for (int i = 0; i < 4; ++i) {
                const double h = 1e-6 * (1.0 + std::fabs(u[i]));
                Vec4 up = u;
                Vec4 um = u;
                up[i] += h;
                um[i] -= h;
                jm(3, i) = (g(up) - g(um)) / (2.0 * h);
            }
            const Vec4 du = jm.fullPivLu().solve(-r);
            if (!du.allFinite()) {
                return false;
            }
            u += du;
        }
        return false;
    }

    Vec4 tangent(const Vec4& u) const
    {
        const Vec3 x = u.head<3>();
        const IterateJet j = jet(x, u[3]);
        Eigen::Matrix<double, 3, 4> jm;
        jm.leftCols<3>() = j.jacobian - Mat3::Identity();
        jm.rightCols<1>() = d_dparam(j);
        return kernel_of<3>(jm);
    }

    BranchNode node(const Vec4& u, double arclength) const
    {
        BranchNode n;
        n.param = u[3];
        n.arclength = arclength;
        n.orbit = make_orbit(at(u[3]), q, State::from(u.head<3>()));
        n.tests = test_functions(n.orbit.monodromy);
        return n;
    }
};

Vec4 pack(const BranchNode& n)
{
    Vec4 u;
    u << n.orbit.points.front().vec(), n.param;
    return u;
}

bool sign_change(double a, double b) { return std::signbit(a) != std::signbit(b); }

/// Bisect a test-function sign change between two consecutive nodes. Points
/// inside the bracket are solved on the plane through the chord point
/// orthogonal to the chord, which works on both sides of a fold.
std::optional<Vec4> localize(const Solver& s, const BranchNode& a, const BranchNode& b, EventKind kind,
                             const ContinuationSettings& cs)
{
    const Vec4 ua = pack(a);
    const Vec4 ub = pack(b);
    const Vec4 chord = ub - ua;
    const Vec4 d = chord.normalized();
    double t_lo = 0.0;
    double t_hi = 1.0;
    Vec4 u_lo = ua;
    Vec4 u_hi = ub;
    const double g_lo = select_test(a.tests, kind);
    for (int iter = 0; iter < 100; ++iter) {
        if (std::fabs(u_hi[3] - u_lo[3]) < cs.event_tol && (u_hi - u_lo).head<3>().norm() < 1e-6) {
            break;
        }
        const double t = 0.5 * (t_lo + t_hi);
        const Vec4 anchor = ua + t * chord;
        Vec4 u = anchor;
        if (s.correct_on_plane(u, anchor, d, cs.corrector_tol, cs.corrector_max_iter + 8) < 0) {
            break;
        }
        const double g = select_test(test_functions(s.jet(u.head<3>(), u[3]).jacobian), kind);
        if (sign_change(g_lo, g)) {
            t_hi = t;
            u_hi = u;
        } else {
            t_lo = t;
            u_lo = u;
        }
    }
    Vec4 mid = 0.5 * (u_lo + u_hi);
    const Vec4 anchor = mid;
    if (s.correct_on_plane(mid, anchor, d, cs.corrector_tol, cs.corrector_max_iter + 8) < 0) {
        mid = u_lo;
    }
    Vec4 polished = mid;
    if (s.polish(polished, kind, cs.corrector_tol, cs.corrector_max_iter) && (polished - mid).norm() < 1e-4) {
        return polished;
    }
    return mid;
}

void detect_events(const Solver& s, Branch& br, const ContinuationSettings& cs)
{
    const std::size_t n = br.nodes.size();
    if (n < 2) {
        return;
    }
    const BranchNode& a = br.nodes[n - 2];
    const BranchNode& b = br.nodes[n - 1];
    for (EventKind kind : {EventKind::SN, EventKind::PD, EventKind::NS}) {
        if (!sign_change(select_test(a.tests, kind), select_test(b.tests, kind))) {
            continue;
        }
        const auto u = localize(s, a, b, kind, cs);
        if (!u) {
            continue;
        }
        BranchEvent ev;
        ev.kind = kind;
        ev.param = (*u)[3];
        ev.orbit = make_orbit(s.at(ev.param), s.q, State::from(u->head<3>()));
        ev.before = a.orbit.type;
        ev.after = b.orbit.type;
        ev.node_index = n - 2;
        if (kind == EventKind::NS && !test_functions(ev.orbit.monodromy).ns_is_complex) {
            continue;
        }
        if (kind == EventKind::SN) {
            // Parameter extremum inside the bracket: the branch turned.
            const bool fold = (ev.param - a.param) * (ev.param - b.param) > 0.0;
            ev.kind = fold ? EventKind::SN : EventKind::TR;
        }
        br.events.push_back(std::move(ev));
    }
    std::stable_sort(br.events.begin(), br.events.end(),
                     [](const BranchEvent& x, const BranchEvent& y) { return x.node_index < y.node_index; });
}

// --- locus machinery ---------------------------------------------------------------

struct LocusSolver {
    LocusKind kind;
    double B;
    int q;

    ShiftedParams at(const Vec5& u) const { return {u[3], B, u[4]}; }

    double g(const Vec5& u) const
    {
        return locus_function(kind, iterate_jet(at(u), u.head<3>(), q).jacobian);
    }

    /// Residual (4) and Jacobian (4x5) of the defining system.
    void system(const Vec5& u, Vec4& r, Eigen::Matrix<double, 4, 5>& jm) const
    {
        const Vec3 x = u.head<3>();
        const IterateJet j = iterate_jet(at(u), x, q);
        r.head<3>() = j.value - x;
        r[3] = locus_function(kind, j.jacobian);
        jm.block<3, 3>(0, 0) = j.jacobian - Mat3::Identity();
        jm.block<3, 1>(0, 3) = j.d_dA;
        jm.block<3, 1>(0, 4) = j.d_dC;
        for (int i = 0; i < 5; ++i) {
            const double h = 1e-6 * (1.0 + std::fabs(u[i]));
            Vec5 up = u;
            Vec5 um = u;
            up[i] += h;
            um[i] -= h;
            jm(3, i) = (g(up) - g(um)) / (2.0 * h);
        }
    }

    /// Newton on {defining system, d.(u - anchor) = 0}.
    int correct(Vec5& u, const Vec5& anchor, const Vec5& d, double tol, int max_iter) const
    {
        for (int it = 0; it <= max_iter; ++it) {
            Vec4 r;
            Eigen::Matrix<double, 4, 5> jm;
            system(u, r, jm);
            const double plane = d.dot(u - anchor);
            if (!r.allFinite() || !std::isfinite(plane)) {
                return -1;
            }
            if (r.norm() < tol && std::fabs(plane) < tol) {
                return it;
            }
            if (it == max_iter) {
                break;
            }
            Mat5 full;
            full.topRows<4>() = jm;
            full.bottomRows<1>() = d.transpose();
            Vec5 rhs;
            rhs << -r, -plane;
            const Vec5 du = full.fullPivLu().solve(rhs);
            if (!du.allFinite()) {
                return -1;
            }
            u += du;
        }
        return -1;
    }

    /// Minimum-norm Newton onto the locus (no plane constraint).
    bool project(Vec5& u, double tol, int max_iter) const
    {
        for (int it = 0; it <= max_iter; ++it) {
            Vec4 r;
            Eigen::Matrix<double, 4, 5> jm;
            system(u, r, jm);
            if (!r.allFinite()) {
                return false;
            }
            if (r.norm() < tol) {
                return true;
            }
            const Mat4 jjt = jm * jm.transpose();
            const Vec5 du = -jm.transpose() * jjt.fullPivLu().solve(r);
            if (!du.allFinite()) {
                return false;
            }
            u += du;
        }
        return false;
    }

    Vec5 tangent(const Vec5& u) const
    {
        Vec4 r;
        Eigen::Matrix<double, 4, 5> jm;
        system(u, r, jm);
        return kernel_of<4>(jm);
    }

    LocusNode node(const Vec5& u, double arclength) const
    {
        LocusNode n;
        n.A = u[3];
        n.C = u[4];
        n.arclength = arclength;
        n.orbit = make_orbit(at(u), q, State::from(u.head<3>()));
        n.tests = test_functions(n.orbit.monodromy);
        Vec4 r;
        Eigen::Matrix<double, 4, 5> jm;
        system(u, r, jm);
        n.defining_residual = r.norm();
        return n;
    }
};

Vec5 pack(const LocusNode& n)
{
    Vec5 u;
    u << n.orbit.points.front().vec(), n.A, n.C;
    return u;
}

/// Bisect a sign change of `h` between two locus nodes.
std::optional<Vec5> localize_locus(const LocusSolver& s, const LocusNode& a, const LocusNode& b,
                                   const std::function<double(const Vec5&)>& h, const LocusSettings& ls)
{
    const Vec5 ua = pack(a);
    const Vec5 ub = pack(b);
    const Vec5 chord = ub - ua;
    const Vec5 d = chord.normalized();
    double t_lo = 0.0;
    double t_hi = 1.0;
    Vec5 u_lo = ua;
    Vec5 u_hi = ub;
    const double h_lo = h(ua);
    for (int iter = 0; iter < 100; ++iter) {
        if ((u_hi - u_lo).tail<2>().norm() < ls.event_tol) {
            break;
        }
        const double t = 0.5 * (t_lo + t_hi);
        const Vec5 anchor = ua + t * chord;
        Vec5 u = anchor;
        if (s.correct(u, anchor, d, ls.tol, ls.max_iter) < 0) {
            return std::nullopt;
        }
        if (sign_change(h_lo, h(u))) {
            t_hi = t;
            u_hi = u;
        } else {
            t_lo = t;
            u_lo = u;
        }
    }
    return std::fabs(h(u_lo)) < std::fabs(h(u_hi)) ? u_lo : u_hi;
}

double safe_gpd(const PeriodicOrbit& o)
{
    try {
        return gpd_coefficient(o);
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace

// --- orbits ------------------------------------------------------------------------

IterateJet iterate_jet(const ShiftedParams& p, const Vec3& x, int q)
{
    IterateJet j{x, Mat3::Identity(), Vec3::Zero(), Vec3::Zero()};
    State s = State::from(x);
    for (int k = 0; k < q; ++k) {
        const Mat3 jk = jacobian(p, s);
        j.d_dA = jk * j.d_dA + d_step_dA(s);
        j.d_dC = jk * j.d_dC + d_step_dC(s);
        j.jacobian = jk * j.jacobian;
        s = step(p, s);
    }
    j.value = s.vec();
    return j;
}

PeriodicOrbit make_orbit(const ShiftedParams& p, int q, const State& x0)
{
    PeriodicOrbit o;
    o.params = p;
    o.q = q;
    o.points.reserve(static_cast<std::size_t>(q));
    State s = x0;
    Mat3 m = Mat3::Identity();
    for (int k = 0; k < q; ++k) {
        o.points.push_back(s);
        m = jacobian(p, s) * m;
        s = step(p, s);
    }
    o.residual = distance(s, x0);
    o.monodromy = m;
    o.multipliers = eigenvalues(m, std::pow(p.B, q));
    o.type = classify(o.multipliers, kDefaultUnitTol);
    o.detected_period = detect_period(p, x0.vec(), q);
    return o;
}

PeriodicOrbit find_orbit(const ShiftedParams& p, int q, const State& guess, const NewtonSettings& settings)
{
    if (q < 1) {
        throw ContractViolation("find_orbit: period must be at least 1");
    }
    if (!guess.finite()) {
        throw ContractViolation("find_orbit: guess is not finite");
    }
    Vec3 x = guess.vec();
    double res = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= settings.max_iter; ++it) {
        const IterateJet j = iterate_jet(p, x, q);
        const Vec3 r = j.value - x;
        res = r.norm();
        if (!std::isfinite(res)) {
            throw ConvergenceError("find_orbit: iterate escaped", res);
        }
        if (res < settings.tol) {
            return make_orbit(p, q, State::from(x));
        }
        if (it == settings.max_iter) {
            break;
        }
        Vec3 dx = (j.jacobian - Mat3::Identity()).fullPivLu().solve(-r);
        if (!finite(dx)) {
            throw ConvergenceError("find_orbit: singular Newton system", res);
        }
        // Damped step: halve while the residual grows by more than a factor 2
        // (far from the solution the full step often overshoots).
        for (int k = 0; k < 20; ++k) {
            const Vec3 trial = x + dx;
            const Vec3 rt = iterate_jet(p, trial, q).value - trial;
            if (rt.allFinite() && rt.norm() < 2.0 * res) {
                break;
            }
            dx *= 0.5;
        }
        x += dx;
    }
    throw ConvergenceError("find_orbit: no convergence for q = " + std::to_string(q), res);
}

Mat3 monodromy(const ShiftedParams& p, const PeriodicOrbit& orbit)
{
    Mat3 m = Mat3::Identity();
    for (const State& s : orbit.points) {
        m = jacobian(p, s) * m;
    }
    return m;
}

Mat3 bialternate_square(const Mat3& m)
{
    static constexpr int kPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    Mat3 out;
    for (int r = 0; r < 3; ++r) {
        const int i = kPairs[r][0];
        const int j = kPairs[r][1];
        for (int c = 0; c < 3; ++c) {
            const int k = kPairs[c][0];
            const int l = kPairs[c][1];
            out(r, c) = m(i, k) * m(j, l) - m(i, l) * m(j, k);
        }
    }
    return out;
}

TestFunctions test_functions(const Mat3& m)
{
    TestFunctions t;
    const Mat3 id = Mat3::Identity();
    t.g_sn = (m - id).determinant();
    t.g_pd = (m + id).determinant();
    t.g_ns = (bialternate_square(m) - id).determinant();
    // mu^3 + a mu^2 + b mu + c; negative discriminant <=> complex pair.
    const double a = -m.trace();
    const double b = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)
        + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    const double c = -m.determinant();
    const double disc = 18.0 * a * b * c - 4.0 * a * a * a * c + a * a * b * b - 4.0 * b * b * b - 27.0 * c * c;
    t.ns_is_complex = disc < 0.0;
    return t;
}

// --- continuation ------------------------------------------------------------

std::string to_string(ContinuationParam c) { return c == ContinuationParam::A ? "A" : "C"; }

double get_param(const ShiftedParams& p, ContinuationParam c) { return c == ContinuationParam::A ? p.A : p.C; }

ShiftedParams with_param(ShiftedParams p, ContinuationParam c, double v)
{
    (c == ContinuationParam::A ? p.A : p.C) = v;
    return p;
}

std::string to_string(EventKind k)
{
    switch (k) {
    case EventKind::SN: return "SN";
    case EventKind::TR: return "TR";
    case EventKind::PD: return "PD";
    case EventKind::NS: return "NS";
    }
    return "?";
}

Branch continue_orbit(const PeriodicOrbit& orbit0, ContinuationParam param, double target,
                      const ContinuationSettings& cs)
{
    if (orbit0.points.empty()) {
        throw ContractViolation("continue_orbit: empty seed orbit");
    }
    const Solver s{orbit0.params, param, orbit0.q};
    Branch br;
    br.param = param;
    br.q = orbit0.q;

    const double c0 = get_param(orbit0.params, param);
    const double lo = std::min(c0, target);
    const double hi = std::max(c0, target);
    const double dir = target >= c0 ? 1.0 : -1.0;

    Vec3 x0 = orbit0.points.front().vec();
    if (s.correct_fixed(x0, c0, cs.corrector_tol, cs.corrector_max_iter) < 0) {
        throw ContractViolation("continue_orbit: seed is not a converged orbit");
    }
    Vec4 u0;
    u0 << x0, c0;
    br.nodes.push_back(s.node(u0, 0.0));
    const int period = br.nodes.front().orbit.detected_period;

    bool natural = true;
    double h = cs.step;
    Vec4 t_prev = Vec4::Zero();
    while (static_cast<int>(br.nodes.size()) < cs.max_nodes) {
        const BranchNode& last = br.nodes.back();
        const Vec4 u_last = pack(last);
        Vec4 u_new;
        int iters = -1;
        Vec4 u_pred;

        if (natural) {
            const double remaining = std::fabs(target - last.param);
            if (remaining < 1e-14) {
                break;
            }
            const double hh = std::min(h, remaining);
            const double c_new = remaining - hh < 1e-14 ? target : last.param + dir * hh;
            Vec3 x_pred = u_last.head<3>();
            if (br.nodes.size() >= 2) {
                const Vec4 u_prev = pack(br.nodes[br.nodes.size() - 2]);
                const double dc = u_last[3] - u_prev[3];
                if (dc != 0.0) {
                    x_pred += (u_last.head<3>() - u_prev.head<3>()) * ((c_new - u_last[3]) / dc);
                }
            }
            u_pred << x_pred, c_new;
            Vec3 x = x_pred;
            iters = s.correct_fixed(x, c_new, cs.corrector_tol, cs.corrector_max_iter);
            u_new << x, c_new;
        } else {
            Vec4 t = s.tangent(u_last);
            if (t_prev.squaredNorm() > 0.0 ? t.dot(t_prev) < 0.0 : t[3] * dir < 0.0) {
                t = -t;
            }
            u_pred = u_last + h * t;
            u_new = u_pred;
            iters = s.correct_on_plane(u_new, u_pred, t, cs.corrector_tol, cs.corrector_max_iter);
            if (iters >= 0) {
                t_prev = t;
            }
        }

        bool ok = iters >= 0 && (u_new - u_pred).norm() < kMaxCorrection;
        if (ok && detect_period(s.at(u_new[3]), u_new.head<3>(), s.q) != period) {
            ok = false;
        }
        if (!ok) {
            h *= 0.5;
            if (h < cs.min_step) {
                if (natural && cs.arclength_fallback) {
                    natural = false;
                    br.used_arclength = true;
                    h = cs.step;
                    t_prev = br.nodes.size() >= 2 ? Vec4(u_last - pack(br.nodes[br.nodes.size() - 2])) : Vec4::Zero();
                    continue;
                }
                br.truncated = true;
                char buf[160];
                std::snprintf(buf, sizeof buf, "corrector failed at %s = %.10g below the minimal step",
                              to_string(param).c_str(), last.param);
                br.diagnostic = buf;
                break;
            }
            continue;
        }

        if (!natural && (u_new[3] < lo - 1e-12 || u_new[3] > hi + 1e-12)) {
            break;
        }
        const double arc = last.arclength + (u_new - u_last).norm();
        br.nodes.push_back(s.node(u_new, arc));
        detect_events(s, br, cs);
        if (cs.stop_at_first_pd) {
            const bool hit = std::any_of(br.events.begin(), br.events.end(),
                                         [](const BranchEvent& e) { return e.kind == EventKind::PD; });
            if (hit) {
                break;
            }
        }
        if (iters <= 3) {
            h = std::min(h * 1.5, cs.max_step);
        }
    }
    return br;
}

std::optional<PeriodicOrbit> switch_at_period_doubling(const BranchEvent& event, ContinuationParam param,
                                                       double delta)
{
    const PeriodicOrbit& o = event.orbit;
    const int q2 = 2 * o.q;
    const Vec3 xs = o.points.front().vec();
    const Vec3 v = null_vector(o.monodromy + Mat3::Identity());
    const Solver s{o.params, param, q2};
    const double c_star = get_param(o.params, param);

    for (double sign : {1.0, -1.0}) {
        Vec4 u;
        u << xs + sign * delta * v, c_star;
        bool converged = false;
        for (int it = 0; it < 40; ++it) {
            const Vec3 x = u.head<3>();
            const IterateJet j = s.jet(x, u[3]);
            const Vec3 r = j.value - x;
            const double plane = v.dot(x - xs) - sign * delta;
            if (!r.allFinite()) {
                break;
            }
            if (r.norm() < 1e-12 && std::fabs(plane) < 1e-14) {
                converged = true;
                break;
            }
            Mat4 jm;
            jm.topLeftCorner<3, 3>() = j.jacobian - Mat3::Identity();
            jm.topRightCorner<3, 1>() = s.d_dparam(j);
            jm.bottomLeftCorner<1, 3>() = v.transpose();
            jm(3, 3) = 0.0;
            Vec4 rhs;
            rhs << -r, -plane;
            const Vec4 du = jm.fullPivLu().solve(rhs);
            if (!du.allFinite()) {
                break;
            }
            u += du;
        }
        if (!converged) {
            continue;
        }
        PeriodicOrbit doubled = make_orbit(s.at(u[3]), q2, State::from(u.head<3>()));
        if (doubled.detected_period == q2) {
            return doubled;
        }
    }
    return std::nullopt;
}

Cascade follow_cascade(const PeriodicOrbit& orbit0, ContinuationParam param, double target, int levels,
                       const ContinuationSettings& settings)
{
    Cascade out;
    ContinuationSettings cs = settings;
    cs.stop_at_first_pd = true;
    PeriodicOrbit cur = orbit0;
    const double dir = target >= get_param(orbit0.params, param) ? 1.0 : -1.0;
    for (int level = 0; level <= levels; ++level) {
        out.branches.push_back(continue_orbit(cur, param, target, cs));
        const Branch& br = out.branches.back();
        const auto it = std::find_if(br.events.begin(), br.events.end(),
                                     [](const BranchEvent& e) { return e.kind == EventKind::PD; });
        if (it == br.events.end() || level == levels) {
            break;
        }
        const auto seed = switch_at_period_doubling(*it, param);
        if (!seed) {
            break;
        }
        // The doubled orbit must lie ahead of the event to be followed onward.
        if ((get_param(seed->params, param) - it->param) * dir <= 0.0) {
            break;
        }
        out.pd_params.push_back(it->param);
        cur = *seed;
    }
    return out;
}

// --- loci ---------------------------------------------------------------------------

std::string to_string(LocusKind k)
{
    switch (k) {
    case LocusKind::SN: return "SN";
    case LocusKind::PD: return "PD";
    case LocusKind::NS: return "NS";
    }
    return "?";
}

std::string to_string(Codim2Kind k)
{
    switch (k) {
    case Codim2Kind::FoldFlip: return "FoldFlip";
    case Codim2Kind::GeneralizedPD: return "GeneralizedPD";
    case Codim2Kind::Resonance: return "Resonance";
    }
    return "?";
}

double locus_function(LocusKind kind, const Mat3& m)
{
    const TestFunctions t = test_functions(m);
    switch (kind) {
    case LocusKind::SN: return t.g_sn;
    case LocusKind::PD: return t.g_pd;
    case LocusKind::NS: return t.g_ns;
    }
    return 0.0;
}

Locus continue_locus(LocusKind kind, const PeriodicOrbit& seed, const LocusSettings& ls)
{
    if (seed.points.empty()) {
        throw ContractViolation("continue_locus: empty seed orbit");
    }
    const LocusSolver s{kind, seed.params.B, seed.q};
    Locus locus;
    locus.kind = kind;
    locus.B = seed.params.B;
    locus.q = seed.q;

    Vec5 u;
    u << seed.points.front().vec(), seed.params.A, seed.params.C;
    {
        Vec4 r;
        Eigen::Matrix<double, 4, 5> jm;
        s.system(u, r, jm);
        const double gscale = std::max(1.0, seed.monodromy.norm());
        if (!(r.head<3>().norm() < 1e-6 && std::fabs(r[3]) < 1e-6 * gscale)) {
            throw ContractViolation("continue_locus: seed does not satisfy the defining system");
        }
    }
    if (!s.project(u, ls.tol, ls.max_iter)) {
        throw ConvergenceError("continue_locus: could not refine the seed", 0.0);
    }
    locus.nodes.push_back(s.node(u, 0.0));
    const int period = locus.nodes.front().orbit.detected_period;

    std::vector<double> gpd_values;
    const bool want_gpd = kind == LocusKind::PD && ls.monitor_gpd;
    if (want_gpd) {
        gpd_values.push_back(safe_gpd(locus.nodes.front().orbit));
    }

    double h = ls.step;
    Vec5 t_prev = Vec5::Zero();
    while (static_cast<int>(locus.nodes.size()) < ls.max_nodes) {
        const LocusNode& last = locus.nodes.back();
        if (last.arclength >= ls.arclength_budget) {
            break;
        }
        const Vec5 u_last = pack(last);
        Vec5 t = s.tangent(u_last);
        if (t_prev.squaredNorm() > 0.0) {
            if (t.dot(t_prev) < 0.0) {
                t = -t;
            }
        } else {
            const double lead = std::fabs(t[3]) > 1e-3 ? t[3] : t[4];
            if (lead * ls.direction < 0.0) {
                t = -t;
            }
        }
        const Vec5 u_pred = u_last + h * t;
        Vec5 u_new = u_pred;
        const int iters = s.correct(u_new, u_pred, t, ls.tol, ls.max_iter);
        bool ok = iters >= 0 && (u_new - u_pred).norm() < kMaxCorrection;
        if (ok && t_prev.squaredNorm() > 0.0 && t.dot(t_prev) < 0.9) {
            ok = false;
        }
        if (ok && detect_period(s.at(u_new), u_new.head<3>(), s.q) != period) {
            ok = false;
        }
        if (!ok) {
            h *= 0.5;
            if (h < ls.min_step) {
                locus.truncated = true;
                char buf[160];
                std::snprintf(buf, sizeof buf, "corrector failed near (A, C) = (%.10g, %.10g)", last.A, last.C);
                locus.diagnostic = buf;
                break;
            }
            continue;
        }
        if (u_new[3] < ls.A_min || u_new[3] > ls.A_max || u_new[4] < ls.C_min || u_new[4] > ls.C_max) {
            break;
        }
        t_prev = t;
        LocusNode node = s.node(u_new, last.arclength + (u_new - u_last).norm());
        if (kind == LocusKind::NS && !node.tests.ns_is_complex) {
            // The unit-product pair turned real: a 1:1 or 1:2 endpoint.
            locus.diagnostic = "NS locus ended where the multiplier pair becomes real";
            break;
        }
        locus.nodes.push_back(std::move(node));
        const std::size_t n = locus.nodes.size();
        const LocusNode& a = locus.nodes[n - 2];
        const LocusNode& b = locus.nodes[n - 1];

        auto record = [&](Codim2Kind k, const Vec5& loc, int rp, int rr) {
            Codim2Event ev;
            ev.kind = k;
            ev.A = loc[3];
            ev.C = loc[4];
            ev.orbit = make_orbit(s.at(loc), s.q, State::from(loc.head<3>()));
            ev.res_p = rp;
            ev.res_r = rr;
            ev.node_index = n - 2;
            locus.events.push_back(std::move(ev));
        };

        if (kind == LocusKind::PD || kind == LocusKind::SN) {
            const bool on_pd = kind == LocusKind::PD;
            const double ga = on_pd ? a.tests.g_sn : a.tests.g_pd;
            const double gb = on_pd ? b.tests.g_sn : b.tests.g_pd;
            if (sign_change(ga, gb)) {
                const auto hfun = [&](const Vec5& v) {
                    const TestFunctions tf = test_functions(iterate_jet(s.at(v), v.head<3>(), s.q).jacobian);
                    return on_pd ? tf.g_sn : tf.g_pd;
                };
                if (const auto loc = localize_locus(s, a, b, hfun, ls)) {
                    record(Codim2Kind::FoldFlip, *loc, 0, 0);
                }
            }
        }
        if (want_gpd) {
            gpd_values.push_back(safe_gpd(b.orbit));
            const double ca = gpd_values[n - 2];
            const double cb = gpd_values[n - 1];
            if (std::isfinite(ca) && std::isfinite(cb) && sign_change(ca, cb)) {
                const auto hfun = [&](const Vec5& v) {
                    return safe_gpd(make_orbit(s.at(v), s.q, State::from(v.head<3>())));
                };
                if (const auto loc = localize_locus(s, a, b, hfun, ls)) {
                    // A sign change through a pole (next to a fold-flip point,
                    // where I - M is singular) is not a zero of the coefficient.
                    const double cl = hfun(*loc);
                    if (std::isfinite(cl) && std::fabs(cl) <= std::max(std::fabs(ca), std::fabs(cb))) {
                        record(Codim2Kind::GeneralizedPD, *loc, 0, 0);
                    }
                }
            }
        }
        if (kind == LocusKind::NS) {
            const double tha = pair_argument(a.orbit.multipliers);
            const double thb = pair_argument(b.orbit.multipliers);
            for (int r = 3; r <= ls.max_resonance; ++r) {
                for (int p = 1; 2 * p < r; ++p) {
                    if (std::gcd(p, r) != 1) {
                        continue;
                    }
                    const double target = 2.0 * std::numbers::pi * p / r;
                    if (!sign_change(tha - target, thb - target)) {
                        continue;
                    }
                    const auto hfun = [&](const Vec5& v) {
                        const Mat3 m = iterate_jet(s.at(v), v.head<3>(), s.q).jacobian;
                        return pair_argument(eigenvalues(m, std::pow(s.B, s.q))) - target;
                    };
                    if (const auto loc = localize_locus(s, a, b, hfun, ls)) {
                        record(Codim2Kind::Resonance, *loc, p, r);
                    }
                }
            }
        }
        if (iters <= 4) {
            h = std::min(h * 1.3, ls.max_step);
        }
    }
    return locus;
}

// --- PD normal form -------------------------------------------------------------

double flip_coefficient(const std::function<Vec3(const Vec3&)>& f, const Vec3& x0, const Mat3& jac, double h)
{
    const Mat3 id = Mat3::Identity();
    const Vec3 q = null_vector(jac + id);
    Vec3 p = null_vector((jac + id).transpose());
    p /= p.dot(q);

    const Vec3 f0 = f(x0);
    const Vec3 bqq = (f(x0 + h * q) - 2.0 * f0 + f(x0 - h * q)) / (h * h);
    const Vec3 cqqq = (f(x0 + 2.0 * h * q) - 2.0 * f(x0 + h * q) + 2.0 * f(x0 - h * q) - f(x0 - 2.0 * h * q))
        / (2.0 * h * h * h);
    const Vec3 w = (id - jac).fullPivLu().solve(bqq);
    const double wn = w.norm();
    Vec3 bqw = Vec3::Zero();
    if (wn > 0.0) {
        const Vec3 e = w / wn;
        bqw = (f(x0 + h * q + h * e) - f(x0 + h * q - h * e) - f(x0 - h * q + h * e) + f(x0 - h * q - h * e))
            / (4.0 * h * h) * wn;
    }
    return p.dot(cqqq) / 6.0 + 0.5 * p.dot(bqw);
}

double gpd_coefficient(const PeriodicOrbit& orbit)
{
    int near = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& mu : orbit.multipliers) {
        const double d = std::abs(mu + 1.0);
        best = std::min(best, d);
        if (d < 1e-4) {
            ++near;
        }
    }
    if (best > 1e-6) {
        throw ContractViolation("gpd_coefficient: no multiplier within 1e-6 of -1");
    }
    if (near > 1) {
        throw DegenerateCaseError("gpd_coefficient: second multiplier within 1e-4 of -1");
    }
    const ShiftedParams p = orbit.params;
    const int q = orbit.q;
    const auto fq = [&](const Vec3& x) { return iterate_jet(p, x, q).value; };
    return flip_coefficient(fq, orbit.points.front().vec(), orbit.monodromy);
}

// --- export ----------------------------------------------------------------------

namespace {

void orbit_row(std::ostringstream& os, double key, double A, double C, const PeriodicOrbit& o, const std::string& ev)
{
    char buf[512];
    const State& x = o.points.front();
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%d,%d,%s\n", key, A, C,
                  x.x, x.y, x.z, o.q, std::abs(o.multipliers[0]), std::abs(o.multipliers[1]),
                  std::abs(o.multipliers[2]), o.type.stable, o.type.unstable, ev.c_str());
    os << buf;
}

constexpr const char* kOrbitHeader = "param_or_arclength,A,C,x0,y0,z0,q,|mu1|,|mu2|,|mu3|,type_n,type_m,event_kind\n";

} // namespace

std::string branch_csv(const Branch& b)
{
    std::ostringstream os;
    os << kOrbitHeader;
    std::size_t e = 0;
    for (std::size_t i = 0; i < b.nodes.size(); ++i) {
        const auto& n = b.nodes[i];
        orbit_row(os, n.param, n.orbit.params.A, n.orbit.params.C, n.orbit, "");
        for (; e < b.events.size() && b.events[e].node_index == i; ++e) {
            const auto& ev = b.events[e];
            orbit_row(os, ev.param, ev.orbit.params.A, ev.orbit.params.C, ev.orbit, to_string(ev.kind));
        }
    }
    return os.str();
}

std::string locus_csv(const Locus& l)
{
    std::ostringstream os;
    os << kOrbitHeader;
    std::size_t e = 0;
    for (std::size_t i = 0; i < l.nodes.size(); ++i) {
        const auto& n = l.nodes[i];
        orbit_row(os, n.arclength, n.A, n.C, n.orbit, "");
        for (; e < l.events.size() && l.events[e].node_index == i; ++e) {
            const auto& ev = l.events[e];
            std::string label = to_string(ev.kind);
            if (ev.kind == Codim2Kind::Resonance) {
                label += " " + std::to_string(ev.res_p) + ":" + std::to_string(ev.res_r);
            }
            orbit_row(os, n.arclength, ev.A, ev.C, ev.orbit, label);
        }
    }
    return os.str();
}

} // namespace mira
