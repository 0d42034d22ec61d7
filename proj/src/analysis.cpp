#include "mira/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace mira {
namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using RPoint = bg::model::point<double, 3, bg::cs::cartesian>;

State iterate(const ShiftedParams& p, State s, long n)
{
    for (long i = 0; i < n && !escaped(s); ++i) {
        s = step(p, s);
    }
    return s;
}

} // namespace

// --- clouds -----------------------------------------------------------------------

State inherited_state(const State& final_state, const State& init)
{
    if (escaped(final_state) || final_state.max_norm() < 1e-9) {
        return init;
    }
    return final_state;
}

AttractorCloud sample_attractor(const ShiftedParams& p, const State& init, long transient, long n_samples)
{
    if (n_samples < 1) {
        throw ContractViolation("sample_attractor: need at least one sample");
    }
    AttractorCloud c;
    c.params = p;
    State s = init;
    for (long i = 0; i < transient; ++i) {
        s = step(p, s);
        if (escaped(s)) {
            c.escaped = true;
            c.final_state = s;
            return c;
        }
    }
    c.samples.reserve(static_cast<std::size_t>(n_samples));
    for (long i = 0; i < n_samples; ++i) {
        if (escaped(s)) {
            c.escaped = true;
            break;
        }
        c.samples.push_back(s);
        s = step(p, s);
    }
    c.final_state = s;
    if (escaped(s)) {
        c.escaped = true;
    }
    return c;
}

double distance_to_point(const AttractorCloud& cloud, const State& target)
{
    if (cloud.escaped) {
        throw EscapeError("distance_to_point: orbit escaped");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const State& s : cloud.samples) {
        const double dx = s.x - target.x;
        const double dy = s.y - target.y;
        const double dz = s.z - target.z;
        best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    return std::sqrt(best);
}

std::string cloud_csv(const AttractorCloud& cloud)
{
    std::ostringstream os;
    os << "x,y,z\n";
    char buf[96];
    for (const State& s : cloud.samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.x, s.y, s.z);
        os << buf;
    }
    return os.str();
}

// --- trees ----------------------------------------------------------------------------

std::string to_string(InitialPolicy p) { return p == InitialPolicy::Fresh ? "fresh" : "inherit"; }

std::vector<double> linspace(double first, double last, int count)
{
    if (count < 1) {
        throw ContractViolation("linspace: count must be positive");
    }
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        v[static_cast<std::size_t>(i)] = count == 1 ? first : first + (last - first) * i / (count - 1);
    }
    if (count > 1) {
        v.back() = last;
    }
    return v;
}

namespace {

TreeColumn tree_column(const ShiftedParams& p, State& s, const TreeSettings& ts)
{
    TreeColumn col;
    s = iterate(p, s, ts.transient);
    if (escaped(s)) {
        col.escaped = true;
        return col;
    }
    const auto wanted = static_cast<std::size_t>(ts.points_per_value);
    for (long i = 0; i < ts.budget && col.xs.size() < wanted; ++i) {
        const bool take = ts.mode == TreeSettings::Mode::Stride ? i % ts.stride == 0 : std::fabs(s.y) < ts.half_width;
        if (take) {
            col.xs.push_back(s.x);
        }
        s = step(p, s);
        if (escaped(s)) {
            col.escaped = true;
            col.xs.clear();
            return col;
        }
    }
    return col;
}

} // namespace

std::vector<TreeColumn> bifurcation_tree(const ShiftedParams& base, ContinuationParam param,
                                         const std::vector<double>& values, const TreeSettings& ts, int threads)
{
    if (ts.mode == TreeSettings::Mode::Stride && ts.stride < 1) {
        throw ContractViolation("bifurcation_tree: stride must be at least 1");
    }
    if (ts.mode == TreeSettings::Mode::Section && !(ts.half_width > 0.0)) {
        throw ContractViolation("bifurcation_tree: section half-width must be positive");
    }
    std::vector<TreeColumn> out(values.size());
    if (ts.policy == InitialPolicy::Inherit) {
        State s = ts.init;
        for (std::size_t i = 0; i < values.size(); ++i) {
            out[i] = tree_column(with_param(base, param, values[i]), s, ts);
            out[i].param = values[i];
            s = out[i].escaped ? ts.init : inherited_state(s, ts.init);
        }
        return out;
    }
    const auto n = static_cast<long>(values.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : 1)
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        State s = ts.init;
        out[k] = tree_column(with_param(base, param, values[k]), s, ts);
        out[k].param = values[k];
    }
    return out;
}

std::string tree_csv(const std::vector<TreeColumn>& tree)
{
    std::ostringstream os;
    os << "param,x\n";
    char buf[64];
    for (const auto& col : tree) {
        for (double x : col.xs) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", col.param, x);
            os << buf;
        }
    }
    return os.str();
}

// --- manifolds ------------------------------------------------------------------------

ManifoldPolyline grow_manifold(const PeriodicOrbit& orbit, ManifoldSide side, int branch,
                               const ManifoldSettings& ms)
{
    if (orbit.points.empty()) {
        throw ContractViolation("grow_manifold: empty orbit");
    }
    if (branch != 1 && branch != -1) {
        throw ContractViolation("grow_manifold: branch must be +1 or -1");
    }
    const ShiftedParams p = orbit.params;
    if (side == ManifoldSide::Stable && p.B == 0.0) {
        throw NonInvertibleError();
    }
    const bool stable = side == ManifoldSide::Stable;
    int count = 0;
    Complex mu;
    for (const auto& m : orbit.multipliers) {
        const double r = std::abs(m);
        if (stable ? r < 1.0 : r > 1.0) {
            ++count;
            mu = m;
        }
    }
    if (count != 1) {
        throw DomainError("grow_manifold: requested manifold is not one-dimensional");
    }
    if (std::fabs(mu.imag()) > 1e-12 * std::max(1.0, std::abs(mu))) {
        throw DomainError("grow_manifold: eigenvalue of the requested side is complex");
    }
    const double mu_r = mu.real();

    Eigen::JacobiSVD<Mat3> svd(orbit.monodromy - mu_r * Mat3::Identity(), Eigen::ComputeFullV);
    const Vec3 v = svd.matrixV().col(2).normalized();
    const Vec3 base = orbit.points.front().vec();

    // G is F^q (unstable) or F^-q (stable), squared for a negative multiplier
    // so that each branch maps into itself. lambda > 1 is its eigenvalue on v.
    const int steps = orbit.q * (mu_r < 0.0 ? 2 : 1);
    const double mu_eff = mu_r < 0.0 ? mu_r * mu_r : mu_r;
    const double lambda = stable ? 1.0 / mu_eff : mu_eff;
    const auto apply = [&](State s, int n) {
        for (int i = 0; i < n * steps && !escaped(s); ++i) {
            s = stable ? inverse_step(p, s) : step(p, s);
        }
        return s;
    };
    const auto point = [&](double sigma) {
        const double fl = std::floor(sigma);
        const double t = sigma - fl;
        const Vec3 seed = base + branch * ms.seed_delta * std::pow(lambda, t) * v;
        return apply(State::from(seed), static_cast<int>(fl));
    };

    ManifoldPolyline m;
    m.params = p;
    m.base = orbit.points.front();
    m.side = side;
    m.branch = branch;
    m.multiplier = mu_r;

    struct Vertex {
        double sigma;
        State x;
    };
    const auto push = [&](const State& x) {
        const double prev = m.s.empty() ? 0.0 : m.s.back() + distance(m.vertices.back(), x);
        m.vertices.push_back(x);
        m.s.push_back(prev);
    };

    constexpr int kPerDomain = 8;
    constexpr int kMaxDepth = 40;
    Vertex last{0.0, point(0.0)};
    push(last.x);
    for (int n = 0; m.arclength() < ms.arclength_max; ++n) {
        for (int j = 1; j <= kPerDomain; ++j) {
            Vertex next{n + static_cast<double>(j) / kPerDomain, State{}};
            next.x = point(next.sigma);
            // Depth-first refinement between last and next.
            std::vector<std::pair<Vertex, int>> stack{{next, 0}};
            while (!stack.empty()) {
                auto [target, depth] = stack.back();
                if (escaped(target.x)) {
                    m.stopped_early = true;
                    return m;
                }
                if (distance(last.x, target.x) > ms.gap_max && depth < kMaxDepth) {
                    const double mid = 0.5 * (last.sigma + target.sigma);
                    stack.push_back({Vertex{mid, point(mid)}, depth + 1});
                    continue;
                }
                stack.pop_back();
                push(target.x);
                last = target;
                if (m.arclength() >= ms.arclength_max) {
                    return m;
                }
                if (m.vertices.size() >= ms.max_vertices) {
                    m.stopped_early = true;
                    return m;
                }
            }
        }
    }
    return m;
}

std::string manifold_csv(const ManifoldPolyline& m)
{
    std::ostringstream os;
    os << "s,x,y,z\n";
    char buf[128];
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        const State& v = m.vertices[i];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", m.s[i], v.x, v.y, v.z);
        os << buf;
    }
    return os.str();
}

double homoclinic_gap(const ManifoldPolyline& m, const AttractorCloud& cloud, double exclude_radius)
{
    if (!(m.params == cloud.params)) {
        throw ContractViolation("homoclinic_gap: manifold and cloud were computed at different parameters");
    }
    if (cloud.escaped) {
        throw EscapeError("homoclinic_gap: orbit escaped");
    }
    if (cloud.samples.empty()) {
        throw ContractViolation("homoclinic_gap: empty cloud");
    }
    std::vector<RPoint> pts;
    pts.reserve(cloud.samples.size());
    for (const State& s : cloud.samples) {
        pts.emplace_back(s.x, s.y, s.z);
    }
    const bgi::rtree<RPoint, bgi::rstar<16>> tree(pts.begin(), pts.end());
    double best = std::numeric_limits<double>::infinity();
    for (const State& v : m.vertices) {
        if (distance(v, m.base) < exclude_radius) {
            continue;
        }
        std::vector<RPoint> hit;
        tree.query(bgi::nearest(RPoint(v.x, v.y, v.z), 1), std::back_inserter(hit));
        if (!hit.empty()) {
            best = std::min(best, bg::distance(hit.front(), RPoint(v.x, v.y, v.z)));
        }
    }
    return best;
}

// --- rotation number ---------------------------------------------------------------

double rotation_number(const ShiftedParams& p, const State& init, long n, long transient)
{
    if (n < 1) {
        throw ContractViolation("rotation_number: need at least one step");
    }
    const Mat3 j = jacobian(p, State{});
    Eigen::EigenSolver<Mat3> es(j);
    int k = -1;
    for (int i = 0; i < 3; ++i) {
        if (es.eigenvalues()[i].imag() > 1e-12) {
            k = i;
        }
    }
    if (k < 0) {
        throw DomainError("rotation_number: O+ has no complex multiplier pair");
    }
    const Eigen::Vector3cd w = es.eigenvectors().col(k);
    int r = 0;
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(es.eigenvalues()[i].imag()) <= 1e-12) {
            r = i;
        }
    }
    Mat3 basis;
    basis.col(0) = w.real();
    basis.col(1) = w.imag();
    basis.col(2) = es.eigenvectors().col(r).real();
    const Mat3 to_eigen = basis.inverse();

    // In (a, b) eigen-coordinates the linear part rotates (a, -b) by +theta.
    const auto angle = [&](const State& s) {
        const Vec3 c = to_eigen * s.vec();
        return std::atan2(-c[1], c[0]);
    };

    State s = iterate(p, init, transient);
    if (escaped(s)) {
        throw EscapeError("rotation_number: orbit escaped");
    }
    double total = 0.0;
    double phi = angle(s);
    double min_norm = std::numeric_limits<double>::infinity();
    for (long i = 0; i < n; ++i) {
        s = step(p, s);
        if (escaped(s)) {
            throw EscapeError("rotation_number: orbit escaped");
        }
        min_norm = std::min(min_norm, s.vec().norm());
        const double next = angle(s);
        double d = next - phi;
        d -= 2.0 * std::numbers::pi * std::ceil((d - std::numbers::pi) / (2.0 * std::numbers::pi));
        total += d;
        phi = next;
    }
    if (s.vec().norm() < 1e-10) {
        throw DomainError("rotation_number: orbit converges to O+");
    }
    double rho = total / (2.0 * std::numbers::pi * static_cast<double>(n));
    rho -= std::floor(rho);
    return rho >= 1.0 ? 0.0 : rho;
}

// --- event scans ----------------------------------------------------------------------

TargetFn fixed_target(const State& s)
{
    return [s](const ShiftedParams&) -> std::optional<State> { return s; };
}

TargetFn branch_target(const Branch& branch)
{
    std::vector<std::pair<double, Vec3>> nodes;
    for (const auto& n : branch.nodes) {
        nodes.emplace_back(n.param, n.orbit.points.front().vec());
    }
    const int q = branch.q;
    const ContinuationParam cp = branch.param;
    return [nodes, q, cp](const ShiftedParams& p) -> std::optional<State> {
        if (nodes.empty()) {
            return std::nullopt;
        }
        const double c = get_param(p, cp);
        // Nearest bracketing pair along the stored order.
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double d = std::fabs(nodes[i].first - c);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        Vec3 guess = nodes[best].second;
        const std::size_t other = best + 1 < nodes.size() && (nodes[best + 1].first - c) * (nodes[best].first - c) <= 0.0
            ? best + 1
            : (best > 0 ? best - 1 : best);
        if (other != best && nodes[other].first != nodes[best].first) {
            const double t = (c - nodes[best].first) / (nodes[other].first - nodes[best].first);
            guess += t * (nodes[other].second - nodes[best].second);
        }
        try {
            NewtonSettings ns;
            ns.tol = 1e-11;
            const PeriodicOrbit o = find_orbit(with_param(p, cp, c), q, State::from(guess), ns);
            if ((o.points.front().vec() - guess).norm() > 0.05) {
                return std::nullopt;
            }
            return o.points.front();
        } catch (const Error&) {
            return std::nullopt;
        }
    };
}

namespace {

ScanSample evaluate(const ShiftedParams& p, double param, const State& init, const ScanPredicate& pred,
                    const ScanSettings& ss)
{
    ScanSample out;
    out.param = param;
    out.value = std::numeric_limits<double>::quiet_NaN();
    if (pred.kind == ScanPredicate::Kind::DistanceBelow) {
        const auto target = pred.target ? pred.target(p) : std::optional<State>(State{});
        const AttractorCloud cloud = sample_attractor(p, init, ss.transient, ss.samples);
        out.final_state = cloud.final_state;
        if (cloud.escaped) {
            out.label = "escaped";
            return out;
        }
        if (!target) {
            out.label = "undefined";
            return out;
        }
        out.value = distance_to_point(cloud, *target);
        out.label = out.value < pred.tau ? "true" : "false";
        return out;
    }
    const Spectrum sp = spectrum(p, init, ss.lyapunov);
    out.final_state = sp.final_state;
    if (pred.kind == ScanPredicate::Kind::Lambda2Above) {
        if (sp.escaped) {
            out.label = "escaped";
            return out;
        }
        out.value = sp.lambda[1];
        out.label = out.value > pred.eps ? "true" : "false";
        return out;
    }
    out.label = label(classify_regime(sp, pred.thresholds));
    return out;
}

} // namespace

ScanResult event_scan(const ShiftedParams& base, ContinuationParam param, const std::vector<double>& values,
                      const ScanPredicate& pred, const ScanSettings& ss, int threads)
{
    ScanResult res;
    res.samples.resize(values.size());
    const bool inherit = ss.policy == InitialPolicy::Inherit;
    const auto start_from = [&](const ScanSample& prev) {
        return inherit ? inherited_state(prev.final_state, ss.init) : ss.init;
    };

    if (inherit) {
        State s = ss.init;
        for (std::size_t i = 0; i < values.size(); ++i) {
            res.samples[i] = evaluate(with_param(base, param, values[i]), values[i], s, pred, ss);
            s = start_from(res.samples[i]);
        }
    } else {
        const auto n = static_cast<long>(values.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : 1)
        for (long i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            res.samples[k] = evaluate(with_param(base, param, values[k]), values[k], ss.init, pred, ss);
        }
    }

    for (std::size_t i = 1; i < res.samples.size(); ++i) {
        ScanSample lo = res.samples[i - 1];
        ScanSample hi = res.samples[i];
        if (lo.label == hi.label) {
            continue;
        }
        const std::string from = lo.label;
        const std::string to = hi.label;
        while (std::fabs(hi.param - lo.param) > ss.bisection_tol) {
            const double mid = 0.5 * (lo.param + hi.param);
            ScanSample m = evaluate(with_param(base, param, mid), mid, start_from(lo), pred, ss);
            if (m.label == lo.label) {
                lo = m;
            } else {
                hi = m;
            }
        }
        res.crossings.push_back({0.5 * (lo.param + hi.param), from, to});
    }
    return res;
}

} // namespace mira
