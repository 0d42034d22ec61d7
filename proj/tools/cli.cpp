#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <omp.h>

#include "mira/analysis.hpp"
#include "mira/core_map.hpp"
#include "mira/curves.hpp"
#include "mira/grid.hpp"
#include "mira/lyapunov.hpp"
#include "mira/orbits.hpp"
#include "mira/sweep.hpp"
#include "mira/version.hpp"

namespace mira::cli {
namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Storage shared by all subcommands; only the parsed one reads it.
struct Opts {
    std::optional<double> A, B, C, M1, M2;
    std::string out;
    int threads = 0;

    double x0 = 0.01, y0 = 0.01, z0 = 0.01;
    double transient = 1e4;
    double iterations = 1e5;
    int renorm = 1;
    double eps_zero = 1e-3;
    double eps_flow = 3e-3;
    std::string policy;
    double samples = 1e5;

    std::string axis1, axis2;
    std::string target = "O+";
    double black = 1e-3;
    bool mask_tr = false;
    bool no_escalate = false;
    double unit_tol = kSweepUnitTol;

    int q = 1;
    std::string guess;
    std::string param = "C";
    std::optional<double> to;
    double step = 1e-3, min_step = 1e-6, max_step = 1e-2;
    int levels = 0;
    std::string kind;
    int event_index = 0;
    int direction = 1;
    double arclength = 1.0;
    int max_resonance = 8;

    std::string range;
    std::string mode = "stride";
    int stride = 1;
    double half_width = 1e-3;
    int points = 200;
    double budget = 1e7;

    std::string side = "stable";
    int branch = 0;
    double gap = 1e-2;
    double arclength_max = 10.0;
    double max_vertices = 1e4;
    double seed_delta = 1e-6;
    double exclude = 0.0;

    double n = 1e5;

    std::string predicate;
    double tau = 1e-3;
    double eps = 1e-3;
    double bisection_tol = 1e-4;

    std::string curve;
};

// --- small helpers --------------------------------------------------------------------

std::string fmt(double v) { return format_double(v); }

std::string fmt_mu(const Complex& mu)
{
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.12g%+.12gi", mu.real(), mu.imag());
    return buf;
}

long count_of(double v, const char* name)
{
    if (!(v >= 0.0) || v != std::floor(v) || v > 9e15) {
        throw UsageError(std::string("--") + name + " must be a non-negative integer");
    }
    return static_cast<long>(v);
}

State parse_state(const std::string& s)
{
    std::istringstream in(s);
    std::string part;
    double v[3];
    int k = 0;
    while (std::getline(in, part, ',')) {
        if (k == 3) {
            throw UsageError("expected x,y,z but got '" + s + "'");
        }
        try {
            std::size_t used = 0;
            v[k] = std::stod(part, &used);
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw UsageError("expected x,y,z but got '" + s + "'");
        }
        ++k;
    }
    if (k != 3) {
        throw UsageError("expected x,y,z but got '" + s + "'");
    }
    return {v[0], v[1], v[2]};
}

ShiftedParams point(const Opts& o)
{
    const bool mira_form = o.M1 || o.M2;
    if (mira_form) {
        if (!(o.M1 && o.M2 && o.B) || o.A || o.C) {
            throw UsageError("give either --A --B --C or --M1 --M2 --B");
        }
        return to_shifted(MiraParams{*o.M1, *o.M2, *o.B});
    }
    if (!(o.A && o.B && o.C)) {
        throw UsageError("give either --A --B --C or --M1 --M2 --B");
    }
    return {*o.A, *o.B, *o.C};
}

State initial_state(const Opts& o) { return {o.x0, o.y0, o.z0}; }

/// Base point of a one-parameter scan. The scanned parameter defaults to
/// the start of the range.
ShiftedParams scan_base(Opts o, const Range& r)
{
    if (!o.M1 && !o.M2) {
        if (o.param == "A" && !o.A) {
            o.A = r.min;
        }
        if (o.param == "C" && !o.C) {
            o.C = r.min;
        }
    }
    return point(o);
}


InitialPolicy policy_of(const Opts& o, InitialPolicy fallback)
{
    if (o.policy.empty()) {
        return fallback;
    }
    if (o.policy == "fresh") {
        return InitialPolicy::Fresh;
    }
    if (o.policy == "inherit") {
        return InitialPolicy::Inherit;
    }
    throw UsageError("--policy must be fresh or inherit");
}

ContinuationParam param_of(const Opts& o)
{
    if (o.param == "A") {
        return ContinuationParam::A;
    }
    if (o.param == "C") {
        return ContinuationParam::C;
    }
    throw UsageError("--param must be A or C");
}

int threads_of(const Opts& o)
{
    if (o.threads < 0) {
        throw UsageError("--threads must be non-negative");
    }
    return o.threads == 0 ? omp_get_max_threads() : o.threads;
}

LyapunovSettings lyap_settings(const Opts& o)
{
    return {count_of(o.transient, "transient"), count_of(o.iterations, "iterations"), o.renorm};
}

RegimeThresholds thresholds_of(const Opts& o) { return {o.eps_zero, o.eps_flow}; }

void write_file(const std::string& path, const std::string& bytes)
{
    std::ofstream f(path, std::ios::binary);
    f << bytes;
    f.close();
    if (!f) {
        throw Error("cannot write " + path);
    }
}

/// CSV text as a TSV table with a '#'-prefixed header.
std::string tsv(const std::string& csv)
{
    std::string t = "# " + csv;
    for (char& c : t) {
        if (c == ',') {
            c = '\t';
        }
    }
    return t;
}

/// Table to --out PREFIX.csv when given, otherwise to stdout as TSV.
void emit_table(const Opts& o, const std::string& csv, std::ostream& out, std::ostream& err)
{
    if (o.out.empty()) {
        out << tsv(csv);
        return;
    }
    write_file(o.out + ".csv", csv);
    err << "wrote " << o.out << ".csv\n";
}

Range range_of(const Opts& o)
{
    try {
        return parse_range(o.range);
    } catch (const ContractViolation& e) {
        throw UsageError(e.what());
    }
}

Axis axis_of(const std::string& spec)
{
    try {
        return parse_axis(spec);
    } catch (const ContractViolation& e) {
        throw UsageError(e.what());
    }
}

Grid2 grid_of(const Opts& o)
{
    if (o.axis1.empty() || o.axis2.empty()) {
        throw UsageError("--axis1 and --axis2 are required (NAME=min:max:count)");
    }
    if (!o.B) {
        throw UsageError("--B is required");
    }
    Grid2 g;
    g.axis1 = axis_of(o.axis1);
    g.axis2 = axis_of(o.axis2);
    g.fixed_shifted = {o.A.value_or(0.0), *o.B, o.C.value_or(0.0)};
    g.fixed_mira = {o.M1.value_or(0.0), o.M2.value_or(0.0), *o.B};
    try {
        g.validate();
    } catch (const ContractViolation& e) {
        throw UsageError(e.what());
    }
    return g;
}

PeriodicOrbit seed_orbit(const Opts& o, const ShiftedParams& p)
{
    const State guess = o.guess.empty() ? State{} : parse_state(o.guess);
    return find_orbit(p, o.q, guess);
}

ContinuationSettings continuation_settings(const Opts& o)
{
    ContinuationSettings cs;
    cs.step = o.step;
    cs.min_step = o.min_step;
    cs.max_step = o.max_step;
    return cs;
}

// --- commands ----------------------------------------------------------------------------

constexpr const char* kFixedPointHeader = "# form\tx\ty\tz\tmu1\tmu2\tmu3\ttype\n";

int cmd_fixed_points(const Opts& o, std::ostream& out)
{
    const auto row = [&](const std::string& form, const FixedPointInfo& f) {
        out << form << '\t' << fmt(f.location.x) << '\t' << fmt(f.location.y) << '\t' << fmt(f.location.z);
        for (const auto& mu : f.multipliers) {
            out << '\t' << fmt_mu(mu);
        }
        out << '\t' << describe(f.type) << '\n';
    };
    if (o.M1 || o.M2) {
        if (!(o.M1 && o.M2 && o.B)) {
            throw UsageError("give --M1 --M2 --B");
        }
        const auto fps = fixed_points_mira(MiraParams{*o.M1, *o.M2, *o.B});
        out << kFixedPointHeader;
        for (std::size_t i = 0; i < fps.size(); ++i) {
            row(i == 0 ? "original O+" : "original O-", fps[i]);
        }
        return kExitOk;
    }
    const auto fps = fixed_points(point(o));
    out << kFixedPointHeader;
    row("shifted O+", fps[0]);
    row("shifted O-", fps[1]);
    return kExitOk;
}

int cmd_curves(const Opts& o, std::ostream& out, std::ostream& err)
{
    const auto kind = parse_curve_kind(o.curve);
    if (!kind) {
        throw UsageError("--curve must be one of SN, PD, NS, TR, PD1, NS1, SH12");
    }
    if (!o.B) {
        throw UsageError("--B is required");
    }
    const Range r = range_of(o);
    emit_table(o, curve_csv(sample_curve(*kind, *o.B, r.min, r.max, r.count)), out, err);
    return kExitOk;
}

int cmd_saddle_chart(const Opts& o, std::ostream& out, std::ostream& err)
{
    const SaddleChart chart = saddle_chart(grid_of(o), o.unit_tol, threads_of(o));
    const std::string prefix = o.out.empty() ? "saddle-chart" : o.out;
    write_file(prefix + ".ppm", render(chart));
    write_file(prefix + ".csv", write_csv(chart));
    write_file(prefix + ".meta", metadata(chart));
    out << "# file\n" << prefix << ".ppm\n" << prefix << ".csv\n" << prefix << ".meta\n";
    err << "saddle-chart: " << chart.cells.size() << " cells\n";
    return kExitOk;
}

int cmd_lyap(const Opts& o, std::ostream& out)
{
    const ShiftedParams p = point(o);
    const Spectrum s = spectrum(p, initial_state(o), lyap_settings(o));
    const RegimeClass c = classify_regime(s, thresholds_of(o));
    out << "# lambda1\tlambda2\tlambda3\tsum\tln_B\tregime\titerations\n";
    out << fmt(s.lambda[0]) << '\t' << fmt(s.lambda[1]) << '\t' << fmt(s.lambda[2]) << '\t' << fmt(s.sum()) << '\t'
        << fmt(std::log(std::fabs(p.B))) << '\t' << label(c) << '\t' << s.iterations_used << '\n';
    return kExitOk;
}

int cmd_sweep_lyap(const Opts& o, std::ostream& out, std::ostream& err)
{
    const Grid2 g = grid_of(o);
    SweepSettings s;
    s.lyapunov = lyap_settings(o);
    s.thresholds = thresholds_of(o);
    s.policy = policy_of(o, InitialPolicy::Fresh);
    s.init = initial_state(o);
    s.escalate_borderline = !o.no_escalate;
    RenderOptions ro;
    ro.mask_above_tr = o.mask_tr;
    err << "sweep-lyap: " << g.cells() << " cells, " << to_string(s.policy) << " policy\n";
    const RegimeRaster r = sweep_lyapunov(g, s, threads_of(o));
    const std::string prefix = o.out.empty() ? "sweep-lyap" : o.out;
    write_file(prefix + ".ppm", render(r, ro));
    write_file(prefix + ".csv", write_csv(r));
    write_file(prefix + ".meta", metadata(r, ro));
    out << "# regime\tcells\n";
    for (const auto& [name, n] : regime_counts(r)) {
        out << name << '\t' << n << '\n';
    }
    err << "sweep-lyap: wrote " << prefix << ".ppm, .csv, .meta\n";
    return kExitOk;
}

int cmd_sweep_dist(const Opts& o, std::ostream& out, std::ostream& err)
{
    const Grid2 g = grid_of(o);
    DistanceTarget t;
    if (o.target == "O+") {
        t = DistanceTarget::OPlus;
    } else if (o.target == "O-") {
        t = DistanceTarget::OMinus;
    } else {
        throw UsageError("--target must be O+ or O-");
    }
    DistanceSettings s;
    s.transient = count_of(o.transient, "transient");
    s.samples = count_of(o.samples, "samples");
    s.policy = policy_of(o, InitialPolicy::Fresh);
    s.init = initial_state(o);
    s.black_threshold = o.black;
    err << "sweep-dist: " << g.cells() << " cells, " << to_string(s.policy) << " policy\n";
    const DistanceRaster r = sweep_distance(g, t, s, threads_of(o));
    const std::string prefix = o.out.empty() ? "sweep-dist" : o.out;
    write_file(prefix + ".pgm", render(r));
    write_file(prefix + ".csv", write_csv(r));
    write_file(prefix + ".meta", metadata(r));
    std::size_t black = 0;
    std::size_t trivial = 0;
    std::size_t esc = 0;
    for (const auto& c : r.cells) {
        if (c.distance < 0.0) {
            ++esc;
        } else if (c.distance < s.black_threshold) {
            ++(c.trivially_black ? trivial : black);
        }
    }
    out << "# black\ttrivially_black\tescaped\tcells\n" << black << '\t' << trivial << '\t' << esc << '\t'
        << r.cells.size() << '\n';
    err << "sweep-dist: wrote " << prefix << ".pgm, .csv, .meta\n";
    return kExitOk;
}

void print_orbit(const PeriodicOrbit& orb, std::ostream& out)
{
    out << "# q\tperiod\tresidual\tmu1\tmu2\tmu3\ttype\n";
    out << orb.q << '\t' << orb.detected_period << '\t' << fmt(orb.residual);
    for (const auto& mu : orb.multipliers) {
        out << '\t' << fmt_mu(mu);
    }
    out << '\t' << describe(orb.type) << '\n';
    out << "# k\tx\ty\tz\n";
    for (std::size_t k = 0; k < orb.points.size(); ++k) {
        const State& s = orb.points[k];
        out << k << '\t' << fmt(s.x) << '\t' << fmt(s.y) << '\t' << fmt(s.z) << '\n';
    }
}

int cmd_orbit_find(const Opts& o, std::ostream& out)
{
    print_orbit(seed_orbit(o, point(o)), out);
    return kExitOk;
}

void print_events(const Branch& b, std::ostream& out)
{
    for (const auto& ev : b.events) {
        out << to_string(ev.kind) << '\t' << fmt(ev.param) << '\t' << b.q << '\t' << describe(ev.before) << '\t'
            << describe(ev.after) << '\n';
    }
}

int cmd_orbit_continue(const Opts& o, std::ostream& out, std::ostream& err)
{
    if (!o.to) {
        throw UsageError("--to is required");
    }
    const PeriodicOrbit orb = seed_orbit(o, point(o));
    const ContinuationParam cp = param_of(o);
    const ContinuationSettings cs = continuation_settings(o);
    std::vector<Branch> branches;
    if (o.levels > 0) {
        Cascade c = follow_cascade(orb, cp, *o.to, o.levels, cs);
        branches = std::move(c.branches);
    } else {
        branches.push_back(continue_orbit(orb, cp, *o.to, cs));
    }
    out << "# event\tparam\tq\tbefore\tafter\n";
    std::string csv;
    for (const auto& b : branches) {
        print_events(b, out);
        const std::string part = branch_csv(b);
        csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
        if (b.truncated) {
            err << "orbit continue: branch q=" << b.q << " truncated: " << b.diagnostic << '\n';
        }
    }
    if (!o.out.empty()) {
        write_file(o.out + ".csv", csv);
        err << "wrote " << o.out << ".csv\n";
    }
    return kExitOk;
}

int cmd_locus_continue(const Opts& o, std::ostream& out, std::ostream& err)
{
    LocusKind kind;
    EventKind wanted;
    if (o.kind == "SN") {
        kind = LocusKind::SN;
        wanted = EventKind::SN;
    } else if (o.kind == "PD") {
        kind = LocusKind::PD;
        wanted = EventKind::PD;
    } else if (o.kind == "NS") {
        kind = LocusKind::NS;
        wanted = EventKind::NS;
    } else {
        throw UsageError("--kind must be SN, PD or NS");
    }
    PeriodicOrbit seed = seed_orbit(o, point(o));
    if (o.to) {
        // Locate the seed on a one-parameter branch first.
        const Branch b = continue_orbit(seed, param_of(o), *o.to, continuation_settings(o));
        int seen = 0;
        bool found = false;
        for (const auto& ev : b.events) {
            if (ev.kind == wanted && seen++ == o.event_index) {
                seed = ev.orbit;
                found = true;
                break;
            }
        }
        if (!found) {
            throw DomainError("locus continue: no " + o.kind + " event number " + std::to_string(o.event_index)
                              + " on the branch");
        }
        err << "locus continue: seed at A=" << fmt(seed.params.A) << " C=" << fmt(seed.params.C) << '\n';
    }
    LocusSettings ls;
    ls.direction = o.direction;
    ls.arclength_budget = o.arclength;
    ls.max_resonance = o.max_resonance;
    const Locus l = continue_locus(kind, seed, ls);
    out << "# event\tA\tC\tmu1\tmu2\tmu3\n";
    for (const auto& ev : l.events) {
        std::string name = to_string(ev.kind);
        if (ev.kind == Codim2Kind::Resonance) {
            name += " " + std::to_string(ev.res_p) + ":" + std::to_string(ev.res_r);
        }
        out << name << '\t' << fmt(ev.A) << '\t' << fmt(ev.C);
        for (const auto& mu : ev.orbit.multipliers) {
            out << '\t' << fmt_mu(mu);
        }
        out << '\n';
    }
    if (l.truncated) {
        err << "locus continue: truncated: " << l.diagnostic << '\n';
    }
    if (!o.out.empty()) {
        write_file(o.out + ".csv", locus_csv(l));
        err << "wrote " << o.out << ".csv\n";
    }
    return kExitOk;
}

int cmd_tree(const Opts& o, std::ostream& out, std::ostream& err)
{
    const Range r = range_of(o);
    TreeSettings ts;
    if (o.mode == "stride") {
        ts.mode = TreeSettings::Mode::Stride;
    } else if (o.mode == "section") {
        ts.mode = TreeSettings::Mode::Section;
    } else {
        throw UsageError("--mode must be stride or section");
    }
    ts.stride = o.stride;
    ts.half_width = o.half_width;
    ts.points_per_value = o.points;
    ts.transient = count_of(o.transient, "transient");
    ts.budget = count_of(o.budget, "budget");
    ts.policy = policy_of(o, InitialPolicy::Inherit);
    ts.init = initial_state(o);
    const ContinuationParam cp = param_of(o);
    const ShiftedParams base = scan_base(o, r);
    const auto tree = bifurcation_tree(base, cp, linspace(r.min, r.max, r.count), ts, threads_of(o));
    emit_table(o, tree_csv(tree), out, err);
    return kExitOk;
}

int cmd_attractor(const Opts& o, std::ostream& out, std::ostream& err)
{
    const AttractorCloud c =
        sample_attractor(point(o), initial_state(o), count_of(o.transient, "transient"), count_of(o.samples, "samples"));
    if (c.escaped) {
        throw EscapeError("attractor: orbit escaped after " + std::to_string(c.samples.size()) + " samples");
    }
    emit_table(o, cloud_csv(c), out, err);
    return kExitOk;
}

ManifoldSettings manifold_settings(const Opts& o)
{
    ManifoldSettings ms;
    ms.seed_delta = o.seed_delta;
    ms.gap_max = o.gap;
    ms.arclength_max = o.arclength_max;
    ms.max_vertices = static_cast<std::size_t>(count_of(o.max_vertices, "max-vertices"));
    return ms;
}

ManifoldSide side_of(const Opts& o)
{
    if (o.side == "stable") {
        return ManifoldSide::Stable;
    }
    if (o.side == "unstable") {
        return ManifoldSide::Unstable;
    }
    throw UsageError("--side must be stable or unstable");
}

std::vector<int> branches_of(const Opts& o)
{
    if (o.branch == 0) {
        return {1, -1};
    }
    if (o.branch == 1 || o.branch == -1) {
        return {o.branch};
    }
    throw UsageError("--branch must be 1, -1 or 0 (both)");
}

int cmd_manifold(const Opts& o, std::ostream& out, std::ostream& err)
{
    const PeriodicOrbit orb = seed_orbit(o, point(o));
    std::string csv;
    for (int b : branches_of(o)) {
        const ManifoldPolyline m = grow_manifold(orb, side_of(o), b, manifold_settings(o));
        err << "manifold: branch " << b << ", " << m.vertices.size() << " vertices, arclength " << fmt(m.arclength())
            << (m.stopped_early ? " (stopped early)" : "") << '\n';
        const std::string part = manifold_csv(m);
        csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
    }
    emit_table(o, csv, out, err);
    return kExitOk;
}

int cmd_homoclinic_gap(const Opts& o, std::ostream& out)
{
    const ShiftedParams p = point(o);
    const PeriodicOrbit orb = seed_orbit(o, p);
    const AttractorCloud cloud =
        sample_attractor(p, initial_state(o), count_of(o.transient, "transient"), count_of(o.samples, "samples"));
    out << "# branch\tgap\tvertices\tarclength\n";
    for (int b : branches_of(o)) {
        const ManifoldPolyline m = grow_manifold(orb, side_of(o), b, manifold_settings(o));
        out << b << '\t' << fmt(homoclinic_gap(m, cloud, o.exclude)) << '\t' << m.vertices.size() << '\t'
            << fmt(m.arclength()) << '\n';
    }
    return kExitOk;
}

int cmd_rotation(const Opts& o, std::ostream& out)
{
    const double rho =
        rotation_number(point(o), initial_state(o), count_of(o.n, "n"), count_of(o.transient, "transient"));
    out << "# rotation_number\n" << fmt(rho) << '\n';
    return kExitOk;
}

int cmd_event_scan(const Opts& o, std::ostream& out, std::ostream& err)
{
    const Range r = range_of(o);
    const ContinuationParam cp = param_of(o);
    const ShiftedParams base = scan_base(o, r);
    ScanPredicate pred;
    pred.tau = o.tau;
    pred.eps = o.eps;
    pred.thresholds = thresholds_of(o);
    if (o.predicate == "dist-O+") {
        pred.target = fixed_target(State{});
    } else if (o.predicate == "dist-O-") {
        pred.target = [](const ShiftedParams& p) -> std::optional<State> {
            const double v = p.A + p.B + p.C - 1.0;
            return State{v, v, v};
        };
    } else if (o.predicate == "dist-orbit") {
        // Follow the orbit found at the base parameters to both ends of the range.
        const PeriodicOrbit orb = seed_orbit(o, base);
        const double lo = std::fmin(r.min, r.max) - 1e-2;
        const double hi = std::fmax(r.min, r.max) + 1e-2;
        const double here = get_param(base, cp);
        std::vector<TargetFn> parts;
        for (double end : {lo, hi}) {
            if (std::fabs(end - here) > 0.0) {
                parts.push_back(branch_target(continue_orbit(orb, cp, end, continuation_settings(o))));
            }
        }
        pred.target = [parts](const ShiftedParams& p) -> std::optional<State> {
            for (const auto& t : parts) {
                if (auto s = t(p)) {
                    return s;
                }
            }
            return std::nullopt;
        };
    } else if (o.predicate == "lambda2") {
        pred.kind = ScanPredicate::Kind::Lambda2Above;
    } else if (o.predicate == "regime") {
        pred.kind = ScanPredicate::Kind::RegimeChange;
    } else {
        throw UsageError("--predicate must be dist-O+, dist-O-, dist-orbit, lambda2 or regime");
    }
    ScanSettings ss;
    ss.transient = count_of(o.transient, "transient");
    ss.samples = count_of(o.samples, "samples");
    ss.lyapunov = lyap_settings(o);
    ss.policy = policy_of(o, InitialPolicy::Inherit);
    ss.init = initial_state(o);
    ss.bisection_tol = o.bisection_tol;
    err << "event-scan: " << r.count << " values of " << to_string(cp) << '\n';
    const ScanResult res = event_scan(base, cp, linspace(r.min, r.max, r.count), pred, ss, threads_of(o));
    out << "# param\tfrom\tto\n";
    for (const auto& c : res.crossings) {
        out << fmt(c.param) << '\t' << c.from << '\t' << c.to << '\n';
    }
    if (!o.out.empty()) {
        std::string csv = "param,value,label\n";
        for (const auto& s : res.samples) {
            csv += fmt(s.param) + "," + fmt(s.value) + "," + s.label + "\n";
        }
        write_file(o.out + ".csv", csv);
        err << "wrote " << o.out << ".csv\n";
    }
    return kExitOk;
}

int cmd_convert(const Opts& o, std::ostream& out)
{
    if (o.M1 || o.M2) {
        if (!(o.M1 && o.M2 && o.B)) {
            throw UsageError("give --M1 --M2 --B");
        }
        const MiraParams m{*o.M1, *o.M2, *o.B};
        out << "# branch\tA\tB\tC\n";
        for (auto [name, br] : {std::pair{"O+", FixedPointBranch::Plus}, std::pair{"O-", FixedPointBranch::Minus}}) {
            const ShiftedParams p = to_shifted(m, br);
            out << name << '\t' << fmt(p.A) << '\t' << fmt(p.B) << '\t' << fmt(p.C) << '\n';
        }
        return kExitOk;
    }
    const ShiftedParams p = point(o);
    const MiraParams m = to_mira(p);
    out << "# M1\tM2\tB\torigin\n";
    out << fmt(m.M1) << '\t' << fmt(m.M2) << '\t' << fmt(m.B) << '\t'
        << (origin_branch(p) == FixedPointBranch::Plus ? "O+" : "O-") << '\n';
    return kExitOk;
}

// --- parser -------------------------------------------------------------------------------

void add_params(CLI::App* s, Opts& o)
{
    s->add_option("--A", o.A, "A (shifted form)");
    s->add_option("--B", o.B, "B, the Jacobian");
    s->add_option("--C", o.C, "C (shifted form)");
    s->add_option("--M1", o.M1, "M1 (original form)");
    s->add_option("--M2", o.M2, "M2 (original form)");
}

void add_init(CLI::App* s, Opts& o)
{
    s->add_option("--x0", o.x0, "initial x (shifted coordinates)")->capture_default_str();
    s->add_option("--y0", o.y0, "initial y")->capture_default_str();
    s->add_option("--z0", o.z0, "initial z")->capture_default_str();
}

void add_lyap(CLI::App* s, Opts& o)
{
    s->add_option("--transient", o.transient, "discarded iterations")->capture_default_str();
    s->add_option("--iterations", o.iterations, "averaging iterations")->capture_default_str();
    s->add_option("--renorm", o.renorm, "Gram-Schmidt every N steps")->capture_default_str();
    s->add_option("--eps-zero", o.eps_zero, "zero band for exponents")->capture_default_str();
    s->add_option("--eps-flow", o.eps_flow, "|lambda2| band for flow-like chaos")->capture_default_str();
}

void add_orbit(CLI::App* s, Opts& o)
{
    s->add_option("--q", o.q, "period")->capture_default_str();
    s->add_option("--guess", o.guess, "initial guess x,y,z (default O+)");
}

void add_continuation(CLI::App* s, Opts& o)
{
    s->add_option("--param", o.param, "A or C")->capture_default_str();
    s->add_option("--step", o.step, "initial step")->capture_default_str();
    s->add_option("--min-step", o.min_step, "smallest step")->capture_default_str();
    s->add_option("--max-step", o.max_step, "largest step")->capture_default_str();
}

void add_manifold(CLI::App* s, Opts& o)
{
    s->add_option("--side", o.side, "stable or unstable")->capture_default_str();
    s->add_option("--branch", o.branch, "1, -1, or 0 for both")->capture_default_str();
    s->add_option("--gap", o.gap, "largest vertex spacing")->capture_default_str();
    s->add_option("--arclength", o.arclength_max, "arclength per branch")->capture_default_str();
    s->add_option("--max-vertices", o.max_vertices, "vertex cap per branch")->capture_default_str();
    s->add_option("--seed-delta", o.seed_delta, "offset along the eigenvector")->capture_default_str();
}

void add_common(CLI::App* s, Opts& o)
{
    s->add_option("--out", o.out, "output path prefix");
    s->add_option("--threads", o.threads, "worker cap (0: all cores)")->capture_default_str();
}

/// Split off --config FILE and append its key=value pairs as flags, unless
/// the same flag is already on the command line.
std::vector<std::string> apply_config(std::vector<std::string> args)
{
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 == args.size()) {
                throw UsageError("--config needs a file");
            }
            path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
            break;
        }
    }
    if (path.empty()) {
        return args;
    }
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot read config file " + path);
    }
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line without '=': " + line);
        }
        const std::string flag = "--" + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool present = false;
        for (const auto& a : args) {
            present = present || a == flag || a.rfind(flag + "=", 0) == 0;
        }
        if (!present) {
            args.push_back(flag);
            args.push_back(value);
        }
    }
    return args;
}

} // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err)
{
    Opts o;
    CLI::App app{"Laboratory for the three-dimensional Mira map", "mira3d"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    auto* fp = app.add_subcommand("fixed-points", "both fixed points with multipliers and types");
    add_params(fp, o);
    add_common(fp, o);

    auto* curves = app.add_subcommand("curves", "samples of an analytic bifurcation curve");
    curves->add_option("--curve", o.curve, "SN, PD, NS, TR, PD1, NS1 or SH12")->required();
    curves->add_option("--range", o.range, "min:max:count of the free parameter")->required();
    add_params(curves, o);
    add_common(curves, o);

    auto* chart = app.add_subcommand("saddle-chart", "(n,m) type of O+ over an (A, C) grid");
    chart->add_option("--axis1", o.axis1, "NAME=min:max:count");
    chart->add_option("--axis2", o.axis2, "NAME=min:max:count");
    chart->add_option("--unit-tol", o.unit_tol, "tolerance on |mu| - 1")->capture_default_str();
    add_params(chart, o);
    add_common(chart, o);

    auto* lyap = app.add_subcommand("lyap", "Lyapunov spectrum at one parameter point");
    add_params(lyap, o);
    add_init(lyap, o);
    add_lyap(lyap, o);
    add_common(lyap, o);

    auto* sweep_lyap = app.add_subcommand("sweep-lyap", "regime raster over a parameter plane");
    sweep_lyap->add_option("--axis1", o.axis1, "NAME=min:max:count (columns)");
    sweep_lyap->add_option("--axis2", o.axis2, "NAME=min:max:count (rows)");
    sweep_lyap->add_option("--policy", o.policy, "fresh (default) or inherit");
    sweep_lyap->add_flag("--mask-tr", o.mask_tr, "paint cells above TR white");
    sweep_lyap->add_flag("--no-escalate", o.no_escalate, "skip the Borderline rerun");
    add_params(sweep_lyap, o);
    add_init(sweep_lyap, o);
    add_lyap(sweep_lyap, o);
    add_common(sweep_lyap, o);

    auto* sweep_dist = app.add_subcommand("sweep-dist", "attractor-to-fixed-point distance raster");
    sweep_dist->add_option("--axis1", o.axis1, "NAME=min:max:count (columns)");
    sweep_dist->add_option("--axis2", o.axis2, "NAME=min:max:count (rows)");
    sweep_dist->add_option("--target", o.target, "O+ or O-")->capture_default_str();
    sweep_dist->add_option("--transient", o.transient, "discarded iterations")->capture_default_str();
    sweep_dist->add_option("--samples", o.samples, "cloud size per cell")->capture_default_str();
    sweep_dist->add_option("--black", o.black, "black threshold")->capture_default_str();
    sweep_dist->add_option("--policy", o.policy, "fresh (default) or inherit");
    add_params(sweep_dist, o);
    add_init(sweep_dist, o);
    add_common(sweep_dist, o);

    auto* orbit = app.add_subcommand("orbit", "periodic orbits");
    orbit->require_subcommand(1);
    auto* find = orbit->add_subcommand("find", "Newton for a period-q orbit");
    add_params(find, o);
    add_orbit(find, o);
    add_common(find, o);
    auto* cont = orbit->add_subcommand("continue", "continue an orbit in A or C");
    add_params(cont, o);
    add_orbit(cont, o);
    add_continuation(cont, o);
    cont->add_option("--to", o.to, "final parameter value");
    cont->add_option("--cascade", o.levels, "follow this many period doublings")->capture_default_str();
    add_common(cont, o);

    auto* locus = app.add_subcommand("locus", "two-parameter bifurcation loci");
    locus->require_subcommand(1);
    auto* lcont = locus->add_subcommand("continue", "continue an SN, PD or NS locus in (A, C)");
    lcont->add_option("--kind", o.kind, "SN, PD or NS")->required();
    lcont->add_option("--to", o.to, "seed from an event found continuing to this value");
    lcont->add_option("--event", o.event_index, "which event of that kind (0 = first)")->capture_default_str();
    lcont->add_option("--direction", o.direction, "1 or -1 along the locus")->capture_default_str();
    lcont->add_option("--arclength", o.arclength, "arclength budget")->capture_default_str();
    lcont->add_option("--max-resonance", o.max_resonance, "largest r for p:r points")->capture_default_str();
    add_params(lcont, o);
    add_orbit(lcont, o);
    add_continuation(lcont, o);
    add_common(lcont, o);

    auto* tree = app.add_subcommand("tree", "bifurcation tree over one parameter");
    tree->add_option("--range", o.range, "min:max:count")->required();
    tree->add_option("--param", o.param, "A or C")->capture_default_str();
    tree->add_option("--mode", o.mode, "stride or section")->capture_default_str();
    tree->add_option("--stride", o.stride, "record every N-th iterate")->capture_default_str();
    tree->add_option("--half-width", o.half_width, "section slab |y| < w")->capture_default_str();
    tree->add_option("--points", o.points, "points per value")->capture_default_str();
    tree->add_option("--transient", o.transient, "discarded iterations")->capture_default_str();
    tree->add_option("--budget", o.budget, "iteration cap per value")->capture_default_str();
    tree->add_option("--policy", o.policy, "inherit (default) or fresh");
    add_params(tree, o);
    add_init(tree, o);
    add_common(tree, o);

    auto* attr = app.add_subcommand("attractor", "point cloud of the attractor");
    attr->add_option("--transient", o.transient, "discarded iterations")->capture_default_str();
    attr->add_option("--samples", o.samples, "cloud size")->capture_default_str();
    add_params(attr, o);
    add_init(attr, o);
    add_common(attr, o);

    auto* man = app.add_subcommand("manifold", "1D stable or unstable manifold of an orbit");
    add_params(man, o);
    add_orbit(man, o);
    add_manifold(man, o);
    add_common(man, o);

    auto* hgap = app.add_subcommand("homoclinic-gap", "distance between a manifold and the attractor");
    add_params(hgap, o);
    add_orbit(hgap, o);
    add_manifold(hgap, o);
    add_init(hgap, o);
    hgap->add_option("--transient", o.transient, "discarded iterations")->capture_default_str();
    hgap->add_option("--samples", o.samples, "cloud size")->capture_default_str();
    hgap->add_option("--exclude", o.exclude, "ignore vertices this close to the orbit point")->capture_default_str();
    add_common(hgap, o);

    auto* rot = app.add_subcommand("rotation", "rotation number around O+");
    rot->add_option("--n", o.n, "averaging iterations")->capture_default_str();
    rot->add_option("--transient", o.transient, "discarded iterations")->capture_default_str();
    add_params(rot, o);
    add_init(rot, o);
    add_common(rot, o);

    auto* scan = app.add_subcommand("event-scan", "locate predicate changes along one parameter");
    scan->add_option("--range", o.range, "min:max:count, scanned in that order")->required();
    scan->add_option("--param", o.param, "A or C")->capture_default_str();
    scan->add_option("--predicate", o.predicate, "dist-O+, dist-O-, dist-orbit, lambda2 or regime")->required();
    scan->add_option("--tau", o.tau, "distance threshold")->capture_default_str();
    scan->add_option("--eps", o.eps, "lambda2 threshold")->capture_default_str();
    scan->add_option("--samples", o.samples, "cloud size for distances")->capture_default_str();
    scan->add_option("--policy", o.policy, "inherit (default) or fresh");
    scan->add_option("--bisection-tol", o.bisection_tol, "crossing resolution")->capture_default_str();
    add_params(scan, o);
    add_orbit(scan, o);
    add_init(scan, o);
    add_lyap(scan, o);
    scan->add_option("--step", o.step, "continuation step for dist-orbit")->capture_default_str();
    add_common(scan, o);

    auto* conv = app.add_subcommand("convert-params", "between (A, B, C) and (M1, M2, B)");
    add_params(conv, o);
    add_common(conv, o);

    std::vector<std::string> args;
    try {
        args = apply_config(raw_args);
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (fp->parsed()) {
            return cmd_fixed_points(o, out);
        }
        if (curves->parsed()) {
            return cmd_curves(o, out, err);
        }
        if (chart->parsed()) {
            return cmd_saddle_chart(o, out, err);
        }
        if (lyap->parsed()) {
            return cmd_lyap(o, out);
        }
        if (sweep_lyap->parsed()) {
            return cmd_sweep_lyap(o, out, err);
        }
        if (sweep_dist->parsed()) {
            return cmd_sweep_dist(o, out, err);
        }
        if (find->parsed()) {
            return cmd_orbit_find(o, out);
        }
        if (cont->parsed()) {
            return cmd_orbit_continue(o, out, err);
        }
        if (lcont->parsed()) {
            return cmd_locus_continue(o, out, err);
        }
        if (tree->parsed()) {
            return cmd_tree(o, out, err);
        }
        if (attr->parsed()) {
            return cmd_attractor(o, out, err);
        }
        if (man->parsed()) {
            return cmd_manifold(o, out, err);
        }
        if (hgap->parsed()) {
            return cmd_homoclinic_gap(o, out);
        }
        if (rot->parsed()) {
            return cmd_rotation(o, out);
        }
        if (scan->parsed()) {
            return cmd_event_scan(o, out, err);
        }
        if (conv->parsed()) {
            return cmd_convert(o, out);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace mira::cli
