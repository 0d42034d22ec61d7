#include "mira/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mira/core_map.hpp"
#include "mira/version.hpp"

namespace mira {
namespace {

constexpr const char* kImageComment = "# mira3d v1\n";

std::size_t index_of(const Grid2& g, int col, int row)
{
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(g.columns()) + static_cast<std::size_t>(col);
}

RegimeCell run_cell(const ShiftedParams& p, const State& init, const SweepSettings& s)
{
    RegimeCell cell;
    cell.spectrum = spectrum(p, init, s.lyapunov);
    cell.regime = classify_regime(cell.spectrum, s.thresholds);
    if (s.escalate_borderline && cell.regime.regime == Regime::Borderline) {
        LyapunovSettings more = s.lyapunov;
        more.transient *= 10;
        more.iterations *= 10;
        cell.spectrum = spectrum(p, init, more);
        cell.regime = classify_regime(cell.spectrum, s.thresholds);
        cell.escalated = true;
    }
    return cell;
}

RegimeCell no_fixed_point_cell()
{
    RegimeCell cell;
    cell.spectrum.escaped = true;
    cell.spectrum.final_state = State::escape_marker();
    cell.regime = {Regime::Divergent, false};
    cell.no_fixed_point = true;
    return cell;
}

std::string image_header(const char* magic, int w, int h)
{
    return std::string(magic) + "\n" + kImageComment + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

std::string axis_text(const Axis& a)
{
    return to_string(a.name) + "=" + format_double(a.min) + ":" + format_double(a.max) + ":"
           + std::to_string(a.count);
}

void grid_metadata(std::ostringstream& out, const Grid2& g)
{
    out << "version=" << kVersion << "\n";
    out << "parameterization=" << (g.mira_family() ? "original" : "shifted") << "\n";
    out << "axis1=" << axis_text(g.axis1) << "\n";
    out << "axis2=" << axis_text(g.axis2) << "\n";
    if (g.mira_family()) {
        out << "M1=" << format_double(g.fixed_mira.M1) << "\n";
        out << "M2=" << format_double(g.fixed_mira.M2) << "\n";
        out << "B=" << format_double(g.fixed_mira.B) << "\n";
    } else {
        out << "A=" << format_double(g.fixed_shifted.A) << "\n";
        out << "B=" << format_double(g.fixed_shifted.B) << "\n";
        out << "C=" << format_double(g.fixed_shifted.C) << "\n";
    }
    out << "columns=axis1 ascending\n";
    out << "rows=axis2 descending from max\n";
}

std::string state_text(const State& s)
{
    return format_double(s.x) + "," + format_double(s.y) + "," + format_double(s.z);
}

std::string rgb_text(const Rgb& c)
{
    return std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]);
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) {
        out.push_back(cur);
    }
    return out;
}

double parse_number(const std::string& s)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ContractViolation("csv: not a number: '" + s + "'");
    }
    if (used != s.size()) {
        throw ContractViolation("csv: trailing characters in '" + s + "'");
    }
    return v;
}

std::vector<std::vector<std::string>> parse_table(const std::string& text, const std::string& header,
                                                  std::size_t fields)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw ContractViolation("csv: expected header '" + header + "'");
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto f = split(line, ',');
        if (f.size() != fields) {
            throw ContractViolation("csv: wrong field count in '" + line + "'");
        }
        rows.push_back(std::move(f));
    }
    return rows;
}

} // namespace

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- sweeps ------------------------------------------------------------------------

RegimeRaster sweep_lyapunov(const Grid2& grid, const SweepSettings& settings, int threads)
{
    grid.validate();
    settings.lyapunov.validate();
    settings.thresholds.validate();

    RegimeRaster r;
    r.grid = grid;
    r.settings = settings;
    r.cells.resize(grid.cells());
    const int cols = grid.columns();
    const int rows = grid.rows();
    const int workers = threads > 0 ? threads : 1;

    if (settings.policy == InitialPolicy::Fresh) {
        const auto n = static_cast<long>(grid.cells());
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (long i = 0; i < n; ++i) {
            const int row = static_cast<int>(i / cols);
            const int col = static_cast<int>(i % cols);
            const auto p = grid.shifted_at(col, row);
            r.cells[static_cast<std::size_t>(i)] = p ? run_cell(*p, settings.init, settings) : no_fixed_point_cell();
        }
        return r;
    }

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (int col = 0; col < cols; ++col) {
        State s = settings.init;
        for (int row = 0; row < rows; ++row) {
            const auto p = grid.shifted_at(col, row);
            RegimeCell cell = p ? run_cell(*p, s, settings) : no_fixed_point_cell();
            s = inherited_state(cell.spectrum.final_state, settings.init);
            r.cells[index_of(grid, col, row)] = std::move(cell);
        }
    }
    return r;
}

std::map<std::string, std::size_t> regime_counts(const RegimeRaster& r)
{
    std::map<std::string, std::size_t> out;
    for (const auto& c : r.cells) {
        ++out[label(c.regime)];
    }
    return out;
}

std::string to_string(DistanceTarget t)
{
    return t == DistanceTarget::OPlus ? "O+" : "O-";
}

DistanceRaster sweep_distance(const Grid2& grid, DistanceTarget target, const DistanceSettings& settings,
                              int threads)
{
    grid.validate();
    if (settings.transient < 0 || settings.samples < 1) {
        throw ContractViolation("sweep_distance: need transient >= 0 and samples >= 1");
    }
    DistanceRaster r;
    r.grid = grid;
    r.target = target;
    r.settings = settings;
    r.cells.resize(grid.cells());
    const int cols = grid.columns();
    const int rows = grid.rows();
    const int workers = threads > 0 ? threads : 1;

    // Returns the cell and the state to inherit.
    const auto run = [&](int col, int row, const State& init) -> std::pair<DistanceCell, State> {
        DistanceCell cell;
        const auto p = grid.shifted_at(col, row);
        if (!p) {
            return {cell, settings.init};
        }
        // O+ is the origin of the shifted form, O- sits at x = y = z = A + B + C - 1.
        State t{};
        if (target == DistanceTarget::OMinus) {
            const double v = p->A + p->B + p->C - 1.0;
            t = {v, v, v};
        }
        cell.trivially_black = target == DistanceTarget::OPlus && in_stability_region(*p);
        const AttractorCloud cloud = sample_attractor(*p, init, settings.transient, settings.samples);
        if (cloud.escaped) {
            return {cell, settings.init};
        }
        cell.distance = distance_to_point(cloud, t);
        return {cell, inherited_state(cloud.final_state, settings.init)};
    };

    if (settings.policy == InitialPolicy::Fresh) {
        const auto n = static_cast<long>(grid.cells());
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (long i = 0; i < n; ++i) {
            r.cells[static_cast<std::size_t>(i)] = run(static_cast<int>(i % cols), static_cast<int>(i / cols),
                                                       settings.init).first;
        }
        return r;
    }

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (int col = 0; col < cols; ++col) {
        State s = settings.init;
        for (int row = 0; row < rows; ++row) {
            auto [cell, next] = run(col, row, s);
            r.cells[index_of(grid, col, row)] = cell;
            s = next;
        }
    }
    return r;
}

// --- rendering ---------------------------------------------------------------------

Rgb Palette::color(const RegimeClass& c) const
{
    switch (c.regime) {
    case Regime::Periodic: return periodic;
    case Regime::Quasiperiodic: return quasiperiodic;
    case Regime::Chaotic: return c.flow_like ? flow_like : chaotic;
    case Regime::Hyperchaotic: return hyperchaotic;
    case Regime::Borderline: return borderline;
    case Regime::Divergent: return divergent;
    }
    return divergent;
}

bool masked_above_tr(const Grid2& grid, int col, int row)
{
    const auto p = grid.shifted_at(col, row);
    return p && p->C > tr_c(p->A, p->B);
}

std::string render(const RegimeRaster& r, const RenderOptions& options)
{
    const Grid2& g = r.grid;
    std::string out = image_header("P6", g.columns(), g.rows());
    out.reserve(out.size() + 3 * g.cells());
    for (int row = 0; row < g.rows(); ++row) {
        for (int col = 0; col < g.columns(); ++col) {
            const Rgb c = options.mask_above_tr && masked_above_tr(g, col, row)
                              ? options.palette.masked
                              : options.palette.color(r.at(col, row).regime);
            out.append(reinterpret_cast<const char*>(c.data()), 3);
        }
    }
    return out;
}

std::string render(const DistanceRaster& r)
{
    const Grid2& g = r.grid;
    std::string out = image_header("P5", g.columns(), g.rows());
    const double thr = r.settings.black_threshold;
    for (const auto& cell : r.cells) {
        std::uint8_t level = 255;
        if (cell.distance >= 0.0) {
            if (cell.distance < thr) {
                level = 0;
            } else {
                // Three decades above the threshold span 64..254.
                const double t = std::fmin(1.0, std::log10(cell.distance / thr) / 3.0);
                level = static_cast<std::uint8_t>(64.0 + 190.0 * t);
            }
        }
        out.push_back(static_cast<char>(level));
    }
    return out;
}

Rgb saddle_color(const OrbitType& t)
{
    if (t.on_unit_circle()) {
        return {0, 0, 0};
    }
    if (t.stable == 3) {
        return t.has_complex_pair ? Rgb{100, 149, 237} : Rgb{0, 0, 205};
    }
    if (t.unstable == 3) {
        return {200, 200, 200};
    }
    switch (t.unstable_signs) {
    case SignPattern::ComplexPair: return {178, 34, 34};
    case SignPattern::AllPositive: return t.unstable == 1 ? Rgb{255, 165, 0} : Rgb{46, 139, 87};
    case SignPattern::AllNegative: return t.unstable == 1 ? Rgb{255, 215, 0} : Rgb{144, 238, 144};
    case SignPattern::Mixed: return {128, 0, 128};
    case SignPattern::None: break;
    }
    return {0, 0, 0};
}

std::string render(const SaddleChart& chart)
{
    const Grid2& g = chart.grid;
    std::string out = image_header("P6", g.columns(), g.rows());
    for (const auto& t : chart.cells) {
        const Rgb c = saddle_color(t);
        out.append(reinterpret_cast<const char*>(c.data()), 3);
    }
    return out;
}

// --- CSV -----------------------------------------------------------------------------

std::string write_csv(const RegimeRaster& r)
{
    std::string out = "axis1,axis2,lambda1,lambda2,lambda3,regime\n";
    const Grid2& g = r.grid;
    for (int row = 0; row < g.rows(); ++row) {
        for (int col = 0; col < g.columns(); ++col) {
            const RegimeCell& c = r.at(col, row);
            out += format_double(g.axis1_value(col)) + "," + format_double(g.axis2_value(row));
            for (double l : c.spectrum.lambda) {
                out += "," + format_double(l);
            }
            out += "," + label(c.regime) + "\n";
        }
    }
    return out;
}

std::string write_csv(const DistanceRaster& r)
{
    std::string out = "axis1,axis2,distance\n";
    const Grid2& g = r.grid;
    for (int row = 0; row < g.rows(); ++row) {
        for (int col = 0; col < g.columns(); ++col) {
            out += format_double(g.axis1_value(col)) + "," + format_double(g.axis2_value(row)) + ","
                   + format_double(r.at(col, row).distance) + "\n";
        }
    }
    return out;
}

std::string write_csv(const SaddleChart& chart)
{
    std::string out = "axis1,axis2,stable,unstable,neutral,label\n";
    const Grid2& g = chart.grid;
    for (int row = 0; row < g.rows(); ++row) {
        for (int col = 0; col < g.columns(); ++col) {
            const OrbitType& t = chart.at(col, row);
            out += format_double(g.axis1_value(col)) + "," + format_double(g.axis2_value(row)) + ","
                   + std::to_string(t.stable) + "," + std::to_string(t.unstable) + "," + std::to_string(t.neutral)
                   + "," + describe(t).substr(describe(t).find(' ') + 1) + "\n";
        }
    }
    return out;
}

std::vector<RegimeCsvRow> parse_regime_csv(const std::string& text)
{
    std::vector<RegimeCsvRow> out;
    for (const auto& f : parse_table(text, "axis1,axis2,lambda1,lambda2,lambda3,regime", 6)) {
        if (!parse_regime_label(f[5])) {
            throw ContractViolation("csv: unknown regime '" + f[5] + "'");
        }
        out.push_back({parse_number(f[0]), parse_number(f[1]),
                       {parse_number(f[2]), parse_number(f[3]), parse_number(f[4])}, f[5]});
    }
    return out;
}

std::vector<DistanceCsvRow> parse_distance_csv(const std::string& text)
{
    std::vector<DistanceCsvRow> out;
    for (const auto& f : parse_table(text, "axis1,axis2,distance", 3)) {
        out.push_back({parse_number(f[0]), parse_number(f[1]), parse_number(f[2])});
    }
    return out;
}

// --- metadata --------------------------------------------------------------------------

std::string metadata(const RegimeRaster& r, const RenderOptions& options)
{
    std::ostringstream out;
    out << "kind=lyapunov\n";
    grid_metadata(out, r.grid);
    const SweepSettings& s = r.settings;
    out << "transient=" << s.lyapunov.transient << "\n";
    out << "iterations=" << s.lyapunov.iterations << "\n";
    out << "renorm_every=" << s.lyapunov.renorm_every << "\n";
    out << "eps_zero=" << format_double(s.thresholds.eps_zero) << "\n";
    out << "eps_flow=" << format_double(s.thresholds.eps_flow) << "\n";
    out << "ic_policy=" << to_string(s.policy) << "\n";
    out << "ic_init=" << state_text(s.init) << "\n";
    if (s.policy == InitialPolicy::Inherit) {
        out << "inherit_order=per column, axis2 from max to min\n";
    }
    out << "escalate_borderline=" << (s.escalate_borderline ? "true" : "false") << "\n";
    std::size_t escalated = 0;
    for (const auto& c : r.cells) {
        escalated += c.escalated ? 1 : 0;
    }
    out << "escalated_cells=" << escalated << "\n";
    out << "mask_above_tr=" << (options.mask_above_tr ? "true" : "false") << "\n";
    const Palette& p = options.palette;
    out << "palette.Periodic=" << rgb_text(p.periodic) << "\n";
    out << "palette.Quasiperiodic=" << rgb_text(p.quasiperiodic) << "\n";
    out << "palette.Chaotic=" << rgb_text(p.chaotic) << "\n";
    out << "palette.FlowLike=" << rgb_text(p.flow_like) << "\n";
    out << "palette.Hyperchaotic=" << rgb_text(p.hyperchaotic) << "\n";
    out << "palette.Borderline=" << rgb_text(p.borderline) << "\n";
    out << "palette.Divergent=" << rgb_text(p.divergent) << "\n";
    out << "palette.masked=" << rgb_text(p.masked) << "\n";
    for (const auto& [name, count] : regime_counts(r)) {
        out << "count." << name << "=" << count << "\n";
    }
    return out.str();
}

std::string metadata(const DistanceRaster& r)
{
    std::ostringstream out;
    out << "kind=distance\n";
    grid_metadata(out, r.grid);
    const DistanceSettings& s = r.settings;
    out << "target=" << to_string(r.target) << "\n";
    out << "transient=" << s.transient << "\n";
    out << "samples=" << s.samples << "\n";
    out << "ic_policy=" << to_string(s.policy) << "\n";
    out << "ic_init=" << state_text(s.init) << "\n";
    if (s.policy == InitialPolicy::Inherit) {
        out << "inherit_order=per column, axis2 from max to min\n";
    }
    out << "black_threshold=" << format_double(s.black_threshold) << "\n";
    out << "escaped_value=" << format_double(kEscapedDistance) << "\n";
    std::size_t black = 0;
    std::size_t trivial = 0;
    std::size_t escaped_cells = 0;
    for (const auto& c : r.cells) {
        if (c.distance < 0.0) {
            ++escaped_cells;
        } else if (c.distance < s.black_threshold) {
            ++(c.trivially_black ? trivial : black);
        }
    }
    out << "black_cells=" << black << "\n";
    out << "trivially_black_cells=" << trivial << "\n";
    out << "escaped_cells=" << escaped_cells << "\n";
    return out.str();
}

std::string metadata(const SaddleChart& chart)
{
    std::ostringstream out;
    out << "kind=saddle-chart\n";
    grid_metadata(out, chart.grid);
    out << "unit_tol=" << format_double(chart.unit_tol) << "\n";
    return out.str();
}

} // namespace mira
