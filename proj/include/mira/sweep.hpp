#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mira/analysis.hpp"
#include "mira/curves.hpp"
#include "mira/grid.hpp"
#include "mira/lyapunov.hpp"

namespace mira {

// Parameter-plane campaigns. Cells are stored in render order: row 0 holds
// axis2's maximum, columns run with axis1 ascending.
//
// Fresh policy starts every cell from `init`. Inherit policy walks each
// column from row 0 downward (axis2 decreasing), starting each cell from the
// previous cell's final state through inherited_state().
// Columns are independent, so results do not depend on the worker count.

struct SweepSettings {
    LyapunovSettings lyapunov{10'000, 100'000, 1};
    RegimeThresholds thresholds;
    InitialPolicy policy = InitialPolicy::Fresh;
    State init = default_initial_state();
    /// Rerun Borderline cells once with ten times the transient and iterations.
    bool escalate_borderline = true;
};

struct RegimeCell {
    Spectrum spectrum;
    RegimeClass regime;
    bool escalated = false;
    /// Original-parameter cell with no fixed point; recorded as Divergent.
    bool no_fixed_point = false;
};

struct RegimeRaster {
    Grid2 grid;
    SweepSettings settings;
    std::vector<RegimeCell> cells;

    [[nodiscard]] const RegimeCell& at(int col, int row) const
    {
        return cells[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.columns())
                     + static_cast<std::size_t>(col)];
    }
};

[[nodiscard]] RegimeRaster sweep_lyapunov(const Grid2& grid, const SweepSettings& settings = {}, int threads = 1);

/// Cell counts by regime label (FlowLike counted separately from Chaotic).
[[nodiscard]] std::map<std::string, std::size_t> regime_counts(const RegimeRaster& r);

enum class DistanceTarget { OPlus, OMinus };

[[nodiscard]] std::string to_string(DistanceTarget t);

struct DistanceSettings {
    long transient = 10'000;
    long samples = 100'000;
    InitialPolicy policy = InitialPolicy::Fresh;
    State init = default_initial_state();
    /// Cells below this distance render black.
    double black_threshold = 1e-3;
};

/// Distance stored for escaped cells (and cells with no fixed point).
inline constexpr double kEscapedDistance = -1.0;

struct DistanceCell {
    double distance = kEscapedDistance;
    /// Target is O+ and the cell lies in its stability region, where the
    /// attractor is O+ itself.
    bool trivially_black = false;
};

struct DistanceRaster {
    Grid2 grid;
    DistanceTarget target = DistanceTarget::OPlus;
    DistanceSettings settings;
    std::vector<DistanceCell> cells;

    [[nodiscard]] const DistanceCell& at(int col, int row) const
    {
        return cells[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.columns())
                     + static_cast<std::size_t>(col)];
    }
};

[[nodiscard]] DistanceRaster sweep_distance(const Grid2& grid, DistanceTarget target,
                                            const DistanceSettings& settings = {}, int threads = 1);

// --- rendering ---------------------------------------------------------------------

using Rgb = std::array<std::uint8_t, 3>;

struct Palette {
    Rgb periodic{0, 0, 255};
    Rgb quasiperiodic{0, 255, 0};
    Rgb chaotic{255, 255, 0};
    Rgb flow_like{128, 128, 128};
    Rgb hyperchaotic{255, 0, 0};
    Rgb divergent{255, 255, 255};
    Rgb borderline{128, 0, 128};
    Rgb masked{255, 255, 255};

    [[nodiscard]] Rgb color(const RegimeClass& c) const;
};

struct RenderOptions {
    Palette palette;
    /// Paint cells with C above the TR plane (where O+ is a saddle) in the
    /// masked color, keeping only regimes tied to O+.
    bool mask_above_tr = false;
};

/// Binary P6 image. The header carries one fixed comment line, so it is
/// byte-identical for identical rasters.
[[nodiscard]] std::string render(const RegimeRaster& r, const RenderOptions& options = {});

/// Binary P5 image: black below the threshold, white for escaped cells,
/// gray levels rising with log distance otherwise.
[[nodiscard]] std::string render(const DistanceRaster& r);

[[nodiscard]] std::string render(const SaddleChart& chart);

[[nodiscard]] Rgb saddle_color(const OrbitType& t);

[[nodiscard]] bool masked_above_tr(const Grid2& grid, int col, int row);

// --- CSV and metadata -----------------------------------------------------------------

/// Header `axis1,axis2,lambda1,lambda2,lambda3,regime`, 17 significant digits,
/// rows in render order.
[[nodiscard]] std::string write_csv(const RegimeRaster& r);
/// Header `axis1,axis2,distance`.
[[nodiscard]] std::string write_csv(const DistanceRaster& r);
/// Header `axis1,axis2,stable,unstable,neutral,label`; label is the part of
/// describe() after the (n,m) prefix.
[[nodiscard]] std::string write_csv(const SaddleChart& chart);

struct RegimeCsvRow {
    double axis1 = 0.0;
    double axis2 = 0.0;
    std::array<double, 3> lambda{};
    std::string regime;
};
struct DistanceCsvRow {
    double axis1 = 0.0;
    double axis2 = 0.0;
    double distance = 0.0;
};

/// Throw ContractViolation on a malformed table.
[[nodiscard]] std::vector<RegimeCsvRow> parse_regime_csv(const std::string& text);
[[nodiscard]] std::vector<DistanceCsvRow> parse_distance_csv(const std::string& text);

/// `key=value` lines describing the grid, settings and palette; enough to
/// regenerate the raster. Contains no thread count or timestamps.
[[nodiscard]] std::string metadata(const RegimeRaster& r, const RenderOptions& options = {});
[[nodiscard]] std::string metadata(const DistanceRaster& r);
[[nodiscard]] std::string metadata(const SaddleChart& chart);

/// "%.17g".
[[nodiscard]] std::string format_double(double v);

} // namespace mira
