#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mira/grid.hpp"
#include "mira/lyapunov.hpp"
#include "mira/orbits.hpp"

namespace mira {

/// O+ + (0.01, 0.01, 0.01): attractors are tracked as they develop from O+.
[[nodiscard]] inline State default_initial_state() { return {0.01, 0.01, 0.01}; }

/// Start state for the next parameter value under inheritance: the previous
/// final state, or `init` after an escape or when the orbit settled on O+
/// (the origin is mapped to itself exactly and never leaves once unstable).
[[nodiscard]] State inherited_state(const State& final_state, const State& init);

// --- attractor clouds ---------------------------------------------------------

/// Consecutive post-transient iterates. When the orbit escapes, `samples`
/// holds what was collected before the escape and `escaped` is set.
struct AttractorCloud {
    ShiftedParams params;
    std::vector<State> samples;
    bool escaped = false;
    /// Last state reached (the next iterate after the final sample).
    State final_state;
};

[[nodiscard]] AttractorCloud sample_attractor(const ShiftedParams& p, const State& init, long transient,
                                              long n_samples);

/// Minimum distance from the samples to target. Throws EscapeError for an
/// escaped cloud.
[[nodiscard]] double distance_to_point(const AttractorCloud& cloud, const State& target);

[[nodiscard]] std::string cloud_csv(const AttractorCloud& cloud);

// --- bifurcation trees ------------------------------------------------------------

enum class InitialPolicy { Fresh, Inherit };

[[nodiscard]] std::string to_string(InitialPolicy p);

struct TreeSettings {
    enum class Mode { Stride, Section } mode = Mode::Stride;
    int stride = 1;
    /// Section mode keeps iterates with |y| < half_width.
    double half_width = 1e-3;
    int points_per_value = 200;
    long transient = 10'000;
    /// Iteration cap per parameter value after the transient.
    long budget = 10'000'000;
    InitialPolicy policy = InitialPolicy::Inherit;
    State init = default_initial_state();
};

struct TreeColumn {
    double param = 0.0;
    std::vector<double> xs;
    bool escaped = false;
};

/// Scan `param` over `values` in order. Inherit mode starts each column from
/// the previous column's final state (fresh start after an escape).
[[nodiscard]] std::vector<TreeColumn> bifurcation_tree(const ShiftedParams& base, ContinuationParam param,
                                                       const std::vector<double>& values,
                                                       const TreeSettings& settings, int threads = 1);

/// CSV `param,x`, one row per recorded point.
[[nodiscard]] std::string tree_csv(const std::vector<TreeColumn>& tree);

/// Evenly spaced values from first to last inclusive (first may exceed last).
[[nodiscard]] std::vector<double> linspace(double first, double last, int count);

// --- invariant manifolds --------------------------------------------------------

enum class ManifoldSide { Stable, Unstable };

struct ManifoldSettings {
    double seed_delta = 1e-6;
    double gap_max = 1e-2;
    double arclength_max = 10.0;
    std::size_t max_vertices = 10'000;
};

struct ManifoldPolyline {
    ShiftedParams params;
    State base;
    ManifoldSide side = ManifoldSide::Unstable;
    int branch = 1;
    /// Multiplier of the eigendirection.
    double multiplier = 0.0;
    std::vector<State> vertices;
    /// Cumulative arclength at each vertex.
    std::vector<double> s;
    /// The growth stopped on an escape or the vertex cap before arclength_max.
    bool stopped_early = false;

    [[nodiscard]] double arclength() const { return s.empty() ? 0.0 : s.back(); }
};

/// One branch (+1 or -1) of the 1D stable or unstable manifold of
/// orbit.points[0]. Throws DomainError when the requested side is not
/// one-dimensional and real, NonInvertibleError for a stable side at B = 0.
[[nodiscard]] ManifoldPolyline grow_manifold(const PeriodicOrbit& orbit, ManifoldSide side, int branch,
                                             const ManifoldSettings& settings = {});

[[nodiscard]] std::string manifold_csv(const ManifoldPolyline& m);

/// Minimum distance between manifold vertices and cloud samples, ignoring
/// vertices within exclude_radius of the base point. Throws
/// ContractViolation when the two were computed at different parameters and
/// EscapeError for an escaped cloud.
[[nodiscard]] double homoclinic_gap(const ManifoldPolyline& m, const AttractorCloud& cloud,
                                    double exclude_radius = 0.0);

// --- rotation number -------------------------------------------------------------

/// Mean winding of the orbit around O+ in the plane of its complex
/// eigenpair, as a fraction of a turn in [0, 1). Throws DomainError if O+
/// is not focal or the orbit converges to O+, EscapeError on escape.
[[nodiscard]] double rotation_number(const ShiftedParams& p, const State& init, long n, long transient = 10'000);

// --- event scans --------------------------------------------------------------------

/// Target point as a function of parameters (for instance a continued
/// periodic point); empty when it cannot be evaluated there.
using TargetFn = std::function<std::optional<State>(const ShiftedParams&)>;

[[nodiscard]] TargetFn fixed_target(const State& s);

/// Follows one point of a continued branch: interpolates between branch
/// nodes and polishes with Newton at the requested parameter.
[[nodiscard]] TargetFn branch_target(const Branch& branch);

struct ScanPredicate {
    enum class Kind { DistanceBelow, Lambda2Above, RegimeChange } kind = Kind::DistanceBelow;
    TargetFn target;
    double tau = 1e-3;
    double eps = 1e-3;
    RegimeThresholds thresholds;
};

struct ScanSettings {
    long transient = 10'000;
    /// Cloud size for distance predicates.
    long samples = 100'000;
    LyapunovSettings lyapunov;
    InitialPolicy policy = InitialPolicy::Inherit;
    State init = default_initial_state();
    double bisection_tol = 1e-4;
};

struct ScanSample {
    double param = 0.0;
    /// Distance or lambda2 (NaN for regime scans and escaped orbits).
    double value = 0.0;
    /// "true"/"false" for threshold predicates, the regime label otherwise.
    std::string label;
    State final_state;
};

struct Crossing {
    double param = 0.0;
    /// Predicate state on the side of the scan start and past the crossing.
    std::string from;
    std::string to;
};

struct ScanResult {
    std::vector<ScanSample> samples;
    std::vector<Crossing> crossings;
};

/// Sample the predicate on `values` (in order; inheritance follows that
/// order), then bisect every change to bisection_tol.
[[nodiscard]] ScanResult event_scan(const ShiftedParams& base, ContinuationParam param,
                                    const std::vector<double>& values, const ScanPredicate& predicate,
                                    const ScanSettings& settings = {}, int threads = 1);

} // namespace mira
