#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mira/core_map.hpp"

namespace mira {

// Periodic orbits by single shooting: one point x with F^q(x) = x, the rest of
// the cycle recovered by forward iteration.

struct PeriodicOrbit {
    ShiftedParams params;
    int q = 1;
    /// Smallest d dividing q with F^d(x) = x to within the detection tolerance.
    int detected_period = 1;
    std::vector<State> points;
    Mat3 monodromy = Mat3::Identity();
    Multipliers multipliers{};
    OrbitType type;
    double residual = 0.0;
};

struct NewtonSettings {
    double tol = 1e-12;
    int max_iter = 50;
};

/// Newton on F^q(x) - x with Jacobian (monodromy - I). Throws
/// ConvergenceError (with the last residual) when it does not converge, and
/// ContractViolation for q < 1 or a non-finite guess.
[[nodiscard]] PeriodicOrbit find_orbit(const ShiftedParams& p, int q, const State& guess,
                                       const NewtonSettings& settings = {});

/// Build the orbit record for a point already known to be periodic.
[[nodiscard]] PeriodicOrbit make_orbit(const ShiftedParams& p, int q, const State& x0);

/// DF(points[q-1]) * ... * DF(points[0]).
[[nodiscard]] Mat3 monodromy(const ShiftedParams& p, const PeriodicOrbit& orbit);

/// F^q(x) together with its Jacobian and its derivatives in A and C.
struct IterateJet {
    Vec3 value;
    Mat3 jacobian;
    Vec3 d_dA;
    Vec3 d_dC;
};
[[nodiscard]] IterateJet iterate_jet(const ShiftedParams& p, const Vec3& x, int q);

/// Second compound matrix: entries are 2x2 minors, eigenvalues mu_i mu_j.
[[nodiscard]] Mat3 bialternate_square(const Mat3& m);

struct TestFunctions {
    double g_sn = 0.0; ///< det(M - I)
    double g_pd = 0.0; ///< det(M + I)
    double g_ns = 0.0; ///< det(M (.) M - I)
    /// The characteristic cubic has a complex pair (separates a true NS from
    /// a neutral saddle, where a real pair has product one).
    bool ns_is_complex = false;
};
[[nodiscard]] TestFunctions test_functions(const Mat3& m);

// --- one-parameter continuation ---------------------------------------------

enum class ContinuationParam { A, C };

[[nodiscard]] std::string to_string(ContinuationParam c);
[[nodiscard]] double get_param(const ShiftedParams& p, ContinuationParam c);
[[nodiscard]] ShiftedParams with_param(ShiftedParams p, ContinuationParam c, double v);

struct ContinuationSettings {
    double step = 1e-3;
    double min_step = 1e-6;
    double max_step = 1e-2;
    double corrector_tol = 1e-10;
    int corrector_max_iter = 12;
    /// Events are bisected until the bracket is this narrow in the parameter.
    double event_tol = 1e-8;
    int max_nodes = 200'000;
    /// Switch to pseudo-arclength when the natural-parameter corrector fails
    /// at the minimal step (a fold).
    bool arclength_fallback = true;
    /// End the branch at the first PD event (used by follow_cascade).
    bool stop_at_first_pd = false;
};

/// SN is a fold of the branch; TR is a +1 crossing where the branch passes
/// through without turning (exchange of stability, e.g. O+ on the TR plane).
enum class EventKind { SN, TR, PD, NS };

[[nodiscard]] std::string to_string(EventKind k);

struct BranchNode {
    double param = 0.0;
    double arclength = 0.0;
    PeriodicOrbit orbit;
    TestFunctions tests;
};

struct BranchEvent {
    EventKind kind = EventKind::PD;
    double param = 0.0;
    PeriodicOrbit orbit;
    /// Types at the bracketing nodes.
    OrbitType before;
    OrbitType after;
    /// Index of the node preceding the event.
    std::size_t node_index = 0;
};

struct Branch {
    ContinuationParam param = ContinuationParam::C;
    int q = 1;
    std::vector<BranchNode> nodes;
    std::vector<BranchEvent> events;
    bool used_arclength = false;
    bool truncated = false;
    std::string diagnostic;
};

/// Continue orbit0 (a converged orbit at its own parameters) in `param` from
/// its current value towards `target`.
[[nodiscard]] Branch continue_orbit(const PeriodicOrbit& orbit0, ContinuationParam param, double target,
                                    const ContinuationSettings& settings = {});

/// Seed the doubled orbit born at a PD event: solves
/// {F^{2q}(x) = x, v.(x - x_pd) = +-delta} for (x, param), v the -1
/// eigenvector. Returns nothing if neither sign converges to a period-2q orbit.
[[nodiscard]] std::optional<PeriodicOrbit> switch_at_period_doubling(const BranchEvent& event,
                                                                     ContinuationParam param,
                                                                     double delta = 1e-4);

/// Continue, switch at the first PD event that lies ahead, continue the
/// doubled orbit in the same direction, and so on for up to `levels` doublings.
struct Cascade {
    std::vector<Branch> branches;
    /// Parameter of each PD event used for switching, in order.
    std::vector<double> pd_params;
};
[[nodiscard]] Cascade follow_cascade(const PeriodicOrbit& orbit0, ContinuationParam param, double target,
                                     int levels, const ContinuationSettings& settings = {});

// --- two-parameter continuation of codim-1 loci -----------------------------

enum class LocusKind { SN, PD, NS };
enum class Codim2Kind { FoldFlip, GeneralizedPD, Resonance };

[[nodiscard]] std::string to_string(LocusKind k);
[[nodiscard]] std::string to_string(Codim2Kind k);

struct LocusNode {
    double A = 0.0;
    double C = 0.0;
    double arclength = 0.0;
    PeriodicOrbit orbit;
    TestFunctions tests;
    double defining_residual = 0.0;
};

struct Codim2Event {
    Codim2Kind kind = Codim2Kind::FoldFlip;
    double A = 0.0;
    double C = 0.0;
    PeriodicOrbit orbit;
    /// p:r for resonances (pair argument 2 pi p / r); zero otherwise.
    int res_p = 0;
    int res_r = 0;
    std::size_t node_index = 0;
};

struct Locus {
    LocusKind kind = LocusKind::PD;
    double B = 0.0;
    int q = 1;
    std::vector<LocusNode> nodes;
    std::vector<Codim2Event> events;
    bool truncated = false;
    std::string diagnostic;
};

struct LocusSettings {
    double step = 2e-3;
    double min_step = 1e-7;
    double max_step = 2e-2;
    double tol = 1e-10;
    int max_iter = 15;
    double arclength_budget = 1.0;
    int max_nodes = 100'000;
    /// Largest denominator r checked for p:r resonances on NS loci.
    int max_resonance = 8;
    double event_tol = 1e-8;
    /// Monitor the PD normal-form coefficient (PD loci only).
    bool monitor_gpd = true;
    /// +1 or -1: initial direction along the locus tangent (A increasing for +1
    /// where the tangent allows).
    int direction = 1;
    /// Stop when A or C leave these bounds.
    double A_min = -10.0, A_max = 10.0, C_min = -10.0, C_max = 10.0;
};

/// Value of the defining test function of `kind` for monodromy m.
[[nodiscard]] double locus_function(LocusKind kind, const Mat3& m);

/// Continue {F^q(x) - x = 0, g_kind = 0} in (x, y, z, A, C) at fixed B from
/// the seed orbit, which must satisfy both within 1e-6 (it is first refined).
[[nodiscard]] Locus continue_locus(LocusKind kind, const PeriodicOrbit& seed, const LocusSettings& settings = {});

// --- PD normal form ----------------------------------------------------------

/// Cubic coefficient c of the flip normal form  u -> -u + c u^3  of a map
/// at a fixed point x0 with multiplier -1 (c > 0: supercritical, the doubled
/// orbit is stable). Multilinear forms by central differences of f.
[[nodiscard]] double flip_coefficient(const std::function<Vec3(const Vec3&)>& f, const Vec3& x0,
                                      const Mat3& jac, double h = 1e-3);

/// flip_coefficient of F^q at the orbit. Requires a multiplier within 1e-6
/// of -1 (ContractViolation) and no other within 1e-4 of -1
/// (DegenerateCaseError).
[[nodiscard]] double gpd_coefficient(const PeriodicOrbit& orbit);

// --- export -----------------------------------------------------------------

/// Header: param_or_arclength,A,C,x0,y0,z0,q,|mu1|,|mu2|,|mu3|,type_n,type_m,event_kind
[[nodiscard]] std::string branch_csv(const Branch& b);
[[nodiscard]] std::string locus_csv(const Locus& l);

} // namespace mira
