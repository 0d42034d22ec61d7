#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mira/types.hpp"

namespace mira {

/// Lyapunov spectrum of an orbit, in nats per iteration, sorted descending.
/// An escaped orbit carries escaped = true and zero exponents.
struct Spectrum {
    std::array<double, 3> lambda{0.0, 0.0, 0.0};
    bool escaped = false;
    long iterations_used = 0;
    /// Where the orbit ended; lets callers follow an attractor across a scan.
    State final_state;

    [[nodiscard]] double sum() const { return lambda[0] + lambda[1] + lambda[2]; }
};

struct LyapunovSettings {
    long transient = 10'000;
    long iterations = 100'000;
    int renorm_every = 1;

    /// Throws ContractViolation for non-positive counts.
    void validate() const;
};

/// Benettin-style tangent-frame evolution with modified Gram-Schmidt.
/// Throws ContractViolation on a non-finite initial state.
[[nodiscard]] Spectrum spectrum(const ShiftedParams& p, const State& init, const LyapunovSettings& settings = {});

/// Same, starting from the given orthonormal tangent frame (columns).
[[nodiscard]] Spectrum spectrum(const ShiftedParams& p, const State& init, const LyapunovSettings& settings,
                                const Mat3& initial_frame);

struct SpectrumTask {
    ShiftedParams params;
    State init;
};

/// Element-wise spectrum; output order matches input order and does not
/// depend on the number of threads.
[[nodiscard]] std::vector<Spectrum> spectrum_batch(const std::vector<SpectrumTask>& tasks,
                                                   const LyapunovSettings& settings, int threads = 1);

// --- regimes ----------------------------------------------------------------

enum class Regime { Periodic, Quasiperiodic, Chaotic, Hyperchaotic, Borderline, Divergent };

struct RegimeThresholds {
    double eps_zero = 1e-3;
    double eps_flow = 0.003;

    void validate() const;
};

struct RegimeClass {
    Regime regime = Regime::Borderline;
    /// Chaotic with |lambda2| < eps_flow.
    bool flow_like = false;

    friend bool operator==(const RegimeClass&, const RegimeClass&) = default;
};

[[nodiscard]] RegimeClass classify_regime(const Spectrum& s, const RegimeThresholds& t = {});

[[nodiscard]] std::string to_string(Regime r);
/// "Periodic", ..., with "FlowLike" for flow-like chaos.
[[nodiscard]] std::string label(const RegimeClass& c);
[[nodiscard]] std::optional<RegimeClass> parse_regime_label(const std::string& s);

} // namespace mira
