#include "mira/lyapunov.hpp"

#include <algorithm>
#include <functional>

#include "mira/core_map.hpp"

namespace mira {
namespace {

// Modified Gram-Schmidt on the columns of q; returns the column norms taken
// before normalization.
std::array<double, 3> orthonormalize(Mat3& q)
{
    std::array<double, 3> norms{};
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < j; ++i) {
            q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
        }
        norms[static_cast<std::size_t>(j)] = q.col(j).norm();
        q.col(j) /= norms[static_cast<std::size_t>(j)];
    }
    return norms;
}

Spectrum escaped_spectrum(long used)
{
    Spectrum s;
    s.escaped = true;
    s.iterations_used = used;
    s.final_state = State::escape_marker();
    return s;
}

} // namespace

void LyapunovSettings::validate() const
{
    if (transient < 0 || iterations <= 0 || renorm_every < 1) {
        throw ContractViolation("lyapunov settings: need transient >= 0, iterations > 0, renorm_every >= 1");
    }
}

void RegimeThresholds::validate() const
{
    if (!(eps_zero > 0.0 && eps_zero <= eps_flow)) {
        throw ContractViolation("regime thresholds: need 0 < eps_zero <= eps_flow");
    }
}

Spectrum spectrum(const ShiftedParams& p, const State& init, const LyapunovSettings& settings)
{
    return spectrum(p, init, settings, Mat3::Identity());
}

Spectrum spectrum(const ShiftedParams& p, const State& init, const LyapunovSettings& settings,
                  const Mat3& initial_frame)
{
    settings.validate();
    if (!init.finite()) {
        throw ContractViolation("spectrum: initial state is not finite");
    }

    State s = init;
    for (long i = 0; i < settings.transient; ++i) {
        s = step(p, s);
        if (escaped(s)) {
            return escaped_spectrum(i + 1);
        }
    }

    Mat3 q = initial_frame;
    orthonormalize(q);
    // Norm products are folded into the log sums in batches; log dominates
    // the cost of a step otherwise.
    std::array<double, 3> sums{};
    std::array<double, 3> prods{1.0, 1.0, 1.0};
    int pending = 0;
    const auto flush = [&] {
        for (std::size_t k = 0; k < 3; ++k) {
            sums[k] += std::log(prods[k]);
            prods[k] = 1.0;
        }
        pending = 0;
    };
    for (long i = 0; i < settings.iterations; ++i) {
        // DF has companion structure: rows shift up, the last row is
        // (B, C - 2y, A).
        const double c = p.C - 2.0 * s.y;
        for (int j = 0; j < 3; ++j) {
            const double r0 = q(0, j);
            const double r1 = q(1, j);
            const double r2 = q(2, j);
            q(0, j) = r1;
            q(1, j) = r2;
            q(2, j) = p.B * r0 + c * r1 + p.A * r2;
        }
        s = step(p, s);
        if (escaped(s)) {
            return escaped_spectrum(settings.transient + i + 1);
        }
        if ((i + 1) % settings.renorm_every == 0 || i + 1 == settings.iterations) {
            const auto norms = orthonormalize(q);
            bool extreme = false;
            for (std::size_t k = 0; k < 3; ++k) {
                prods[k] *= norms[k];
                extreme = extreme || !(prods[k] > 1e-100 && prods[k] < 1e100);
            }
            if (++pending == 32 || extreme) {
                flush();
            }
        }
    }
    flush();

    Spectrum out;
    const double n = static_cast<double>(settings.iterations);
    for (std::size_t k = 0; k < 3; ++k) {
        out.lambda[k] = sums[k] / n;
    }
    std::sort(out.lambda.begin(), out.lambda.end(), std::greater<>());
    out.iterations_used = settings.transient + settings.iterations;
    out.final_state = s;
    return out;
}

std::vector<Spectrum> spectrum_batch(const std::vector<SpectrumTask>& tasks, const LyapunovSettings& settings,
                                     int threads)
{
    settings.validate();
    std::vector<Spectrum> out(tasks.size());
    const auto n = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : 1)
    for (long i = 0; i < n; ++i) {
        const auto& t = tasks[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = spectrum(t.params, t.init, settings);
    }
    return out;
}

RegimeClass classify_regime(const Spectrum& s, const RegimeThresholds& t)
{
    if (s.escaped) {
        return {Regime::Divergent, false};
    }
    const double l1 = s.lambda[0];
    const double l2 = s.lambda[1];
    if (l2 > t.eps_zero) {
        return {Regime::Hyperchaotic, false};
    }
    if (l1 > t.eps_zero) {
        return {Regime::Chaotic, std::fabs(l2) < t.eps_flow};
    }
    if (std::fabs(l1) <= t.eps_zero && l2 < -t.eps_zero) {
        return {Regime::Quasiperiodic, false};
    }
    if (l1 < -t.eps_zero) {
        return {Regime::Periodic, false};
    }
    return {Regime::Borderline, false};
}

std::string to_string(Regime r)
{
    switch (r) {
    case Regime::Periodic: return "Periodic";
    case Regime::Quasiperiodic: return "Quasiperiodic";
    case Regime::Chaotic: return "Chaotic";
    case Regime::Hyperchaotic: return "Hyperchaotic";
    case Regime::Borderline: return "Borderline";
    case Regime::Divergent: return "Divergent";
    }
    return "?";
}

std::string label(const RegimeClass& c)
{
    if (c.regime == Regime::Chaotic && c.flow_like) {
        return "FlowLike";
    }
    return to_string(c.regime);
}

std::optional<RegimeClass> parse_regime_label(const std::string& s)
{
    if (s == "FlowLike") {
        return RegimeClass{Regime::Chaotic, true};
    }
    for (auto r : {Regime::Periodic, Regime::Quasiperiodic, Regime::Chaotic, Regime::Hyperchaotic,
                   Regime::Borderline, Regime::Divergent}) {
        if (to_string(r) == s) {
            return RegimeClass{r, false};
        }
    }
    return std::nullopt;
}

} // namespace mira
