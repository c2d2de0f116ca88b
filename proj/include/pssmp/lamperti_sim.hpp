#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pssmp/errors.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/numeric.hpp"
#include "pssmp/rng.hpp"
#include "pssmp/simulated_jumps.hpp"

namespace pssmp {

inline constexpr const char* kLampertiScheme = "lamperti-timechange-v1";

struct LevyPathConfig {
    /// Grid step in ξ-time.
    double dt = 1e-3;
    /// Longest ξ-time simulated.
    double horizon = 20.0;
    /// ε: density jumps with |u| < ε become a Gaussian surrogate.
    double small_jump_cutoff = 1e-3;
    /// Generation stops early once the running exponential functional reaches this value.
    double stop_functional = kInf;
};

inline void check_config(const LevyPathConfig& c) {
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw PreconditionError("LevyPathConfig: dt must be > 0");
    if (!(c.horizon >= c.dt) || !std::isfinite(c.horizon)) throw PreconditionError("LevyPathConfig: horizon must be >= dt");
    if (!(c.small_jump_cutoff > 0.0)) throw PreconditionError("LevyPathConfig: small_jump_cutoff must be > 0");
}

struct JumpRecord {
    double time;
    double size;
};

/// A càdlàg grid path of ξ. Grid nodes are the multiples of dt plus every jump
/// time and the killing time. Between nodes the continuous part is linear.
struct LevyPath {
    std::vector<double> times;
    /// ξ(s_i); the coffin value -inf at and after ζ.
    std::vector<double> values;
    /// ξ(s_i-), the value before any jump at s_i.
    std::vector<double> left_limits;
    std::vector<JumpRecord> jumps;
    /// ζ, or +inf when the path was not killed within the generated range.
    double lifetime = kInf;
    /// Generation ended at the horizon (not by killing or the stop rule).
    bool truncated = false;

    bool killed() const noexcept { return std::isfinite(lifetime); }
};

/// Euler-grid sample of the Lévy process of `t`, killed at an independent
/// exponential time of rate q. Jump times are exact Poisson event times.
inline LevyPath sample_levy_path(const LevyTriplet& t, const SimulatedJumps& jumps, const LevyPathConfig& cfg,
                                 Engine& rng) {
    check_config(cfg);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> unit_exp(1.0);

    const double drift = t.gamma - jumps.levy_compensator();
    const double sigma = std::sqrt(t.sigma2 + jumps.small_u2());
    const double rate = jumps.rate();

    LevyPath path;
    path.times.push_back(0.0);
    path.values.push_back(0.0);
    path.left_limits.push_back(0.0);

    const double zeta = t.kill_rate > 0.0 ? unit_exp(rng) / t.kill_rate : kInf;
    double next_jump = rate > 0.0 ? unit_exp(rng) / rate : kInf;
    double s = 0.0;
    double x = 0.0;
    double functional = 0.0;
    std::int64_t k = 0;
    while (true) {
        const double grid = std::min(static_cast<double>(k + 1) * cfg.dt, cfg.horizon);
        const double event = std::min(next_jump, zeta);
        const bool at_event = event < grid;
        const double s_next = at_event ? event : grid;
        const double h = s_next - s;
        double b = drift * h;
        if (sigma > 0.0) b += sigma * std::sqrt(h) * normal(rng);
        const double pre = x + b;
        functional += std::exp(x) * h * expm1_ratio(b);

        path.times.push_back(s_next);
        path.left_limits.push_back(pre);
        if (at_event && event == zeta) {
            path.values.push_back(-kInf);
            path.lifetime = zeta;
            break;
        }
        if (at_event) {
            const double u = jumps.sample(rng);
            path.jumps.push_back({s_next, u});
            x = pre + u;
            next_jump = s_next + unit_exp(rng) / rate;
        } else {
            x = pre;
            ++k;
        }
        path.values.push_back(x);
        s = s_next;
        if (functional >= cfg.stop_functional) break;
        if (!at_event && s_next >= cfg.horizon) {
            path.truncated = true;
            break;
        }
    }
    return path;
}

inline LevyPath sample_levy_path(const LevyTriplet& t, const LevyPathConfig& cfg, Engine& rng) {
    const SimulatedJumps jumps(t, cfg.small_jump_cutoff);
    return sample_levy_path(t, jumps, cfg, rng);
}

/// I on the grid of a path.
struct TimeChange {
    std::vector<double> values;

    /// I at the end of the generated range; the saturation value when the path is killed.
    double saturation() const { return values.back(); }
};

/// I(s_{i+1}) = I(s_i) + ∫ exp(ξ) over the cell, with ξ linear between ξ(s_i)
/// and ξ(s_{i+1}-). Jumps enter the integrand from their time onward.
inline TimeChange exponential_functional(const LevyPath& path) {
    if (path.times.empty()) throw PreconditionError("exponential_functional: empty path");
    TimeChange tc;
    tc.values.reserve(path.times.size());
    tc.values.push_back(0.0);
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double xi = path.values[i];
        double add = 0.0;
        if (std::isfinite(xi)) {
            const double h = path.times[i + 1] - path.times[i];
            add = std::exp(xi) * h * expm1_ratio(path.left_limits[i + 1] - xi);
            if (!std::isfinite(add)) {
                throw NumericOverflow("exponential_functional: exp(xi) overflows at s=" + format_double(path.times[i]));
            }
        }
        tc.values.push_back(tc.values.back() + add);
    }
    return tc;
}

/// τ(t) = inf{s : I(s) >= t} together with ξ(τ(t)).
struct TimeChangePoint {
    double tau;
    double xi;
};

/// Inverts I at `t`; std::nullopt when t exceeds the largest I on the path (saturation).
inline std::optional<TimeChangePoint> locate_time_change(const LevyPath& path, const TimeChange& tc, double t) {
    if (!(t >= 0.0)) throw PreconditionError("time_change: t must be >= 0");
    if (t == 0.0) return TimeChangePoint{0.0, path.values.front()};
    if (t > tc.values.back()) return std::nullopt;
    const auto it = std::lower_bound(tc.values.begin(), tc.values.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - tc.values.begin());  // I[j] >= t > I[j-1]
    const std::size_t i = j - 1;
    if (t == tc.values[j]) return TimeChangePoint{path.times[j], path.values[j]};
    const double xi = path.values[i];
    const double h = path.times[j] - path.times[i];
    const double b = path.left_limits[j] - xi;
    const double gap = (t - tc.values[i]) / std::exp(xi);  // ∫_0^x e^{b r/h} dr = gap
    double x;
    if (std::abs(b) < 1e-12) {
        x = gap;
    } else {
        x = h / b * std::log1p(std::max(b * gap / h, -1.0 + 1e-16));
    }
    x = std::clamp(x, 0.0, h);
    return TimeChangePoint{path.times[i] + x, xi + b * x / h};
}

inline std::optional<double> time_change(const LevyPath& path, const TimeChange& tc, double t) {
    const auto p = locate_time_change(path, tc, t);
    if (!p) return std::nullopt;
    return p->tau;
}

struct Provenance {
    std::string scheme;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    std::string config_digest;
};

/// Values of Z on a set of output times.
struct SimPath {
    std::vector<double> times;
    std::vector<double> values;
    /// T₀, +inf when 0 was not reached.
    double absorption_time = kInf;
    /// The path is unusable (state cap, exhausted horizon); `diagnostic` says why.
    bool aborted = false;
    std::string diagnostic;
    Provenance provenance;
};

/// Z(t) = z exp(ξ(τ(t/z))) at each output time.
///
/// When I saturates before t/z, Z is absorbed at 0 from T₀ = z I(ζ) on. If the
/// path merely ran out of horizon, that is absorption only when
/// `truncation_is_absorption` (ξ drifts to -inf); otherwise the path is aborted.
inline SimPath lamperti_path(double z, const LevyPath& path, const TimeChange& tc, const std::vector<double>& output_times,
                             bool truncation_is_absorption = false) {
    if (!(z > 0.0)) {
        throw PreconditionError("lamperti_path: z must be > 0 (the time change needs a positive start); "
                                "use the SDE scheme for z = 0");
    }
    SimPath out;
    out.times = output_times;
    out.values.reserve(output_times.size());
    double prev = -kInf;
    for (double t : output_times) {
        if (!(t >= prev)) throw PreconditionError("lamperti_path: output times must be ascending");
        prev = t;
        const auto p = locate_time_change(path, tc, t / z);
        if (p && std::isfinite(p->xi)) {
            out.values.push_back(z * std::exp(p->xi));
            continue;
        }
        if (!path.killed() && path.truncated && !truncation_is_absorption) {
            out.aborted = true;
            out.diagnostic = "xi-horizon exhausted before t/z = " + format_double(t / z) +
                             " (I reached " + format_double(tc.saturation()) + ")";
        }
        out.absorption_time = std::min(out.absorption_time, z * tc.saturation());
        out.values.push_back(0.0);
    }
    return out;
}

/// One Lamperti path on `output_times`, generating ξ only as far as needed.
inline SimPath simulate_lamperti_path(double z, const LevyTriplet& t, const SimulatedJumps& jumps, LevyPathConfig cfg,
                                      const std::vector<double>& output_times, bool truncation_is_absorption,
                                      Engine& rng) {
    if (!(z > 0.0)) {
        throw PreconditionError("Lamperti scheme requires z > 0; use the SDE scheme for z = 0");
    }
    const double t_max = output_times.empty() ? 0.0 : output_times.back();
    cfg.stop_functional = t_max / z;
    const LevyPath path = sample_levy_path(t, jumps, cfg, rng);
    const TimeChange tc = exponential_functional(path);
    SimPath sp = lamperti_path(z, path, tc, output_times, truncation_is_absorption);
    sp.provenance.scheme = kLampertiScheme;
    return sp;
}

}  // namespace pssmp
