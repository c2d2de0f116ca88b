#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pssmp/errors.hpp"
#include "pssmp/lamperti_sim.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/numeric.hpp"
#include "pssmp/rng.hpp"
#include "pssmp/simulated_jumps.hpp"

namespace pssmp {

inline constexpr const char* kSdeScheme = "sde-euler-thinning-v1";

/// g(x, r, u) = 1{rx <= 1} x (e^u - 1).
inline double kernel_g(double x, double r, double u) { return r * x <= 1.0 ? x * std::expm1(u) : 0.0; }

/// h(x, r) = -1{rx <= 1} x.
inline double kernel_h(double x, double r) { return r * x <= 1.0 ? -x : 0.0; }

/// What a killing event does to the path.
enum class KillPolicy {
    /// Z is set to 0 and stays there (0 is a trap).
    absorb,
    /// Z is set to 0 and the SDE keeps running; it leaves 0 with drift Ψ(1).
    restart,
};

struct SdeConfig {
    double dt = 1e-3;
    /// ε for density measures.
    double small_jump_cutoff = 1e-3;
    /// A path whose state exceeds this is aborted.
    double state_cap = 1e8;
    /// Sub-step so that (total event rate) * step <= this.
    double max_rate_dt = 0.1;
    /// Sub-steps allowed within one dt before the path is aborted.
    std::int64_t max_substeps = 1'000'000;
    KillPolicy kill_policy = KillPolicy::absorb;
};

inline void check_config(const SdeConfig& c) {
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw PreconditionError("SdeConfig: dt must be > 0");
    if (!(c.state_cap > 0.0)) throw PreconditionError("SdeConfig: state_cap must be > 0");
    if (!(c.max_rate_dt > 0.0)) throw PreconditionError("SdeConfig: max_rate_dt must be > 0");
    if (!(c.small_jump_cutoff > 0.0)) throw PreconditionError("SdeConfig: small_jump_cutoff must be > 0");
}

/// Model data the stepper reads: Ψ(1), the sampled jumps and the effective diffusion.
class SdeModel {
public:
    SdeModel(const LaplaceExponent& psi, double cutoff)
        : psi_(psi), jumps_(psi.triplet(), cutoff, psi.options()), psi1_(psi.at(1)) {
        sigma_eff_ = std::sqrt(psi.triplet().sigma2 + jumps_.small_expm1_sq());
    }

    const LaplaceExponent& psi() const noexcept { return psi_; }
    const LevyTriplet& triplet() const noexcept { return psi_.triplet(); }
    const SimulatedJumps& jumps() const noexcept { return jumps_; }
    double psi1() const noexcept { return psi1_; }
    /// √(σ² + ∫_{-ε}^0 (e^u-1)² Π(du)).
    double sigma_eff() const noexcept { return sigma_eff_; }
    double kill_rate() const noexcept { return psi_.triplet().kill_rate; }

private:
    LaplaceExponent psi_;
    SimulatedJumps jumps_;
    double psi1_;
    double sigma_eff_ = 0.0;
};

struct EffectiveRates {
    double jump_rate_total = 0.0;
    std::vector<double> atom_rates;
    double kill_rate = 0.0;
    /// -∫(e^u - 1)Π(du) + q for x > 0, 0 at x = 0.
    double compensator_drift = 0.0;
    double total_drift = 0.0;
};

/// Rates induced by the indicator 1{rx <= 1}: its r-section has length 1/x.
inline EffectiveRates effective_rates(double x, const SdeModel& model) {
    if (!(x >= 0.0)) throw PreconditionError("effective_rates: state must be >= 0");
    EffectiveRates r;
    const LevyTriplet& t = model.triplet();
    if (t.jumps.is_atomic()) r.atom_rates.assign(t.jumps.atom_list().size(), 0.0);
    if (x > 0.0) {
        r.jump_rate_total = model.jumps().rate() / x;
        if (t.jumps.is_atomic()) {
            std::size_t i = 0;
            for (const Atom& a : t.jumps.atom_list()) r.atom_rates[i++] = a.mass / x;
        }
        r.kill_rate = t.kill_rate / x;
        r.compensator_drift = -model.jumps().expm1_moment(1) + t.kill_rate;
    }
    r.total_drift = model.psi1() + r.compensator_drift;
    return r;
}

enum class EventKind { none, jump, kill };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::none: return "none";
        case EventKind::jump: return "jump";
        case EventKind::kill: return "kill";
    }
    return "?";
}

/// One (sub-)step of the scheme, enough to recompute every martingale increment.
struct SdeStepRecord {
    double time;  // start of the step
    double dt;
    double state_before;
    double brownian;  // ΔB
    double drift;
    double state_continuous;  // after drift + diffusion, clamped at 0
    bool clamped;
    EventKind event;
    double jump_size;
    double state_after;
};

struct SdeEventLog {
    std::vector<SdeStepRecord> steps;
    double sigma_eff = 0.0;

    std::size_t clamp_count() const {
        return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const auto& s) { return s.clamped; }));
    }
};

/// Mutable state carried between steps.
struct SdeState {
    double x = 0.0;
    double time = 0.0;
    /// Hazard accumulated toward the next event, and the Exp(1) level that fires it.
    double hazard = 0.0;
    double threshold = 0.0;
    bool frozen = false;
    bool aborted = false;
    std::string diagnostic;
    double first_zero = kInf;
    std::int64_t clamps = 0;
};

inline SdeState initial_sde_state(double z, Engine& rng) {
    if (!(z >= 0.0) || !std::isfinite(z)) throw PreconditionError("SDE: initial state must be finite and >= 0");
    SdeState s;
    s.x = z;
    s.threshold = std::exponential_distribution<double>(1.0)(rng);
    if (z == 0.0) s.first_zero = 0.0;
    return s;
}

/// Advances the state by dt.
///
/// Euler step Z <- max(0, Z + drift h + σ_eff √Z ΔB), then the event clock:
/// the hazard ∫ (Π̄ + q)/Z ds, accumulated with the pre-step state, fires an
/// event when it crosses its Exp(1) level. The step is split whenever
/// rate * h would exceed max_rate_dt, so at most one event happens per
/// sub-step. A Π-jump multiplies the state by e^u; killing sets it to 0.
inline void sde_step(SdeState& st, double dt, const SdeModel& model, const SdeConfig& cfg, Engine& rng,
                     SdeEventLog* log = nullptr) {
    if (st.frozen || st.aborted) {
        st.time += dt;
        return;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> unit_exp(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double event_mass = model.jumps().rate() + model.kill_rate();
    const double sigma = model.sigma_eff();
    const double comp = -model.jumps().expm1_moment(1) + model.kill_rate();
    double remaining = dt;
    std::int64_t substeps = 0;
    while (remaining > 0.0) {
        const double x = st.x;
        const double rate = x > 0.0 ? event_mass / x : 0.0;
        double h = remaining;
        if (rate * h > cfg.max_rate_dt) {
            h = cfg.max_rate_dt / rate;
            if (++substeps > cfg.max_substeps) {
                st.aborted = true;
                st.diagnostic = "sub-step budget exhausted near t=" + format_double(st.time) + " (state " +
                                format_double(x) + ")";
                return;
            }
        }
        const double drift = x > 0.0 ? model.psi1() + comp : model.psi1();
        const double db = sigma > 0.0 ? std::sqrt(h) * normal(rng) : 0.0;
        double xc = x + drift * h + sigma * std::sqrt(x) * db;
        const bool clamped = xc < 0.0;
        if (clamped) {
            xc = 0.0;
            ++st.clamps;
        }
        EventKind ev = EventKind::none;
        double u = 0.0;
        double next = xc;
        if (rate > 0.0) {
            st.hazard += rate * h;
            if (st.hazard >= st.threshold) {
                st.hazard = 0.0;
                st.threshold = unit_exp(rng);
                if (unif(rng) * event_mass < model.jumps().rate()) {
                    ev = EventKind::jump;
                    u = model.jumps().sample(rng);
                    next = xc * std::exp(u);
                } else {
                    ev = EventKind::kill;
                    next = 0.0;
                }
            }
        }
        if (log) log->steps.push_back({st.time, h, x, db, drift, xc, clamped, ev, u, next});
        st.x = next;
        st.time += h;
        if (h == remaining) {
            remaining = 0.0;
        } else {
            remaining -= h;
        }
        if (next == 0.0 && !std::isfinite(st.first_zero)) st.first_zero = st.time;
        if (ev == EventKind::kill && cfg.kill_policy == KillPolicy::absorb) {
            st.frozen = true;
            st.time += remaining;
            return;
        }
        if (next > cfg.state_cap) {
            st.aborted = true;
            st.diagnostic = "state exceeded cap " + format_double(cfg.state_cap) + " at t=" + format_double(st.time);
            return;
        }
    }
}

/// Simulates Z from z to the last output time, recording Z at each output time.
/// Steps are dt, shortened where needed so output times fall on step ends.
inline SimPath simulate_sde_path(double z, const SdeModel& model, const SdeConfig& cfg,
                                 const std::vector<double>& output_times, Engine& rng, SdeEventLog* log = nullptr) {
    check_config(cfg);
    require_a2(model.psi());
    SdeState st = initial_sde_state(z, rng);
    if (log) log->sigma_eff = model.sigma_eff();
    SimPath out;
    out.times = output_times;
    out.provenance.scheme = kSdeScheme;
    double t = 0.0;
    for (double target : output_times) {
        if (!(target >= t)) throw PreconditionError("simulate_sde_path: output times must be ascending and >= 0");
        const double span = target - t;
        if (span > 0.0) {
            const auto n = static_cast<std::int64_t>(std::ceil(span / cfg.dt - 1e-9));
            const double h = span / static_cast<double>(n);
            for (std::int64_t i = 0; i < n && !st.aborted; ++i) sde_step(st, h, model, cfg, rng, log);
            t = target;
        }
        if (st.aborted) {
            out.aborted = true;
            out.diagnostic = st.diagnostic;
        }
        out.values.push_back(st.aborted ? 0.0 : st.x);
    }
    out.absorption_time = st.first_zero;
    return out;
}

/// M⁽¹⁾, M⁽²⁾, M⁽³⁾ of the n-th power along a logged path, with the identity residual
/// Z_t^n - z^n - Ψ(n) ∫ Z_s^{n-1} ds - Σ M⁽ⁱ⁾.
struct MartingaleSeries {
    std::vector<double> times;
    std::vector<double> m1;
    std::vector<double> m2;
    std::vector<double> m3;
    std::vector<double> drift_integral;
    std::vector<double> residual;
};

/// Rebuilds the components from the log:
///  M⁽¹⁾ += n σ Z^{n-1/2} ΔB,
///  M⁽²⁾ += (e^{nu}-1) Z₋ⁿ at Π-jumps  -  ∫(e^{nu}-1)Π(du) · Z^{n-1} ds,
///  M⁽³⁾ += -Z₋ⁿ at killings  +  q · Z^{n-1} ds,
/// where the compensator weights Z^{n-1} vanish at Z = 0 (the kernels do).
inline MartingaleSeries martingale_components(const SdeEventLog& log, double z, int n, const SdeModel& model) {
    if (n < 0) throw PreconditionError("martingale_components: n must be >= 0");
    MartingaleSeries s;
    s.times.push_back(0.0);
    s.m1.push_back(0.0);
    s.m2.push_back(0.0);
    s.m3.push_back(0.0);
    s.drift_integral.push_back(0.0);
    s.residual.push_back(0.0);
    if (n == 0) {
        for (const auto& r : log.steps) {
            s.times.push_back(r.time + r.dt);
            s.m1.push_back(0.0);
            s.m2.push_back(0.0);
            s.m3.push_back(0.0);
            s.drift_integral.push_back(0.0);
            s.residual.push_back(0.0);
        }
        return s;
    }
    const double psin = model.psi().at(n);
    const double cn = model.jumps().expm1_moment(n);
    const double q = model.kill_rate();
    const double zn = ipow(z, n);
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, integral = 0.0;
    for (const auto& r : log.steps) {
        const double x = r.state_before;
        const double drift_weight = ipow(x, n - 1);
        const double comp_weight = x > 0.0 ? drift_weight : 0.0;
        m1 += n * log.sigma_eff * std::pow(x, n - 0.5) * r.brownian;
        integral += drift_weight * r.dt;
        m2 -= cn * comp_weight * r.dt;
        m3 += q * comp_weight * r.dt;
        if (r.event == EventKind::jump) m2 += std::expm1(n * r.jump_size) * ipow(r.state_continuous, n);
        if (r.event == EventKind::kill) m3 -= ipow(r.state_continuous, n);
        s.times.push_back(r.time + r.dt);
        s.m1.push_back(m1);
        s.m2.push_back(m2);
        s.m3.push_back(m3);
        s.drift_integral.push_back(integral);
        s.residual.push_back(ipow(r.state_after, n) - zn - psin * integral - m1 - m2 - m3);
    }
    return s;
}

}  // namespace pssmp
