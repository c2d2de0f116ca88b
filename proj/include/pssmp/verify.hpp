#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pssmp/errors.hpp"
#include "pssmp/lamperti_sim.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/model_io.hpp"
#include "pssmp/moments.hpp"
#include "pssmp/rng.hpp"
#include "pssmp/sde_sim.hpp"

namespace pssmp {

enum class Scheme { lamperti, sde };

inline const char* to_string(Scheme s) { return s == Scheme::lamperti ? "lamperti" : "sde"; }

inline const char* scheme_id(Scheme s) { return s == Scheme::lamperti ? kLampertiScheme : kSdeScheme; }

/// Everything an ensemble needs besides the model, z, times and seed.
struct SimulationConfig {
    Scheme scheme = Scheme::sde;
    LevyPathConfig levy;
    SdeConfig sde;
    unsigned workers = 1;
    /// Largest aborted fraction tolerated before the ensemble is invalid.
    double max_abort_fraction = 0.01;

    double dt() const { return scheme == Scheme::lamperti ? levy.dt : sde.dt; }
};

/// Canonical text of the parts of a config that influence results (workers do not).
inline std::string config_text(const SimulationConfig& c) {
    std::string s = std::string("scheme=") + scheme_id(c.scheme);
    if (c.scheme == Scheme::lamperti) {
        s += ";dt=" + format_double(c.levy.dt) + ";xi_horizon=" + format_double(c.levy.horizon) +
             ";cutoff=" + format_double(c.levy.small_jump_cutoff);
    } else {
        s += ";dt=" + format_double(c.sde.dt) + ";cutoff=" + format_double(c.sde.small_jump_cutoff) +
             ";state_cap=" + format_double(c.sde.state_cap) + ";max_rate_dt=" + format_double(c.sde.max_rate_dt) +
             ";max_substeps=" + std::to_string(c.sde.max_substeps) +
             ";kill_policy=" + (c.sde.kill_policy == KillPolicy::absorb ? "absorb" : "restart");
    }
    return s;
}

struct EnsembleMeta {
    std::string scheme;
    double dt = 0.0;
    long paths = 0;
    std::uint64_t seed = 0;
    long aborted = 0;
    double aborted_fraction = 0.0;
    /// First abort diagnostic, empty when nothing aborted.
    std::string diagnostic;
    std::string config_digest;
    std::string model_digest;
};

/// Z at each output time for every path, indexed by path.
struct Ensemble {
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    std::vector<double> absorption_times;
    std::vector<char> aborted;
    EnsembleMeta meta;

    /// Paths that count toward estimates.
    std::size_t usable() const { return static_cast<std::size_t>(meta.paths - meta.aborted); }
};

/// Simulates `n_paths` paths; path i uses the stream path_engine(seed, i).
/// Results are gathered by index, so they do not depend on `cfg.workers`.
inline Ensemble run_ensemble(const LaplaceExponent& psi, double z, const std::vector<double>& times, long n_paths,
                             const SimulationConfig& cfg, std::uint64_t seed) {
    require_a2(psi);
    if (n_paths < 1) throw PreconditionError("ensemble: n_paths must be >= 1");
    if (!(z >= 0.0) || !std::isfinite(z)) throw PreconditionError("ensemble: z must be finite and >= 0");
    if (cfg.scheme == Scheme::lamperti && !(z > 0.0)) {
        throw PreconditionError("scheme=lamperti requires z > 0 (the Lamperti time change cannot start at 0); "
                                "use scheme=sde for z = 0");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0) || (i > 0 && !(times[i] > times[i - 1]))) {
            throw PreconditionError("ensemble: times must be >= 0 and strictly increasing");
        }
    }

    Ensemble e;
    e.times = times;
    const auto n = static_cast<std::size_t>(n_paths);
    e.values.resize(n);
    e.absorption_times.resize(n);
    e.aborted.resize(n);
    std::vector<std::string> diagnostics(n);

    if (cfg.scheme == Scheme::lamperti) {
        check_config(cfg.levy);
        const SimulatedJumps jumps(psi.triplet(), cfg.levy.small_jump_cutoff, psi.options());
        const bool hits_zero = classify_regime(psi).hits_zero;
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            Engine rng = path_engine(seed, i);
            SimPath p = simulate_lamperti_path(z, psi.triplet(), jumps, cfg.levy, times, hits_zero, rng);
            e.values[i] = std::move(p.values);
            e.absorption_times[i] = p.absorption_time;
            e.aborted[i] = p.aborted;
            diagnostics[i] = std::move(p.diagnostic);
        });
    } else {
        check_config(cfg.sde);
        const SdeModel model(psi, cfg.sde.small_jump_cutoff);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            Engine rng = path_engine(seed, i);
            SimPath p = simulate_sde_path(z, model, cfg.sde, times, rng);
            e.values[i] = std::move(p.values);
            e.absorption_times[i] = p.absorption_time;
            e.aborted[i] = p.aborted;
            diagnostics[i] = std::move(p.diagnostic);
        });
    }

    e.meta.scheme = scheme_id(cfg.scheme);
    e.meta.dt = cfg.dt();
    e.meta.paths = n_paths;
    e.meta.seed = seed;
    e.meta.config_digest = digest(config_text(cfg));
    e.meta.model_digest = digest(canonical_text(psi.triplet()));
    for (std::size_t i = 0; i < n; ++i) {
        if (!e.aborted[i]) continue;
        if (e.meta.aborted == 0) e.meta.diagnostic = "path " + std::to_string(i) + ": " + diagnostics[i];
        ++e.meta.aborted;
    }
    e.meta.aborted_fraction = static_cast<double>(e.meta.aborted) / static_cast<double>(n_paths);
    if (e.meta.aborted_fraction > cfg.max_abort_fraction) {
        throw InvalidEnsemble("ensemble invalid: " + std::to_string(e.meta.aborted) + " of " +
                              std::to_string(n_paths) + " paths aborted (limit " +
                              format_double(cfg.max_abort_fraction) + "); " + e.meta.diagnostic);
    }
    return e;
}

struct McEstimate {
    double value = 0.0;
    /// Sample standard deviation / √paths; NaN for a single path.
    double standard_error = 0.0;
    long n_paths = 0;
};

/// Sample mean and standard error, summed in the given order. Identical
/// samples give that sample and SE exactly 0.
inline McEstimate sample_mean(const std::vector<double>& xs) {
    McEstimate m;
    m.n_paths = static_cast<long>(xs.size());
    if (xs.empty()) throw PreconditionError("sample_mean: no samples");
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
        m.value = xs.front();
        m.standard_error = xs.size() > 1 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    double sum = 0.0;
    for (double x : xs) sum += x;
    m.value = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) {
        m.standard_error = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - m.value) * (x - m.value);
    m.standard_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    return m;
}

/// Samples of Z_t^n over the usable paths of an ensemble.
inline std::vector<double> power_samples(const Ensemble& e, std::size_t time_index, int n) {
    std::vector<double> xs;
    xs.reserve(e.usable());
    for (std::size_t i = 0; i < e.values.size(); ++i) {
        if (!e.aborted[i]) xs.push_back(ipow(e.values[i][time_index], n));
    }
    return xs;
}

struct MomentEstimates {
    MomentTable table;
    EnsembleMeta meta;
};

/// Sample means of Z_t^n, n = 1..n_max, at every requested time.
inline MomentEstimates moments_from_ensemble(const Ensemble& e, double z, int n_max) {
    if (n_max < 1) throw PreconditionError("estimate_moments: n_max must be >= 1");
    MomentEstimates out;
    out.meta = e.meta;
    for (int n = 1; n <= n_max; ++n) out.table.orders.push_back(n);
    out.table.times = e.times;
    out.table.initial_states = {z};
    for (std::size_t ti = 0; ti < e.times.size(); ++ti) {
        for (int n = 1; n <= n_max; ++n) {
            const McEstimate m = sample_mean(power_samples(e, ti, n));
            out.table.cells.push_back(
                MomentCell{n, e.times[ti], z, m.value, CellKind::estimated, m.standard_error, m.n_paths});
        }
    }
    return out;
}

inline MomentEstimates estimate_moments(const LaplaceExponent& psi, double z, const std::vector<double>& times,
                                        int n_max, long n_paths, const SimulationConfig& cfg, std::uint64_t seed) {
    return moments_from_ensemble(run_ensemble(psi, z, times, n_paths, cfg, seed), z, n_max);
}

enum class Verdict { pass, fail, hard_fail, suppressed };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::hard_fail: return "hard_fail";
        case Verdict::suppressed: return "suppressed";
    }
    return "?";
}

/// Exit codes shared by the verify suites and the CLI.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInvalid = 2;

/// With SE = 0 an estimate must reproduce the exact value to this relative accuracy.
inline constexpr double kDeterministicTolerance = 1e-6;

struct ComparisonRow {
    int n = 1;
    double t = 0.0;
    double z = 0.0;
    double exact = 0.0;
    double estimate = 0.0;
    double standard_error = 0.0;
    double z_score = 0.0;
    Verdict verdict = Verdict::pass;
};

struct ComparisonReport {
    double k = 4.0;
    std::vector<ComparisonRow> rows;
    EnsembleMeta meta;
    /// A single path: no standard error, no verdicts.
    bool degenerate = false;
    /// Largest relative gap between closed form and recursion over the exact column.
    double recursion_gap = 0.0;

    int exit_code() const {
        if (degenerate) return kExitInvalid;
        const bool bad = std::any_of(rows.begin(), rows.end(), [](const ComparisonRow& r) {
            return r.verdict == Verdict::fail || r.verdict == Verdict::hard_fail;
        });
        return bad ? kExitFail : kExitPass;
    }
};

/// Closed form and recursion must agree on the exact column before it is used.
inline constexpr double kRecursionTolerance = 1e-10;

/// Verdict of one estimate against its exact value.
inline ComparisonRow compare_cell(const MomentCell& c, double exact, double k) {
    ComparisonRow r{c.n, c.t, c.z, exact, c.value, c.standard_error, 0.0, Verdict::pass};
    if (std::isnan(c.standard_error)) {
        r.z_score = std::numeric_limits<double>::quiet_NaN();
        r.verdict = Verdict::suppressed;
    } else if (c.standard_error == 0.0) {
        const bool same = std::abs(c.value - exact) <= kDeterministicTolerance * (1.0 + std::abs(exact));
        r.z_score = same ? 0.0 : std::copysign(kInf, c.value - exact);
        r.verdict = same ? Verdict::pass : Verdict::hard_fail;
    } else {
        r.z_score = (c.value - exact) / c.standard_error;
        r.verdict = std::abs(r.z_score) <= k ? Verdict::pass : Verdict::fail;
    }
    return r;
}

/// Fills the exact column from the closed form, re-checks it against the
/// recursion, and scores every estimated cell.
inline ComparisonReport compare_to_formula(const MomentEstimates& est, const LaplaceExponent& psi, double k = 4.0) {
    if (!(k > 0.0)) throw PreconditionError("compare_to_formula: k must be > 0");
    ComparisonReport rep;
    rep.k = k;
    rep.meta = est.meta;
    for (const MomentCell& c : est.table.cells) {
        const MomentQuery q{c.z, c.t, c.n};
        const double exact = entire_moment(psi, q);
        const double rec = moment_recursion(psi, q);
        const double gap = std::abs(exact - rec) / std::max(1.0, std::abs(exact));
        rep.recursion_gap = std::max(rep.recursion_gap, gap);
        if (!(gap <= kRecursionTolerance)) {
            throw NumericOverflow("compare_to_formula: closed form and recursion disagree at n=" +
                                  std::to_string(c.n) + ", t=" + format_double(c.t) + " (relative gap " +
                                  format_double(gap) + ")");
        }
        ComparisonRow row = compare_cell(c, exact, k);
        if (row.verdict == Verdict::suppressed) rep.degenerate = true;
        rep.rows.push_back(row);
    }
    return rep;
}

/// max_n |c^{-n} E_z(Z_{ct}^n) - E_{z/c}(Z_t^n)| / (1 + |E_{z/c}(Z_t^n)|) from the closed form.
inline double scaling_check(const LaplaceExponent& psi, double z, double t, double c, int n_max) {
    require_a2(psi);
    if (!(c > 0.0) || !std::isfinite(c)) throw PreconditionError("scaling_check: c must be > 0");
    if (n_max < 1) throw PreconditionError("scaling_check: n_max must be >= 1");
    double worst = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const double lhs = entire_moment(psi, {z, c * t, n}) / std::pow(c, n);
        const double rhs = entire_moment(psi, {z / c, t, n});
        worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }
    return worst;
}

struct ComponentStat {
    std::string name;
    McEstimate estimate;
    /// mean / SE; 0 when the component vanishes identically, NaN when undefined.
    double z_score = 0.0;
    bool identically_zero = false;
};

struct MartingaleReport {
    int n = 2;
    double z = 0.0;
    double horizon = 0.0;
    double k = 4.0;
    std::vector<ComponentStat> components;  // M1, M2, M3
    /// Identity residual at the horizon: signed ensemble mean and mean absolute value.
    McEstimate residual;
    McEstimate abs_residual;
    double max_abs_residual = 0.0;
    long clamps = 0;
    EnsembleMeta meta;

    int exit_code() const {
        for (const ComponentStat& c : components) {
            if (std::isnan(c.z_score)) return kExitInvalid;
            if (!(std::abs(c.z_score) <= k)) return kExitFail;
        }
        return kExitPass;
    }
};

inline ComponentStat component_stat(std::string name, const std::vector<double>& xs) {
    ComponentStat s;
    s.name = std::move(name);
    s.estimate = sample_mean(xs);
    s.identically_zero = std::all_of(xs.begin(), xs.end(), [](double x) { return x == 0.0; });
    if (s.identically_zero) {
        s.z_score = 0.0;
    } else if (std::isnan(s.estimate.standard_error) || s.estimate.standard_error == 0.0) {
        s.z_score = std::numeric_limits<double>::quiet_NaN();
    } else {
        s.z_score = s.estimate.value / s.estimate.standard_error;
    }
    return s;
}

/// Simulates SDE paths with event logs and tests E[M⁽ⁱ⁾_horizon] = 0 for each component.
inline MartingaleReport martingale_zero_mean_test(const LaplaceExponent& psi, double z, int n, double horizon,
                                                  long n_paths, SimulationConfig cfg, std::uint64_t seed,
                                                  double k = 4.0) {
    require_a2(psi);
    if (n < 0) throw PreconditionError("martingale test: n must be >= 0");
    if (!(horizon > 0.0)) throw PreconditionError("martingale test: horizon must be > 0");
    if (n_paths < 1) throw PreconditionError("martingale test: n_paths must be >= 1");
    cfg.scheme = Scheme::sde;
    check_config(cfg.sde);
    const SdeModel model(psi, cfg.sde.small_jump_cutoff);
    const auto count = static_cast<std::size_t>(n_paths);
    struct PathResult {
        double m1, m2, m3, residual, max_abs_residual;
        long clamps;
        bool aborted;
        std::string diagnostic;
    };
    std::vector<PathResult> results(count);
    parallel_for(count, cfg.workers, [&](std::size_t i) {
        Engine rng = path_engine(seed, i);
        SdeEventLog log;
        const SimPath p = simulate_sde_path(z, model, cfg.sde, {horizon}, rng, &log);
        const MartingaleSeries s = martingale_components(log, z, n, model);
        double worst = 0.0;
        for (double r : s.residual) worst = std::max(worst, std::abs(r));
        results[i] = {s.m1.back(), s.m2.back(), s.m3.back(), s.residual.back(), worst,
                      static_cast<long>(log.clamp_count()), p.aborted, p.diagnostic};
    });

    MartingaleReport rep;
    rep.n = n;
    rep.z = z;
    rep.horizon = horizon;
    rep.k = k;
    rep.meta.scheme = kSdeScheme;
    rep.meta.dt = cfg.sde.dt;
    rep.meta.paths = n_paths;
    rep.meta.seed = seed;
    rep.meta.config_digest = digest(config_text(cfg));
    rep.meta.model_digest = digest(canonical_text(psi.triplet()));
    std::vector<double> m1, m2, m3, res, abs_res;
    for (std::size_t i = 0; i < count; ++i) {
        const PathResult& r = results[i];
        if (r.aborted) {
            if (rep.meta.aborted == 0) rep.meta.diagnostic = "path " + std::to_string(i) + ": " + r.diagnostic;
            ++rep.meta.aborted;
            continue;
        }
        m1.push_back(r.m1);
        m2.push_back(r.m2);
        m3.push_back(r.m3);
        res.push_back(r.residual);
        abs_res.push_back(std::abs(r.residual));
        rep.max_abs_residual = std::max(rep.max_abs_residual, r.max_abs_residual);
        rep.clamps += r.clamps;
    }
    rep.meta.aborted_fraction = static_cast<double>(rep.meta.aborted) / static_cast<double>(n_paths);
    if (rep.meta.aborted_fraction > cfg.max_abort_fraction) {
        throw InvalidEnsemble("ensemble invalid: " + std::to_string(rep.meta.aborted) + " of " +
                              std::to_string(n_paths) + " paths aborted; " + rep.meta.diagnostic);
    }
    rep.components.push_back(component_stat("M1", m1));
    rep.components.push_back(component_stat("M2", m2));
    rep.components.push_back(component_stat("M3", m3));
    rep.residual = sample_mean(res);
    rep.abs_residual = sample_mean(abs_res);
    return rep;
}

struct CrossRow {
    int n = 1;
    double t = 0.0;
    McEstimate lamperti;
    McEstimate sde;
    double welch = 0.0;
    Verdict verdict = Verdict::pass;
};

struct CrossReport {
    double z = 0.0;
    double k = 4.0;
    std::vector<CrossRow> rows;
    EnsembleMeta lamperti_meta;
    EnsembleMeta sde_meta;
    bool degenerate = false;

    int exit_code() const {
        if (degenerate) return kExitInvalid;
        const bool bad = std::any_of(rows.begin(), rows.end(), [](const CrossRow& r) {
            return r.verdict == Verdict::fail || r.verdict == Verdict::hard_fail;
        });
        return bad ? kExitFail : kExitPass;
    }
};

/// (a - b) / √(SE_a² + SE_b²); with both SEs zero the values must match.
inline double welch_statistic(const McEstimate& a, const McEstimate& b) {
    const double v = a.standard_error * a.standard_error + b.standard_error * b.standard_error;
    if (std::isnan(v)) return std::numeric_limits<double>::quiet_NaN();
    if (v == 0.0) {
        return std::abs(a.value - b.value) <= kDeterministicTolerance * (1.0 + std::abs(b.value))
                   ? 0.0
                   : std::copysign(kInf, a.value - b.value);
    }
    return (a.value - b.value) / std::sqrt(v);
}

/// Seed of the SDE ensemble in a cross-validation run, so the two ensembles are independent.
inline std::uint64_t companion_seed(std::uint64_t seed) {
    std::uint64_t s = seed ^ 0x5851f42d4c957f2dULL;
    return splitmix64(s);
}

/// Lamperti and SDE ensembles from the same z, compared moment by moment.
inline CrossReport cross_validate(const LaplaceExponent& psi, double z, const std::vector<double>& times, int n_max,
                                  long n_paths, SimulationConfig lamperti_cfg, SimulationConfig sde_cfg,
                                  std::uint64_t seed, double k = 4.0) {
    if (!(z > 0.0)) throw PreconditionError("cross_validate: z must be > 0");
    lamperti_cfg.scheme = Scheme::lamperti;
    sde_cfg.scheme = Scheme::sde;
    const MomentEstimates a = estimate_moments(psi, z, times, n_max, n_paths, lamperti_cfg, seed);
    const MomentEstimates b = estimate_moments(psi, z, times, n_max, n_paths, sde_cfg, companion_seed(seed));
    CrossReport rep;
    rep.z = z;
    rep.k = k;
    rep.lamperti_meta = a.meta;
    rep.sde_meta = b.meta;
    for (std::size_t i = 0; i < a.table.cells.size(); ++i) {
        const MomentCell& ca = a.table.cells[i];
        const MomentCell& cb = b.table.cells[i];
        CrossRow row;
        row.n = ca.n;
        row.t = ca.t;
        row.lamperti = {ca.value, ca.standard_error, ca.paths};
        row.sde = {cb.value, cb.standard_error, cb.paths};
        row.welch = welch_statistic(row.lamperti, row.sde);
        if (std::isnan(row.welch)) {
            row.verdict = Verdict::suppressed;
            rep.degenerate = true;
        } else if (std::isinf(row.welch)) {
            row.verdict = Verdict::hard_fail;
        } else {
            row.verdict = std::abs(row.welch) <= k ? Verdict::pass : Verdict::fail;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace pssmp
