#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pssmp/errors.hpp"
#include "pssmp/numeric.hpp"

namespace pssmp {

/// One point mass of a jump measure: mass at a strictly negative location.
struct Atom {
    double location;
    double mass;
};

enum class ActivityClass { finite, infinite };

/// A Lévy density on (lower, upper) with upper <= 0.
///
/// The function is evaluated only inside the support; outside it the density
/// is taken to be zero. `breakpoints` lists points where the density is not
/// smooth (table nodes), used to align sampling cells.
class JumpDensity {
public:
    using Function = std::function<double(double)>;

    JumpDensity(std::string family, Function density, double lower, double upper, ActivityClass activity,
                std::vector<double> breakpoints = {}, std::string description = {})
        : family_(std::move(family)),
          density_(std::move(density)),
          lower_(lower),
          upper_(upper),
          activity_(activity),
          breakpoints_(std::move(breakpoints)),
          description_(std::move(description)) {}

    double operator()(double u) const {
        if (!(u > lower_ && u < upper_)) return 0.0;
        return density_(u);
    }

    const std::string& family() const noexcept { return family_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    ActivityClass activity() const noexcept { return activity_; }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    /// Canonical parameter text, used in provenance digests.
    const std::string& description() const noexcept { return description_; }

private:
    std::string family_;
    Function density_;
    double lower_;
    double upper_;
    ActivityClass activity_;
    std::vector<double> breakpoints_;
    std::string description_;
};

inline std::string format_double(double v);

/// Exponentially tilted (tempered) stable density c * e^{beta u} |u|^{-1-alpha} on (-inf, 0).
inline JumpDensity exp_tilted_stable(double c, double alpha, double beta) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw InvalidTriplet(InvalidTriplet::Reason::non_positive_mass, "exp_tilted_stable: c must be positive");
    }
    if (!(alpha > 0.0 && alpha < 2.0)) {
        throw InvalidTriplet(InvalidTriplet::Reason::non_integrable, "exp_tilted_stable: alpha must lie in (0, 2)");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw InvalidTriplet(InvalidTriplet::Reason::non_finite, "exp_tilted_stable: beta must be >= 0");
    }
    auto f = [c, alpha, beta](double u) { return c * std::exp(beta * u - (1.0 + alpha) * std::log(-u)); };
    return JumpDensity("exp_tilted_stable", f, -kInf, 0.0, ActivityClass::infinite, {},
                       "exp_tilted_stable(c=" + format_double(c) + ",alpha=" + format_double(alpha) +
                           ",beta=" + format_double(beta) + ")");
}

/// Piecewise-linear density through (u_i, f_i); zero outside [u_0, u_last].
/// Nodes must be strictly increasing and <= 0, values >= 0.
inline JumpDensity tabulated_density(std::vector<double> u, std::vector<double> values) {
    if (u.size() < 2 || u.size() != values.size()) {
        throw InvalidTriplet(InvalidTriplet::Reason::non_finite, "custom_table: need >= 2 nodes and matching values");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!std::isfinite(u[i]) || !std::isfinite(values[i])) {
            throw InvalidTriplet(InvalidTriplet::Reason::non_finite, "custom_table: non-finite node or value");
        }
        if (values[i] < 0.0) {
            throw InvalidTriplet(InvalidTriplet::Reason::non_positive_mass, "custom_table: negative density value");
        }
        if (i > 0 && !(u[i] > u[i - 1])) {
            throw InvalidTriplet(InvalidTriplet::Reason::non_finite, "custom_table: nodes must be strictly increasing");
        }
    }
    if (u.back() > 0.0) {
        throw InvalidTriplet(InvalidTriplet::Reason::positive_support,
                             "custom_table: support violates spectral negativity (node > 0)");
    }
    std::string desc = "custom_table(";
    for (std::size_t i = 0; i < u.size(); ++i) {
        desc += (i ? ";" : "") + format_double(u[i]) + ":" + format_double(values[i]);
    }
    desc += ")";
    const double lower = u.front();
    const double upper = u.back();
    auto f = [u, values](double x) {
        auto it = std::upper_bound(u.begin(), u.end(), x);
        if (it == u.begin() || it == u.end()) return 0.0;
        const std::size_t i = static_cast<std::size_t>(it - u.begin());
        const double w = (x - u[i - 1]) / (u[i] - u[i - 1]);
        return values[i - 1] + w * (values[i] - values[i - 1]);
    };
    return JumpDensity("custom_table", f, lower, upper, ActivityClass::finite, u, desc);
}

/// Lévy measure of a spectrally negative process: finitely many atoms or a density.
class JumpMeasure {
public:
    JumpMeasure() = default;

    static JumpMeasure none() { return JumpMeasure{}; }
    static JumpMeasure atoms(std::vector<Atom> a) {
        JumpMeasure m;
        m.rep_ = std::move(a);
        return m;
    }
    static JumpMeasure density(JumpDensity d) {
        JumpMeasure m;
        m.rep_ = std::move(d);
        return m;
    }

    bool is_atomic() const noexcept { return std::holds_alternative<std::vector<Atom>>(rep_); }
    bool empty() const noexcept { return is_atomic() && std::get<std::vector<Atom>>(rep_).empty(); }
    std::span<const Atom> atom_list() const { return std::get<std::vector<Atom>>(rep_); }
    const JumpDensity& density_fn() const { return std::get<JumpDensity>(rep_); }

    /// ∫ f(u) Π(du) over [lo, hi). Atoms are summed exactly; densities use quadrature.
    template <class F>
    QuadResult integrate(const F& f, double lo = -kInf, double hi = 0.0, const QuadratureOptions& opts = {}) const {
        if (is_atomic()) {
            QuadResult r;
            for (const Atom& a : atom_list()) {
                if (a.location >= lo && a.location < hi) r.value += a.mass * f(a.location);
            }
            return r;
        }
        const JumpDensity& d = density_fn();
        const double a = std::max(lo, d.lower());
        const double b = std::min(hi, d.upper());
        if (!(a < b)) return QuadResult{};
        return integrate_negative_axis([&](double u) { return f(u) * d(u); }, a, b, opts);
    }

    /// Appends an atom; densities cannot be mixed with atoms.
    JumpMeasure with_atom(Atom a) const {
        std::vector<Atom> list(atom_list().begin(), atom_list().end());
        list.push_back(a);
        return atoms(std::move(list));
    }

private:
    std::variant<std::vector<Atom>, JumpDensity> rep_{std::vector<Atom>{}};
};

/// Characteristics (gamma, sigma^2, Pi) plus killing rate q of a spectrally negative Lévy process.
struct LevyTriplet {
    double gamma = 0.0;
    double sigma2 = 0.0;
    JumpMeasure jumps;
    double kill_rate = 0.0;
};

struct Validation {
    bool ok = true;
    std::optional<InvalidTriplet::Reason> reason;
    std::string message;

    explicit operator bool() const noexcept { return ok; }
};

namespace detail {

inline Validation fail(InvalidTriplet::Reason r, std::string msg) { return Validation{false, r, std::move(msg)}; }

}  // namespace detail

/// Checks every structural invariant; for densities also runs the ∫min(1,u²)Π(du) witness.
inline Validation validate_triplet(const LevyTriplet& t, const QuadratureOptions& opts = {}) {
    using R = InvalidTriplet::Reason;
    if (!std::isfinite(t.gamma) || !std::isfinite(t.sigma2) || !std::isfinite(t.kill_rate)) {
        return detail::fail(R::non_finite, "gamma, sigma2 and q must be finite");
    }
    if (t.sigma2 < 0.0) return detail::fail(R::negative_sigma2, "sigma2 must be >= 0");
    if (t.kill_rate < 0.0) return detail::fail(R::negative_kill_rate, "killing rate q must be >= 0");
    if (t.jumps.is_atomic()) {
        std::size_t i = 0;
        for (const Atom& a : t.jumps.atom_list()) {
            if (!std::isfinite(a.location) || !std::isfinite(a.mass)) {
                return detail::fail(R::non_finite, "atom " + std::to_string(i) + " is not finite");
            }
            if (!(a.location < 0.0)) {
                return detail::fail(R::positive_support, "atom " + std::to_string(i) +
                                                             " at u >= 0: support violates spectral negativity");
            }
            if (!(a.mass > 0.0)) {
                return detail::fail(R::non_positive_mass, "atom " + std::to_string(i) + " has non-positive mass");
            }
            ++i;
        }
        return {};
    }
    const JumpDensity& d = t.jumps.density_fn();
    if (d.upper() > 0.0) return detail::fail(R::positive_support, "density support violates spectral negativity");
    const auto witness = t.jumps.integrate([](double u) { return std::min(1.0, u * u); }, -kInf, 0.0, opts);
    if (!witness.converged) {
        return detail::fail(R::non_integrable, "integral of min(1,u^2) against the jump density diverges");
    }
    if (d.activity() == ActivityClass::finite) {
        const auto mass = t.jumps.integrate([](double) { return 1.0; }, -kInf, 0.0, opts);
        if (!mass.converged) {
            return detail::fail(R::non_integrable, "density declared finite-activity but its total mass diverges");
        }
    }
    return {};
}

inline void require_valid(const LevyTriplet& t, const QuadratureOptions& opts = {}) {
    const Validation v = validate_triplet(t, opts);
    if (!v) throw InvalidTriplet(*v.reason, v.message);
}

/// Jump part of Ψ: ∫ (e^{λu} - 1 - λu 1{|u|<=1}) Π(du).
inline QuadResult jump_exponent(const JumpMeasure& m, double lambda, const QuadratureOptions& opts = {}) {
    return m.integrate(
        [lambda](double u) { return u >= -1.0 ? expm1_minus_x(lambda * u) : std::expm1(lambda * u); }, -kInf, 0.0,
        opts);
}

/// Ψ(λ) = γλ + σ²λ²/2 + ∫(e^{λu} − 1 − λu1{|u|≤1})Π(du) − q, without caching or validation.
inline double psi(const LevyTriplet& t, double lambda, const QuadratureOptions& opts = {}) {
    if (!(lambda >= 0.0)) throw PreconditionError("psi: lambda must be >= 0");
    const QuadResult j = jump_exponent(t.jumps, lambda, opts);
    if (!j.converged) throw QuadratureFailure("psi: jump integral did not converge", j.error);
    return t.gamma * lambda + 0.5 * t.sigma2 * lambda * lambda + j.value - t.kill_rate;
}

/// Evaluable Laplace exponent of a validated triplet, caching integer arguments.
///
/// Copies share the cache. Concurrent fills write identical values.
class LaplaceExponent {
public:
    explicit LaplaceExponent(LevyTriplet t, QuadratureOptions opts = {})
        : triplet_(std::move(t)), opts_(opts), cache_(std::make_shared<Cache>()) {
        require_valid(triplet_, opts_);
    }

    double operator()(double lambda) const {
        const double r = std::nearbyint(lambda);
        if (r == lambda && r >= 0.0 && r < 1e6) return at(static_cast<int>(r));
        return psi(triplet_, lambda, opts_);
    }

    double at(int n) const {
        {
            std::lock_guard lock(cache_->mutex);
            if (auto it = cache_->values.find(n); it != cache_->values.end()) return it->second;
        }
        const double v = psi(triplet_, static_cast<double>(n), opts_);
        std::lock_guard lock(cache_->mutex);
        cache_->values.emplace(n, v);
        return v;
    }

    const LevyTriplet& triplet() const noexcept { return triplet_; }
    const QuadratureOptions& options() const noexcept { return opts_; }
    /// Atom measures are evaluated by finite sums, without quadrature error.
    bool exact() const noexcept { return triplet_.jumps.is_atomic(); }
    /// Band below which |Ψ| is not distinguishable from 0.
    double tolerance() const noexcept { return exact() ? 0.0 : opts_.abs_tol; }

private:
    struct Cache {
        std::mutex mutex;
        std::map<int, double> values;
    };

    LevyTriplet triplet_;
    QuadratureOptions opts_;
    std::shared_ptr<Cache> cache_;
};

enum class A2Status { holds, fails, indeterminate };

inline const char* to_string(A2Status s) {
    switch (s) {
        case A2Status::holds: return "holds";
        case A2Status::fails: return "fails";
        case A2Status::indeterminate: return "indeterminate";
    }
    return "?";
}

/// Ψ(1) > 0, with an indeterminate band of width tolerance() for quadrature-based exponents.
inline A2Status check_a2(const LaplaceExponent& psi) {
    const double v = psi.at(1);
    if (std::abs(v) <= psi.tolerance()) return psi.exact() ? A2Status::fails : A2Status::indeterminate;
    return v > 0.0 ? A2Status::holds : A2Status::fails;
}

inline void require_a2(const LaplaceExponent& psi) {
    const A2Status s = check_a2(psi);
    if (s != A2Status::holds) {
        throw PreconditionError(std::string("Assumption (A2) Psi(1) > 0 ") +
                                (s == A2Status::fails ? "fails" : "is indeterminate within quadrature tolerance") +
                                " (Psi(1) = " + format_double(psi.at(1)) + ")");
    }
}

enum class Regime { killed, drifts_to_minus_infinity, oscillates, drifts_to_plus_infinity };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::killed: return "killed";
        case Regime::drifts_to_minus_infinity: return "drifts_to_minus_infinity";
        case Regime::oscillates: return "oscillates";
        case Regime::drifts_to_plus_infinity: return "drifts_to_plus_infinity";
    }
    return "?";
}

struct RegimeReport {
    bool a1_holds = true;
    bool a2_holds = false;
    double mean_xi1 = 0.0;  // may be -inf
    Regime regime = Regime::oscillates;
    bool hits_zero = false;
};

/// E[ξ₁] = γ + ∫_{u<-1} u Π(du); -inf when the big-jump tail is not integrable.
inline double mean_of_xi1(const LevyTriplet& t, const QuadratureOptions& opts = {}) {
    const QuadResult tail = t.jumps.integrate([](double u) { return u; }, -kInf, -1.0, opts);
    if (!tail.converged) {
        if (tail.diverging) return -kInf;
        throw QuadratureFailure("mean of xi_1: big-jump tail integral did not converge", tail.error);
    }
    return t.gamma + tail.value;
}

/// Regime classification straight from a triplet. Works on any structurally
/// sound triplet (zero-mass atoms contribute nothing); A2 is evaluated from Ψ(1).
inline RegimeReport classify_regime(const LevyTriplet& t, const QuadratureOptions& opts = {}) {
    RegimeReport r;
    r.mean_xi1 = mean_of_xi1(t, opts);
    const double band = t.jumps.is_atomic() ? 0.0 : opts.abs_tol;
    if (t.kill_rate > 0.0) {
        r.regime = Regime::killed;
    } else if (r.mean_xi1 > band) {
        r.regime = Regime::drifts_to_plus_infinity;
    } else if (r.mean_xi1 < -band) {
        r.regime = Regime::drifts_to_minus_infinity;
    } else {
        r.regime = Regime::oscillates;
    }
    r.hits_zero = r.regime == Regime::killed || r.regime == Regime::drifts_to_minus_infinity;
    r.a2_holds = psi(t, 1.0, opts) > band;
    return r;
}

inline RegimeReport classify_regime(const LaplaceExponent& psi) {
    RegimeReport r = classify_regime(psi.triplet(), psi.options());
    r.a2_holds = check_a2(psi) == A2Status::holds;
    return r;
}

/// Root θ ∈ (0,1) of Ψ when Ψ dips below zero on (0,1); bisection to 1e-12.
inline std::optional<double> cramer_root(const LaplaceExponent& psi, double abs_tol = 1e-12) {
    require_a2(psi);
    double lo = 0.0;
    if (!(psi(0.0) < 0.0)) {
        // Ψ(0) = 0: a negative value exists only near 0, when E[ξ₁] < 0.
        if (!(mean_of_xi1(psi.triplet(), psi.options()) < 0.0)) return std::nullopt;
        bool found = false;
        for (int k = 1; k <= 60; ++k) {
            const double x = std::ldexp(1.0, -k);
            if (psi(x) < 0.0) {
                lo = x;
                found = true;
                break;
            }
        }
        if (!found) return std::nullopt;
    }
    double hi = 1.0;
    while (hi - lo > abs_tol) {
        const double mid = 0.5 * (lo + hi);
        if (psi(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace pssmp
