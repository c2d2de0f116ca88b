#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pssmp/errors.hpp"

namespace pssmp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// e^x - 1 - x without cancellation for small |x|.
inline double expm1_minus_x(double x) {
    if (std::abs(x) < 0.1) {
        double term = 0.5 * x * x;
        double sum = term;
        for (int k = 3; k <= 18; ++k) {
            term *= x / k;
            sum += term;
        }
        return sum;
    }
    return std::expm1(x) - x;
}

/// (e^b - 1) / b, continuous at b = 0.
inline double expm1_ratio(double b) {
    if (std::abs(b) < 1e-5) {
        return 1.0 + b * (0.5 + b / 6.0);
    }
    return std::expm1(b) / b;
}

/// x^k for non-negative integer k by repeated squaring (0^0 == 1).
inline double ipow(double x, int k) {
    double result = 1.0;
    double base = x;
    unsigned e = static_cast<unsigned>(k);
    while (e != 0) {
        if (e & 1U) result *= base;
        base *= base;
        e >>= 1U;
    }
    return result;
}

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    /// Panel contributions stopped decaying: the integral is (numerically) infinite.
    bool diverging = false;
};

struct QuadratureOptions {
    double abs_tol = 1e-10;
    int max_panels = 250;
};

namespace detail {

template <class F>
void gk_bisect(const F& f, double a, double b, double tol, int depth, QuadResult& out) {
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0);
    const double err = std::abs(v - boost::math::quadrature::gauss<double, 7>::integrate(f, a, b));
    if (!std::isfinite(v) || !std::isfinite(err)) {
        out.converged = false;
        out.error = kInf;
        return;
    }
    if (err <= tol || depth == 0) {
        out.value += v;
        out.error += err;
        return;
    }
    const double m = 0.5 * (a + b);
    gk_bisect(f, a, m, 0.5 * tol, depth - 1, out);
    gk_bisect(f, m, b, 0.5 * tol, depth - 1, out);
}

/// One panel by bisection to a relative accuracy of about 1e-12, or to
/// `abs_floor` for panels that are negligible. The |K - G| estimate is
/// pessimistic for smooth integrands, so kinks drive the refinement.
template <class F>
QuadResult gk_panel(const F& f, double a, double b, double abs_floor) {
    QuadResult first;
    gk_bisect(f, a, b, kInf, 0, first);
    if (!first.converged) return first;
    QuadResult r;
    gk_bisect(f, a, b, std::max(abs_floor, 1e-12 * std::abs(first.value)), 30, r);
    return r;
}

/// Sums panels [start*ratio^k, start*ratio^(k+1)] until the geometric tail is
/// resolved to tol. ratio < 1 walks toward 0, ratio > 1 toward -inf.
template <class F>
QuadResult geometric_panels(const F& f, double start, double ratio, double tol, int max_panels) {
    QuadResult out;
    std::array<double, 3> hist{0.0, 0.0, 0.0};
    int seen = 0;
    int growing = 0;
    double edge = start;
    for (int k = 0; k < max_panels; ++k) {
        const double next = edge * ratio;
        const double a = std::min(edge, next);
        const double b = std::max(edge, next);
        edge = next;
        const QuadResult p = gk_panel(f, a, b, 1e-3 * tol);
        if (!p.converged) {
            out.converged = false;
            out.diverging = seen >= 2 && hist[2] != 0.0 && std::abs(p.value) >= 0.98 * std::abs(hist[2]);
            out.error = kInf;
            return out;
        }
        out.value += p.value;
        out.error += p.error;
        growing = hist[2] != 0.0 && std::abs(p.value) >= std::abs(hist[2]) ? growing + 1 : 0;
        hist = {hist[1], hist[2], p.value};
        ++seen;
        if (growing >= 20) {
            // Twenty decades of non-decreasing panel mass: treat as divergent.
            out.converged = false;
            out.diverging = true;
            out.error = kInf;
            return out;
        }

        if (seen >= 2 && hist[2] == 0.0 && hist[1] == 0.0) {
            return out;
        }
        if (seen < 3 || hist[0] == 0.0 || hist[1] == 0.0) continue;
        const double rho1 = hist[2] / hist[1];
        const double rho0 = hist[1] / hist[0];
        if (rho1 < 0.0 || rho0 < 0.0) continue;
        if (rho1 < 0.98 && std::abs(rho1 - rho0) <= 0.05) {
            const double tail = hist[2] * rho1 / (1.0 - rho1);
            const double tail_err = std::abs(hist[2]) * std::abs(rho1 - rho0) / ((1.0 - rho1) * (1.0 - rho1)) +
                                    1e-3 * std::abs(tail);
            if (tail_err <= 0.25 * tol) {
                out.value += tail;
                out.error += tail_err;
                return out;
            }
        }
    }
    out.converged = false;
    if (seen >= 3 && hist[1] != 0.0) {
        out.diverging = std::abs(hist[2] / hist[1]) >= 0.98;
    }
    out.error += std::abs(hist[2]) * static_cast<double>(max_panels);
    return out;
}

template <class F>
QuadResult finite_panels(const F& f, double lo, double hi, double tol) {
    QuadResult out;
    // Decade-sized panels; the integrand may vary by orders of magnitude across a wide range.
    double a = lo;
    while (a < hi) {
        double b = hi;
        if (a < 0.0 && hi < 0.0 && a < 10.0 * hi) b = std::min(hi, a / 10.0);
        const QuadResult p = gk_panel(f, a, b, 1e-3 * tol);
        out.value += p.value;
        out.error += p.error;
        out.converged = out.converged && p.converged;
        a = b;
    }
    return out;
}

inline void accumulate(QuadResult& into, const QuadResult& part) {
    into.value += part.value;
    into.error += part.error;
    into.converged = into.converged && part.converged;
    into.diverging = into.diverging || part.diverging;
}

}  // namespace detail

/// Integrates f over [lo, hi] with -inf <= lo < hi <= 0.
///
/// The range is cut at -1. A piece touching 0 is covered by decade panels
/// shrinking toward 0, a piece reaching -inf by decade panels growing toward
/// -inf; each such piece stops once the panel sums decay geometrically and the
/// extrapolated remainder is below tolerance. Integrable power-law ends are
/// therefore handled without evaluating f arbitrarily close to the singularity.
template <class F>
QuadResult integrate_negative_axis(const F& f, double lo, double hi, const QuadratureOptions& opts = {}) {
    QuadResult total;
    if (!(lo < hi)) return total;
    const double piece_tol = opts.abs_tol / 3.0;
    double rest_hi = hi;
    if (hi == 0.0) {
        const double start = std::max(lo, -1.0);
        detail::accumulate(total, detail::geometric_panels(f, start, 0.1, piece_tol, opts.max_panels));
        rest_hi = start;
    }
    double rest_lo = lo;
    if (std::isinf(lo)) {
        const double start = std::min(rest_hi, -1.0);
        detail::accumulate(total, detail::geometric_panels(f, start, 10.0, piece_tol, opts.max_panels));
        rest_lo = start;
    }
    if (rest_lo < -1.0 && -1.0 < rest_hi) {
        // integrands may switch form at -1 (compensator cut)
        detail::accumulate(total, detail::finite_panels(f, rest_lo, -1.0, piece_tol));
        detail::accumulate(total, detail::finite_panels(f, -1.0, rest_hi, piece_tol));
    } else if (rest_lo < rest_hi) {
        detail::accumulate(total, detail::finite_panels(f, rest_lo, rest_hi, piece_tol));
    }
    if (total.error > std::max(opts.abs_tol, 1e-10 * std::abs(total.value))) total.converged = false;
    return total;
}

}  // namespace pssmp
