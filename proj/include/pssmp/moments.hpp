#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pssmp/errors.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/numeric.hpp"

namespace pssmp {

struct MomentQuery {
    double z = 0.0;
    double t = 0.0;
    int n = 1;
};

inline void check_query(const MomentQuery& q) {
    if (!(q.z >= 0.0) || !std::isfinite(q.z)) throw PreconditionError("moment query: z must be finite and >= 0");
    if (!(q.t >= 0.0) || !std::isfinite(q.t)) throw PreconditionError("moment query: t must be finite and >= 0");
    if (q.n < 0) throw PreconditionError("moment query: n must be >= 0");
}

/// p_l = Ψ(n)Ψ(n-1)···Ψ(n-l+1) for l = 1..n (products[l-1]).
struct PsiProductLadder {
    int order = 0;
    std::vector<double> products;
};

inline PsiProductLadder product_ladder(const LaplaceExponent& psi, int n) {
    PsiProductLadder ladder{n, {}};
    double p = 1.0;
    for (int l = 1; l <= n; ++l) {
        p *= psi.at(n - l + 1);
        ladder.products.push_back(p);
    }
    return ladder;
}

/// Coefficients c_l of z^{n-l} t^l, l = 0..n: c_0 = 1, c_l = c_{l-1} Ψ(n-l+1) / l.
inline std::vector<double> moment_polynomial(const LaplaceExponent& psi, int n) {
    require_a2(psi);
    if (n < 0) throw PreconditionError("moment_polynomial: n must be >= 0");
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    c[0] = 1.0;
    for (int l = 1; l <= n; ++l) {
        c[l] = c[l - 1] * psi.at(n - l + 1) / l;
        if (!std::isfinite(c[l])) {
            throw NumericOverflow("moment_polynomial: coefficient " + std::to_string(l) + " of order " +
                                  std::to_string(n) + " overflows");
        }
    }
    return c;
}

/// Σ_l c_l z^{n-l} t^l, summed in increasing l.
inline double evaluate_moment_polynomial(const std::vector<double>& coeffs, double z, double t) {
    const int n = static_cast<int>(coeffs.size()) - 1;
    double value = 0.0;
    for (int l = 0; l <= n; ++l) value += coeffs[l] * ipow(z, n - l) * ipow(t, l);
    return value;
}

/// d/dt of an order-n moment polynomial, returned as an order-(n-1) coefficient table: l * c_l.
inline std::vector<double> derivative_in_t(const std::vector<double>& coeffs) {
    std::vector<double> d;
    for (std::size_t l = 1; l < coeffs.size(); ++l) d.push_back(static_cast<double>(l) * coeffs[l]);
    return d;
}

/// E_z(Z_t^n) from the closed form; identical arithmetic to evaluating moment_polynomial.
inline double entire_moment(const LaplaceExponent& psi, const MomentQuery& q) {
    check_query(q);
    const double v = evaluate_moment_polynomial(moment_polynomial(psi, q.n), q.z, q.t);
    if (!std::isfinite(v)) {
        throw NumericOverflow("entire_moment: E_z(Z_t^n) overflows at n=" + std::to_string(q.n) +
                              ", t=" + format_double(q.t) + ", z=" + format_double(q.z));
    }
    return v;
}

/// E_z(Z_t^n) by iterating E(Z_t^k) = z^k + Ψ(k) ∫_0^t E(Z_s^{k-1}) ds from E(Z^0) = 1.
///
/// Each iterate is kept as a polynomial in s and integrated exactly, so this
/// route shares no arithmetic with the closed form beyond Ψ itself.
inline double moment_recursion(const LaplaceExponent& psi, const MomentQuery& q) {
    check_query(q);
    require_a2(psi);
    std::vector<double> poly{1.0};  // coefficients of s^j
    for (int k = 1; k <= q.n; ++k) {
        const double pk = psi.at(k);
        std::vector<double> next(poly.size() + 1, 0.0);
        next[0] = ipow(q.z, k);
        for (std::size_t j = 0; j < poly.size(); ++j) next[j + 1] = pk * poly[j] / static_cast<double>(j + 1);
        poly = std::move(next);
    }
    double v = 0.0;
    for (std::size_t j = poly.size(); j-- > 0;) v = v * q.t + poly[j];
    if (!std::isfinite(v)) throw NumericOverflow("moment_recursion: value overflows at n=" + std::to_string(q.n));
    return v;
}

/// log E_z(Z_t^n) via log-sum-exp over the closed-form terms; -inf when the moment is 0.
inline double log_entire_moment(const LaplaceExponent& psi, const MomentQuery& q) {
    check_query(q);
    require_a2(psi);
    const int n = q.n;
    std::vector<double> terms;
    double log_c = 0.0;
    for (int l = 0; l <= n; ++l) {
        if (l > 0) log_c += std::log(psi.at(n - l + 1)) - std::log(static_cast<double>(l));
        const int zp = n - l;
        if ((zp > 0 && q.z == 0.0) || (l > 0 && q.t == 0.0)) continue;
        double term = log_c;
        if (zp > 0) term += zp * std::log(q.z);
        if (l > 0) term += l * std::log(q.t);
        terms.push_back(term);
    }
    if (terms.empty()) return -kInf;
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double x : terms) s += std::exp(x - m);
    return m + std::log(s);
}

struct DeterminacyWitness {
    /// max_{1<=n<=n_max} Ψ(n)/n².
    double K = 0.0;
    /// A radius for which the exponential series Σ θ^n E(Z^n)/n! passes the ratio test.
    double theta_star = 0.0;
    /// Successive-term ratios E(Z^{n+1}) / ((n+1) E(Z^n)), n = 0..n_max-1 (θ factored out).
    std::vector<double> ratios;
};

/// Finite-range numerical witness that Ψ(n) <= K n² and that E[e^{θ Z_t}] < ∞ for small θ.
///
/// θ* is chosen so every successive-term ratio up to n_max is at most 1/2.
/// This is a diagnostic over n <= n_max, not a proof.
inline DeterminacyWitness determinacy_check(const LaplaceExponent& psi, int n_max, double t, double z) {
    require_a2(psi);
    if (n_max < 2) throw PreconditionError("determinacy_check: n_max must be >= 2");
    check_query({z, t, 1});
    DeterminacyWitness w;
    for (int n = 1; n <= n_max; ++n) w.K = std::max(w.K, psi.at(n) / (static_cast<double>(n) * n));
    if (!std::isfinite(w.K)) throw NumericOverflow("determinacy_check: K is not finite");

    if (z == 0.0 && t == 0.0) {
        // Z_0 = 0 almost surely: every θ works.
        w.theta_star = 1.0;
        return w;
    }
    double prev = 0.0;  // log E(Z^0)
    for (int n = 0; n < n_max; ++n) {
        const double next = log_entire_moment(psi, {z, t, n + 1});
        w.ratios.push_back(std::exp(next - prev) / (n + 1));
        prev = next;
    }
    const double rmax = *std::max_element(w.ratios.begin(), w.ratios.end());
    const double last = w.ratios.back();
    const double before = w.ratios[w.ratios.size() - 2];
    const bool stable = std::isfinite(rmax) && rmax > 0.0 && std::abs(last - before) <= 0.1 * before;
    if (!stable) {
        throw NumericOverflow("determinacy_check: term ratios have not stabilized by n_max=" + std::to_string(n_max) +
                              " (last " + format_double(last) + ", previous " + format_double(before) + ")");
    }
    w.theta_star = 0.5 / rmax;
    return w;
}

enum class CellKind { exact, estimated };

inline const char* to_string(CellKind k) { return k == CellKind::exact ? "exact" : "estimated"; }

struct MomentCell {
    int n = 1;
    double t = 0.0;
    double z = 0.0;
    double value = 0.0;
    CellKind kind = CellKind::exact;
    /// Zero for exact cells; NaN when undefined (a single path).
    double standard_error = 0.0;
    long paths = 0;
};

/// Cells are stored z-major, then t, then n.
struct MomentTable {
    std::vector<int> orders;
    std::vector<double> times;
    std::vector<double> initial_states;
    std::vector<MomentCell> cells;

    const MomentCell& at(int n, double t, double z) const {
        for (const MomentCell& c : cells) {
            if (c.n == n && c.t == t && c.z == z) return c;
        }
        throw PreconditionError("MomentTable: no cell for the requested (n, t, z)");
    }
};

enum class MomentMode { closed, recursion };

inline MomentTable exact_moment_table(const LaplaceExponent& psi, int n_max, const std::vector<double>& times,
                                      const std::vector<double>& zs, MomentMode mode = MomentMode::closed) {
    require_a2(psi);
    MomentTable table;
    for (int n = 1; n <= n_max; ++n) table.orders.push_back(n);
    table.times = times;
    table.initial_states = zs;
    for (double z : zs) {
        for (double t : times) {
            for (int n = 1; n <= n_max; ++n) {
                const MomentQuery q{z, t, n};
                const double v = mode == MomentMode::closed ? entire_moment(psi, q) : moment_recursion(psi, q);
                table.cells.push_back(MomentCell{n, t, z, v, CellKind::exact, 0.0, 0});
            }
        }
    }
    return table;
}

}  // namespace pssmp
