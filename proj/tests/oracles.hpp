#pragma once

// Reference computations used only by the tests. Each one takes a different
// route from the library code it checks.

#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pssmp/levy_model.hpp"

namespace oracle {

struct AtomModel {
    double gamma = 0.0;
    double sigma2 = 0.0;
    std::vector<pssmp::Atom> atoms;
    double q = 0.0;

    pssmp::LevyTriplet triplet() const {
        return {gamma, sigma2, pssmp::JumpMeasure::atoms(atoms), q};
    }
};

/// Lévy–Khintchine sum written out term by term.
inline double psi(const AtomModel& m, double lambda) {
    double v = m.gamma * lambda + m.sigma2 * lambda * lambda / 2.0 - m.q;
    for (const auto& a : m.atoms) {
        const double comp = std::abs(a.location) <= 1.0 ? lambda * a.location : 0.0;
        v += a.mass * (std::exp(lambda * a.location) - 1.0 - comp);
    }
    return v;
}

/// Random atom triplet with Ψ(1) > 0 (checked by the oracle sum, not the library).
inline AtomModel random_a2_model(std::mt19937_64& rng, bool allow_killing = true) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (;;) {
        AtomModel m;
        m.gamma = -1.0 + 4.0 * U(rng);
        m.sigma2 = 2.0 * U(rng);
        const int n_atoms = static_cast<int>(4.0 * U(rng));
        for (int i = 0; i < n_atoms; ++i) m.atoms.push_back({-0.05 - 2.5 * U(rng), 0.1 + 1.9 * U(rng)});
        m.q = allow_killing && U(rng) < 0.5 ? U(rng) : 0.0;
        if (psi(m, 1.0) > 0.05) return m;
    }
}

/// ∫_{-inf}^0 (e^{λu} - 1 - λu 1{|u|<=1}) c e^{βu} |u|^{-1-α} du for α in (0,1), β > 0:
/// c Γ(-α)((β+λ)^α - β^α) + λ c β^{α-1} γ(1-α, β).
inline double tempered_stable_jump_exponent(double c, double alpha, double beta, double lambda) {
    const double laplace = c * std::tgamma(-alpha) * (std::pow(beta + lambda, alpha) - std::pow(beta, alpha));
    const double compensator = lambda * c * std::pow(beta, alpha - 1.0) * boost::math::tgamma_lower(1.0 - alpha, beta);
    return laplace + compensator;
}

/// Composite Simpson rule on [a, b] with n (even) intervals.
template <class F>
double simpson(const F& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

inline double binomial_power(double z, double t, int n) { return std::pow(z + t, n); }

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace oracle
