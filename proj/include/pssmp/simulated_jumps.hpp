#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pssmp/errors.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/numeric.hpp"
#include "pssmp/rng.hpp"

namespace pssmp {

/// The part of Π that the simulators realize as discrete jumps, with the
/// integrals both schemes need. Atom measures are simulated in full; a density
/// is split at the cutoff ε: jumps with |u| >= ε are sampled, the band
/// (-ε, 0) is replaced by a Gaussian surrogate.
class SimulatedJumps {
public:
    SimulatedJumps() = default;

    SimulatedJumps(const LevyTriplet& t, double cutoff, const QuadratureOptions& opts = {})
        : measure_(t.jumps), opts_(opts) {
        if (t.jumps.is_atomic()) {
            build_atoms();
        } else {
            if (!(cutoff > 0.0 && cutoff < 1.0)) {
                throw PreconditionError("small-jump cutoff must lie in (0, 1) for density measures");
            }
            cutoff_ = cutoff;
            build_density();
        }
    }

    /// Total mass of the sampled part of Π.
    double rate() const noexcept { return rate_; }
    /// ε, or 0 when every jump is sampled.
    double cutoff() const noexcept { return cutoff_; }
    /// ∫_{-ε}^0 u² Π(du): variance rate of the surrogate in ξ.
    double small_u2() const noexcept { return small_u2_; }
    /// ∫_{-ε}^0 (e^u - 1)² Π(du): extra σ² of the surrogate in the SDE.
    double small_expm1_sq() const noexcept { return small_expm1_sq_; }
    /// ∫ u Π(du) over sampled jumps with |u| <= 1 (compensated in ξ).
    double levy_compensator() const noexcept { return levy_compensator_; }

    /// ∫ (e^{n u} - 1) Π(du) over sampled jumps.
    double expm1_moment(int n) const {
        if (n == 1) return sde_compensator_;
        const double lo = -kInf;
        const double hi = cutoff_ > 0.0 ? -cutoff_ : 0.0;
        const QuadResult r = measure_.integrate([n](double u) { return std::expm1(n * u); }, lo, hi, opts_);
        if (!r.converged) throw QuadratureFailure("expm1 moment of sampled jumps", r.error);
        return r.value;
    }

    /// Draws one jump size from the normalized sampled part of Π.
    double sample(Engine& rng) const {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double v = unif(rng) * cumulative_.back();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), v);
        const std::size_t i = std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
        if (cells_.empty()) return atoms_[i];
        const Cell& c = cells_[i];
        const double before = i == 0 ? 0.0 : cumulative_[i - 1];
        const double w = std::clamp((v - before) / (cumulative_[i] - before), 0.0, 1.0);
        // Linear density between the cell ends; exact inverse of its CDF.
        const double fa = c.f_lo;
        const double fb = c.f_hi;
        const double disc = fa * fa + w * (fb * fb - fa * fa);
        const double denom = fa + std::sqrt(std::max(disc, 0.0));
        const double x = denom > 0.0 ? w * (fa + fb) / denom : w;
        return -(c.lo + x * (c.hi - c.lo));
    }

private:
    struct Cell {
        double lo;  // |u| range
        double hi;
        double f_lo;
        double f_hi;
    };

    void build_atoms() {
        double cum = 0.0;
        for (const Atom& a : measure_.atom_list()) {
            cum += a.mass;
            cumulative_.push_back(cum);
            atoms_.push_back(a.location);
            if (a.location >= -1.0) levy_compensator_ += a.mass * a.location;
            sde_compensator_ += a.mass * std::expm1(a.location);
        }
        rate_ = cum;
    }

    QuadResult checked(const QuadResult& r, const char* what) const {
        if (!r.converged) throw QuadratureFailure(what, r.error);
        return r;
    }

    void build_density() {
        const double eps = cutoff_;
        rate_ = checked(measure_.integrate([](double) { return 1.0; }, -kInf, -eps, opts_), "sampled jump rate").value;
        small_u2_ = checked(measure_.integrate([](double u) { return u * u; }, -eps, 0.0, opts_), "small-jump variance")
                        .value;
        small_expm1_sq_ = checked(measure_.integrate(
                                      [](double u) {
                                          const double e = std::expm1(u);
                                          return e * e;
                                      },
                                      -eps, 0.0, opts_),
                                  "small-jump SDE variance")
                              .value;
        levy_compensator_ =
            checked(measure_.integrate([](double u) { return u; }, -1.0, -eps, opts_), "jump compensator").value;
        sde_compensator_ = checked(measure_.integrate([](double u) { return std::expm1(u); }, -kInf, -eps, opts_),
                                   "SDE jump compensator")
                               .value;
        if (!(rate_ > 0.0)) {
            cumulative_.push_back(0.0);
            return;
        }

        const JumpDensity& d = measure_.density_fn();
        const double a = std::max(eps, -d.upper());
        double b = -d.lower();
        if (std::isinf(b)) {
            b = a;
            for (int k = 0; k < 300; ++k) {
                b *= 10.0;
                const double tail = measure_.integrate([](double) { return 1.0; }, -kInf, -b, opts_).value;
                if (tail <= 1e-14 * rate_) break;
            }
        }
        std::vector<double> nodes;
        constexpr int per_decade = 64;
        const double step = std::pow(10.0, 1.0 / per_decade);
        for (double x = a; x < b; x *= step) nodes.push_back(x);
        nodes.push_back(b);
        for (double bp : d.breakpoints()) {
            if (-bp > a && -bp < b) nodes.push_back(-bp);
        }
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

        auto inner = [&](double x_abs, bool upper_end) {
            // density at |u| = x_abs, approached from inside the cell
            const double nudge = 1e-12 * x_abs;
            return d(-(upper_end ? x_abs - nudge : x_abs + nudge));
        };
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            const double lo = nodes[i];
            const double hi = nodes[i + 1];
            const double m = detail::gk_panel([&](double u) { return d(u); }, -hi, -lo, 1e-3 * opts_.abs_tol).value;
            cum += m;
            cumulative_.push_back(cum);
            cells_.push_back(Cell{lo, hi, inner(lo, false), inner(hi, true)});
        }
    }

    JumpMeasure measure_;
    QuadratureOptions opts_;
    double cutoff_ = 0.0;
    double rate_ = 0.0;
    double small_u2_ = 0.0;
    double small_expm1_sq_ = 0.0;
    double levy_compensator_ = 0.0;
    double sde_compensator_ = 0.0;
    std::vector<double> cumulative_;
    std::vector<double> atoms_;
    std::vector<Cell> cells_;
};

}  // namespace pssmp
