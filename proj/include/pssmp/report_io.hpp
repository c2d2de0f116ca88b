#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "pssmp/errors.hpp"
#include "pssmp/moments.hpp"
#include "pssmp/sde_sim.hpp"
#include "pssmp/verify.hpp"

namespace pssmp {

/// JSON has no NaN or infinity; those are written as the strings "nan", "inf", "-inf".
inline nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline void write_text(const std::string& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot open '" + file + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + file + "'");
}

inline std::string moment_table_csv(const MomentTable& t) {
    std::string s = "n,t,z,value,kind,standard_error,paths\n";
    for (const MomentCell& c : t.cells) {
        s += std::to_string(c.n) + "," + format_double(c.t) + "," + format_double(c.z) + "," + format_double(c.value) +
             "," + to_string(c.kind) + "," + format_double(c.standard_error) + "," + std::to_string(c.paths) + "\n";
    }
    return s;
}

inline nlohmann::json to_json(const MomentTable& t) {
    nlohmann::json cells = nlohmann::json::array();
    for (const MomentCell& c : t.cells) {
        cells.push_back({{"n", c.n},
                         {"t", json_number(c.t)},
                         {"z", json_number(c.z)},
                         {"value", json_number(c.value)},
                         {"kind", to_string(c.kind)},
                         {"standard_error", json_number(c.standard_error)},
                         {"paths", c.paths}});
    }
    nlohmann::json times = nlohmann::json::array();
    for (double x : t.times) times.push_back(json_number(x));
    nlohmann::json zs = nlohmann::json::array();
    for (double x : t.initial_states) zs.push_back(json_number(x));
    return {{"orders", t.orders}, {"times", times}, {"initial_states", zs}, {"cells", cells}};
}

inline nlohmann::json to_json(const EnsembleMeta& m) {
    return {{"scheme", m.scheme},
            {"dt", json_number(m.dt)},
            {"paths", m.paths},
            {"seed", m.seed},
            {"aborted", m.aborted},
            {"aborted_fraction", json_number(m.aborted_fraction)},
            {"diagnostic", m.diagnostic},
            {"config_digest", m.config_digest},
            {"model_digest", m.model_digest}};
}

inline nlohmann::json to_json(const McEstimate& e) {
    return {{"value", json_number(e.value)}, {"standard_error", json_number(e.standard_error)}, {"paths", e.n_paths}};
}

inline nlohmann::json to_json(const ComparisonReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const ComparisonRow& x : r.rows) {
        rows.push_back({{"n", x.n},
                        {"t", json_number(x.t)},
                        {"z", json_number(x.z)},
                        {"exact", json_number(x.exact)},
                        {"estimate", json_number(x.estimate)},
                        {"standard_error", json_number(x.standard_error)},
                        {"z_score", json_number(x.z_score)},
                        {"verdict", to_string(x.verdict)}});
    }
    return {{"suite", "moments"},
            {"k", json_number(r.k)},
            {"exit_code", r.exit_code()},
            {"degenerate", r.degenerate},
            {"recursion_gap", json_number(r.recursion_gap)},
            {"ensemble", to_json(r.meta)},
            {"rows", rows}};
}

inline nlohmann::json to_json(const MartingaleReport& r) {
    nlohmann::json comps = nlohmann::json::array();
    for (const ComponentStat& c : r.components) {
        comps.push_back({{"name", c.name},
                         {"mean", json_number(c.estimate.value)},
                         {"standard_error", json_number(c.estimate.standard_error)},
                         {"z_score", json_number(c.z_score)},
                         {"identically_zero", c.identically_zero}});
    }
    return {{"suite", "martingale"},
            {"n", r.n},
            {"z", json_number(r.z)},
            {"horizon", json_number(r.horizon)},
            {"k", json_number(r.k)},
            {"exit_code", r.exit_code()},
            {"components", comps},
            {"identity_residual", to_json(r.residual)},
            {"identity_abs_residual", to_json(r.abs_residual)},
            {"identity_max_abs_residual", json_number(r.max_abs_residual)},
            {"clamps", r.clamps},
            {"ensemble", to_json(r.meta)}};
}

inline nlohmann::json to_json(const CrossReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const CrossRow& x : r.rows) {
        rows.push_back({{"n", x.n},
                        {"t", json_number(x.t)},
                        {"lamperti", to_json(x.lamperti)},
                        {"sde", to_json(x.sde)},
                        {"welch", json_number(x.welch)},
                        {"verdict", to_string(x.verdict)}});
    }
    return {{"suite", "cross"},
            {"z", json_number(r.z)},
            {"k", json_number(r.k)},
            {"exit_code", r.exit_code()},
            {"degenerate", r.degenerate},
            {"lamperti_ensemble", to_json(r.lamperti_meta)},
            {"sde_ensemble", to_json(r.sde_meta)},
            {"rows", rows}};
}

namespace detail {

inline std::string fixed_row(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

inline std::string fixed_row(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

}  // namespace detail

inline std::string human_table(const ComparisonReport& r) {
    std::string s = detail::fixed_row("%-3s %-10s %-10s %-22s %-22s %-12s %-9s %s\n", "n", "t", "z", "exact",
                                      "estimate", "SE", "z-score", "verdict");
    for (const ComparisonRow& x : r.rows) {
        s += detail::fixed_row("%-3d %-10.6g %-10.6g %-22.15g %-22.15g %-12.4g %-9.3f %s\n", x.n, x.t, x.z, x.exact,
                               x.estimate, x.standard_error, x.z_score, to_string(x.verdict));
    }
    s += detail::fixed_row("scheme %s, dt %g, paths %ld, seed %llu, aborted %ld, k %g\n", r.meta.scheme.c_str(),
                           r.meta.dt, r.meta.paths, static_cast<unsigned long long>(r.meta.seed), r.meta.aborted, r.k);
    return s;
}

inline std::string human_table(const MartingaleReport& r) {
    std::string s = detail::fixed_row("%-4s %-22s %-14s %s\n", "M", "mean", "SE", "z-score");
    for (const ComponentStat& c : r.components) {
        s += detail::fixed_row("%-4s %-22.15g %-14.6g %.3f%s\n", c.name.c_str(), c.estimate.value,
                               c.estimate.standard_error, c.z_score, c.identically_zero ? " (identically 0)" : "");
    }
    s += detail::fixed_row("identity residual at horizon: mean %.6g (SE %.3g), mean |.| %.6g, max |.| %.6g\n",
                           r.residual.value, r.residual.standard_error, r.abs_residual.value, r.max_abs_residual);
    s += detail::fixed_row("n %d, z %g, horizon %g, dt %g, paths %ld, seed %llu, clamps %ld, k %g\n", r.n, r.z,
                           r.horizon, r.meta.dt, r.meta.paths, static_cast<unsigned long long>(r.meta.seed), r.clamps,
                           r.k);
    return s;
}

inline std::string human_table(const CrossReport& r) {
    std::string s = detail::fixed_row("%-3s %-10s %-22s %-12s %-22s %-12s %-9s %s\n", "n", "t", "lamperti", "SE",
                                      "sde", "SE", "welch", "verdict");
    for (const CrossRow& x : r.rows) {
        s += detail::fixed_row("%-3d %-10.6g %-22.15g %-12.4g %-22.15g %-12.4g %-9.3f %s\n", x.n, x.t,
                               x.lamperti.value, x.lamperti.standard_error, x.sde.value, x.sde.standard_error, x.welch,
                               to_string(x.verdict));
    }
    return s;
}

/// "t,Z" rows of one path.
inline std::string path_csv(const std::vector<double>& times, const std::vector<double>& values) {
    std::string s = "t,Z\n";
    for (std::size_t i = 0; i < times.size(); ++i) s += format_double(times[i]) + "," + format_double(values[i]) + "\n";
    return s;
}

/// Accepted events of an SDE path: "t,kind,u" (u empty for kills).
inline std::string events_csv(const SdeEventLog& log) {
    std::string s = "t,kind,u\n";
    for (const SdeStepRecord& r : log.steps) {
        if (r.event == EventKind::none) continue;
        s += format_double(r.time + r.dt) + "," + to_string(r.event) + "," +
             (r.event == EventKind::jump ? format_double(r.jump_size) : std::string()) + "\n";
    }
    return s;
}

inline nlohmann::json path_sidecar(const SimPath& p, const std::string& model_digest) {
    return {{"scheme", p.provenance.scheme},
            {"seed", p.provenance.seed},
            {"path_index", p.provenance.path_index},
            {"config_digest", p.provenance.config_digest},
            {"model_digest", model_digest},
            {"aborted", p.aborted},
            {"diagnostic", p.diagnostic},
            {"absorption_time", json_number(p.absorption_time)}};
}

}  // namespace pssmp
