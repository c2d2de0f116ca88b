#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pssmp/errors.hpp"
#include "pssmp/lamperti_sim.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/model_io.hpp"
#include "pssmp/moments.hpp"
#include "pssmp/report_io.hpp"
#include "pssmp/sde_sim.hpp"
#include "pssmp/verify.hpp"

namespace pssmp::cli {

/// Flags shared by the simulation-backed commands.
struct SimFlags {
    std::string scheme = "sde";
    double dt = 1e-3;
    double cutoff = 1e-3;
    double state_cap = 1e8;
    double xi_horizon = 20.0;
    std::string kill_policy = "absorb";
    unsigned workers = 1;

    SimulationConfig config() const {
        SimulationConfig c;
        c.scheme = scheme == "lamperti" ? Scheme::lamperti : Scheme::sde;
        c.levy.dt = dt;
        c.levy.horizon = xi_horizon;
        c.levy.small_jump_cutoff = cutoff;
        c.sde.dt = dt;
        c.sde.small_jump_cutoff = cutoff;
        c.sde.state_cap = state_cap;
        c.sde.kill_policy = kill_policy == "restart" ? KillPolicy::restart : KillPolicy::absorb;
        c.workers = workers;
        return c;
    }
};

inline void add_sim_flags(CLI::App* cmd, SimFlags& f, bool with_scheme) {
    if (with_scheme) {
        cmd->add_option("--scheme", f.scheme, "Simulation scheme")
            ->check(CLI::IsMember({"lamperti", "sde"}))
            ->capture_default_str();
    }
    cmd->add_option("--dt", f.dt, "Time step (xi-time for lamperti, real time for sde)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--cutoff", f.cutoff, "Small-jump cutoff epsilon for density measures")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--state-cap", f.state_cap, "SDE paths exceeding this state are aborted")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--xi-horizon", f.xi_horizon, "Longest xi-time generated by the lamperti scheme")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--kill-policy", f.kill_policy, "SDE behavior after a killing event")
        ->check(CLI::IsMember({"absorb", "restart"}))
        ->capture_default_str();
    cmd->add_option("--workers", f.workers, "Worker threads (results do not depend on it)")
        ->check(CLI::Range(1U, 1024U))
        ->capture_default_str();
}

inline LaplaceExponent load_model(const std::string& file) { return LaplaceExponent(load_triplet(file)); }

inline std::string psi_output(const LaplaceExponent& psi, const std::vector<double>& lambdas) {
    std::string s = "lambda,psi\n";
    for (double l : lambdas) s += format_double(l) + "," + format_double(psi(l)) + "\n";
    return s;
}

inline std::string psi_notes(const LaplaceExponent& psi) {
    std::string s;
    const A2Status a2 = check_a2(psi);
    s += "# A2 (Psi(1) > 0): " + std::string(to_string(a2)) + ", Psi(1) = " + format_double(psi(1.0)) + "\n";
    const RegimeReport r = classify_regime(psi);
    s += "# regime: " + std::string(to_string(r.regime)) + ", hits_zero: " + (r.hits_zero ? "true" : "false") + "\n";
    const auto theta = cramer_root(psi);
    s += "# cramer_root: " + (theta ? format_double(*theta) : std::string("none")) + "\n";
    return s;
}

inline std::vector<double> output_grid(double horizon, int points) {
    std::vector<double> g;
    for (int k = 0; k <= points; ++k) g.push_back(horizon * k / points);
    g.back() = horizon;
    return g;
}

/// Re-simulates path `i` (same stream as in the ensemble) and writes its dump files.
inline void dump_path(const std::filesystem::path& dir, const LaplaceExponent& psi, double z,
                      const std::vector<double>& grid, const SimulationConfig& cfg, std::uint64_t seed,
                      std::size_t i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%06zu", i);
    Engine rng = path_engine(seed, i);
    SimPath p;
    if (cfg.scheme == Scheme::lamperti) {
        const SimulatedJumps jumps(psi.triplet(), cfg.levy.small_jump_cutoff, psi.options());
        p = simulate_lamperti_path(z, psi.triplet(), jumps, cfg.levy, grid, classify_regime(psi).hits_zero, rng);
    } else {
        const SdeModel model(psi, cfg.sde.small_jump_cutoff);
        SdeEventLog log;
        p = simulate_sde_path(z, model, cfg.sde, grid, rng, &log);
        write_text((dir / ("events_" + std::string(stem) + ".csv")).string(), events_csv(log));
    }
    p.provenance.seed = seed;
    p.provenance.path_index = i;
    p.provenance.config_digest = digest(config_text(cfg));
    write_text((dir / ("path_" + std::string(stem) + ".csv")).string(), path_csv(p.times, p.values));
    write_text((dir / ("path_" + std::string(stem) + ".json")).string(),
               path_sidecar(p, digest(canonical_text(psi.triplet()))).dump(2) + "\n");
}

/// Runs the command line; returns the process exit code (0 pass, 1 fail, 2 invalid input or ensemble).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Moments and simulation of positive self-similar Markov processes", "pssmp"};
    app.require_subcommand(1);

    std::string model;
    std::uint64_t seed = 0;
    std::string out_path;

    // psi
    std::vector<double> lambdas{1.0, 2.0, 3.0};
    auto* psi_cmd = app.add_subcommand("psi", "Evaluate the Laplace exponent");
    psi_cmd->add_option("--model", model, "Model file (JSON triplet)")->required()->check(CLI::ExistingFile);
    psi_cmd->add_option("--lambda", lambdas, "Comma-separated lambda values >= 0")->delimiter(',');
    psi_cmd->add_option("--out", out_path, "Also write the lambda,psi table to this CSV file");

    // moments
    std::vector<double> zs{1.0};
    std::vector<double> times{1.0};
    int n_max = 3;
    std::string mode = "closed";
    std::string format = "csv";
    auto* mom_cmd = app.add_subcommand("moments", "Exact entire moments E_z(Z_t^n)");
    mom_cmd->add_option("--model", model, "Model file (JSON triplet)")->required()->check(CLI::ExistingFile);
    mom_cmd->add_option("--z", zs, "Comma-separated initial states >= 0")->delimiter(',')->capture_default_str();
    mom_cmd->add_option("--times", times, "Comma-separated times >= 0")->delimiter(',')->capture_default_str();
    mom_cmd->add_option("--n-max", n_max, "Largest order n")->check(CLI::Range(1, 170))->capture_default_str();
    mom_cmd->add_option("--mode", mode, "Closed form or recursion")
        ->check(CLI::IsMember({"closed", "recursion"}))
        ->capture_default_str();
    mom_cmd->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    mom_cmd->add_option("--out", out_path, "Output file (standard output when omitted)");

    // simulate
    SimFlags sim;
    double z = 1.0;
    double horizon = 1.0;
    long paths = 1000;
    int grid_points = 100;
    long dump = 10;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate an ensemble and dump paths");
    sim_cmd->add_option("--model", model, "Model file (JSON triplet)")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--z", z, "Initial state")->check(CLI::NonNegativeNumber)->capture_default_str();
    sim_cmd->add_option("--horizon", horizon, "Final time")->check(CLI::PositiveNumber)->capture_default_str();
    sim_cmd->add_option("--paths", paths, "Number of paths")->check(CLI::Range(1L, 1L << 40))->capture_default_str();
    sim_cmd->add_option("--seed", seed, "Master seed (required)")->required();
    sim_cmd->add_option("--out", out_path, "Output directory")->required();
    sim_cmd->add_option("--grid", grid_points, "Output intervals on [0, horizon]")
        ->check(CLI::Range(1, 1000000))
        ->capture_default_str();
    sim_cmd->add_option("--dump", dump, "Number of paths written to disk")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    add_sim_flags(sim_cmd, sim, true);
    sim_cmd->get_option("--scheme")->required();

    // verify
    SimFlags ver;
    std::string suite;
    double vz = 1.0;
    std::vector<double> vtimes{1.0};
    int vn_max = 3;
    long vpaths = 10000;
    double k = 4.0;
    std::vector<double> cs{0.5, 2.0, 10.0};
    int order = 2;
    double vhorizon = 1.0;
    auto* ver_cmd = app.add_subcommand("verify", "Run a verification suite; exit 0 pass, 1 fail, 2 invalid");
    ver_cmd->add_option("--model", model, "Model file (JSON triplet)")->required()->check(CLI::ExistingFile);
    ver_cmd->add_option("--suite", suite, "Which battery to run")
        ->required()
        ->check(CLI::IsMember({"moments", "scaling", "martingale", "cross"}));
    ver_cmd->add_option("--seed", seed, "Master seed (required)")->required();
    ver_cmd->add_option("--out", out_path, "Write the JSON report here");
    ver_cmd->add_option("--z", vz, "Initial state")->check(CLI::NonNegativeNumber)->capture_default_str();
    ver_cmd->add_option("--times", vtimes, "Comma-separated times (moments, cross, scaling)")
        ->delimiter(',')
        ->capture_default_str();
    ver_cmd->add_option("--n-max", vn_max, "Largest order n")->check(CLI::Range(1, 170))->capture_default_str();
    ver_cmd->add_option("--paths", vpaths, "Paths per ensemble")->check(CLI::Range(1L, 1L << 40))->capture_default_str();
    ver_cmd->add_option("--k", k, "Verdict threshold on |z-score|")->check(CLI::PositiveNumber)->capture_default_str();
    ver_cmd->add_option("--c", cs, "Scaling factors (scaling suite)")->delimiter(',')->capture_default_str();
    ver_cmd->add_option("--n", order, "Power n (martingale suite)")->check(CLI::NonNegativeNumber)->capture_default_str();
    ver_cmd->add_option("--horizon", vhorizon, "Final time (martingale suite)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_sim_flags(ver_cmd, ver, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        if (psi_cmd->parsed()) {
            const LaplaceExponent psi = load_model(model);
            for (double l : lambdas) {
                if (!(l >= 0.0)) throw PreconditionError("--lambda values must be >= 0");
            }
            const std::string table = psi_output(psi, lambdas);
            out << table << psi_notes(psi);
            if (!out_path.empty()) write_text(out_path, table);
            return kExitPass;
        }

        if (mom_cmd->parsed()) {
            const LaplaceExponent psi = load_model(model);
            require_a2(psi);
            const MomentTable table = exact_moment_table(
                psi, n_max, times, zs, mode == "closed" ? MomentMode::closed : MomentMode::recursion);
            const std::string text = format == "csv" ? moment_table_csv(table) : to_json(table).dump(2) + "\n";
            if (out_path.empty()) {
                out << text;
            } else {
                write_text(out_path, text);
            }
            return kExitPass;
        }

        if (sim_cmd->parsed()) {
            const LaplaceExponent psi = load_model(model);
            require_a2(psi);
            const SimulationConfig cfg = sim.config();
            const std::vector<double> grid = output_grid(horizon, grid_points);
            Ensemble e;
            try {
                e = run_ensemble(psi, z, grid, paths, cfg, seed);
            } catch (const InvalidEnsemble& ex) {
                err << "error: " << ex.what() << "\n";
                return kExitFail;
            }
            const std::filesystem::path dir(out_path);
            std::filesystem::create_directories(dir);
            const long n_dump = std::min(dump, paths);
            for (long i = 0; i < n_dump; ++i) dump_path(dir, psi, z, grid, cfg, seed, static_cast<std::size_t>(i));

            const std::vector<double> final_values = power_samples(e, grid.size() - 1, 1);
            const McEstimate mean = sample_mean(final_values);
            double variance = 0.0;
            if (mean.standard_error != 0.0 && final_values.size() > 1) {
                for (double x : final_values) variance += (x - mean.value) * (x - mean.value);
                variance /= static_cast<double>(final_values.size() - 1);
            }
            long absorbed = 0;
            for (std::size_t i = 0; i < e.values.size(); ++i) {
                if (!e.aborted[i] && e.absorption_times[i] <= horizon) ++absorbed;
            }
            nlohmann::json summary = {
                {"z", json_number(z)},
                {"horizon", json_number(horizon)},
                {"mean", json_number(mean.value)},
                {"variance", json_number(final_values.size() > 1 ? variance : std::nan(""))},
                {"standard_error", json_number(mean.standard_error)},
                {"absorption_fraction", json_number(static_cast<double>(absorbed) / static_cast<double>(e.usable()))},
                {"dumped_paths", n_dump},
                {"ensemble", to_json(e.meta)},
            };
            write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
            out << summary.dump(2) << "\n";
            return kExitPass;
        }

        if (ver_cmd->parsed()) {
            const LaplaceExponent psi = load_model(model);
            require_a2(psi);
            const SimulationConfig cfg = ver.config();
            nlohmann::json report;
            int code = kExitPass;
            try {
                if (suite == "scaling") {
                    double worst = 0.0;
                    nlohmann::json rows = nlohmann::json::array();
                    for (double c : cs) {
                        for (double t : vtimes) {
                            const double r = scaling_check(psi, vz, t, c, vn_max);
                            worst = std::max(worst, r);
                            rows.push_back({{"c", json_number(c)}, {"t", json_number(t)}, {"residual", json_number(r)}});
                        }
                    }
                    constexpr double tol = 1e-12;
                    code = worst <= tol ? kExitPass : kExitFail;
                    report = {{"suite", "scaling"}, {"z", json_number(vz)},         {"n_max", vn_max},
                              {"rows", rows},       {"max_residual", json_number(worst)},
                              {"tolerance", tol},   {"exit_code", code}};
                    out << "scaling residual " << format_double(worst) << " (tolerance 1e-12): "
                        << (code == kExitPass ? "pass" : "fail") << "\n";
                } else if (suite == "moments") {
                    const MomentEstimates est = estimate_moments(psi, vz, vtimes, vn_max, vpaths, cfg, seed);
                    const ComparisonReport rep = compare_to_formula(est, psi, k);
                    report = to_json(rep);
                    code = rep.exit_code();
                    out << human_table(rep);
                } else if (suite == "martingale") {
                    const MartingaleReport rep = martingale_zero_mean_test(psi, vz, order, vhorizon, vpaths, cfg, seed, k);
                    report = to_json(rep);
                    code = rep.exit_code();
                    out << human_table(rep);
                } else {
                    SimulationConfig lc = cfg;
                    lc.scheme = Scheme::lamperti;
                    SimulationConfig sc = cfg;
                    sc.scheme = Scheme::sde;
                    const CrossReport rep = cross_validate(psi, vz, vtimes, vn_max, vpaths, lc, sc, seed, k);
                    report = to_json(rep);
                    code = rep.exit_code();
                    out << human_table(rep);
                }
            } catch (const InvalidEnsemble& ex) {
                err << "error: " << ex.what() << "\n";
                report = {{"suite", suite}, {"exit_code", kExitInvalid}, {"error", ex.what()}};
                code = kExitInvalid;
            }
            if (!out_path.empty()) write_text(out_path, report.dump(2) + "\n");
            out << "exit " << code << "\n";
            return code;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}

}  // namespace pssmp::cli
