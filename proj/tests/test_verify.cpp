#include <gtest/gtest.h>

#include <cmath>

#include "pssmp/report_io.hpp"
#include "pssmp/verify.hpp"

using namespace pssmp;

namespace {

LaplaceExponent make(double g, double s2, std::vector<Atom> atoms = {}, double q = 0.0) {
    return LaplaceExponent({g, s2, JumpMeasure::atoms(std::move(atoms)), q});
}

SimulationConfig config(Scheme s, double dt = 1e-3) {
    SimulationConfig c;
    c.scheme = s;
    c.levy.dt = dt;
    c.sde.dt = dt;
    return c;
}

MomentEstimates one_cell(double value, double se) {
    MomentEstimates e;
    e.table.orders = {1};
    e.table.times = {2.0};
    e.table.initial_states = {1.0};
    e.table.cells.push_back({1, 2.0, 1.0, value, CellKind::estimated, se, 100});
    return e;
}

}  // namespace

TEST(SampleMean, StandardErrorAndDegenerateCases) {
    const McEstimate a = sample_mean({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(a.value, 2.5);
    // sample sd = sqrt(5/3), SE = sd / 2
    EXPECT_DOUBLE_EQ(a.standard_error, std::sqrt(5.0 / 3.0) / 2.0);
    const McEstimate b = sample_mean(std::vector<double>(7, 0.1));
    EXPECT_EQ(b.value, 0.1);
    EXPECT_EQ(b.standard_error, 0.0);
    EXPECT_TRUE(std::isnan(sample_mean({3.0}).standard_error));
}

TEST(EstimateMoments, DeterministicModelBothSchemes) {
    const LaplaceExponent psi = make(1.0, 0.0);
    for (Scheme s : {Scheme::lamperti, Scheme::sde}) {
        const MomentEstimates e = estimate_moments(psi, 1.0, {2.0}, 2, 50, config(s), 7);
        const MomentCell& c = e.table.at(1, 2.0, 1.0);
        EXPECT_NEAR(c.value, 3.0, 1e-9);
        EXPECT_EQ(c.standard_error, 0.0);
        EXPECT_EQ(c.kind, CellKind::estimated);
        EXPECT_EQ(c.paths, 50);
        const ComparisonReport r = compare_to_formula(e, psi);
        EXPECT_EQ(r.exit_code(), kExitPass);
        for (const auto& row : r.rows) EXPECT_EQ(row.verdict, Verdict::pass);
    }
}

TEST(EstimateMoments, SinglePathIsDegenerate) {
    const LaplaceExponent psi = make(1.0, 1.0);
    const MomentEstimates e = estimate_moments(psi, 1.0, {1.0}, 2, 1, config(Scheme::sde), 1);
    EXPECT_TRUE(std::isnan(e.table.cells[0].standard_error));
    const ComparisonReport r = compare_to_formula(e, psi);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.rows[0].verdict, Verdict::suppressed);
    EXPECT_EQ(r.exit_code(), kExitInvalid);
}

TEST(EstimateMoments, Preconditions) {
    EXPECT_THROW(estimate_moments(make(-1.0, 0.0), 1.0, {1.0}, 1, 10, config(Scheme::sde), 1), PreconditionError);
    EXPECT_THROW(estimate_moments(make(1.0, 0.0), 0.0, {1.0}, 1, 10, config(Scheme::lamperti), 1), PreconditionError);
    EXPECT_THROW(estimate_moments(make(1.0, 0.0), 1.0, {1.0, 0.5}, 1, 10, config(Scheme::sde), 1), PreconditionError);
}

TEST(EstimateMoments, AbortFractionAboveOnePercentInvalidates) {
    // Drift 10 from z = 1 passes the cap of 5 on every path.
    SimulationConfig c = config(Scheme::sde);
    c.sde.state_cap = 5.0;
    EXPECT_THROW(estimate_moments(make(10.0, 0.0), 1.0, {1.0}, 1, 20, c, 1), InvalidEnsemble);
}

TEST(EstimateMoments, SameSeedIsBitIdenticalAcrossWorkerCounts) {
    const LaplaceExponent psi = make(1.0, 1.0, {{-0.5, 1.0}}, 0.2);
    for (Scheme s : {Scheme::lamperti, Scheme::sde}) {
        SimulationConfig a = config(s, 1e-2);
        SimulationConfig b = a;
        b.workers = 3;
        const MomentEstimates ea = estimate_moments(psi, 1.0, {0.5, 1.0}, 3, 300, a, 99);
        const MomentEstimates eb = estimate_moments(psi, 1.0, {0.5, 1.0}, 3, 300, b, 99);
        EXPECT_EQ(moment_table_csv(ea.table), moment_table_csv(eb.table));
        const MomentEstimates ec = estimate_moments(psi, 1.0, {0.5, 1.0}, 3, 300, a, 100);
        EXPECT_NE(moment_table_csv(ea.table), moment_table_csv(ec.table));
    }
}

TEST(EstimateMoments, BrownianSecondMomentWithinThreeSE) {
    // Ψ(λ) = λ + λ²; exact column from the closed form.
    const LaplaceExponent psi = make(1.0, 2.0);
    const MomentEstimates e = estimate_moments(psi, 1.0, {1.0}, 2, 20000, config(Scheme::sde, 2e-3), 5);
    const ComparisonReport r = compare_to_formula(e, psi, 3.0);
    for (const auto& row : r.rows) EXPECT_LE(std::abs(row.z_score), 3.0) << "n=" << row.n;
}

TEST(CompareToFormula, Verdicts) {
    // Ψ(1) = 3 drift: E_1 Z_2 = 7
    const LaplaceExponent psi = make(3.0, 0.0);
    const ComparisonReport a = compare_to_formula(one_cell(7.0, 0.1), psi, 4.0);
    EXPECT_EQ(a.rows[0].z_score, 0.0);
    EXPECT_EQ(a.rows[0].verdict, Verdict::pass);
    const ComparisonReport b = compare_to_formula(one_cell(7.5, 0.1), psi, 4.0);
    EXPECT_NEAR(b.rows[0].z_score, 5.0, 1e-12);
    EXPECT_EQ(b.rows[0].verdict, Verdict::fail);
    EXPECT_EQ(b.exit_code(), kExitFail);
    const ComparisonReport c = compare_to_formula(one_cell(7.0, 0.0), psi, 4.0);
    EXPECT_EQ(c.rows[0].verdict, Verdict::pass);
    const ComparisonReport d = compare_to_formula(one_cell(7.01, 0.0), psi, 4.0);
    EXPECT_EQ(d.rows[0].verdict, Verdict::hard_fail);
    EXPECT_EQ(d.exit_code(), kExitFail);
    EXPECT_EQ(a.recursion_gap, 0.0);
}

TEST(CompareToFormula, VerdictsDependOnFullPrecisionOnly) {
    // 4.0000000001 SE away fails at k = 4 even though it prints as 4.000 in the table.
    const LaplaceExponent psi = make(3.0, 0.0);
    const ComparisonReport r = compare_to_formula(one_cell(7.0 + 0.40000000001, 0.1), psi, 4.0);
    EXPECT_EQ(r.rows[0].verdict, Verdict::fail);
    EXPECT_NE(human_table(r).find("4.000"), std::string::npos);
}

TEST(ScalingCheck, Examples) {
    const LaplaceExponent any = make(0.7, 1.3, {{-0.4, 2.0}}, 0.1);
    EXPECT_EQ(scaling_check(any, 1.0, 1.0, 1.0, 8), 0.0);
    const LaplaceExponent unit = make(1.0, 0.0);
    EXPECT_LE(scaling_check(unit, 1.0, 1.0, 2.0, 3), 1e-12);
    EXPECT_NEAR(entire_moment(unit, {0.5, 1.0, 3}), 1.5 * 1.5 * 1.5, 1e-15);
    for (double c : {0.5, 2.0, 10.0}) EXPECT_LE(scaling_check(any, 0.0, 1.0, c, 10), 1e-12);
    EXPECT_THROW(scaling_check(any, 1.0, 1.0, 0.0, 3), PreconditionError);
}

TEST(MartingaleTest, ComponentsVanishWhereTheyShould) {
    SimulationConfig c = config(Scheme::sde, 1e-2);
    const MartingaleReport no_sigma = martingale_zero_mean_test(make(1.0, 0.0, {{-0.5, 1.0}}), 1.0, 2, 1.0, 200, c, 3);
    EXPECT_TRUE(no_sigma.components[0].identically_zero);
    EXPECT_EQ(no_sigma.components[0].z_score, 0.0);
    EXPECT_FALSE(no_sigma.components[1].identically_zero);
    EXPECT_TRUE(no_sigma.components[2].identically_zero);

    const MartingaleReport no_jumps = martingale_zero_mean_test(make(1.0, 1.0), 1.0, 2, 1.0, 200, c, 3);
    EXPECT_TRUE(no_jumps.components[1].identically_zero);
    EXPECT_TRUE(no_jumps.components[2].identically_zero);
    EXPECT_FALSE(no_jumps.components[0].identically_zero);
}

TEST(MartingaleTest, FullModelMeansWithinThreeSE) {
    const LaplaceExponent psi = make(2.0, 0.25, {{-0.5, 1.0}}, 0.5);
    const MartingaleReport r = martingale_zero_mean_test(psi, 1.0, 2, 1.0, 4000, config(Scheme::sde, 2e-3), 8);
    for (const auto& c : r.components) EXPECT_LE(std::abs(c.z_score), 3.0) << c.name;
    EXPECT_EQ(r.exit_code(), kExitPass);
}

TEST(CrossValidate, DeterministicModelAllZero) {
    const LaplaceExponent psi = make(1.0, 0.0);
    const CrossReport r =
        cross_validate(psi, 1.0, {0.5, 1.0}, 2, 20, config(Scheme::lamperti), config(Scheme::sde), 4);
    for (const auto& row : r.rows) {
        EXPECT_EQ(row.welch, 0.0);
        EXPECT_EQ(row.verdict, Verdict::pass);
    }
    EXPECT_EQ(r.exit_code(), kExitPass);
}

TEST(CrossValidate, SameSchemeSameSeedIsIdentical) {
    const LaplaceExponent psi = make(1.0, 2.0);
    const MomentEstimates a = estimate_moments(psi, 1.0, {1.0}, 2, 500, config(Scheme::sde, 1e-2), 77);
    const MomentEstimates b = estimate_moments(psi, 1.0, {1.0}, 2, 500, config(Scheme::sde, 1e-2), 77);
    for (std::size_t i = 0; i < a.table.cells.size(); ++i) {
        const McEstimate x{a.table.cells[i].value, a.table.cells[i].standard_error, 500};
        const McEstimate y{b.table.cells[i].value, b.table.cells[i].standard_error, 500};
        EXPECT_EQ(welch_statistic(x, y), 0.0);
    }
}

TEST(CrossValidate, WelchStatistic) {
    EXPECT_DOUBLE_EQ(welch_statistic({1.0, 0.3, 10}, {0.0, 0.4, 10}), 2.0);
    EXPECT_EQ(welch_statistic({1.0, 0.0, 10}, {1.0, 0.0, 10}), 0.0);
    EXPECT_TRUE(std::isinf(welch_statistic({1.0, 0.0, 10}, {2.0, 0.0, 10})));
}

TEST(CrossValidate, RequiresPositiveStart) {
    const LaplaceExponent psi = make(1.0, 0.0);
    EXPECT_THROW(cross_validate(psi, 0.0, {1.0}, 1, 10, config(Scheme::lamperti), config(Scheme::sde), 1),
                 PreconditionError);
}

TEST(Pipelines, DeterministicModelAgreesEverywhere) {
    // exact, recursion and both simulators within 1e-6
    const LaplaceExponent psi = make(1.7, 0.0);
    for (double t : {0.3, 1.0, 2.5}) {
        for (int n = 1; n <= 3; ++n) {
            const double exact = entire_moment(psi, {1.2, t, n});
            EXPECT_NEAR(moment_recursion(psi, {1.2, t, n}), exact, 1e-12 * exact);
            for (Scheme s : {Scheme::lamperti, Scheme::sde}) {
                const MomentEstimates e = estimate_moments(psi, 1.2, {t}, 3, 3, config(s), 1);
                EXPECT_NEAR(e.table.at(n, t, 1.2).value, exact, 1e-6 * exact);
            }
        }
    }
}

TEST(Reports, JsonShapes) {
    const LaplaceExponent psi = make(1.0, 0.0);
    const MomentEstimates e = estimate_moments(psi, 1.0, {1.0}, 2, 5, config(Scheme::sde), 3);
    const auto j = to_json(compare_to_formula(e, psi));
    EXPECT_EQ(j["suite"], "moments");
    EXPECT_EQ(j["exit_code"], 0);
    EXPECT_EQ(j["rows"].size(), 2u);
    EXPECT_EQ(j["ensemble"]["scheme"], "sde-euler-thinning-v1");
    EXPECT_EQ(j["ensemble"]["seed"], 3u);
    const auto t = to_json(exact_moment_table(psi, 2, {0.0, 1.0}, {1.0}));
    EXPECT_EQ(t["cells"].size(), 4u);
    EXPECT_EQ(t["cells"][0]["kind"], "exact");
    EXPECT_EQ(json_number(std::nan("")), "nan");
    EXPECT_EQ(json_number(-kInf), "-inf");
    const std::string csv = moment_table_csv(exact_moment_table(psi, 1, {1.0}, {1.0}));
    EXPECT_EQ(csv, "n,t,z,value,kind,standard_error,paths\n1,1,1,2,exact,0,0\n");
}
