#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "test_support.hpp"
#include "transport/simulation.hpp"

using namespace transport;

namespace {

std::vector<std::vector<double>> flat_sample(std::size_t m, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> s(m, std::vector<double>(p));
    for (auto& row : s)
        for (auto& v : row) v = rng.normal();
    return s;
}

ScenarioConfig small_scenario() {
    ScenarioConfig cfg;
    cfg.n = 2000;
    cfg.n_trial_total = 500;
    return cfg;
}

}  // namespace

TEST_CASE("solve_intercept recovers closed-form intercepts with zero slopes") {
    const auto sample = flat_sample(2000, 3, 5);
    const std::vector<double> zero = {0.0, 0.0, 0.0};
    CHECK_THAT(solve_intercept(1000.0, zero, sample), Catch::Matchers::WithinAbs(0.0, 0.01));
    CHECK_THAT(solve_intercept(500.0, zero, sample),
               Catch::Matchers::WithinAbs(std::log(1.0 / 3.0), 0.01));
    CHECK_THROWS_AS(solve_intercept(0.0, zero, sample), SolverError);
    CHECK_THROWS_AS(solve_intercept(2000.0, zero, sample), SolverError);
}

TEST_CASE("calibrated cohorts hit the participant count and trial shares") {
    ScenarioConfig cfg;
    cfg.n = 100000;
    cfg.n_trial_total = 5000;
    cfg.balanced = false;
    const auto cal = calibrate_scenario(cfg, 31, 400000);
    const auto cohort = generate_cohort(cfg, cal, 33);

    const double nt = static_cast<double>(cfg.n_trial_total);
    const double sd_total = std::sqrt(nt * (1.0 - nt / static_cast<double>(cfg.n)));
    const auto participants = cohort.table.n() - cohort.table.n_target();
    CHECK(std::abs(static_cast<double>(participants) - nt) < 4.0 * sd_total + 0.002 * nt);

    std::map<int, std::size_t> by_trial;
    for (const auto& r : cohort.table.rows())
        if (r.participation()) ++by_trial[r.trial_id];
    const auto shares = cfg.trial_shares();
    for (int s = 1; s <= 3; ++s) {
        const double expect = shares[s - 1] * static_cast<double>(participants);
        const double sd = std::sqrt(expect * (1.0 - shares[s - 1]));
        CHECK(std::abs(static_cast<double>(by_trial[s]) - expect) < 4.0 * sd + 0.005 * expect);
    }
}

TEST_CASE("generated covariates match the equicorrelated moments") {
    ScenarioConfig cfg;
    cfg.n = 100000;
    cfg.n_trial_total = 5000;
    const auto cal = calibrate_scenario(cfg, 37, 200000);
    const auto cohort = generate_cohort(cfg, cal, 39);

    const std::size_t n = cohort.table.n();
    std::vector<double> mean(3, 0.0);
    for (const auto& r : cohort.table.rows())
        for (int j = 0; j < 3; ++j) mean[j] += r.covariates[j];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (int j = 0; j < 3; ++j) CHECK_THAT(mean[j], Catch::Matchers::WithinAbs(0.0, 0.015));

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& r : cohort.table.rows())
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                cov(j, k) += (r.covariates[j] - mean[j]) * (r.covariates[k] - mean[k]);
    cov /= static_cast<double>(n - 1);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
            CHECK_THAT(cov(j, k), Catch::Matchers::WithinAbs(j == k ? 1.0 : 0.5, 0.02));
}

TEST_CASE("observed outcomes satisfy consistency with the potential outcomes") {
    const auto cfg = small_scenario();
    const auto cal = calibrate_scenario(cfg, 41, 200000);
    const auto cohort = generate_cohort(cfg, cal, 43);
    for (std::size_t i = 0; i < cohort.table.n(); ++i) {
        const auto& r = cohort.table.rows()[i];
        if (!r.participation()) {
            CHECK_FALSE(r.outcome.has_value());
            continue;
        }
        const double expect = (*r.treatment == 1) ? cohort.y1[i] : cohort.y0[i];
        CHECK(*r.outcome == expect);
    }
}

TEST_CASE("written cohort CSV carries no potential-outcome columns") {
    const auto cfg = small_scenario();
    const auto cal = calibrate_scenario(cfg, 47, 200000);
    const auto cohort = generate_cohort(cfg, cal, 49);
    test_support::TempDir tmp;
    const auto path = tmp.file("cohort.csv");
    write_csv(cohort.table, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "trial,treatment,outcome,x1,x2,x3");
}

TEST_CASE("treatment assignment frequencies match the mechanism") {
    ScenarioConfig cfg;
    cfg.n = 50000;
    cfg.n_trial_total = 15000;
    cfg.txam_varies = true;
    const auto cal = calibrate_scenario(cfg, 53, 200000);
    const auto cohort = generate_cohort(cfg, cal, 57);
    std::map<int, std::size_t> n_s, treated;
    for (const auto& r : cohort.table.rows()) {
        if (!r.participation()) continue;
        ++n_s[r.trial_id];
        if (*r.treatment == 1) ++treated[r.trial_id];
    }
    const auto probs = cfg.assignment_probs();
    for (int s = 1; s <= 3; ++s) {
        const double p = probs[s - 1];
        const double frac = static_cast<double>(treated[s]) / static_cast<double>(n_s[s]);
        const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n_s[s]));
        CHECK(std::abs(frac - p) < 4.0 * sd);
    }
}

TEST_CASE("true_psi is exact for covariate-free outcome means") {
    ScenarioConfig cfg = small_scenario();
    cfg.theta1 = {0.5, 0.0, 0.0, 0.0};
    ScenarioCalibration cal;
    cal.beta0 = -1.0;
    const auto t = true_psi(cfg, cal, 1, 50000, 59);
    CHECK_THAT(t.value, Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("true_psi replicates agree within the reported standard error") {
    const auto cfg = small_scenario();
    ScenarioCalibration cal;
    cal.beta0 = -1.2;
    const auto t1 = true_psi(cfg, cal, 0, 2000000, 61);
    const auto t2 = true_psi(cfg, cal, 0, 2000000, 67);
    CHECK(t1.std_error < 0.002);
    const double gap_sd = std::hypot(t1.std_error, t2.std_error);
    CHECK(std::abs(t1.value - t2.value) < 5.0 * gap_sd);
}

TEST_CASE("run_grid is reproducible and worker-count invariant") {
    std::vector<ScenarioConfig> grid = {small_scenario()};
    grid[0].txam_varies = true;
    GridSettings settings;
    settings.replications = 30;
    settings.master_seed = 71;
    settings.calibration_draws = 100000;
    settings.oracle_draw_size = 100000;
    settings.workers = 1;
    const auto specs = default_estimator_specs();
    const auto s1 = run_grid(grid, specs, settings);
    const auto s2 = run_grid(grid, specs, settings);
    settings.workers = 4;
    const auto s3 = run_grid(grid, specs, settings);
    for (const auto& name : {"psi_aug", "psi_g", "psi_w"}) {
        for (int a : {0, 1}) {
            const auto& c1 = s1.scenarios[0].cells.at(name).at(a);
            const auto& c2 = s2.scenarios[0].cells.at(name).at(a);
            const auto& c3 = s3.scenarios[0].cells.at(name).at(a);
            CHECK(c1.mean == c2.mean);
            CHECK(c1.mean == c3.mean);
            CHECK(c1.variance == c3.variance);
            CHECK(c1.bias == c3.bias);
        }
    }
}

TEST_CASE("summary CSV layout") {
    std::vector<ScenarioConfig> grid = {small_scenario()};
    GridSettings settings;
    settings.replications = 20;
    settings.master_seed = 73;
    settings.calibration_draws = 100000;
    settings.oracle_draw_size = 100000;
    const auto summary = run_grid(grid, default_estimator_specs(), settings);
    test_support::TempDir tmp;
    const auto path = tmp.file("bias.csv");
    write_summary_csv(summary, {"psi_aug", "psi_g", "psi_w"}, "bias", path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "a,n,n_trial_total,balanced,txam_varies,psi_aug,psi_g,psi_w");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 2);  // one per arm for the single scenario
}

TEST_CASE("desk and full grids have the documented shapes") {
    CHECK(desk_scenarios().size() == 8);
    CHECK(full_scenarios().size() == 24);
    for (const auto& c : desk_scenarios()) CHECK(c.n == 10000);
}
