#ifndef TRANSPORT_SIMULATION_HPP
#define TRANSPORT_SIMULATION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "transport/data.hpp"
#include "transport/errors.hpp"
#include "transport/estimators.hpp"
#include "transport/parallel.hpp"
#include "transport/rng.hpp"

namespace transport {

// One synthetic-data scenario: equicorrelated normal covariates, logistic
// selection into the trial pool, census of the remainder as the target
// sample, multinomial allocation to three trials, marginally randomized
// treatment, and linear potential-outcome models.
struct ScenarioConfig {
    std::size_t n = 10000;
    std::size_t n_trial_total = 1000;
    bool balanced = true;
    bool txam_varies = false;

    std::size_t covariate_dim = 3;
    double correlation = 0.5;
    std::vector<double> selection_slopes = {std::log(2.0), std::log(2.0), std::log(2.0)};
    std::vector<double> gamma_slopes = {std::log(1.5), std::log(1.5), std::log(1.5)};
    std::vector<double> zeta_slopes = {std::log(0.75), std::log(0.75), std::log(0.75)};
    std::vector<double> theta0 = {1.5, 1.0, 1.0, 1.0};
    std::vector<double> theta1 = {0.5, -1.0, -1.0, -1.0};

    // per-trial P(A=1|S=s); constant 1/2 unless the assignment mechanism varies
    std::vector<double> assignment_probs() const {
        if (txam_varies) return {0.5, 1.0 / 3.0, 2.0 / 3.0};
        return {0.5, 0.5, 0.5};
    }
    // trial-size shares: equal, or 4:2:1
    std::vector<double> trial_shares() const {
        if (balanced) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        return {4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0};
    }

    void validate() const {
        if (n_trial_total == 0 || n_trial_total >= n)
            throw ConfigError("n_trial_total must be in (0, n)");
        if (selection_slopes.size() != covariate_dim ||
            gamma_slopes.size() != covariate_dim || zeta_slopes.size() != covariate_dim)
            throw ConfigError("slope vectors must match covariate_dim");
        if (theta0.size() != covariate_dim + 1 || theta1.size() != covariate_dim + 1)
            throw ConfigError("outcome coefficient vectors must have length covariate_dim + 1");
        if (!(correlation > -1.0 && correlation < 1.0))
            throw ConfigError("correlation must be in (-1, 1)");
    }

    std::string key() const {
        std::ostringstream os;
        os << "n" << n << "_t" << n_trial_total << (balanced ? "_bal" : "_unbal")
           << (txam_varies ? "_vary" : "_const");
        return os.str();
    }
};

// Cholesky factor of the equicorrelated covariance; fixed factorization so
// draws are seed-reproducible.
inline Eigen::MatrixXd covariate_cholesky(std::size_t p, double rho) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(p, p, rho);
    sigma.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw SolverError("covariance not positive definite");
    return llt.matrixL();
}

inline std::vector<double> draw_covariates(Rng& rng, const Eigen::MatrixXd& chol) {
    const std::size_t p = chol.rows();
    std::vector<double> z(p);
    for (std::size_t j = 0; j < p; ++j) z[j] = rng.normal();
    std::vector<double> x(p, 0.0);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) x[i] += chol(i, j) * z[j];
    return x;
}

// Bisection for the selection intercept: expected participant count on the
// covariate sample matches target_count within 0.5.
inline double solve_intercept(double target_count, const std::vector<double>& slopes,
                              const std::vector<std::vector<double>>& sample) {
    if (!(target_count > 0.0 && target_count < static_cast<double>(sample.size())))
        throw SolverError("target count must be inside (0, sample size)");
    std::vector<double> lp(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < slopes.size(); ++j) s += slopes[j] * sample[i][j];
        lp[i] = s;
    }
    auto expected = [&](double b0) {
        double tot = 0.0;
        for (double s : lp) tot += expit(b0 + s);
        return tot;
    };
    double lo = -50.0, hi = 50.0;
    if (expected(lo) > target_count || expected(hi) < target_count)
        throw SolverError("intercept bracket failure");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = expected(mid);
        if (std::abs(c - target_count) <= 0.5) return mid;
        (c < target_count ? lo : hi) = mid;
    }
    throw SolverError("intercept bisection did not converge");
}

struct ScenarioCalibration {
    double beta0 = 0.0;
    double gamma0 = 0.0;
    double zeta0 = 0.0;
};

namespace detail {

// expected trial shares among participants, weighted by the selection
// probability of each calibration row
inline std::array<double, 3> expected_shares(double gamma0, double zeta0, double beta0,
                                             const ScenarioConfig& cfg,
                                             const std::vector<std::vector<double>>& sample) {
    double w_tot = 0.0, s2 = 0.0, s3 = 0.0;
    for (const auto& x : sample) {
        double lp_sel = beta0, lp_g = gamma0, lp_z = zeta0;
        for (std::size_t j = 0; j < cfg.covariate_dim; ++j) {
            lp_sel += cfg.selection_slopes[j] * x[j];
            lp_g += cfg.gamma_slopes[j] * x[j];
            lp_z += cfg.zeta_slopes[j] * x[j];
        }
        const double w = expit(lp_sel);
        const double mx = std::max({0.0, lp_g, lp_z});
        const double d0 = std::exp(-mx), dg = std::exp(lp_g - mx), dz = std::exp(lp_z - mx);
        const double denom = d0 + dg + dz;
        w_tot += w;
        s2 += w * dg / denom;
        s3 += w * dz / denom;
    }
    return {1.0 - s2 / w_tot - s3 / w_tot, s2 / w_tot, s3 / w_tot};
}

}  // namespace detail

// Solves beta0 for the participant count, then gamma0/zeta0 coordinate-wise
// for the trial-size shares (each share is monotone in its own intercept).
inline ScenarioCalibration calibrate_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                                              std::size_t calibration_draws = 1000000) {
    cfg.validate();
    const Eigen::MatrixXd chol = covariate_cholesky(cfg.covariate_dim, cfg.correlation);
    Rng rng(seed);
    std::vector<std::vector<double>> sample(calibration_draws);
    for (auto& x : sample) x = draw_covariates(rng, chol);

    ScenarioCalibration cal;
    const double target = static_cast<double>(cfg.n_trial_total) / static_cast<double>(cfg.n) *
                          static_cast<double>(calibration_draws);
    cal.beta0 = solve_intercept(target, cfg.selection_slopes, sample);

    const auto shares = cfg.trial_shares();
    auto bisect = [&](double& which, int idx, double target_share) {
        double lo = -30.0, hi = 30.0;
        for (int it = 0; it < 100; ++it) {
            which = 0.5 * (lo + hi);
            const auto s = detail::expected_shares(cal.gamma0, cal.zeta0, cal.beta0, cfg, sample);
            const double got = (idx == 1) ? s[1] : s[2];
            if (std::abs(got - target_share) <= 1e-3 * target_share) return;
            (got < target_share ? lo : hi) = which;
        }
        throw SolverError("allocation intercept bisection did not converge");
    };
    for (int round = 0; round < 20; ++round) {
        bisect(cal.gamma0, 1, shares[1]);
        bisect(cal.zeta0, 2, shares[2]);
        const auto s = detail::expected_shares(cal.gamma0, cal.zeta0, cal.beta0, cfg, sample);
        if (std::abs(s[1] - shares[1]) <= 1e-3 * shares[1] &&
            std::abs(s[2] - shares[2]) <= 1e-3 * shares[2])
            break;
    }
    return cal;
}

// One generated cohort; potential outcomes are kept apart from the
// estimator-facing table and exist only for truth checks.
struct Cohort {
    ObservationTable table;
    std::vector<double> y0;
    std::vector<double> y1;
};

inline Cohort generate_cohort(const ScenarioConfig& cfg, const ScenarioCalibration& cal,
                              std::uint64_t seed) {
    cfg.validate();
    const Eigen::MatrixXd chol = covariate_cholesky(cfg.covariate_dim, cfg.correlation);
    const auto assign = cfg.assignment_probs();
    Rng rng(seed);

    std::vector<Observation> rows;
    rows.reserve(cfg.n);
    std::vector<double> y0_all, y1_all;
    y0_all.reserve(cfg.n);
    y1_all.reserve(cfg.n);

    for (std::size_t i = 0; i < cfg.n; ++i) {
        Observation obs;
        obs.covariates = draw_covariates(rng, chol);

        double lp_sel = cal.beta0, lp_g = cal.gamma0, lp_z = cal.zeta0;
        double m0 = cfg.theta0[0], m1 = cfg.theta1[0];
        for (std::size_t j = 0; j < cfg.covariate_dim; ++j) {
            const double x = obs.covariates[j];
            lp_sel += cfg.selection_slopes[j] * x;
            lp_g += cfg.gamma_slopes[j] * x;
            lp_z += cfg.zeta_slopes[j] * x;
            m0 += cfg.theta0[j + 1] * x;
            m1 += cfg.theta1[j + 1] * x;
        }

        const bool selected = rng.bernoulli(expit(lp_sel));
        if (selected) {
            const double mx = std::max({0.0, lp_g, lp_z});
            const double d0 = std::exp(-mx), dg = std::exp(lp_g - mx), dz = std::exp(lp_z - mx);
            const double denom = d0 + dg + dz;
            obs.trial_id = 1 + rng.categorical({d0 / denom, dg / denom, dz / denom});
        } else {
            obs.trial_id = 0;
        }

        double u_a = rng.uniform();  // consumed for every row to keep streams aligned
        const double y0 = m0 + rng.normal();
        const double y1 = m1 + rng.normal();
        if (selected) {
            const int a = (u_a < assign[obs.trial_id - 1]) ? 1 : 0;
            obs.treatment = a;
            obs.outcome = a ? y1 : y0;  // consistency
        }
        y0_all.push_back(y0);
        y1_all.push_back(y1);
        rows.push_back(std::move(obs));
    }
    return {ObservationTable::from_rows(std::move(rows)), std::move(y0_all), std::move(y1_all)};
}

struct TruthEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo truth for E[Y^a | R = 0]: fresh covariate draws weighted by
// the non-selection probability.
inline TruthEstimate true_psi(const ScenarioConfig& cfg, const ScenarioCalibration& cal, int a,
                              std::size_t oracle_draw_size, std::uint64_t seed) {
    cfg.validate();
    const auto& theta = (a == 1) ? cfg.theta1 : cfg.theta0;
    const Eigen::MatrixXd chol = covariate_cholesky(cfg.covariate_dim, cfg.correlation);
    Rng rng(seed);
    double w_sum = 0.0, wg_sum = 0.0;
    std::vector<double> w(oracle_draw_size), g(oracle_draw_size);
    for (std::size_t i = 0; i < oracle_draw_size; ++i) {
        const auto x = draw_covariates(rng, chol);
        double lp_sel = cal.beta0;
        double mean = theta[0];
        for (std::size_t j = 0; j < cfg.covariate_dim; ++j) {
            lp_sel += cfg.selection_slopes[j] * x[j];
            mean += theta[j + 1] * x[j];
        }
        w[i] = 1.0 - expit(lp_sel);
        g[i] = mean;
        w_sum += w[i];
        wg_sum += w[i] * g[i];
    }
    TruthEstimate t;
    t.value = wg_sum / w_sum;
    double var = 0.0;
    for (std::size_t i = 0; i < oracle_draw_size; ++i) {
        const double d = w[i] * (g[i] - t.value);
        var += d * d;
    }
    t.std_error = std::sqrt(var) / w_sum;
    return t;
}

struct EstimatorSpec {
    std::string name;
    EstimatorKind kind = EstimatorKind::Augmented;
    NuisanceOptions nuisance;
};

inline std::vector<EstimatorSpec> default_estimator_specs() {
    return {{"psi_aug", EstimatorKind::Augmented, {}},
            {"psi_g", EstimatorKind::GFormula, {}},
            {"psi_w", EstimatorKind::Weighting, {}}};
}

struct SimulationCell {
    double bias = 0.0;
    double variance = 0.0;
    double mean = 0.0;
    std::size_t replications = 0;
};

struct ScenarioResult {
    ScenarioConfig config;
    ScenarioCalibration calibration;
    std::map<int, TruthEstimate> truth;
    // spec name -> arm -> summary
    std::map<std::string, std::map<int, SimulationCell>> cells;
    std::size_t failures = 0;
};

struct SimulationSummary {
    std::vector<ScenarioResult> scenarios;
    std::size_t replications = 0;
    std::uint64_t master_seed = 0;
};

struct GridSettings {
    std::size_t replications = 1000;
    std::uint64_t master_seed = 20240801;
    unsigned workers = 1;
    std::size_t oracle_draw_size = 4000000;
    std::size_t calibration_draws = 1000000;
};

inline ScenarioResult run_scenario(const ScenarioConfig& cfg,
                                   const std::vector<EstimatorSpec>& specs,
                                   const GridSettings& settings, std::uint64_t scenario_seed) {
    cfg.validate();
    ScenarioResult result;
    result.config = cfg;
    // special-purpose streams live above the replicate counter range
    const std::uint64_t aux = std::uint64_t{1} << 32;
    result.calibration =
        calibrate_scenario(cfg, mix_seed(scenario_seed, aux), settings.calibration_draws);
    const std::vector<int> arms = {0, 1};
    for (int a : arms)
        result.truth[a] = true_psi(cfg, result.calibration, a, settings.oracle_draw_size,
                                   mix_seed(scenario_seed, aux + 1 + a));

    const std::size_t reps = settings.replications;
    const std::size_t n_cells = specs.size() * arms.size();
    std::vector<double> values(reps * n_cells, 0.0);
    std::vector<char> ok(reps, 0);

    parallel_for(reps, settings.workers, [&](std::size_t rep) {
        try {
            Cohort cohort = generate_cohort(cfg, result.calibration, mix_seed(scenario_seed, rep));
            std::size_t cell = 0;
            std::vector<double> local(n_cells);
            // specs with identical nuisance options share one fitted bundle
            std::vector<std::optional<NuisanceBundle>> bundles(specs.size());
            for (std::size_t j = 0; j < specs.size(); ++j) {
                for (std::size_t k = 0; k < j; ++k) {
                    if (specs[k].nuisance == specs[j].nuisance) {
                        bundles[j] = bundles[k];
                        break;
                    }
                }
                if (!bundles[j]) bundles[j] = fit_nuisances(cohort.table, specs[j].nuisance);
                for (int a : arms)
                    local[cell++] = estimate_arm(cohort.table, *bundles[j], specs[j].kind, a);
            }
            std::copy(local.begin(), local.end(), values.begin() + rep * n_cells);
            ok[rep] = 1;
        } catch (const Error&) {
            ok[rep] = 0;
        }
    });

    std::size_t failures = 0;
    for (char c : ok)
        if (!c) ++failures;
    result.failures = failures;
    if (static_cast<double>(failures) > 0.01 * static_cast<double>(reps))
        throw InferenceError("scenario " + cfg.key() + ": " + std::to_string(failures) + " of " +
                             std::to_string(reps) + " replications failed (> 1%)");

    std::size_t cell = 0;
    for (const auto& spec : specs) {
        for (int a : arms) {
            double sum = 0.0;
            std::size_t m = 0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                if (!ok[rep]) continue;
                sum += values[rep * n_cells + cell];
                ++m;
            }
            const double mean = sum / static_cast<double>(m);
            double ss = 0.0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                if (!ok[rep]) continue;
                const double d = values[rep * n_cells + cell] - mean;
                ss += d * d;
            }
            SimulationCell out;
            out.mean = mean;
            out.bias = mean - result.truth.at(a).value;
            out.variance = (m > 1) ? ss / static_cast<double>(m - 1) : 0.0;
            out.replications = m;
            result.cells[spec.name][a] = out;
            ++cell;
        }
    }
    return result;
}

inline SimulationSummary run_grid(const std::vector<ScenarioConfig>& configs,
                                  const std::vector<EstimatorSpec>& specs,
                                  const GridSettings& settings) {
    SimulationSummary summary;
    summary.replications = settings.replications;
    summary.master_seed = settings.master_seed;
    for (std::size_t s = 0; s < configs.size(); ++s)
        summary.scenarios.push_back(
            run_scenario(configs[s], specs, settings, mix_seed(settings.master_seed, s)));
    return summary;
}

// The n = 10000 grid used by the fast presets: trial totals 1000 and 5000
// crossed with balance and assignment-mechanism regimes.
inline std::vector<ScenarioConfig> desk_scenarios() {
    std::vector<ScenarioConfig> out;
    for (std::size_t nt : {std::size_t{1000}, std::size_t{5000}})
        for (bool bal : {true, false})
            for (bool vary : {false, true}) {
                ScenarioConfig c;
                c.n = 10000;
                c.n_trial_total = nt;
                c.balanced = bal;
                c.txam_varies = vary;
                out.push_back(c);
            }
    return out;
}

inline std::vector<ScenarioConfig> full_scenarios() {
    std::vector<ScenarioConfig> out;
    for (std::size_t n : {std::size_t{10000}, std::size_t{100000}})
        for (std::size_t nt : {std::size_t{1000}, std::size_t{2000}, std::size_t{5000}})
            for (bool bal : {true, false})
                for (bool vary : {false, true}) {
                    ScenarioConfig c;
                    c.n = n;
                    c.n_trial_total = nt;
                    c.balanced = bal;
                    c.txam_varies = vary;
                    out.push_back(c);
                }
    return out;
}

// Summary CSV, one row per (arm, scenario), one column per estimator.
inline void write_summary_csv(const SimulationSummary& summary,
                              const std::vector<std::string>& spec_names,
                              const std::string& metric, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "a,n,n_trial_total,balanced,txam_varies";
    for (const auto& name : spec_names) out << "," << name;
    out << "\n";
    std::ostringstream body;
    body.precision(10);
    for (int a : {0, 1}) {
        for (const auto& sc : summary.scenarios) {
            body << a << "," << sc.config.n << "," << sc.config.n_trial_total << ","
                 << (sc.config.balanced ? "yes" : "no") << ","
                 << (sc.config.txam_varies ? "yes" : "no");
            for (const auto& name : spec_names) {
                const auto& cell = sc.cells.at(name).at(a);
                body << "," << (metric == "bias" ? cell.bias : cell.variance);
            }
            body << "\n";
        }
    }
    out << body.str();
    if (!out) throw IoError("write failure on '" + path + "'");
}

}  // namespace transport

#endif  // TRANSPORT_SIMULATION_HPP
