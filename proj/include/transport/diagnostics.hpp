#ifndef TRANSPORT_DIAGNOSTICS_HPP
#define TRANSPORT_DIAGNOSTICS_HPP

#include <boost/math/distributions/fisher_f.hpp>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "transport/data.hpp"
#include "transport/errors.hpp"
#include "transport/models.hpp"

namespace transport {

struct HomogeneityReport {
    int treatment = 0;
    double f_statistic = 0.0;
    double df_numerator = 0.0;
    double df_denominator = 0.0;
    double p_value = 1.0;
    double rss_restricted = 0.0;
    double rss_expanded = 0.0;
    std::map<int, double> trial_intercept_shift;  // trial-indicator coefficients

    std::string to_text() const {
        std::ostringstream os;
        os << "mean-homogeneity test, treatment " << treatment << "\n"
           << "  F = " << f_statistic << " on (" << df_numerator << ", " << df_denominator
           << ") df, p = " << p_value << "\n"
           << "  RSS restricted = " << rss_restricted << ", expanded = " << rss_expanded << "\n";
        for (const auto& [s, shift] : trial_intercept_shift)
            os << "  trial " << s << " intercept deviation: " << shift << "\n";
        os << "  note: the comparison pools the covariate support of the trials and is not\n"
           << "  restricted to the target-sample support.\n";
        return os.str();
    }
};

// Nested-model F test of equal conditional outcome means across trials
// within a treatment arm: restricted = intercept + design covariates;
// expanded adds trial indicator main effects and trial x covariate
// interactions (smallest contributing trial is the reference).
inline HomogeneityReport test_mean_homogeneity(const ObservationTable& table, int a,
                                               const std::vector<std::size_t>& design_in = {}) {
    const std::vector<std::size_t> design =
        design_in.empty() ? main_effects_design(table.covariate_dim()) : design_in;

    std::vector<const Observation*> rows;
    std::set<int> trials;
    for (const auto& r : table.rows()) {
        if (r.participation() && *r.treatment == a) {
            rows.push_back(&r);
            trials.insert(r.trial_id);
        }
    }
    if (trials.size() < 2)
        throw NotApplicableError("treatment " + std::to_string(a) + " appears in " +
                                 std::to_string(trials.size()) +
                                 " trial(s); at least 2 are required");

    const std::size_t n = rows.size();
    const std::size_t q = design.size();
    const std::size_t k_restricted = q + 1;
    const std::vector<int> trial_list(trials.begin(), trials.end());
    const std::size_t m = trial_list.size();
    const std::size_t k_expanded = k_restricted + (m - 1) * (q + 1);
    if (n <= k_expanded)
        throw ModelError("too few rows (" + std::to_string(n) + ") to fit the expanded design (" +
                         std::to_string(k_expanded) + " columns)");

    Eigen::VectorXd y(n);
    Eigen::MatrixXd Xr(n, k_restricted);
    Eigen::MatrixXd Xf(n, k_expanded);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = *rows[i]->outcome;
        Xr(i, 0) = 1.0;
        for (std::size_t j = 0; j < q; ++j) Xr(i, j + 1) = rows[i]->covariates.at(design[j]);
        Xf.row(i).setZero();
        Xf.block(i, 0, 1, k_restricted) = Xr.row(i);
        // indicator + interaction block per non-reference trial
        for (std::size_t t = 1; t < m; ++t) {
            if (rows[i]->trial_id != trial_list[t]) continue;
            const std::size_t base = k_restricted + (t - 1) * (q + 1);
            Xf(i, base) = 1.0;
            for (std::size_t j = 0; j < q; ++j)
                Xf(i, base + 1 + j) = rows[i]->covariates.at(design[j]);
        }
    }

    const Eigen::VectorXd beta_r = solve_ols(y, Xr);
    const Eigen::VectorXd beta_f = solve_ols(y, Xf);
    const double rss_r = (y - Xr * beta_r).squaredNorm();
    const double rss_f = (y - Xf * beta_f).squaredNorm();

    HomogeneityReport rep;
    rep.treatment = a;
    rep.rss_restricted = rss_r;
    rep.rss_expanded = rss_f;
    rep.df_numerator = static_cast<double>(k_expanded - k_restricted);
    rep.df_denominator = static_cast<double>(n - k_expanded);
    rep.f_statistic = ((rss_r - rss_f) / rep.df_numerator) / (rss_f / rep.df_denominator);
    if (rep.f_statistic <= 0.0) {
        rep.f_statistic = 0.0;
        rep.p_value = 1.0;
    } else {
        boost::math::fisher_f dist(rep.df_numerator, rep.df_denominator);
        rep.p_value = boost::math::cdf(boost::math::complement(dist, rep.f_statistic));
    }
    for (std::size_t t = 1; t < m; ++t)
        rep.trial_intercept_shift[trial_list[t]] = beta_f[k_restricted + (t - 1) * (q + 1)];
    return rep;
}

}  // namespace transport

#endif  // TRANSPORT_DIAGNOSTICS_HPP
