#ifndef TRANSPORT_BOOTSTRAP_HPP
#define TRANSPORT_BOOTSTRAP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "transport/data.hpp"
#include "transport/errors.hpp"
#include "transport/estimators.hpp"
#include "transport/parallel.hpp"
#include "transport/rng.hpp"

namespace transport {

enum class ResamplingScheme { Pooled, StratifiedByR };

inline std::string to_string(ResamplingScheme s) {
    return s == ResamplingScheme::Pooled ? "pooled" : "stratified_by_R";
}

struct BootstrapConfig {
    std::size_t replicates = 10000;
    double level = 0.95;
    std::uint64_t master_seed = 0;
    ResamplingScheme scheme = ResamplingScheme::Pooled;
    unsigned workers = 1;

    void validate() const {
        if (replicates < 2) throw ConfigError("bootstrap replicates must be >= 2");
        if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must be in (0,1)");
    }
};

using NuisanceFitter = std::function<NuisanceBundle(const ObservationTable&)>;

inline NuisanceFitter default_fitter(NuisanceOptions opts = {}) {
    return [opts = std::move(opts)](const ObservationTable& t) { return fit_nuisances(t, opts); };
}

namespace detail {

inline std::vector<Observation> resample_rows(const ObservationTable& table, Rng& rng,
                                              ResamplingScheme scheme) {
    const auto& rows = table.rows();
    std::vector<Observation> out;
    out.reserve(rows.size());
    if (scheme == ResamplingScheme::Pooled) {
        for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(rows[rng.index(rows.size())]);
    } else {
        std::vector<std::size_t> target_idx, trial_idx;
        for (std::size_t i = 0; i < rows.size(); ++i)
            (rows[i].participation() ? trial_idx : target_idx).push_back(i);
        for (std::size_t i = 0; i < target_idx.size(); ++i)
            out.push_back(rows[target_idx[rng.index(target_idx.size())]]);
        for (std::size_t i = 0; i < trial_idx.size(); ++i)
            out.push_back(rows[trial_idx[rng.index(trial_idx.size())]]);
    }
    return out;
}

// empirical quantile interval from sorted replicate estimates
inline Interval quantile_interval(std::vector<double> values, double level) {
    std::sort(values.begin(), values.end());
    const double alpha = 1.0 - level;
    const std::size_t m = values.size();
    auto order_stat = [&](double q) {
        const auto idx = static_cast<std::size_t>(
            std::clamp(std::ceil(q * static_cast<double>(m)) - 1.0, 0.0,
                       static_cast<double>(m - 1)));
        return values[idx];
    };
    return {order_stat(alpha / 2.0), order_stat(1.0 - alpha / 2.0)};
}

}  // namespace detail

// Full-pipeline percentile bootstrap: every replicate resamples rows,
// refits all nuisance models, and recomputes the estimates.  Point
// estimates come from the original data.
inline EstimateReport bootstrap_ci(const ObservationTable& table, EstimatorKind kind,
                                   const std::vector<int>& arms,
                                   const std::vector<std::pair<int, int>>& contrasts,
                                   const BootstrapConfig& config,
                                   const NuisanceFitter& fitter) {
    config.validate();

    NuisanceBundle original = fitter(table);
    EstimateReport report = estimate(table, original, kind, arms, contrasts);
    report.bootstrap_replicates = config.replicates;
    report.bootstrap_scheme = to_string(config.scheme);
    report.seed = config.master_seed;

    // all arms needed, including those only referenced by contrasts
    std::vector<int> all_arms;
    for (const auto& [a, v] : report.psi) {
        (void)v;
        all_arms.push_back(a);
    }

    struct ReplicateResult {
        bool ok = false;
        std::vector<double> psi;  // aligned with all_arms
    };
    std::vector<ReplicateResult> results(config.replicates);

    parallel_for(config.replicates, config.workers, [&](std::size_t rep) {
        Rng rng(config.master_seed, rep);
        try {
            auto resampled = ObservationTable::from_rows(
                detail::resample_rows(table, rng, config.scheme));
            NuisanceBundle bundle = fitter(resampled);
            ReplicateResult r;
            r.psi.reserve(all_arms.size());
            for (int a : all_arms) r.psi.push_back(estimate_arm(resampled, bundle, kind, a));
            r.ok = true;
            results[rep] = std::move(r);
        } catch (const Error&) {
            results[rep].ok = false;
        }
    });

    std::size_t failures = 0;
    for (const auto& r : results)
        if (!r.ok) ++failures;
    report.bootstrap_failures = failures;
    if (static_cast<double>(failures) > 0.05 * static_cast<double>(config.replicates))
        throw InferenceError(std::to_string(failures) + " of " +
                             std::to_string(config.replicates) +
                             " bootstrap replicates failed (> 5%); consider the stratified "
                             "resampling scheme or simpler nuisance models");

    for (std::size_t k = 0; k < all_arms.size(); ++k) {
        std::vector<double> vals;
        vals.reserve(results.size());
        for (const auto& r : results)
            if (r.ok) vals.push_back(r.psi[k]);
        report.psi_ci[all_arms[k]] = detail::quantile_interval(std::move(vals), config.level);
    }
    for (const auto& [pair, v] : report.delta) {
        (void)v;
        const auto ia = std::find(all_arms.begin(), all_arms.end(), pair.first) - all_arms.begin();
        const auto ib = std::find(all_arms.begin(), all_arms.end(), pair.second) - all_arms.begin();
        std::vector<double> vals;
        vals.reserve(results.size());
        for (const auto& r : results)
            if (r.ok) vals.push_back(r.psi[ia] - r.psi[ib]);
        report.delta_ci[pair] = detail::quantile_interval(std::move(vals), config.level);
    }
    return report;
}

}  // namespace transport

#endif  // TRANSPORT_BOOTSTRAP_HPP
