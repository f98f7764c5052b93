#ifndef TRANSPORT_ESTIMATORS_HPP
#define TRANSPORT_ESTIMATORS_HPP

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "transport/data.hpp"
#include "transport/errors.hpp"
#include "transport/models.hpp"

namespace transport {

// A fitted (or fixed) nuisance evaluated on a covariate row.  Wrapping the
// concrete model types keeps the estimators agnostic to how a probability
// or conditional mean was obtained (fit, known constant, or complement).
struct Predictor {
    std::string label;
    std::function<double(const std::vector<double>&)> fn;

    double operator()(const std::vector<double>& x) const { return fn(x); }

    static Predictor constant(double c) {
        return {"const(" + detail::format_double(c) + ")", [c](const std::vector<double>&) { return c; }};
    }
    static Predictor linear(LinearModel m) {
        std::string lab = "linear/" + coef_digest(m.coefficients);
        return {std::move(lab), [m = std::move(m)](const std::vector<double>& x) { return m.predict(x); }};
    }
    static Predictor logistic(LogisticModel m) {
        std::string lab = "logistic/" + coef_digest(m.coefficients);
        return {std::move(lab), [m = std::move(m)](const std::vector<double>& x) { return m.predict(x); }};
    }
    // probability of the complement class of a binary logistic model
    static Predictor logistic_complement(LogisticModel m) {
        std::string lab = "1-logistic/" + coef_digest(m.coefficients);
        return {std::move(lab),
                [m = std::move(m)](const std::vector<double>& x) { return 1.0 - m.predict(x); }};
    }
    static Predictor multinomial_level(MultinomialLogisticModel m, int level) {
        std::string lab = "multinomial[" + std::to_string(level) + "]";
        return {std::move(lab), [m = std::move(m), level](const std::vector<double>& x) {
                    return m.predict_label(x, level);
                }};
    }
};

struct NuisanceBundle {
    std::map<int, Predictor> outcome_models;                    // g_a(X)
    std::optional<Predictor> participation;                     // p(X) = Pr[R=1|X]
    std::map<int, Predictor> treatment;                         // e_a(X) = Pr[A=a|X,R=1]
    std::map<int, std::map<int, Predictor>> per_trial_treatment;  // s -> a -> Pr[A=a|X,S=s,R=1]

    const Predictor& outcome_for(int a) const {
        auto it = outcome_models.find(a);
        if (it == outcome_models.end())
            throw ModelError("no outcome model for treatment " + std::to_string(a));
        return it->second;
    }
    const Predictor& treatment_for(int a) const {
        auto it = treatment.find(a);
        if (it == treatment.end())
            throw ModelError("no treatment probability source for treatment " + std::to_string(a));
        return it->second;
    }
    const Predictor& participation_model() const {
        if (!participation) throw ModelError("no participation model");
        return *participation;
    }

    std::string digest() const {
        std::string d;
        for (const auto& [a, m] : outcome_models) d += "g" + std::to_string(a) + "=" + m.label + ";";
        if (participation) d += "p=" + participation->label + ";";
        for (const auto& [a, m] : treatment) d += "e" + std::to_string(a) + "=" + m.label + ";";
        return d;
    }
};

namespace detail {

inline void check_probability(double v, const char* what, std::size_t row) {
    if (!(v > 1e-12 && v < 1.0 - 1e-12))
        throw PositivityError(std::string(what) + " prediction " + format_double(v) +
                              " at row " + std::to_string(row) + " violates positivity");
}

}  // namespace detail

// g-formula: average the fitted outcome model over target-sample covariates.
inline double psi_g(const ObservationTable& table, const NuisanceBundle& bundle, int a) {
    const Predictor& g = bundle.outcome_for(a);
    double sum = 0.0;
    std::size_t n0 = 0;
    for (const auto& r : table.rows()) {
        if (r.participation()) continue;
        sum += g(r.covariates);
        ++n0;
    }
    return sum / static_cast<double>(n0);
}

// Inverse-odds weighting, non-self-normalized.
inline double psi_w(const ObservationTable& table, const NuisanceBundle& bundle, int a) {
    const Predictor& p = bundle.participation_model();
    const Predictor& e = bundle.treatment_for(a);
    double sum = 0.0;
    const double n0 = static_cast<double>(table.n_target());
    std::size_t row = 0;
    for (const auto& r : table.rows()) {
        if (r.participation() && *r.treatment == a) {
            const double ph = p(r.covariates);
            const double eh = e(r.covariates);
            detail::check_probability(ph, "participation", row);
            detail::check_probability(eh, "treatment", row);
            sum += (1.0 - ph) / (ph * eh) * *r.outcome;
        }
        ++row;
    }
    return sum / n0;
}

// Augmented estimator; collapses to psi_w when g == 0 and to psi_g when p == 1.
inline double psi_aug(const ObservationTable& table, const NuisanceBundle& bundle, int a) {
    const Predictor& g = bundle.outcome_for(a);
    const Predictor& p = bundle.participation_model();
    const Predictor& e = bundle.treatment_for(a);
    double sum = 0.0;
    const double n0 = static_cast<double>(table.n_target());  // n * pi_hat
    std::size_t row = 0;
    for (const auto& r : table.rows()) {
        if (r.participation()) {
            if (*r.treatment == a) {
                const double ph = p(r.covariates);
                // p identically one collapses the estimator to the g-formula:
                // the weight vanishes exactly, so the term is dropped rather
                // than flagged as a positivity violation
                if (ph != 1.0) {
                    const double eh = e(r.covariates);
                    detail::check_probability(ph, "participation", row);
                    detail::check_probability(eh, "treatment", row);
                    sum += (1.0 - ph) / (ph * eh) * (*r.outcome - g(r.covariates));
                }
            }
        } else {
            sum += g(r.covariates);
        }
        ++row;
    }
    return sum / n0;
}

inline double contrast(double psi_a, double psi_a_prime) { return psi_a - psi_a_prime; }

// Trial-stratified ATE estimator: inverse-odds weights with per-trial
// treatment probabilities.
inline double rho_w(const ObservationTable& table, const NuisanceBundle& bundle, int a,
                    int a_prime) {
    const Predictor& p = bundle.participation_model();
    double sum = 0.0;
    const double n0 = static_cast<double>(table.n_target());
    std::size_t row = 0;
    for (const auto& r : table.rows()) {
        if (r.participation() && (*r.treatment == a || *r.treatment == a_prime)) {
            auto trial_it = bundle.per_trial_treatment.find(r.trial_id);
            if (trial_it == bundle.per_trial_treatment.end())
                throw ModelError("no per-trial treatment model for trial " +
                                 std::to_string(r.trial_id));
            const int arm = *r.treatment;
            auto arm_it = trial_it->second.find(arm);
            if (arm_it == trial_it->second.end())
                throw ModelError("no per-trial treatment model for trial " +
                                 std::to_string(r.trial_id) + ", treatment " + std::to_string(arm));
            const double ph = p(r.covariates);
            const double eh = arm_it->second(r.covariates);
            detail::check_probability(ph, "participation", row);
            detail::check_probability(eh, "treatment", row);
            const double sign = (arm == a) ? 1.0 : -1.0;
            sum += sign / eh * (1.0 - ph) / ph * *r.outcome;
        }
        ++row;
    }
    return sum / n0;
}

// Plug-in variance from the estimated influence-function values; returns
// n^{-1} x sample variance of the per-row values.
inline double if_variance(const ObservationTable& table, const NuisanceBundle& bundle, int a,
                          double* influence_mean_out = nullptr) {
    const Predictor& g = bundle.outcome_for(a);
    const Predictor& p = bundle.participation_model();
    const Predictor& e = bundle.treatment_for(a);
    const double psi_hat = psi_aug(table, bundle, a);
    const double n = static_cast<double>(table.n());
    const double pi_hat = table.target_fraction();

    std::vector<double> values;
    values.reserve(table.n());
    std::size_t row = 0;
    for (const auto& r : table.rows()) {
        double v = 0.0;
        if (r.participation()) {
            if (*r.treatment == a) {
                const double ph = p(r.covariates);
                if (ph != 1.0) {
                    const double eh = e(r.covariates);
                    detail::check_probability(ph, "participation", row);
                    detail::check_probability(eh, "treatment", row);
                    v = (1.0 - ph) / (ph * eh) * (*r.outcome - g(r.covariates));
                }
            }
        } else {
            v = g(r.covariates) - psi_hat;
        }
        values.push_back(v / pi_hat);
        ++row;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (influence_mean_out) *influence_mean_out = mean;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sample_var = (values.size() > 1) ? ss / (n - 1.0) : 0.0;
    return sample_var / n;
}

enum class EstimatorKind { GFormula, Weighting, Augmented };

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::GFormula: return "gformula";
        case EstimatorKind::Weighting: return "weighting";
        case EstimatorKind::Augmented: return "augmented";
    }
    return "?";
}

inline EstimatorKind estimator_kind_from_string(const std::string& s) {
    if (s == "gformula" || s == "g") return EstimatorKind::GFormula;
    if (s == "weighting" || s == "w") return EstimatorKind::Weighting;
    if (s == "augmented" || s == "aug") return EstimatorKind::Augmented;
    throw ConfigError("unknown estimator kind '" + s + "'");
}

inline double estimate_arm(const ObservationTable& table, const NuisanceBundle& bundle,
                           EstimatorKind kind, int a) {
    switch (kind) {
        case EstimatorKind::GFormula: return psi_g(table, bundle, a);
        case EstimatorKind::Weighting: return psi_w(table, bundle, a);
        case EstimatorKind::Augmented: return psi_aug(table, bundle, a);
    }
    throw ModelError("unreachable estimator kind");
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

struct EstimateReport {
    std::string estimator_kind;
    double pi_hat = 0.0;
    std::map<int, double> psi;
    std::map<std::pair<int, int>, double> delta;
    std::map<int, Interval> psi_ci;
    std::map<std::pair<int, int>, Interval> delta_ci;
    std::map<int, double> variance;  // influence-function plug-in, when available
    std::size_t bootstrap_replicates = 0;
    std::size_t bootstrap_failures = 0;
    std::string bootstrap_scheme;
    std::uint64_t seed = 0;
    std::string nuisance_digest;
};

// Point estimates for the requested arms and contrasts from one bundle.
inline EstimateReport estimate(const ObservationTable& table, const NuisanceBundle& bundle,
                               EstimatorKind kind, const std::vector<int>& arms,
                               const std::vector<std::pair<int, int>>& contrasts) {
    EstimateReport rep;
    rep.estimator_kind = to_string(kind);
    rep.pi_hat = table.target_fraction();
    rep.nuisance_digest = bundle.digest();
    for (int a : arms) rep.psi[a] = estimate_arm(table, bundle, kind, a);
    for (const auto& [a, ap] : contrasts) {
        if (!rep.psi.count(a)) rep.psi[a] = estimate_arm(table, bundle, kind, a);
        if (!rep.psi.count(ap)) rep.psi[ap] = estimate_arm(table, bundle, kind, ap);
        rep.delta[{a, ap}] = contrast(rep.psi[a], rep.psi[ap]);
    }
    return rep;
}

// Working models per the default convention: main effects of all
// covariates; outcome regressions fit separately per treatment arm among
// trial rows; one pooled treatment model over R = 1.
struct NuisanceOptions {
    std::vector<std::size_t> design;               // empty = all main effects
    FitOptions fit;
    std::map<int, double> known_treatment_probs;   // bypasses treatment-model fitting
    bool intercept_only_outcome = false;           // for robustness experiments
    bool zero_outcome = false;                     // g identically 0 (degenerate outcome model)
    bool intercept_only_participation = false;

    friend bool operator==(const NuisanceOptions&, const NuisanceOptions&) = default;
};

inline NuisanceBundle fit_nuisances(const ObservationTable& table,
                                    const NuisanceOptions& opts = {}) {
    NuisanceBundle bundle;
    const std::vector<std::size_t> design =
        opts.design.empty() ? main_effects_design(table.covariate_dim()) : opts.design;
    const std::vector<std::size_t> empty_design;

    // participation model over all rows
    {
        const auto& d = opts.intercept_only_participation ? empty_design : design;
        std::vector<const Observation*> all;
        Eigen::VectorXd y(table.n());
        std::size_t i = 0;
        for (const auto& r : table.rows()) {
            all.push_back(&r);
            y[i++] = r.participation() ? 1.0 : 0.0;
        }
        Eigen::MatrixXd X = build_design(all, d);
        bundle.participation = Predictor::logistic(fit_logistic(y, X, opts.fit, d));
    }

    // trial rows, per-arm splits
    std::vector<const Observation*> trial_rows;
    for (const auto& r : table.rows())
        if (r.participation()) trial_rows.push_back(&r);

    // outcome model per arm
    for (int a : table.treatment_levels()) {
        if (opts.zero_outcome) {
            bundle.outcome_models.emplace(a, Predictor::constant(0.0));
            continue;
        }
        const auto& d = opts.intercept_only_outcome ? empty_design : design;
        std::vector<const Observation*> arm_rows;
        for (const auto* r : trial_rows)
            if (*r->treatment == a) arm_rows.push_back(r);
        if (arm_rows.empty())
            throw ModelError("treatment " + std::to_string(a) + " has no trial rows");
        Eigen::VectorXd y(arm_rows.size());
        for (std::size_t i = 0; i < arm_rows.size(); ++i) y[i] = *arm_rows[i]->outcome;
        Eigen::MatrixXd X = build_design(arm_rows, d);
        bundle.outcome_models.emplace(a, Predictor::linear(fit_ols(y, X, d)));
    }

    // treatment model: known constants, binary logistic, or multinomial
    if (!opts.known_treatment_probs.empty()) {
        for (const auto& [a, prob] : opts.known_treatment_probs)
            bundle.treatment.emplace(a, Predictor::constant(prob));
    } else if (table.treatment_levels().size() == 2) {
        const int lo = table.treatment_levels()[0];
        const int hi = table.treatment_levels()[1];
        Eigen::VectorXd y(trial_rows.size());
        for (std::size_t i = 0; i < trial_rows.size(); ++i)
            y[i] = (*trial_rows[i]->treatment == hi) ? 1.0 : 0.0;
        Eigen::MatrixXd X = build_design(trial_rows, design);
        LogisticModel m = fit_logistic(y, X, opts.fit, design);
        bundle.treatment.emplace(hi, Predictor::logistic(m));
        bundle.treatment.emplace(lo, Predictor::logistic_complement(std::move(m)));
    } else {
        std::vector<int> labels(trial_rows.size());
        for (std::size_t i = 0; i < trial_rows.size(); ++i) labels[i] = *trial_rows[i]->treatment;
        Eigen::MatrixXd X = build_design(trial_rows, design);
        MultinomialLogisticModel m = fit_multinomial(labels, X, opts.fit, design);
        for (int a : table.treatment_levels())
            bundle.treatment.emplace(a, Predictor::multinomial_level(m, a));
    }
    return bundle;
}

}  // namespace transport

#endif  // TRANSPORT_ESTIMATORS_HPP
