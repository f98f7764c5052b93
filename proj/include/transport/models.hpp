#ifndef TRANSPORT_MODELS_HPP
#define TRANSPORT_MODELS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "transport/data.hpp"
#include "transport/errors.hpp"

namespace transport {

inline double expit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Design = intercept column followed by the selected covariates, in the
// order given by `design` (indices into the covariate vector).
inline Eigen::MatrixXd build_design(const std::vector<const Observation*>& rows,
                                    const std::vector<std::size_t>& design) {
    Eigen::MatrixXd X(rows.size(), design.size() + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        X(i, 0) = 1.0;
        for (std::size_t j = 0; j < design.size(); ++j)
            X(i, j + 1) = rows[i]->covariates.at(design[j]);
    }
    return X;
}

inline std::vector<std::size_t> main_effects_design(std::size_t p) {
    std::vector<std::size_t> d(p);
    for (std::size_t j = 0; j < p; ++j) d[j] = j;
    return d;
}

struct LinearModel {
    Eigen::VectorXd coefficients;        // intercept first
    std::vector<std::size_t> design;     // covariate indices

    double predict(const std::vector<double>& x) const {
        double eta = coefficients[0];
        for (std::size_t j = 0; j < design.size(); ++j) {
            if (design[j] >= x.size()) throw ModelError("covariate row too short for design");
            eta += coefficients[j + 1] * x[design[j]];
        }
        return eta;
    }
};

struct LogisticModel {
    Eigen::VectorXd coefficients;
    std::vector<std::size_t> design;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = std::numeric_limits<double>::infinity();
    std::vector<double> loglik_history;

    double linear_predictor(const std::vector<double>& x) const {
        double eta = coefficients[0];
        for (std::size_t j = 0; j < design.size(); ++j) {
            if (design[j] >= x.size()) throw ModelError("covariate row too short for design");
            eta += coefficients[j + 1] * x[design[j]];
        }
        return eta;
    }

    double predict(const std::vector<double>& x) const { return expit(linear_predictor(x)); }
};

struct MultinomialLogisticModel {
    std::vector<int> labels;             // first label is the reference
    Eigen::MatrixXd coefficients;        // (K-1) x (p+1), intercept first
    std::vector<std::size_t> design;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = std::numeric_limits<double>::infinity();

    std::vector<double> predict(const std::vector<double>& x) const {
        const std::size_t km1 = labels.size() - 1;
        std::vector<double> eta(km1);
        double max_eta = 0.0;  // reference category has eta = 0
        for (std::size_t k = 0; k < km1; ++k) {
            double e = coefficients(k, 0);
            for (std::size_t j = 0; j < design.size(); ++j) {
                if (design[j] >= x.size()) throw ModelError("covariate row too short for design");
                e += coefficients(k, j + 1) * x[design[j]];
            }
            eta[k] = e;
            max_eta = std::max(max_eta, e);
        }
        std::vector<double> probs(labels.size());
        double denom = std::exp(0.0 - max_eta);
        probs[0] = denom;
        for (std::size_t k = 0; k < km1; ++k) {
            probs[k + 1] = std::exp(eta[k] - max_eta);
            denom += probs[k + 1];
        }
        for (double& p : probs) p /= denom;
        return probs;
    }

    double predict_label(const std::vector<double>& x, int label) const {
        auto probs = predict(x);
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (labels[k] == label) return probs[k];
        throw ModelError("label " + std::to_string(label) + " not in model");
    }
};

// Least squares via column-pivoted QR; the normal equations hold to the
// solver's accuracy and rank deficiency names the first redundant column.
inline Eigen::VectorXd solve_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    if (X.rows() < X.cols())
        throw SingularDesignError("fewer rows (" + std::to_string(X.rows()) +
                                  ") than design columns (" + std::to_string(X.cols()) + ")");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) {
        const auto perm = qr.colsPermutation().indices();
        throw SingularDesignError("rank-deficient design: column " +
                                  std::to_string(perm[qr.rank()]) + " is redundant");
    }
    return qr.solve(y);
}

inline LinearModel fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                           std::vector<std::size_t> design = {}) {
    LinearModel m;
    m.coefficients = solve_ols(y, X);
    m.design = std::move(design);
    if (m.design.empty() && X.cols() > 1) {
        m.design.resize(X.cols() - 1);
        for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(X.cols()); ++j) m.design[j] = j;
    }
    return m;
}

namespace detail {

inline double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        // log p = y*eta - log(1+exp(eta)), computed stably
        const double e = eta[i];
        ll += y[i] * e - (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e)));
    }
    return ll;
}

}  // namespace detail

struct FitOptions {
    double tol = 1e-8;
    int max_iter = 100;
    double separation_bound = 1e3;

    friend bool operator==(const FitOptions&, const FitOptions&) = default;
};

// IRLS with step-halving; the log-likelihood is non-decreasing across the
// recorded iteration history.
inline LogisticModel fit_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                  const FitOptions& opts = {},
                                  std::vector<std::size_t> design = {}) {
    const Eigen::Index n = y.size();
    const double ybar = y.mean();
    if (ybar <= 0.0 || ybar >= 1.0)
        throw DegenerateOutcomeError("outcome takes a single value");

    LogisticModel m;
    m.coefficients = Eigen::VectorXd::Zero(X.cols());
    m.design = std::move(design);
    if (m.design.empty() && X.cols() > 1) {
        m.design.resize(X.cols() - 1);
        for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(X.cols()); ++j) m.design[j] = j;
    }

    Eigen::VectorXd eta = X * m.coefficients;
    double ll = detail::bernoulli_loglik(y, eta);
    m.loglik_history.push_back(ll);

    for (int it = 0; it < opts.max_iter; ++it) {
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = expit(eta[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
        }
        Eigen::VectorXd grad = X.transpose() * (y - mu);
        m.final_gradient_norm = grad.cwiseAbs().maxCoeff();
        m.iterations = it;
        if (m.final_gradient_norm <= opts.tol) {
            // a perfectly classified sample has no maximizer
            if ((y - mu).cwiseAbs().maxCoeff() < 1e-4)
                throw SeparationError("fitted probabilities match the labels exactly; "
                                      "the data are perfectly separated");
            m.converged = true;
            return m;
        }
        Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
        Eigen::VectorXd step = H.ldlt().solve(grad);
        double scale = 1.0;
        Eigen::VectorXd beta_new;
        double ll_new;
        for (int half = 0; half < 40; ++half) {
            beta_new = m.coefficients + scale * step;
            ll_new = detail::bernoulli_loglik(y, X * beta_new);
            if (ll_new >= ll) break;
            scale *= 0.5;
        }
        if (ll_new < ll) break;  // cannot improve further
        const double step_size = scale * step.norm();
        m.coefficients = beta_new;
        eta = X * m.coefficients;
        ll = ll_new;
        m.loglik_history.push_back(ll);
        if (m.coefficients.norm() > opts.separation_bound)
            throw SeparationError("coefficient norm " + std::to_string(m.coefficients.norm()) +
                                  " exceeds bound; data may be separated");
        // at the numerical optimum the gradient is rounding noise and the
        // absolute tolerance may be unreachable; a vanishing step is final
        if (step_size <= 1e-12 * (1.0 + m.coefficients.norm())) {
            m.converged = true;
            m.iterations = it + 1;
            Eigen::VectorXd mu_f(n);
            for (Eigen::Index i = 0; i < n; ++i) mu_f[i] = expit(eta[i]);
            m.final_gradient_norm = (X.transpose() * (y - mu_f)).cwiseAbs().maxCoeff();
            return m;
        }
    }
    // one last gradient check
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = expit(eta[i]);
    m.final_gradient_norm = (X.transpose() * (y - mu)).cwiseAbs().maxCoeff();
    m.converged = m.final_gradient_norm <= opts.tol;
    m.iterations = opts.max_iter;
    if (!m.converged) {
        bool separated = true;
        for (Eigen::Index i = 0; i < n && separated; ++i)
            if ((y[i] == 1.0 && eta[i] <= 0.0) || (y[i] == 0.0 && eta[i] >= 0.0))
                separated = false;
        if (separated)
            throw SeparationError("likelihood is unbounded; the data are perfectly separated");
    }
    return m;
}

// Newton with step-halving on the multinomial log-likelihood; reference
// category is the smallest label.
inline MultinomialLogisticModel fit_multinomial(const std::vector<int>& labels_in,
                                                const Eigen::MatrixXd& X,
                                                const FitOptions& opts = {},
                                                std::vector<std::size_t> design = {}) {
    const std::size_t n = labels_in.size();
    if (static_cast<Eigen::Index>(n) != X.rows())
        throw ModelError("label/design row mismatch");

    std::vector<int> cats(labels_in);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    if (cats.size() < 2) throw DegenerateOutcomeError("fewer than 2 categories present");
    const std::size_t K = cats.size();
    const std::size_t km1 = K - 1;
    const std::size_t q = X.cols();

    // indicator matrix, category index per row
    std::vector<std::size_t> cat_of(n);
    for (std::size_t i = 0; i < n; ++i)
        cat_of[i] = std::lower_bound(cats.begin(), cats.end(), labels_in[i]) - cats.begin();

    MultinomialLogisticModel m;
    m.labels = cats;
    m.design = std::move(design);
    if (m.design.empty() && q > 1) {
        m.design.resize(q - 1);
        for (std::size_t j = 0; j + 1 < q; ++j) m.design[j] = j;
    }
    m.coefficients = Eigen::MatrixXd::Zero(km1, q);

    auto loglik = [&](const Eigen::MatrixXd& beta, Eigen::MatrixXd& probs) {
        Eigen::MatrixXd eta = X * beta.transpose();  // n x (K-1)
        double ll = 0.0;
        probs.resize(n, K);
        for (std::size_t i = 0; i < n; ++i) {
            double mx = 0.0;
            for (std::size_t k = 0; k < km1; ++k) mx = std::max(mx, eta(i, k));
            double denom = std::exp(-mx);
            probs(i, 0) = denom;
            for (std::size_t k = 0; k < km1; ++k) {
                probs(i, k + 1) = std::exp(eta(i, k) - mx);
                denom += probs(i, k + 1);
            }
            for (std::size_t k = 0; k < K; ++k) probs(i, k) /= denom;
            ll += std::log(std::max(probs(i, cat_of[i]), 1e-300));
        }
        return ll;
    };

    Eigen::MatrixXd probs;
    double ll = loglik(m.coefficients, probs);

    const std::size_t dim = km1 * q;
    for (int it = 0; it < opts.max_iter; ++it) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
        for (std::size_t k = 0; k < km1; ++k) {
            Eigen::VectorXd resid(n);
            for (std::size_t i = 0; i < n; ++i)
                resid[i] = (cat_of[i] == k + 1 ? 1.0 : 0.0) - probs(i, k + 1);
            grad.segment(k * q, q) = X.transpose() * resid;
            for (std::size_t l = k; l < km1; ++l) {
                Eigen::VectorXd w(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const double pk = probs(i, k + 1), pl = probs(i, l + 1);
                    w[i] = (k == l) ? pk * (1.0 - pk) : -pk * pl;
                }
                Eigen::MatrixXd block = X.transpose() * w.asDiagonal() * X;
                H.block(k * q, l * q, q, q) = block;
                if (l != k) H.block(l * q, k * q, q, q) = block;
            }
        }
        m.final_gradient_norm = grad.cwiseAbs().maxCoeff();
        m.iterations = it;
        if (m.final_gradient_norm <= opts.tol) {
            m.converged = true;
            return m;
        }
        // small ridge keeps the Hessian factorizable near saturation
        H.diagonal().array() += 1e-10;
        Eigen::VectorXd step = H.ldlt().solve(grad);
        double scale = 1.0;
        Eigen::MatrixXd beta_new;
        Eigen::MatrixXd probs_new;
        double ll_new = ll;
        for (int half = 0; half < 40; ++half) {
            beta_new = m.coefficients;
            for (std::size_t k = 0; k < km1; ++k)
                beta_new.row(k) += scale * step.segment(k * q, q).transpose();
            ll_new = loglik(beta_new, probs_new);
            if (ll_new >= ll) break;
            scale *= 0.5;
        }
        if (ll_new < ll) break;
        const double step_size = scale * step.norm();
        m.coefficients = beta_new;
        probs = probs_new;
        ll = ll_new;
        if (m.coefficients.norm() > opts.separation_bound)
            throw SeparationError("coefficient norm exceeds bound; data may be separated");
        if (step_size <= 1e-12 * (1.0 + m.coefficients.norm())) {
            m.converged = true;
            m.iterations = it + 1;
            return m;
        }
    }
    m.converged = m.final_gradient_norm <= opts.tol;
    m.iterations = opts.max_iter;
    return m;
}

// ---- model (de)serialization: versioned structured text ----

namespace detail {

inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_double(v[i]);
}

}  // namespace detail

inline void save_model(const LinearModel& m, std::ostream& os) {
    os << "transport-model v1\nkind linear\ndesign";
    for (auto j : m.design) os << " " << j;
    os << "\ncoef ";
    detail::write_vector(os, m.coefficients);
    os << "\n";
}

inline void save_model(const LogisticModel& m, std::ostream& os) {
    os << "transport-model v1\nkind logistic\ndesign";
    for (auto j : m.design) os << " " << j;
    os << "\ncoef ";
    detail::write_vector(os, m.coefficients);
    os << "\nconverged " << (m.converged ? 1 : 0) << "\n";
}

inline void save_model(const MultinomialLogisticModel& m, std::ostream& os) {
    os << "transport-model v1\nkind multinomial\ndesign";
    for (auto j : m.design) os << " " << j;
    os << "\nlabels";
    for (int l : m.labels) os << " " << l;
    os << "\n";
    for (Eigen::Index k = 0; k < m.coefficients.rows(); ++k) {
        os << "coef ";
        detail::write_vector(os, m.coefficients.row(k).transpose());
        os << "\n";
    }
}

// short digest of a coefficient vector, for report provenance
inline std::string coef_digest(const Eigen::VectorXd& v) {
    std::uint64_t h = 1469598103934665603ULL;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double d = v[i];
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace transport

#endif  // TRANSPORT_MODELS_HPP
