#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "transport/models.hpp"
#include "transport/rng.hpp"

using namespace transport;

TEST_CASE("fit_ols interpolates a line exactly") {
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    Eigen::MatrixXd X(3, 2);
    X << 1, 0, 1, 1, 1, 2;
    const auto m = fit_ols(y, X);
    CHECK_THAT(m.coefficients[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(m.coefficients[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("fit_ols on a constant outcome gives intercept c, zero slopes") {
    Rng rng(7);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(20, 4.25);
    Eigen::MatrixXd X(20, 3);
    for (int i = 0; i < 20; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        X(i, 2) = rng.normal();
    }
    const auto m = fit_ols(y, X);
    CHECK_THAT(m.coefficients[0], Catch::Matchers::WithinAbs(4.25, 1e-10));
    CHECK_THAT(m.coefficients[1], Catch::Matchers::WithinAbs(0.0, 1e-10));
    CHECK_THAT(m.coefficients[2], Catch::Matchers::WithinAbs(0.0, 1e-10));
}

TEST_CASE("fit_ols matches a normal-equations solve on a random problem") {
    Rng rng(11);
    Eigen::VectorXd y(50);
    Eigen::MatrixXd X(50, 3);
    for (int i = 0; i < 50; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        X(i, 2) = rng.normal();
        y[i] = 0.5 + 1.5 * X(i, 1) - 0.7 * X(i, 2) + rng.normal();
    }
    const auto m = fit_ols(y, X);
    // independent route: (X'X)^{-1} X'y via LU
    const Eigen::VectorXd oracle =
        (X.transpose() * X).fullPivLu().solve(X.transpose() * y);
    for (int j = 0; j < 3; ++j)
        CHECK_THAT(m.coefficients[j], Catch::Matchers::WithinAbs(oracle[j], 1e-8));

    // residuals orthogonal to every design column
    const Eigen::VectorXd resid = y - X * m.coefficients;
    for (int j = 0; j < 3; ++j)
        CHECK_THAT((X.col(j).dot(resid)), Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("fit_ols rejects rank-deficient designs naming a column") {
    Eigen::VectorXd y(5);
    y << 1, 2, 3, 4, 5;
    Eigen::MatrixXd X(5, 3);
    for (int i = 0; i < 5; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i;
        X(i, 2) = 2.0 * i;  // collinear with column 1
    }
    CHECK_THROWS_MATCHES(fit_ols(y, X), SingularDesignError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("column")));
}

TEST_CASE("fit_logistic intercept-only closed forms") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(100, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(100);

    SECTION("50 of 100") {
        y.head(50).setOnes();
        const auto m = fit_logistic(y, X);
        CHECK(m.converged);
        CHECK_THAT(m.coefficients[0], Catch::Matchers::WithinAbs(0.0, 1e-8));
    }
    SECTION("25 of 100") {
        y.head(25).setOnes();
        const auto m = fit_logistic(y, X);
        CHECK(m.converged);
        CHECK_THAT(m.coefficients[0],
                   Catch::Matchers::WithinAbs(std::log(25.0 / 75.0), 1e-8));
    }
}

namespace {

// deliberately different optimizer: plain gradient ascent with a fixed
// small step, run to tight tolerance
Eigen::VectorXd gradient_ascent_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
    const double lr = 2.0 / static_cast<double>(X.rows());
    for (int it = 0; it < 500000; ++it) {
        Eigen::VectorXd mu(X.rows());
        const Eigen::VectorXd eta = X * beta;
        for (Eigen::Index i = 0; i < X.rows(); ++i) mu[i] = expit(eta[i]);
        const Eigen::VectorXd grad = X.transpose() * (y - mu);
        if (grad.cwiseAbs().maxCoeff() < 1e-10) break;
        beta += lr * grad;
    }
    return beta;
}

}  // namespace

TEST_CASE("fit_logistic agrees with an independent gradient-ascent maximizer") {
    Rng rng(13);
    const int n = 200;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        y[i] = rng.bernoulli(expit(-0.3 + 0.8 * X(i, 1))) ? 1.0 : 0.0;
    }
    const auto m = fit_logistic(y, X);
    REQUIRE(m.converged);
    const Eigen::VectorXd oracle = gradient_ascent_logistic(y, X);
    CHECK_THAT(m.coefficients[0], Catch::Matchers::WithinAbs(oracle[0], 1e-6));
    CHECK_THAT(m.coefficients[1], Catch::Matchers::WithinAbs(oracle[1], 1e-6));
}

TEST_CASE("fit_logistic error paths") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
    CHECK_THROWS_AS(fit_logistic(y, X), DegenerateOutcomeError);

    // perfectly separated covariate
    Eigen::MatrixXd Xs(10, 2);
    Eigen::VectorXd ys(10);
    for (int i = 0; i < 10; ++i) {
        Xs(i, 0) = 1.0;
        Xs(i, 1) = i < 5 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
        ys[i] = i < 5 ? 0.0 : 1.0;
    }
    CHECK_THROWS_AS(fit_logistic(ys, Xs), SeparationError);
}

TEST_CASE("logistic fit is invariant to covariate rescaling") {
    Rng rng(17);
    const int n = 150;
    Eigen::MatrixXd X(n, 2), Xs(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = Xs(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        Xs(i, 1) = X(i, 1) / 10.0;
        y[i] = rng.bernoulli(expit(0.2 + 0.5 * X(i, 1))) ? 1.0 : 0.0;
    }
    const auto m1 = fit_logistic(y, X);
    const auto m2 = fit_logistic(y, Xs);
    for (int i = 0; i < n; ++i)
        CHECK_THAT(expit(m1.coefficients[0] + m1.coefficients[1] * X(i, 1)),
                   Catch::Matchers::WithinAbs(
                       expit(m2.coefficients[0] + m2.coefficients[1] * Xs(i, 1)), 1e-6));
}

TEST_CASE("IRLS log-likelihood history is non-decreasing") {
    Rng rng(19);
    const int n = 120;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        X(i, 2) = rng.normal();
        y[i] = rng.bernoulli(expit(-0.5 + X(i, 1) - 0.5 * X(i, 2))) ? 1.0 : 0.0;
    }
    const auto m = fit_logistic(y, X);
    for (std::size_t k = 1; k < m.loglik_history.size(); ++k)
        CHECK(m.loglik_history[k] >= m.loglik_history[k - 1]);
}

TEST_CASE("fit_multinomial intercept-only recovers category frequencies") {
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) labels.push_back(0);
    for (int i = 0; i < 30; ++i) labels.push_back(1);
    for (int i = 0; i < 50; ++i) labels.push_back(2);
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(100, 1);
    const auto m = fit_multinomial(labels, X);
    REQUIRE(m.converged);
    const auto probs = m.predict({});
    CHECK_THAT(probs[0], Catch::Matchers::WithinAbs(0.2, 1e-6));
    CHECK_THAT(probs[1], Catch::Matchers::WithinAbs(0.3, 1e-6));
    CHECK_THAT(probs[2], Catch::Matchers::WithinAbs(0.5, 1e-6));
}

TEST_CASE("two-category multinomial reduces to binary logistic") {
    Rng rng(23);
    const int n = 200;
    Eigen::MatrixXd X(n, 2);
    std::vector<int> labels(n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        const bool one = rng.bernoulli(expit(0.4 - 0.6 * X(i, 1)));
        labels[i] = one ? 1 : 0;
        y[i] = one ? 1.0 : 0.0;
    }
    const auto mm = fit_multinomial(labels, X);
    const auto ml = fit_logistic(y, X);
    REQUIRE(mm.converged);
    REQUIRE(ml.converged);
    CHECK_THAT(mm.coefficients(0, 0), Catch::Matchers::WithinAbs(ml.coefficients[0], 1e-8));
    CHECK_THAT(mm.coefficients(0, 1), Catch::Matchers::WithinAbs(ml.coefficients[1], 1e-8));
}

TEST_CASE("multinomial probabilities sum to one on every row") {
    Rng rng(29);
    const int n = 300;
    Eigen::MatrixXd X(n, 3);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        X(i, 2) = rng.normal();
        labels[i] = static_cast<int>(rng.index(3));
    }
    const auto m = fit_multinomial(labels, X);
    for (int i = 0; i < 20; ++i) {
        const auto probs = m.predict({rng.normal(), rng.normal()});
        double sum = 0.0;
        for (double p : probs) {
            CHECK(p > 0.0);
            sum += p;
        }
        CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }

    SECTION("all-zero coefficients give the uniform distribution") {
        MultinomialLogisticModel uniform;
        uniform.labels = {0, 1, 2};
        uniform.coefficients = Eigen::MatrixXd::Zero(2, 3);
        uniform.design = {0, 1};
        const auto probs = uniform.predict({0.7, -1.2});
        for (double p : probs) CHECK_THAT(p, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
    }
}

TEST_CASE("multinomial slope recovery is consistent with the generating model") {
    // mean of recovered slopes over independent fits lies within 3 standard
    // errors of the generating value
    const double gamma1 = std::log(1.5);
    const double zeta1 = std::log(0.75);
    const int n = 5000, fits = 20;
    std::vector<double> g_hat, z_hat;
    for (int f = 0; f < fits; ++f) {
        Rng rng(40000 + f);
        Eigen::MatrixXd X(n, 2);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = rng.normal();
            const double e2 = std::exp(0.1 + gamma1 * X(i, 1));
            const double e3 = std::exp(-0.1 + zeta1 * X(i, 1));
            const double denom = 1.0 + e2 + e3;
            labels[i] = rng.categorical({1.0 / denom, e2 / denom, e3 / denom});
        }
        const auto m = fit_multinomial(labels, X);
        REQUIRE(m.converged);
        g_hat.push_back(m.coefficients(0, 1));
        z_hat.push_back(m.coefficients(1, 1));
    }
    auto mean_se = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= v.size();
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double se = std::sqrt(ss / (v.size() - 1) / v.size());
        return std::pair{mean, se};
    };
    const auto [gm, gse] = mean_se(g_hat);
    const auto [zm, zse] = mean_se(z_hat);
    CHECK(std::abs(gm - gamma1) < 3.0 * gse);
    CHECK(std::abs(zm - zeta1) < 3.0 * zse);
}

TEST_CASE("predict closed forms") {
    LinearModel lin;
    lin.coefficients = Eigen::VectorXd(2);
    lin.coefficients << 1.0, 1.0;
    lin.design = {0};
    CHECK(lin.predict({2.0}) == 3.0);

    LogisticModel logi;
    logi.coefficients = Eigen::VectorXd::Zero(1);
    CHECK(logi.predict({123.0}) == 0.5);

    CHECK_THROWS_AS(lin.predict({}), ModelError);
}
