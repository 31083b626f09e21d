#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "meanrev/errors.hpp"
#include "meanrev/optimizer.hpp"

using namespace meanrev;
using testutil::Rng;

namespace {

// Best Sharpe over uniformly random directions; lower bound of the optimum.
double sampled_sharpe_bound(Rng& rng, const Eigen::MatrixXd& cov, const Eigen::VectorXd& r,
                            int samples) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const Eigen::VectorXd w = testutil::random_normal_vector(rng, r.size());
        best = std::max(best, portfolio_sharpe(cov, r, w));
    }
    return best;
}

}  // namespace

TEST_CASE("identity covariance points holdings along returns") {
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd r(2);
    r << 3.0, 4.0;
    const auto h = max_sharpe_unconstrained(cov, r);
    CHECK(h.weights(0) == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
    CHECK(h.weights(1) == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(h.weights.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-14));
    // first-order condition lambda C w = R at the reported scale
    CHECK((h.lambda * cov * h.weights - r).norm() <= 1e-12 * r.norm());
    CHECK(h.multipliers.size() == 0);
}

TEST_CASE("diagonal covariance divides returns by variance") {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
    cov.diagonal() << 1.0, 4.0, 0.25;
    Eigen::VectorXd r(3);
    r << 1.0, 1.0, 1.0;
    const auto h = max_sharpe_unconstrained(cov, r);
    const Eigen::VectorXd expected = Eigen::Vector3d(1.0, 0.25, 4.0) / 5.25;
    CHECK((h.weights - expected).norm() <= 1e-14);
}

TEST_CASE("unconstrained optimum beats random portfolios") {
    Rng rng(401);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd cov = testutil::random_spd(rng, 6);
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, 6);
        const auto h = max_sharpe_unconstrained(cov, r);
        const double opt = portfolio_sharpe(cov, r, h.weights);
        CHECK(opt >= sampled_sharpe_bound(rng, cov, r, 10000) - 1e-12);
    }
}

TEST_CASE("singular covariance is refused") {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(3, 3);  // rank one
    CHECK_THROWS_AS(max_sharpe_unconstrained(cov, Eigen::Vector3d(1, 2, 3)), SingularError);
}

TEST_CASE("dollar neutrality splits two names evenly") {
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd r(2);
    r << 3.0, 1.0;
    const Eigen::MatrixXd y = Eigen::MatrixXd::Ones(2, 1);
    const auto h = max_sharpe_constrained(cov, r, y);
    CHECK(h.weights(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(h.weights(1) == doctest::Approx(-0.5).epsilon(1e-14));
    REQUIRE(h.multipliers.size() == 1);
    // stationarity with the multiplier: lambda C w = R + Y mu
    const Eigen::VectorXd resid = h.lambda * cov * h.weights - r - y * h.multipliers;
    CHECK(resid.norm() <= 1e-12 * r.norm());
}

TEST_CASE("zero constraints fall back to the unconstrained answer") {
    Rng rng(402);
    const Eigen::MatrixXd cov = testutil::random_spd(rng, 4);
    const Eigen::VectorXd r = testutil::random_normal_vector(rng, 4);
    const auto base = max_sharpe_unconstrained(cov, r);
    const auto h = max_sharpe_constrained(cov, r, Eigen::MatrixXd(4, 0));
    CHECK((h.weights - base.weights).norm() <= 1e-14);
}

TEST_CASE("eliminated and bordered constraint paths agree") {
    Rng rng(403);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = 6;
        const Eigen::MatrixXd cov = testutil::random_spd(rng, n);
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
        Eigen::MatrixXd y(n, 2);
        y.col(0).setOnes();
        y.col(1) = testutil::random_normal_vector(rng, n);
        const auto a = max_sharpe_constrained(cov, r, y, ConstrainedMethod::eliminated);
        const auto b = max_sharpe_constrained(cov, r, y, ConstrainedMethod::bordered);
        CHECK((a.weights - b.weights).norm() <= 1e-10);
        CHECK((a.multipliers - b.multipliers).norm() <=
              1e-10 * (1.0 + a.multipliers.norm()));
        CHECK(std::abs(y.col(0).dot(a.weights)) <= 1e-12);
        CHECK(std::abs(y.col(1).dot(a.weights)) <= 1e-12);
    }
}

TEST_CASE("dependent constraint columns are refused") {
    Rng rng(404);
    const Eigen::MatrixXd cov = testutil::random_spd(rng, 4);
    Eigen::MatrixXd y(4, 2);
    y.col(0).setOnes();
    y.col(1) = 2.0 * y.col(0);
    CHECK_THROWS_AS(
        max_sharpe_constrained(cov, testutil::random_normal_vector(rng, 4), y),
        SingularError);
}

TEST_CASE("constraining every factor away reproduces weighted regression") {
    Rng rng(405);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.raw() % 26);
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.raw() % 3);
        const auto model = testutil::random_factor_model(rng, n, k);
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
        const auto h = max_sharpe_factor_constrained(model, r, model.loadings());
        // lambda w must equal the 1/xi^2-weighted regression's residual weights
        const Eigen::VectorXd z = model.inverse_variance();
        const Eigen::VectorXd target =
            z.cwiseProduct(testutil::oracle_regression_residuals(r, model.loadings(), z));
        CHECK((h.lambda * h.weights - target).norm() <= 1e-10 * (1.0 + target.norm()));
    }
}

TEST_CASE("mismatched regression weights lose Sharpe against the optimizer") {
    // Residuals from any weighting are orthogonal to the loadings, so a book
    // built from unit-weight residuals is factor neutral too -- but only the
    // 1/xi^2 weighting reproduces the variance-optimal neutral book. With
    // heterogeneous specific risk the unit weighting must cost Sharpe.
    Rng rng(406);
    const Eigen::Index n = 20;
    const auto model = testutil::random_factor_model(rng, n, 2);
    const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
    const Eigen::MatrixXd theta = build_theta(model);

    const Eigen::VectorXd wrong = testutil::oracle_regression_residuals(
        r, model.loadings(), Eigen::VectorXd::Ones(n));
    const Eigen::VectorXd exposures = model.loadings().transpose() * wrong;
    CHECK(exposures.cwiseAbs().maxCoeff() <= 1e-10 * r.norm());  // still neutral

    const auto best = max_sharpe_factor_constrained(model, r, model.loadings());
    const double s_best = portfolio_sharpe(theta, r, best.weights);
    const double s_wrong = portfolio_sharpe(theta, r, wrong);
    CHECK(s_wrong < s_best * (1.0 - 1e-3));
}

TEST_CASE("factor-form constrained solve matches the dense path") {
    Rng rng(407);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 20, k = 4, m = 2;
        const auto model = testutil::random_factor_model(rng, n, k);
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
        Eigen::MatrixXd y(n, m);
        y.col(0).setOnes();
        y.col(1) = testutil::random_normal_vector(rng, n);
        const auto fast = max_sharpe_factor_constrained(model, r, y);
        const auto dense = max_sharpe_constrained(build_theta(model), r, y);
        CHECK((fast.weights - dense.weights).norm() <= 1e-9);
        CHECK((fast.multipliers - dense.multipliers).norm() <=
              1e-9 * (1.0 + dense.multipliers.norm()));
    }
}

TEST_CASE("factor-form solve with no factors matches the diagonal dense solve") {
    Rng rng(408);
    const Eigen::Index n = 8;
    const Eigen::VectorXd xi = testutil::random_uniform_vector(rng, n, 0.5, 2.0);
    const auto model = FactorModel::from_rotated(xi, Eigen::MatrixXd(n, 0));
    const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Ones(n, 1);
    const auto fast = max_sharpe_factor_constrained(model, r, y);
    const auto dense =
        max_sharpe_constrained(Eigen::MatrixXd(xi.cwiseAbs2().asDiagonal()), r, y);
    CHECK((fast.weights - dense.weights).norm() <= 1e-10);
}

TEST_CASE("constraint reduction splits against the loadings span") {
    Rng rng(409);
    const Eigen::Index n = 15, k = 3;
    const auto model = testutil::random_factor_model(rng, n, k);

    SUBCASE("constraints equal to loadings columns are absorbed") {
        const Eigen::MatrixXd y = model.loadings().leftCols(2);
        const auto red = reduce_constraints(model, y);
        CHECK(red.y_orthogonal.cols() == 0);
        CHECK(red.y_remaining.cols() == 2);
        REQUIRE(red.dropped_columns.size() == 2);
        CHECK(red.reduced_loadings.cols() == 1);
        CHECK((red.reduced_loadings - model.loadings().rightCols(1)).norm() == 0.0);
    }
    SUBCASE("constraints orthogonal to the loadings join the regression side") {
        // build y orthogonal to every loadings column under the 1/xi^2 product
        const Eigen::VectorXd z = model.inverse_variance();
        Eigen::VectorXd y = testutil::random_normal_vector(rng, n);
        const Eigen::MatrixXd omega = model.loadings();
        // subtract the weighted projection onto the loadings
        const Eigen::MatrixXd q = omega.transpose() * z.asDiagonal() * omega;
        y -= omega * q.ldlt().solve(omega.transpose() * (z.cwiseProduct(y)));
        const auto red = reduce_constraints(model, y);
        CHECK(red.y_orthogonal.cols() == 1);
        CHECK(red.y_remaining.cols() == 0);
        CHECK(red.dropped_columns.empty());
        // residualize removes the constrained direction
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
        const Eigen::VectorXd eps = red.residualize(r);
        CHECK(std::abs((z.array() * eps.array() * y.array()).sum()) <= 1e-9 * r.norm());
    }
    SUBCASE("empty constraints pass everything through") {
        const auto red = reduce_constraints(model, Eigen::MatrixXd(n, 0));
        CHECK(red.y_orthogonal.cols() == 0);
        CHECK(red.y_remaining.cols() == 0);
        CHECK(red.reduced_loadings.cols() == k);
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
        CHECK((red.residualize(r) - r).norm() == 0.0);
    }
}

TEST_CASE("reduced and direct constrained solves give the same portfolio") {
    Rng rng(410);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 12, k = 3;
        const auto model = testutil::random_factor_model(rng, n, k);
        const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
        // mix: one loadings column, one generic direction
        Eigen::MatrixXd y(n, 2);
        y.col(0) = model.loadings().col(trial % k);
        y.col(1) = testutil::random_normal_vector(rng, n);

        const auto direct = max_sharpe_factor_constrained(model, r, y);

        const auto red = reduce_constraints(model, y);
        Eigen::MatrixXd y_rest(n, red.y_orthogonal.cols() + red.y_remaining.cols());
        y_rest << red.y_orthogonal, red.y_remaining;
        const auto reduced_model = FactorModel::from_rotated(red.xi, red.reduced_loadings);
        const auto via_reduction =
            max_sharpe_factor_constrained(reduced_model, red.residualize(r), y_rest);
        CHECK((direct.weights - via_reduction.weights).norm() <= 1e-9);
    }
}

TEST_CASE("two flat names with independent risk split the book") {
    const auto h = two_asset_closed_form(1.0, 1.0, 1.0, 1.0, 0.0, 2.0);
    CHECK(h.d_a == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(h.d_b == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("near-unit correlation with distinct returns hedges dollars") {
    const auto h = two_asset_closed_form(1.0, 0.5, 1.0, 1.0, 0.999, 2.0);
    CHECK(std::abs(h.d_a + h.d_b) / 2.0 < 0.01);
    CHECK(h.d_a > 0.0);
    CHECK(h.d_b < 0.0);
}

TEST_CASE("two-asset closed form maximizes over the angle grid") {
    Rng rng(411);
    for (int trial = 0; trial < 100; ++trial) {
        const double ra = rng.normal(), rb = rng.normal();
        const double sa = 0.5 + rng.uniform(), sb = 0.5 + rng.uniform();
        const double rho = 1.8 * rng.uniform() - 0.9;
        const double inv = 1.0 + 3.0 * rng.uniform();
        const auto h = two_asset_closed_form(ra, rb, sa, sb, rho, inv);
        CHECK(std::abs(h.d_a) + std::abs(h.d_b) == doctest::Approx(inv).epsilon(1e-12));

        Eigen::MatrixXd cov(2, 2);
        cov << sa * sa, rho * sa * sb, rho * sa * sb, sb * sb;
        Eigen::VectorXd r(2);
        r << ra, rb;
        Eigen::VectorXd w(2);
        w << h.d_a, h.d_b;
        if (ra == 0.0 && rb == 0.0) continue;
        const double closed = portfolio_sharpe(cov, r, w);
        double best = -std::numeric_limits<double>::infinity();
        for (int g = 0; g < 10000; ++g) {
            const double angle = 2.0 * M_PI * g / 10000.0;
            Eigen::VectorXd cand(2);
            cand << std::cos(angle), std::sin(angle);
            best = std::max(best, portfolio_sharpe(cov, r, cand));
        }
        CHECK(closed >= best - 1e-6 * std::abs(best));
    }
}

TEST_CASE("two-asset closed form rejects degenerate correlation and risk") {
    CHECK_THROWS_AS(two_asset_closed_form(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(two_asset_closed_form(1.0, 1.0, 1.0, 1.0, -1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(two_asset_closed_form(1.0, 1.0, 0.0, 1.0, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(two_asset_closed_form(0.0, 0.0, 1.0, 1.0, 0.0, 1.0), ValidationError);
}

TEST_CASE("portfolio sharpe is scale invariant") {
    Rng rng(412);
    const Eigen::MatrixXd cov = testutil::random_spd(rng, 5);
    const Eigen::VectorXd r = testutil::random_normal_vector(rng, 5);
    const Eigen::VectorXd w = testutil::random_normal_vector(rng, 5);
    const double s1 = portfolio_sharpe(cov, r, w);
    const double s2 = portfolio_sharpe(cov, r, 17.3 * w);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
    CHECK_THROWS_AS(portfolio_sharpe(cov, r, Eigen::VectorXd::Zero(5)), ValidationError);
}

TEST_CASE("quadratic form through the factors matches the dense product") {
    Rng rng(413);
    const auto model = testutil::random_factor_model(rng, 10, 3);
    const Eigen::VectorXd w = testutil::random_normal_vector(rng, 10);
    const double fast = theta_quadratic_form(model, w);
    const double dense = w.dot(testutil::oracle_dense_theta(model) * w);
    CHECK(fast == doctest::Approx(dense).epsilon(1e-12));
}
