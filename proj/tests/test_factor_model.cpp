#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "meanrev/errors.hpp"
#include "meanrev/factor_model.hpp"

using namespace meanrev;
using testutil::Rng;

TEST_CASE("two-name one-factor covariance assembles densely") {
    const Eigen::VectorXd xi = Eigen::VectorXd::Ones(2);
    const Eigen::MatrixXd omega = Eigen::MatrixXd::Ones(2, 1);
    const auto model = FactorModel::from_rotated(xi, omega);
    const Eigen::MatrixXd theta = build_theta(model);
    CHECK(theta(0, 0) == 2.0);
    CHECK(theta(0, 1) == 1.0);
    CHECK(theta(1, 0) == 1.0);
    CHECK(theta(1, 1) == 2.0);
}

TEST_CASE("no factors leaves the diagonal model") {
    Eigen::VectorXd xi(2);
    xi << 2.0, 3.0;
    const auto model = FactorModel::from_rotated(xi, Eigen::MatrixXd(2, 0));
    const Eigen::MatrixXd theta = build_theta(model);
    CHECK(theta(0, 0) == 4.0);
    CHECK(theta(1, 1) == 9.0);
    CHECK(theta(0, 1) == 0.0);
    // inversion is an elementwise divide
    Eigen::VectorXd v(2);
    v << 8.0, 9.0;
    const Eigen::VectorXd got = apply_theta_inverse(model, v);
    CHECK(got(0) == 2.0);
    CHECK(got(1) == 1.0);
}

TEST_CASE("theta is positive definite whenever xi is") {
    Rng rng(301);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = testutil::random_factor_model(rng, 10, 3);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(build_theta(model));
        CHECK(es.eigenvalues().minCoeff() >=
              model.xi().cwiseAbs2().minCoeff() - 1e-12);
    }
}

TEST_CASE("factor covariance is folded into the loadings once") {
    Rng rng(302);
    const Eigen::VectorXd xi = testutil::random_uniform_vector(rng, 6, 0.5, 1.5);
    const Eigen::MatrixXd omega_raw = testutil::random_normal_matrix(rng, 6, 2);
    Eigen::MatrixXd phi(2, 2);
    phi << 2.0, 0.3, 0.3, 1.0;
    const FactorModel model(xi, omega_raw, phi);
    // rotated loadings reproduce the same covariance with identity factor cov
    const Eigen::MatrixXd expected = testutil::oracle_dense_theta(xi, omega_raw, phi);
    CHECK((build_theta(model) - expected).norm() <= 1e-12 * expected.norm());
    const Eigen::MatrixXd regrown =
        model.loadings() * model.loadings().transpose() +
        Eigen::MatrixXd(xi.cwiseAbs2().asDiagonal());
    CHECK((regrown - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("model construction rejects bad input") {
    const Eigen::VectorXd xi = Eigen::VectorXd::Ones(3);
    const Eigen::MatrixXd omega = Eigen::MatrixXd::Ones(3, 1);
    Eigen::VectorXd bad_xi = xi;
    bad_xi(1) = 0.0;
    CHECK_THROWS_AS(FactorModel::from_rotated(bad_xi, omega), ValidationError);
    CHECK_THROWS_AS(FactorModel::from_rotated(xi, Eigen::MatrixXd::Ones(2, 1)),
                    ValidationError);
    Eigen::MatrixXd asym(1, 1);
    asym << -1.0;
    CHECK_THROWS_AS(FactorModel(xi, omega, asym), ValidationError);
    Eigen::MatrixXd nonsym(2, 2);
    nonsym << 1.0, 0.5, 0.1, 1.0;
    CHECK_THROWS_AS(FactorModel(xi, Eigen::MatrixXd::Ones(3, 2), nonsym), ValidationError);
}

TEST_CASE("small dense example inverts correctly") {
    const auto model =
        FactorModel::from_rotated(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Ones(2, 1));
    Eigen::VectorXd v(2);
    v << 1.0, 0.0;
    const Eigen::VectorXd got = apply_theta_inverse(model, v);
    CHECK(got(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(got(1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("factored inverse matches the dense inverse") {
    Rng rng(303);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.raw() % 46);
        const Eigen::Index k = static_cast<Eigen::Index>(rng.raw() % 9);
        const auto model = testutil::random_factor_model(rng, n, k);
        const Eigen::VectorXd v = testutil::random_normal_vector(rng, n);
        const Eigen::VectorXd fast = apply_theta_inverse(model, v);
        const Eigen::VectorXd dense = testutil::oracle_theta_inverse_apply(model, v);
        CHECK((fast - dense).norm() <= 1e-9 * (1.0 + dense.norm()));
    }
}

TEST_CASE("inverse round trips through the forward map") {
    Rng rng(304);
    const auto model = testutil::random_factor_model(rng, 30, 4);
    const Eigen::VectorXd v = testutil::random_normal_vector(rng, 30);
    const Eigen::MatrixXd theta = build_theta(model);
    CHECK((theta * apply_theta_inverse(model, v) - v).norm() <= 1e-9 * v.norm());
}

TEST_CASE("sample covariance matches the pairwise oracle") {
    Rng rng(305);
    const Eigen::MatrixXd obs = testutil::random_normal_matrix(rng, 10, 4);
    const auto sc = sample_covariance(obs);
    const Eigen::MatrixXd oracle = testutil::oracle_sample_covariance(obs);
    CHECK((sc.cov - oracle).norm() <= 1e-12 * oracle.norm());
    CHECK(sc.observations == 10);
    CHECK(sc.rank_bound == 4);  // capped by the series count here
    // with fewer observations than series the centering cap takes over
    const auto wide = sample_covariance(testutil::random_normal_matrix(rng, 3, 10));
    CHECK(wide.rank_bound == 2);
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(sc.psi(i, i) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(sc.sigma(i) == doctest::Approx(std::sqrt(oracle(i, i))).epsilon(1e-12));
    }
}

TEST_CASE("sample covariance uses the unbiased divisor") {
    Eigen::MatrixXd obs(2, 1);
    obs << 0.0, 2.0;
    const auto sc = sample_covariance(obs);
    CHECK(sc.cov(0, 0) == 2.0);  // (1 + 1) / (2 - 1)
}

TEST_CASE("identical series give correlation one") {
    Rng rng(306);
    Eigen::MatrixXd obs(8, 2);
    obs.col(0) = testutil::random_normal_vector(rng, 8);
    obs.col(1) = obs.col(0);
    const auto sc = sample_covariance(obs);
    CHECK(sc.psi(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("more series than observations caps the rank") {
    Rng rng(307);
    Eigen::MatrixXd obs = testutil::random_normal_matrix(rng, 2, 3);  // M = 1 after the mean
    const auto sc = sample_covariance(obs);
    CHECK(sc.rank_bound == 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sc.cov);
    // all but one eigenvalue collapse
    CHECK(std::abs(es.eigenvalues()(0)) <= 1e-12 * es.eigenvalues()(2));
    CHECK(std::abs(es.eigenvalues()(1)) <= 1e-12 * es.eigenvalues()(2));
}

TEST_CASE("sample covariance rejects degenerate input") {
    CHECK_THROWS_AS(sample_covariance(Eigen::MatrixXd::Ones(1, 3)), ValidationError);
    Eigen::MatrixXd constant_col = Eigen::MatrixXd::Ones(5, 2);
    CHECK_THROWS_AS(sample_covariance(constant_col), ValidationError);
}

TEST_CASE("huge factor variance reproduces the weighted regression") {
    Rng rng(308);
    const Eigen::Index n = 12, k = 2;
    const Eigen::MatrixXd omega = testutil::random_normal_matrix(rng, n, k);
    const Eigen::VectorXd z = testutil::random_uniform_vector(rng, n, 0.5, 2.0);
    const Eigen::VectorXd r = testutil::random_normal_vector(rng, n);
    const Eigen::VectorXd target =
        z.cwiseProduct(testutil::oracle_regression_residuals(r, omega, z));

    SUBCASE("zero variance keeps the bare weights") {
        const Eigen::VectorXd got = regression_limit_check(omega, z, 0.0, r);
        CHECK((got - z.cwiseProduct(r)).norm() <= 1e-12 * r.norm());
    }
    SUBCASE("the limit approaches at rate one over zeta") {
        double prev = std::numeric_limits<double>::infinity();
        for (const double zeta : {1e4, 1e5, 1e6}) {
            const Eigen::VectorXd got = regression_limit_check(omega, z, zeta, r);
            const double err = (got - target).norm();
            CHECK(err < prev / 9.0);  // at least 9x closer per decade
            prev = err;
        }
    }
    SUBCASE("intercept-only large limit demeans") {
        const Eigen::VectorXd got = regression_limit_check(
            Eigen::MatrixXd::Ones(n, 1), Eigen::VectorXd::Ones(n), 1e8, r);
        const Eigen::VectorXd demeaned = r.array() - r.mean();
        CHECK((got - demeaned).norm() <= 1e-6 * r.norm());
    }
}
