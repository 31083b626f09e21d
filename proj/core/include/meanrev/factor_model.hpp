#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace meanrev {

// Multifactor risk model
//     Theta = diag(xi^2) + Omega Omega^T
// where Omega is the raw loadings matrix rotated by a Cholesky factor of the
// factor covariance (Omega = Omega_raw * chol(Phi)), so the factor block
// carries an identity covariance by construction. Immutable after
// construction; all solvers work through the K x K capacitance matrix and
// never materialize the N x N covariance.
class FactorModel {
public:
    FactorModel(Eigen::VectorXd xi, Eigen::MatrixXd omega_raw, Eigen::MatrixXd phi);

    // Wraps loadings that are already in the rotated convention (Phi = I).
    static FactorModel from_rotated(Eigen::VectorXd xi, Eigen::MatrixXd omega);

    Eigen::Index size() const { return xi_.size(); }
    Eigen::Index factors() const { return omega_.cols(); }

    const Eigen::VectorXd& xi() const { return xi_; }
    const Eigen::MatrixXd& loadings_raw() const { return omega_raw_; }
    const Eigen::MatrixXd& factor_covariance() const { return phi_; }
    const Eigen::MatrixXd& loadings() const { return omega_; }  // rotated
    const Eigen::VectorXd& inverse_variance() const { return z_; }  // 1 / xi^2

private:
    FactorModel() = default;
    void finish();  // validates and precomputes the capacitance factorization

    Eigen::VectorXd xi_;
    Eigen::MatrixXd omega_raw_;
    Eigen::MatrixXd phi_;
    Eigen::MatrixXd omega_;
    Eigen::VectorXd z_;
    Eigen::LLT<Eigen::MatrixXd> capacitance_llt_;  // I_K + Omega^T Z Omega

    friend Eigen::VectorXd apply_theta_inverse(const FactorModel&, const Eigen::VectorXd&);
};

// Dense Theta for small problems and test oracles.
Eigen::MatrixXd build_theta(const FactorModel& model);

// Theta^{-1} v in O(N K^2) through the Woodbury identity
//     Theta^{-1} = Z - Z Omega (I + Omega^T Z Omega)^{-1} Omega^T Z,
// Z = diag(1/xi^2).
Eigen::VectorXd apply_theta_inverse(const FactorModel& model, const Eigen::VectorXd& v);

struct SampleCovariance {
    Eigen::VectorXd sigma;        // per-series standard deviation
    Eigen::MatrixXd psi;          // correlations, unit diagonal
    Eigen::MatrixXd cov;          // sigma_i psi_ij sigma_j
    Eigen::Index observations;    // number of rows supplied
    Eigen::Index rank_bound;      // rank(cov) <= observations - 1
};

// Unbiased sample covariance of the columns of `observations` (one row per
// time period, one column per series). With M+1 rows the divisor is M and
// the result has rank at most M, which is why a risk model, not this matrix,
// gets inverted downstream. Requires at least two rows and no constant
// column.
SampleCovariance sample_covariance(const Eigen::MatrixXd& observations);

// Gross exposure of the regression residual map as the optimization limit:
// computes Theta_zeta^{-1} r for Theta_zeta = diag(1/z) + zeta Omega Omega^T.
// As zeta grows this converges, at rate 1/zeta, to the weighted regression's
// regressed returns z .* eps, which is the sense in which regression is the
// infinite-factor-variance limit of optimization.
Eigen::VectorXd regression_limit_check(const Eigen::MatrixXd& omega, const Eigen::VectorXd& z,
                                       double zeta, const Eigen::VectorXd& r);

}  // namespace meanrev
