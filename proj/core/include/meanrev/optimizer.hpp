#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "meanrev/factor_model.hpp"

namespace meanrev {

// Labelled linear constraints sum_i w_i Y_ia = 0, one column per constraint.
struct ConstraintMatrix {
    Eigen::MatrixXd values;            // N x m
    std::vector<std::string> columns;  // m labels

    static ConstraintMatrix from_values(Eigen::MatrixXd values);
    Eigen::Index count() const { return values.cols(); }
};

// A maximum-Sharpe direction normalized to unit gross exposure
// (sum |w_i| = 1), together with the first-order-condition scale and
// constraint multipliers:
//     lambda C w = R + Y mu.
struct HoldingWeights {
    Eigen::VectorXd weights;
    double lambda = 0.0;
    Eigen::VectorXd multipliers;  // one per constraint column
};

// w proportional to C^{-1} R, the unconstrained maximum of
// R^T w / sqrt(w^T C w). C must be positive definite; a singular or merely
// semidefinite C is refused (invert a risk model instead of a rank-deficient
// sample covariance).
HoldingWeights max_sharpe_unconstrained(const Eigen::MatrixXd& cov,
                                        const Eigen::VectorXd& returns);

enum class ConstrainedMethod {
    eliminated,  // multipliers eliminated through C^{-1} solves
    bordered,    // one symmetric-indefinite solve of [[C, Y], [Y^T, 0]]
};

// Maximum Sharpe subject to Y^T w = 0. Both methods compute the same
// portfolio; the bordered path exists as an independent cross-check and for
// callers that prefer a single factorization. Zero constraints reduce to the
// unconstrained problem.
HoldingWeights max_sharpe_constrained(const Eigen::MatrixXd& cov,
                                      const Eigen::VectorXd& returns,
                                      const Eigen::MatrixXd& constraints,
                                      ConstrainedMethod method = ConstrainedMethod::eliminated);

// Same problem with C given as a factor model, solved entirely through the
// (m+K) x (m+K) system assembled from constraints and rotated loadings; cost
// O(N (m+K)^2). Constraint columns must be linearly independent.
HoldingWeights max_sharpe_factor_constrained(const FactorModel& model,
                                             const Eigen::VectorXd& returns,
                                             const Eigen::MatrixXd& constraints);

// Split of a constraint set against a factor model under the 1/xi^2 inner
// product: y_orthogonal spans the directions orthogonal to every loadings
// column (handled by regressing returns, no optimizer needed), y_remaining
// the rest. Loadings columns that lie in the span of y_remaining are dropped
// from reduced_loadings; constraining an exposure to zero makes its factor
// column irrelevant.
struct ReducedConstraints {
    Eigen::MatrixXd y_orthogonal;               // N x m''
    Eigen::MatrixXd y_remaining;                // N x m'
    Eigen::MatrixXd reduced_loadings;           // loadings minus dropped columns
    std::vector<Eigen::Index> dropped_columns;  // indices into model.loadings()
    Eigen::VectorXd xi;

    // Residuals of returns regressed on y_orthogonal with weights 1/xi^2;
    // returns unchanged when y_orthogonal is empty.
    Eigen::VectorXd residualize(const Eigen::VectorXd& returns) const;
};

ReducedConstraints reduce_constraints(const FactorModel& model,
                                      const Eigen::MatrixXd& constraints);

// Closed-form two-asset mean-reversion allocation
//     D_A = gamma (R_A / sigma_A^2 - rho R_B / (sigma_A sigma_B))
// and symmetrically for B, scaled so |D_A| + |D_B| = investment. As rho -> 1
// with distinct returns this tends to a dollar-neutral pair trade. |rho| >= 1
// is rejected.
struct TwoAssetHoldings {
    double d_a = 0.0;
    double d_b = 0.0;
};

TwoAssetHoldings two_asset_closed_form(double r_a, double r_b, double sigma_a, double sigma_b,
                                       double rho, double investment);

// R^T w / sqrt(w^T C w); scale invariant in w by construction.
double portfolio_sharpe(const Eigen::MatrixXd& cov, const Eigen::VectorXd& returns,
                        const Eigen::VectorXd& weights);

// w^T Theta w evaluated through the factor structure.
double theta_quadratic_form(const FactorModel& model, const Eigen::VectorXd& weights);

}  // namespace meanrev
