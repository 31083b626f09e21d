#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "meanrev/loadings.hpp"

namespace meanrev {

struct RegressionOptions {
    // Append a unit column unless the loadings already span it.
    bool with_intercept = false;
    // On rank-deficient loadings, drop dependent columns (rightmost first)
    // and record them instead of throwing.
    bool drop_dependent = false;
};

struct RegressionResult {
    Eigen::VectorXd coefficients;         // one per used column
    std::vector<std::string> columns;     // labels actually used
    std::vector<std::string> dropped;     // labels dropped as dependent
    Eigen::VectorXd residuals;            // eps = R - Omega f
    Eigen::VectorXd regressed;            // z .* eps
    Eigen::VectorXd weights;              // z as supplied
};

// Weighted cross-sectional regression of returns on the loadings columns
// without an intercept of its own: residuals are exactly orthogonal, under
// the given weights, to every loadings column,
//     sum_i z_i eps_i Omega_ia = 0.
// Weights must be strictly positive. The regressed returns z .* eps are the
// raw material for mean-reversion holdings: they sum to zero whenever the
// unit vector lies in the loadings span (intercept or full cluster
// partition).
RegressionResult cross_sectional_regression(const Eigen::VectorXd& returns,
                                            const LoadingsMatrix& loadings,
                                            const Eigen::VectorXd& weights,
                                            const RegressionOptions& options = {});

// Subtracts each cluster's mean return from its members. Requires a binary
// partition: every row has exactly one 1. Equals the unit-weight regression
// on the same matrix.
Eigen::VectorXd demean_by_cluster(const Eigen::VectorXd& returns,
                                  const LoadingsMatrix& clusters);

struct StrategyShaping {
    enum class Kind { linear, sign, tanh, power, rank };
    Kind kind = Kind::linear;
    double investment = 1.0;  // total absolute dollars deployed
    // tanh scale; when absent the cross-sectional standard deviation of the
    // input is used, recomputed on every call.
    std::optional<double> kappa;
};

StrategyShaping::Kind parse_shaping_kind(const std::string& name);

struct Holdings {
    Eigen::VectorXd dollars;  // D, sum |D_i| = investment
    double mishedge = 0.0;    // sum D_i, zero only when the signal sums to zero
    double kappa = 0.0;       // scale used by tanh shaping, NaN otherwise
};

// Desired dollar holdings D_i contrarian to the regressed returns:
//   linear  D = -gamma * r
//   sign    D = -gamma * sgn(r)
//   tanh    D = -gamma * tanh(r / kappa)
//   power   D = -gamma * r |r|
//   rank    D = -gamma * sgn(r_i) * rank(|r_i|)   (ascending, ties by index)
// with gamma fixed so that sum |D_i| equals the investment exactly (to
// machine precision). sgn(0) is 0 throughout. A signal that is identically
// zero, or constant when tanh needs a dispersion scale, is an error.
Holdings holdings_from_residuals(const Eigen::VectorXd& regressed,
                                 const StrategyShaping& shaping);

// Maps residuals onto Gaussian quantiles rank-preservingly: value of rank r
// (ties averaged) goes to the standard normal quantile at (r - 0.5) / N,
// then the quantile vector is rescaled to the input's cross-sectional mean
// and standard deviation. Large outliers are pulled toward the bulk while
// the ordering and the first two moments survive. Needs at least three
// values, not all equal.
Eigen::VectorXd normalize_residuals(const Eigen::VectorXd& residuals);

}  // namespace meanrev
