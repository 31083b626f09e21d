#include "meanrev/optimizer.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <cmath>
#include <limits>

#include "meanrev/errors.hpp"

namespace meanrev {

namespace {

constexpr double kRankTol = 1e-10;

void check_cov(const Eigen::MatrixXd& cov, Eigen::Index n) {
    if (cov.rows() != n || cov.cols() != n)
        throw ValidationError("optimizer: covariance must be N x N");
    if (!cov.isApprox(cov.transpose(), 1e-10))
        throw ValidationError("optimizer: covariance must be symmetric");
}

void check_constraints_rank(const Eigen::MatrixXd& y) {
    if (y.cols() == 0) return;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(y);
    qr.setThreshold(kRankTol);
    if (qr.rank() < y.cols())
        throw SingularError("optimizer: constraint columns are linearly dependent (rank " +
                            std::to_string(qr.rank()) + " of " + std::to_string(y.cols()) + ")");
}

HoldingWeights normalize_direction(Eigen::VectorXd dir, Eigen::VectorXd mu) {
    const double scale = dir.cwiseAbs().sum();
    if (!(scale > 0.0))
        throw ValidationError("optimizer: optimal direction is zero; nothing to hold");
    HoldingWeights h;
    h.weights = dir / scale;
    h.lambda = scale;
    h.multipliers = std::move(mu);
    return h;
}

}  // namespace

ConstraintMatrix ConstraintMatrix::from_values(Eigen::MatrixXd values) {
    ConstraintMatrix c;
    c.values = std::move(values);
    c.columns.reserve(static_cast<std::size_t>(c.values.cols()));
    for (Eigen::Index a = 0; a < c.values.cols(); ++a)
        c.columns.push_back("y" + std::to_string(a));
    return c;
}

HoldingWeights max_sharpe_unconstrained(const Eigen::MatrixXd& cov,
                                        const Eigen::VectorXd& returns) {
    check_cov(cov, returns.size());
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw SingularError("optimizer: covariance is not positive definite");
    return normalize_direction(llt.solve(returns), Eigen::VectorXd());
}

HoldingWeights max_sharpe_constrained(const Eigen::MatrixXd& cov,
                                      const Eigen::VectorXd& returns,
                                      const Eigen::MatrixXd& constraints,
                                      ConstrainedMethod method) {
    const Eigen::Index n = returns.size();
    const Eigen::Index m = constraints.cols();
    check_cov(cov, n);
    if (m == 0) return max_sharpe_unconstrained(cov, returns);
    if (constraints.rows() != n)
        throw ValidationError("optimizer: constraint rows do not match returns");
    check_constraints_rank(constraints);

    if (method == ConstrainedMethod::bordered) {
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n + m, n + m);
        gamma.topLeftCorner(n, n) = cov;
        gamma.topRightCorner(n, m) = constraints;
        gamma.bottomLeftCorner(m, n) = constraints.transpose();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
        rhs.head(n) = returns;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(gamma);
        const Eigen::VectorXd psi = lu.solve(rhs);
        return normalize_direction(psi.head(n), -psi.tail(m));
    }

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw SingularError("optimizer: covariance is not positive definite");
    const Eigen::VectorXd cinv_r = llt.solve(returns);
    const Eigen::MatrixXd cinv_y = llt.solve(constraints);
    const Eigen::MatrixXd gram = constraints.transpose() * cinv_y;  // Y^T C^{-1} Y
    Eigen::LLT<Eigen::MatrixXd> gram_llt(gram);
    if (gram_llt.info() != Eigen::Success)
        throw SingularError("optimizer: constraint Gram matrix is singular");
    const Eigen::VectorXd mu = -gram_llt.solve(constraints.transpose() * cinv_r);
    return normalize_direction(cinv_r + cinv_y * mu, mu);
}

HoldingWeights max_sharpe_factor_constrained(const FactorModel& model,
                                             const Eigen::VectorXd& returns,
                                             const Eigen::MatrixXd& constraints) {
    const Eigen::Index n = model.size();
    const Eigen::Index k = model.factors();
    const Eigen::Index m = constraints.cols();
    if (returns.size() != n)
        throw ValidationError("optimizer: returns length does not match model");
    if (m > 0 && constraints.rows() != n)
        throw ValidationError("optimizer: constraint rows do not match model");
    check_constraints_rank(constraints);

    const Eigen::VectorXd& z = model.inverse_variance();

    Eigen::MatrixXd aug(n, m + k);
    if (m > 0) aug.leftCols(m) = constraints;
    if (k > 0) aug.rightCols(k) = model.loadings();

    // phi is zero on the constraint block and identity on the factor block;
    // positive definiteness of the assembled system is equivalent to the
    // constraint columns being independent.
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m + k, m + k);
    q.bottomRightCorner(k, k).setIdentity();
    q.noalias() += aug.transpose() * z.asDiagonal() * aug;

    Eigen::VectorXd dir;
    Eigen::VectorXd mu(m);
    if (m + k == 0) {
        dir = z.asDiagonal() * returns;
    } else {
        Eigen::LLT<Eigen::MatrixXd> llt(q);
        if (llt.info() != Eigen::Success)
            throw SingularError(
                "optimizer: constraints redundant against factors; system is singular");
        const Eigen::VectorXd u = llt.solve(aug.transpose() * (z.asDiagonal() * returns));
        dir = z.asDiagonal() * (returns - aug * u);
        mu = -u.head(m);
    }
    return normalize_direction(std::move(dir), std::move(mu));
}

Eigen::VectorXd ReducedConstraints::residualize(const Eigen::VectorXd& returns) const {
    if (y_orthogonal.cols() == 0) return returns;
    if (returns.size() != y_orthogonal.rows())
        throw ValidationError("reduce_constraints: returns length mismatch");
    const Eigen::VectorXd sqrt_z = xi.array().inverse();
    const Eigen::MatrixXd wy = sqrt_z.asDiagonal() * y_orthogonal;
    const Eigen::VectorXd wr = sqrt_z.asDiagonal() * returns;
    const Eigen::VectorXd coef = wy.householderQr().solve(wr);
    return returns - y_orthogonal * coef;
}

ReducedConstraints reduce_constraints(const FactorModel& model,
                                      const Eigen::MatrixXd& constraints) {
    const Eigen::Index n = model.size();
    const Eigen::Index m = constraints.cols();
    if (m > 0 && constraints.rows() != n)
        throw ValidationError("reduce_constraints: constraint rows do not match model");
    check_constraints_rank(constraints);

    ReducedConstraints out;
    out.xi = model.xi();

    // Cross-Gram of loadings and constraints under 1/xi^2. Its kernel picks
    // the constraint combinations no factor column can see.
    const Eigen::MatrixXd g =
        model.loadings().transpose() * model.inverse_variance().asDiagonal() * constraints;

    Eigen::MatrixXd v_orth(m, 0), v_rest(m, 0);
    if (m > 0 && model.factors() > 0) {
        // Rank decisions need the overlap relative to the vector sizes, so
        // rescale g into cosines: ghat_aj = <omega_a, y_j>_Z / (|omega_a|_Z
        // |y_j|_Z). An LU threshold on raw g would measure pivots against
        // g's own largest entry and a numerically orthogonal constraint
        // (overlap ~1e-16 of its scale) would still count as full rank.
        const auto znorm = [&](const Eigen::VectorXd& v) {
            return (v.array() / model.xi().array()).matrix().norm();
        };
        Eigen::VectorXd cinv(m);
        for (Eigen::Index j = 0; j < m; ++j)
            cinv(j) = 1.0 / std::max(znorm(constraints.col(j)),
                                     std::numeric_limits<double>::min());
        Eigen::MatrixXd ghat = g * cinv.asDiagonal();
        for (Eigen::Index a = 0; a < model.factors(); ++a)
            ghat.row(a) /= std::max(znorm(model.loadings().col(a)),
                                    std::numeric_limits<double>::min());
        // Entries below the tolerance are orthogonality up to rounding.
        ghat = (ghat.array().abs() <= kRankTol).select(0.0, ghat);

        if (ghat.isZero(0.0)) {
            v_orth = Eigen::MatrixXd::Identity(m, m);
        } else {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(ghat);
            lu.setThreshold(kRankTol);
            const Eigen::Index rank = lu.rank();
            if (rank < m) v_orth = cinv.asDiagonal() * Eigen::MatrixXd(lu.kernel());
            if (rank > 0) {
                Eigen::FullPivLU<Eigen::MatrixXd> lut(ghat.transpose());
                lut.setThreshold(kRankTol);
                // row-space basis of ghat, mapped back to constraint space
                v_rest = cinv.asDiagonal() * Eigen::MatrixXd(lut.image(ghat.transpose()));
            }
        }
    } else if (m > 0) {
        v_orth = Eigen::MatrixXd::Identity(m, m);  // no factors: everything is orthogonal
    }

    out.y_orthogonal = constraints * v_orth;
    out.y_remaining = constraints * v_rest;

    // Drop loadings columns contained in the span of the remaining
    // constraints.
    const Eigen::Index k = model.factors();
    std::vector<Eigen::Index> kept;
    if (out.y_remaining.cols() == 0) {
        for (Eigen::Index a = 0; a < k; ++a) kept.push_back(a);
    } else {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(out.y_remaining);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::VectorXd col = model.loadings().col(a);
            const Eigen::VectorXd fit = out.y_remaining * qr.solve(col);
            if ((col - fit).norm() <= kRankTol * col.norm())
                out.dropped_columns.push_back(a);
            else
                kept.push_back(a);
        }
    }
    out.reduced_loadings.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j)
        out.reduced_loadings.col(static_cast<Eigen::Index>(j)) = model.loadings().col(kept[j]);
    return out;
}

TwoAssetHoldings two_asset_closed_form(double r_a, double r_b, double sigma_a, double sigma_b,
                                       double rho, double investment) {
    if (!(sigma_a > 0.0) || !(sigma_b > 0.0))
        throw ValidationError("two_asset_closed_form: volatilities must be positive");
    if (std::abs(rho) >= 1.0)
        throw ValidationError("two_asset_closed_form: |rho| >= 1 leaves the allocation undefined");
    if (!(investment > 0.0))
        throw ValidationError("two_asset_closed_form: investment must be positive");

    const double raw_a = r_a / (sigma_a * sigma_a) - rho * r_b / (sigma_a * sigma_b);
    const double raw_b = r_b / (sigma_b * sigma_b) - rho * r_a / (sigma_a * sigma_b);
    const double total = std::abs(raw_a) + std::abs(raw_b);
    if (total == 0.0)
        throw ValidationError("two_asset_closed_form: expected returns give no direction");
    const double gamma = investment / total;
    return TwoAssetHoldings{gamma * raw_a, gamma * raw_b};
}

double portfolio_sharpe(const Eigen::MatrixXd& cov, const Eigen::VectorXd& returns,
                        const Eigen::VectorXd& weights) {
    check_cov(cov, returns.size());
    if (weights.size() != returns.size())
        throw ValidationError("portfolio_sharpe: weights length mismatch");
    const double var = weights.dot(cov * weights);
    if (!(var > 0.0)) throw ValidationError("portfolio_sharpe: portfolio variance is zero");
    return returns.dot(weights) / std::sqrt(var);
}

double theta_quadratic_form(const FactorModel& model, const Eigen::VectorXd& weights) {
    if (weights.size() != model.size())
        throw ValidationError("theta_quadratic_form: weights length mismatch");
    const double specific = (model.xi().array() * weights.array()).square().sum();
    if (model.factors() == 0) return specific;
    return specific + (model.loadings().transpose() * weights).squaredNorm();
}

}  // namespace meanrev
