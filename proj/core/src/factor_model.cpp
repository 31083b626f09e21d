#include "meanrev/factor_model.hpp"

#include <cmath>

#include "meanrev/errors.hpp"

namespace meanrev {

FactorModel::FactorModel(Eigen::VectorXd xi, Eigen::MatrixXd omega_raw, Eigen::MatrixXd phi) {
    xi_ = std::move(xi);
    omega_raw_ = std::move(omega_raw);
    phi_ = std::move(phi);

    const Eigen::Index k = omega_raw_.cols();
    if (phi_.rows() != k || phi_.cols() != k)
        throw ValidationError("factor model: factor covariance must be K x K");
    if (k > 0) {
        if (!phi_.isApprox(phi_.transpose(), 1e-12))
            throw ValidationError("factor model: factor covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(phi_);
        if (llt.info() != Eigen::Success)
            throw ValidationError("factor model: factor covariance is not positive definite");
        omega_ = omega_raw_ * Eigen::MatrixXd(llt.matrixL());
    } else {
        omega_.resize(omega_raw_.rows(), 0);
    }
    finish();
}

FactorModel FactorModel::from_rotated(Eigen::VectorXd xi, Eigen::MatrixXd omega) {
    FactorModel m;
    m.xi_ = std::move(xi);
    m.omega_ = std::move(omega);
    m.omega_raw_ = m.omega_;
    m.phi_ = Eigen::MatrixXd::Identity(m.omega_.cols(), m.omega_.cols());
    m.finish();
    return m;
}

void FactorModel::finish() {
    const Eigen::Index n = xi_.size();
    if (n == 0) throw ValidationError("factor model: empty");
    if (omega_.rows() != n)
        throw ValidationError("factor model: loadings rows do not match specific risks");
    if ((xi_.array() <= 0.0).any() || !xi_.allFinite())
        throw ValidationError("factor model: specific risks must be strictly positive");

    z_ = xi_.array().square().inverse();
    const Eigen::Index k = omega_.cols();
    Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(k, k);
    cap.noalias() += omega_.transpose() * z_.asDiagonal() * omega_;
    capacitance_llt_.compute(cap);
    if (k > 0 && capacitance_llt_.info() != Eigen::Success)
        throw ValidationError("factor model: capacitance matrix failed to factorize");
}

Eigen::MatrixXd build_theta(const FactorModel& model) {
    Eigen::MatrixXd theta = model.loadings() * model.loadings().transpose();
    theta.diagonal() += model.xi().array().square().matrix();
    return theta;
}

Eigen::VectorXd apply_theta_inverse(const FactorModel& model, const Eigen::VectorXd& v) {
    if (v.size() != model.size())
        throw ValidationError("apply_theta_inverse: vector length does not match model");
    const Eigen::VectorXd zv = model.z_.asDiagonal() * v;
    if (model.factors() == 0) return zv;
    const Eigen::VectorXd w = model.omega_.transpose() * zv;
    return zv - model.z_.asDiagonal() * (model.omega_ * model.capacitance_llt_.solve(w));
}

SampleCovariance sample_covariance(const Eigen::MatrixXd& observations) {
    const Eigen::Index rows = observations.rows();
    const Eigen::Index n = observations.cols();
    if (rows < 2)
        throw ValidationError("sample_covariance: need at least two observations");
    if (n < 1) throw ValidationError("sample_covariance: no series");

    const Eigen::RowVectorXd mean = observations.colwise().mean();
    const Eigen::MatrixXd centered = observations.rowwise() - mean;

    SampleCovariance sc;
    sc.observations = rows;
    sc.rank_bound = std::min<Eigen::Index>(n, rows - 1);
    sc.cov = (centered.transpose() * centered) / static_cast<double>(rows - 1);
    sc.sigma = sc.cov.diagonal().array().sqrt();
    for (Eigen::Index i = 0; i < n; ++i)
        if (sc.sigma(i) == 0.0)
            throw ValidationError("sample_covariance: series " + std::to_string(i) +
                                  " is constant; correlations undefined");
    sc.psi = sc.cov;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) sc.psi(i, j) /= sc.sigma(i) * sc.sigma(j);
    sc.psi.diagonal().setOnes();
    return sc;
}

Eigen::VectorXd regression_limit_check(const Eigen::MatrixXd& omega, const Eigen::VectorXd& z,
                                       double zeta, const Eigen::VectorXd& r) {
    const Eigen::Index n = r.size();
    if (omega.rows() != n || z.size() != n)
        throw ValidationError("regression_limit_check: dimension mismatch");
    if ((z.array() <= 0.0).any())
        throw ValidationError("regression_limit_check: weights must be strictly positive");
    if (zeta < 0.0) throw ValidationError("regression_limit_check: zeta must be nonnegative");

    const Eigen::VectorXd zr = z.asDiagonal() * r;
    const Eigen::Index k = omega.cols();
    if (k == 0 || zeta == 0.0) return zr;

    Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(k, k);
    cap.noalias() += zeta * omega.transpose() * z.asDiagonal() * omega;
    Eigen::LLT<Eigen::MatrixXd> llt(cap);
    if (llt.info() != Eigen::Success)
        throw SingularError("regression_limit_check: capacitance matrix not positive definite");
    return zr - zeta * (z.asDiagonal() * (omega * llt.solve(omega.transpose() * zr)));
}

}  // namespace meanrev
