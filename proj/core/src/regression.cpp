#include "meanrev/regression.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "meanrev/errors.hpp"

namespace meanrev {

namespace {

constexpr double kDependenceTol = 1e-10;

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Greedy left-to-right scan marking columns that add no new direction.
// Returning the kept set this way makes "drop rightmost first" automatic: a
// column is dependent only relative to the columns kept before it.
std::vector<bool> independent_columns(const Eigen::MatrixXd& m, double tol) {
    std::vector<Eigen::VectorXd> basis;
    std::vector<bool> keep(static_cast<std::size_t>(m.cols()), false);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::VectorXd v = m.col(j);
        const double orig = v.norm();
        if (orig == 0.0) continue;
        for (const auto& b : basis) v -= b.dot(v) * b;
        // One re-orthogonalization pass keeps the test reliable when columns
        // are nearly parallel.
        for (const auto& b : basis) v -= b.dot(v) * b;
        if (v.norm() > tol * orig) {
            basis.push_back(v / v.norm());
            keep[static_cast<std::size_t>(j)] = true;
        }
    }
    return keep;
}

}  // namespace

RegressionResult cross_sectional_regression(const Eigen::VectorXd& returns,
                                            const LoadingsMatrix& loadings,
                                            const Eigen::VectorXd& weights,
                                            const RegressionOptions& options) {
    const Eigen::Index n = returns.size();
    if (loadings.values.rows() != n)
        throw ValidationError("regression: loadings rows (" +
                              std::to_string(loadings.values.rows()) +
                              ") do not match returns length (" + std::to_string(n) + ")");
    if (weights.size() != n)
        throw ValidationError("regression: weights length does not match returns");
    if ((weights.array() <= 0.0).any())
        throw ValidationError("regression: weights must be strictly positive");
    if (loadings.columns.size() != static_cast<std::size_t>(loadings.values.cols()))
        throw ValidationError("regression: loadings column labels out of sync");

    Eigen::MatrixXd omega = loadings.values;
    std::vector<std::string> labels = loadings.columns;

    if (options.with_intercept) {
        // Only add the unit column when it brings a new direction; a full
        // binary partition already sums to it.
        Eigen::MatrixXd probe(n, omega.cols() + 1);
        probe << omega, Eigen::VectorXd::Ones(n);
        auto keep = independent_columns(probe, kDependenceTol);
        if (keep.back()) {
            omega.conservativeResize(n, omega.cols() + 1);
            omega.col(omega.cols() - 1) = Eigen::VectorXd::Ones(n);
            labels.push_back("intercept");
        }
    }

    const Eigen::Index k = omega.cols();
    if (k == 0) throw ValidationError("regression: no loadings columns");
    if (n < k)
        throw ValidationError("regression: more columns (" + std::to_string(k) +
                              ") than observations (" + std::to_string(n) + ")");

    const Eigen::VectorXd sqrt_z = weights.array().sqrt();
    Eigen::MatrixXd w_scaled = sqrt_z.asDiagonal() * omega;

    auto keep = independent_columns(w_scaled, kDependenceTol);
    RegressionResult res;
    for (std::size_t j = 0; j < keep.size(); ++j)
        if (!keep[j]) res.dropped.push_back(labels[j]);

    if (!res.dropped.empty() && !options.drop_dependent) {
        std::string msg = "regression: loadings are rank deficient; dependent columns:";
        for (const auto& c : res.dropped) msg += " " + c;
        throw SingularError(msg);
    }

    Eigen::Index kept = 0;
    for (bool b : keep) kept += b;
    Eigen::MatrixXd omega_kept(n, kept);
    Eigen::MatrixXd w_kept(n, kept);
    res.columns.reserve(static_cast<std::size_t>(kept));
    Eigen::Index out = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
        if (!keep[static_cast<std::size_t>(j)]) continue;
        omega_kept.col(out) = omega.col(j);
        w_kept.col(out) = w_scaled.col(j);
        res.columns.push_back(labels[static_cast<std::size_t>(j)]);
        ++out;
    }

    const Eigen::VectorXd b = sqrt_z.asDiagonal() * returns;
    res.coefficients = w_kept.householderQr().solve(b);
    res.residuals = returns - omega_kept * res.coefficients;
    res.regressed = weights.asDiagonal() * res.residuals;
    res.weights = weights;
    return res;
}

Eigen::VectorXd demean_by_cluster(const Eigen::VectorXd& returns,
                                  const LoadingsMatrix& clusters) {
    const Eigen::Index n = returns.size();
    const Eigen::Index k = clusters.values.cols();
    if (clusters.values.rows() != n)
        throw ValidationError("demean_by_cluster: loadings rows do not match returns");

    for (Eigen::Index i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (Eigen::Index a = 0; a < k; ++a) {
            const double v = clusters.values(i, a);
            if (v != 0.0 && v != 1.0)
                throw ValidationError("demean_by_cluster: loadings are not binary");
            row_sum += v;
        }
        if (row_sum != 1.0)
            throw ValidationError(
                "demean_by_cluster: every row must belong to exactly one cluster");
    }

    Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < k; ++a)
            if (clusters.values(i, a) == 1.0) {
                sums(a) += returns(i);
                counts(a) += 1.0;
            }

    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < k; ++a)
            if (clusters.values(i, a) == 1.0) out(i) = returns(i) - sums(a) / counts(a);
    return out;
}

StrategyShaping::Kind parse_shaping_kind(const std::string& name) {
    using Kind = StrategyShaping::Kind;
    if (name == "linear") return Kind::linear;
    if (name == "sign") return Kind::sign;
    if (name == "tanh") return Kind::tanh;
    if (name == "power") return Kind::power;
    if (name == "rank") return Kind::rank;
    throw ValidationError("unknown shaping kind: '" + name +
                          "' (expected linear, sign, tanh, power or rank)");
}

Holdings holdings_from_residuals(const Eigen::VectorXd& regressed,
                                 const StrategyShaping& shaping) {
    const Eigen::Index n = regressed.size();
    if (n < 1) throw ValidationError("holdings_from_residuals: empty signal");
    if (!(shaping.investment > 0.0))
        throw ValidationError("holdings_from_residuals: investment must be positive");
    if (!regressed.allFinite())
        throw ValidationError("holdings_from_residuals: signal contains non-finite values");

    Holdings h;
    h.kappa = std::numeric_limits<double>::quiet_NaN();

    Eigen::VectorXd shape(n);
    using Kind = StrategyShaping::Kind;
    switch (shaping.kind) {
        case Kind::linear:
            shape = regressed;
            break;
        case Kind::sign:
            for (Eigen::Index i = 0; i < n; ++i) shape(i) = sgn(regressed(i));
            break;
        case Kind::tanh: {
            double kappa;
            if (shaping.kappa) {
                kappa = *shaping.kappa;
                if (!(kappa > 0.0))
                    throw ValidationError("holdings_from_residuals: tanh scale must be positive");
            } else {
                const double mean = regressed.mean();
                kappa = std::sqrt((regressed.array() - mean).square().sum() / n);
                if (kappa == 0.0)
                    throw ValidationError(
                        "holdings_from_residuals: tanh shaping needs cross-sectional dispersion");
            }
            h.kappa = kappa;
            shape = (regressed.array() / kappa).tanh();
            break;
        }
        case Kind::power:
            shape = regressed.array() * regressed.array().abs();
            break;
        case Kind::rank: {
            std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                const double va = std::abs(regressed(a)), vb = std::abs(regressed(b));
                if (va != vb) return va < vb;
                return a < b;
            });
            for (Eigen::Index r = 0; r < n; ++r)
                shape(order[static_cast<std::size_t>(r)]) =
                    sgn(regressed(order[static_cast<std::size_t>(r)])) * static_cast<double>(r + 1);
            break;
        }
    }

    const double total = shape.cwiseAbs().sum();
    if (total == 0.0)
        throw ValidationError("holdings_from_residuals: signal is identically zero");

    h.dollars = -(shaping.investment / total) * shape;
    // Second normalization pass: the first scale leaves sum |D| within a few
    // hundred ulps of the target; rescaling by the measured sum brings it to
    // machine precision regardless of N.
    h.dollars *= shaping.investment / h.dollars.cwiseAbs().sum();
    h.mishedge = h.dollars.sum();
    return h;
}

Eigen::VectorXd normalize_residuals(const Eigen::VectorXd& residuals) {
    const Eigen::Index n = residuals.size();
    if (n < 3) throw ValidationError("normalize_residuals: need at least 3 values");
    if (!residuals.allFinite())
        throw ValidationError("normalize_residuals: non-finite input");

    const double mean = residuals.mean();
    const double sd = std::sqrt((residuals.array() - mean).square().sum() / n);
    if (sd == 0.0)
        throw ValidationError("normalize_residuals: all values equal");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (residuals(a) != residuals(b)) return residuals(a) < residuals(b);
        return a < b;
    });

    // Average rank within tied runs so equal inputs stay equal on output.
    Eigen::VectorXd rank(n);
    std::size_t pos = 0;
    while (pos < order.size()) {
        std::size_t end = pos + 1;
        while (end < order.size() && residuals(order[end]) == residuals(order[pos])) ++end;
        const double avg = 0.5 * static_cast<double>(pos + 1 + end);  // mean of pos+1 .. end
        for (std::size_t j = pos; j < end; ++j) rank(order[j]) = avg;
        pos = end;
    }

    const boost::math::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i)
        q(i) = boost::math::quantile(gauss, (rank(i) - 0.5) / static_cast<double>(n));

    // Standardize the quantile vector, then give it the input's first two
    // moments. The output mean is the input mean exactly and an input that
    // already sits on the quantile grid maps to itself.
    const double qm = q.mean();
    const double qsd = std::sqrt((q.array() - qm).square().sum() / n);
    return (mean + (sd / qsd) * (q.array() - qm)).matrix();
}

}  // namespace meanrev
