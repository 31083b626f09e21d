#pragma once

// Shared fixtures for the test suite: seeded random problem generators and
// independent oracle implementations. Oracles deliberately use a different
// algorithm than the library (explicit loops, dense full-pivot solves) so
// that agreement is evidence, not tautology.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "meanrev/cost_optimizer.hpp"
#include "meanrev/factor_model.hpp"
#include "meanrev/loadings.hpp"
#include "meanrev/optimizer.hpp"
#include "meanrev/rng.hpp"

namespace testutil {

using meanrev::Rng;

inline Eigen::VectorXd random_uniform_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = lo + (hi - lo) * rng.uniform();
    return v;
}

inline Eigen::VectorXd random_normal_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
    return v;
}

inline Eigen::MatrixXd random_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                            double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
    return m;
}

// Well-conditioned positive definite covariance: A A^T / n + diag jitter.
inline Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double jitter = 0.5) {
    const Eigen::MatrixXd a = random_normal_matrix(rng, n, n);
    Eigen::MatrixXd c = a * a.transpose() / static_cast<double>(n);
    c.diagonal().array() += jitter;
    return c;
}

// Binary cluster partition with k non-empty clusters (round-robin base
// assignment, then shuffled extras).
inline meanrev::LoadingsMatrix random_clusters(Rng& rng, Eigen::Index n, Eigen::Index k) {
    meanrev::LoadingsMatrix lm;
    lm.values = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index c =
            i < k ? i : static_cast<Eigen::Index>(rng.raw() % static_cast<std::uint64_t>(k));
        lm.values(i, c) = 1.0;
    }
    for (Eigen::Index a = 0; a < k; ++a) lm.columns.push_back("C" + std::to_string(a));
    meanrev::refresh_binary_flags(lm);
    return lm;
}

inline meanrev::FactorModel random_factor_model(Rng& rng, Eigen::Index n, Eigen::Index k,
                                                double loading_scale = 0.4) {
    const Eigen::VectorXd xi = random_uniform_vector(rng, n, 0.5, 1.5);
    return meanrev::FactorModel::from_rotated(xi,
                                              random_normal_matrix(rng, n, k, loading_scale));
}

// ---------------------------------------------------------------------------
// Oracles

// Weighted least squares by explicit normal equations: Q = Omega^T Z Omega
// assembled with loops, solved by full-pivot LU.
inline Eigen::VectorXd oracle_regression_residuals(const Eigen::VectorXd& r,
                                                   const Eigen::MatrixXd& omega,
                                                   const Eigen::VectorXd& z) {
    const Eigen::Index n = r.size(), k = omega.cols();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index c = 0; c < k; ++c)
            for (Eigen::Index i = 0; i < n; ++i) q(a, c) += omega(i, a) * z(i) * omega(i, c);
        for (Eigen::Index i = 0; i < n; ++i) b(a) += omega(i, a) * z(i) * r(i);
    }
    const Eigen::VectorXd f = Eigen::FullPivLU<Eigen::MatrixXd>(q).solve(b);
    Eigen::VectorXd eps = r;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < k; ++a) eps(i) -= omega(i, a) * f(a);
    return eps;
}

// Dense Theta = diag(xi^2) + omega_raw phi omega_raw^T by triple loop.
inline Eigen::MatrixXd oracle_dense_theta(const Eigen::VectorXd& xi,
                                          const Eigen::MatrixXd& omega_raw,
                                          const Eigen::MatrixXd& phi) {
    const Eigen::Index n = xi.size(), k = omega_raw.cols();
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) theta(i, i) = xi(i) * xi(i);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index a = 0; a < k; ++a)
                for (Eigen::Index b = 0; b < k; ++b)
                    theta(i, j) += omega_raw(i, a) * phi(a, b) * omega_raw(j, b);
    return theta;
}

inline Eigen::MatrixXd oracle_dense_theta(const meanrev::FactorModel& model) {
    const Eigen::MatrixXd eye =
        Eigen::MatrixXd::Identity(model.loadings().cols(), model.loadings().cols());
    return oracle_dense_theta(model.xi(), model.loadings(), eye);
}

inline Eigen::VectorXd oracle_theta_inverse_apply(const meanrev::FactorModel& model,
                                                  const Eigen::VectorXd& v) {
    return Eigen::FullPivLU<Eigen::MatrixXd>(oracle_dense_theta(model)).solve(v);
}

// Unbiased covariance of matrix columns by double loop over pairs.
inline Eigen::MatrixXd oracle_sample_covariance(const Eigen::MatrixXd& obs) {
    const Eigen::Index m = obs.rows(), n = obs.cols();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index t = 0; t < m; ++t) mean(j) += obs(t, j);
        mean(j) /= static_cast<double>(m);
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index t = 0; t < m; ++t)
                s += (obs(t, i) - mean(i)) * (obs(t, j) - mean(j));
            cov(i, j) = s / static_cast<double>(m - 1);
        }
    return cov;
}

// Trade objective g(x) = (lambda/2) x^T Theta x - rho^T x + sum L_i |x_i|
// evaluated on the dense Theta, loops only.
inline double oracle_trade_objective(const Eigen::MatrixXd& theta, const Eigen::VectorXd& rho,
                                     const Eigen::VectorXd& costs, double lambda,
                                     const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    double quad = 0.0, lin = 0.0, cost = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) quad += x(i) * theta(i, j) * x(j);
        lin += rho(i) * x(i);
        cost += costs(i) * std::abs(x(i));
    }
    return 0.5 * lambda * quad - lin + cost;
}

inline double oracle_trade_objective(const meanrev::CostProblem& p, const Eigen::VectorXd& x) {
    return oracle_trade_objective(oracle_dense_theta(p.model), meanrev::effective_returns(p),
                                  p.costs, p.lambda, x);
}

// Exhaustive search over a per-coordinate grid of the feasible box. With
// constraints present, the coordinate carrying the largest |Y| entry per
// constraint is eliminated and solved from the others; only m = 0 or 1 is
// supported, which is all the small certification instances use. Returns the
// best objective found (the minimizer via best_x when non-null).
inline double oracle_grid_minimum(const meanrev::CostProblem& p, int points_per_axis,
                                  Eigen::VectorXd* best_x = nullptr) {
    const Eigen::Index n = p.size();
    const Eigen::Index m = p.constraints.count();
    if (m > 1) throw std::logic_error("grid oracle handles at most one constraint");
    const Eigen::MatrixXd theta = oracle_dense_theta(p.model);
    const Eigen::VectorXd rho = meanrev::effective_returns(p);

    Eigen::Index pivot = -1;
    if (m == 1) p.constraints.values.col(0).cwiseAbs().maxCoeff(&pivot);

    std::vector<Eigen::Index> grid_axes;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != pivot) grid_axes.push_back(i);

    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<int> idx(grid_axes.size(), 0);
    const double denom = static_cast<double>(points_per_axis - 1);
    while (true) {
        for (std::size_t a = 0; a < grid_axes.size(); ++a) {
            const Eigen::Index i = grid_axes[a];
            const double t = static_cast<double>(idx[a]) / denom;
            x(i) = p.trade_lower(i) + t * (p.trade_upper(i) - p.trade_lower(i));
        }
        bool feasible = true;
        if (pivot >= 0) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != pivot) s += p.constraints.values(i, 0) * x(i);
            x(pivot) = -s / p.constraints.values(pivot, 0);
            feasible = x(pivot) >= p.trade_lower(pivot) && x(pivot) <= p.trade_upper(pivot);
        }
        if (feasible) {
            const double g = oracle_trade_objective(theta, rho, p.costs, p.lambda, x);
            if (g < best) {
                best = g;
                if (best_x) *best_x = x;
            }
        }
        std::size_t a = 0;
        for (; a < idx.size(); ++a) {
            if (++idx[a] < points_per_axis) break;
            idx[a] = 0;
        }
        if (a == idx.size()) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Random cost problems

struct CostProblemSpec {
    Eigen::Index n = 8;
    Eigen::Index k = 2;
    Eigen::Index m = 0;
    double cost_scale = 0.05;
    bool nonzero_current = true;
    bool tight_bounds = false;  // bounds close enough that some bind
};

inline meanrev::CostProblem random_cost_problem(Rng& rng, const CostProblemSpec& spec) {
    const Eigen::Index n = spec.n;
    meanrev::FactorModel model = random_factor_model(rng, n, spec.k);
    const Eigen::VectorXd r = random_normal_vector(rng, n, 0.1);
    Eigen::VectorXd costs = random_uniform_vector(rng, n, 0.0, spec.cost_scale);

    Eigen::MatrixXd y(n, spec.m);
    for (Eigen::Index a = 0; a < spec.m; ++a)
        y.col(a) = a == 0 ? Eigen::VectorXd::Ones(n).eval()
                          : random_normal_vector(rng, n, 1.0).eval();

    Eigen::VectorXd current = Eigen::VectorXd::Zero(n);
    if (spec.nonzero_current) {
        current = random_normal_vector(rng, n, 0.3);
        if (spec.m > 0) {  // project onto the constraint null space
            const Eigen::MatrixXd yty = y.transpose() * y;
            current -= y * Eigen::FullPivLU<Eigen::MatrixXd>(yty).solve(y.transpose() * current);
        }
    }
    const double width = spec.tight_bounds ? 0.2 : 10.0;
    Eigen::VectorXd lower(n), upper(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lower(i) = current(i) - width * (0.5 + rng.uniform());
        upper(i) = current(i) + width * (0.5 + rng.uniform());
    }
    const double lambda = 0.5 + 2.0 * rng.uniform();
    return meanrev::CostProblem(std::move(model), r, std::move(costs), std::move(current),
                                std::move(lower), std::move(upper),
                                meanrev::ConstraintMatrix::from_values(std::move(y)), lambda);
}

// ---------------------------------------------------------------------------
// Filesystem scratch space

struct TempDir {
    std::string path;

    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "meanrev_test_XXXXXX");
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return path + "/" + name; }
};

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
