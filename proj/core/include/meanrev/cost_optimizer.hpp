#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meanrev/errors.hpp"
#include "meanrev/factor_model.hpp"
#include "meanrev/optimizer.hpp"

namespace meanrev {

// Single-period rebalancing problem: starting from current weights w*, find
// trades x = w - w* maximizing expected return net of linear trading costs
// L_i |x_i| and a quadratic risk penalty (lambda/2) w^T Theta w, subject to
// homogeneous linear constraints Y^T w = 0 (which w* already satisfies) and
// position bounds w- <= w <= w+.
struct CostProblem {
    CostProblem(FactorModel model_, Eigen::VectorXd returns_, Eigen::VectorXd costs_,
                Eigen::VectorXd current_, Eigen::VectorXd lower_, Eigen::VectorXd upper_,
                ConstraintMatrix constraints_, double lambda_);

    FactorModel model;             // loadings pruned of constraint-spanned columns
    Eigen::VectorXd returns;       // R
    Eigen::VectorXd costs;         // L, nonnegative per unit traded
    Eigen::VectorXd current;       // w*
    Eigen::VectorXd lower, upper;  // position bounds around w*
    ConstraintMatrix constraints;  // Y
    double lambda;                 // risk aversion, > 0

    // Derived at construction: trade bounds x- = lower - w*, x+ = upper - w*.
    // A bound exactly at zero is nudged by 1e-12 so that x- < 0 < x+ always
    // holds and the no-trade zone stays representable.
    Eigen::VectorXd trade_lower, trade_upper;
    // Loadings columns removed because they lie in the constraint span: with
    // the exposure pinned to zero their risk term cannot bite.
    std::vector<Eigen::Index> dropped_loading_columns;

    Eigen::Index size() const { return returns.size(); }
    CostProblem with_lambda(double new_lambda) const;
};

// Returns net of the cost of carrying the current position:
// rho = R - lambda Theta w*. The trade objective is
//     g(x) = (lambda/2) x^T Theta x - rho^T x + sum_i L_i |x_i|
// up to a constant, minimized over the feasible trades.
Eigen::VectorXd effective_returns(const CostProblem& problem);

enum class TradeSet : std::uint8_t {
    free,      // trades strictly between its bounds
    no_trade,  // |marginal gain| inside the cost band, x = 0
    upper,     // pinned at x+
    lower,     // pinned at x-
};

std::string trade_set_name(TradeSet s);
TradeSet parse_trade_set(const std::string& name);

struct Solution {
    Eigen::VectorXd x;            // trades
    Eigen::VectorXd w;            // w* + x
    Eigen::VectorXd eta;          // sign(x_i): +-1 on traded names, 0 in the no-trade zone
    std::vector<TradeSet> sets;
    // Solved (m+K)-vector: constraint block holds -mu/lambda, factor block
    // the exposures sum_i x_i Omega_ia.
    Eigen::VectorXd u;
    Eigen::VectorXd multipliers;  // mu
    double objective = 0.0;       // g(x) at the solution
    int sweeps = 0;
    bool converged = false;
};

// Thrown when the active-set iteration hits its sweep cap; carries the last
// iterate so callers can inspect or dump it.
class NonConvergenceError : public ConvergenceError {
public:
    NonConvergenceError(const std::string& what, Solution last)
        : ConvergenceError(what), last_state(std::move(last)) {}
    Solution last_state;
};

struct SolveOptions {
    enum class BoundGrowth {
        // Bounds join J+/J- only as the feasible path x-hat actually reaches
        // them (few indices per sweep, default).
        incremental,
        // Bounds assigned wholesale from the KKT inequalities each sweep.
        inequality,
    };
    BoundGrowth growth = BoundGrowth::incremental;
    // Starting trade-direction guesses; sign(rho) when absent.
    std::optional<Eigen::VectorXd> initial_signs;
    double u_tolerance = 1e-12;   // relative |du| declaring the multipliers stationary
    int max_sweeps_factor = 100;  // sweep cap = factor * (N + K + m)
};

// Active-set solver. Each sweep solves the (m+K) reduced system implied by
// the current free set, reclassifies every index from the resulting
// marginals, and stops once the partition, the trade signs and the reduced
// solution all stop moving. The converged partition satisfies the problem's
// KKT conditions (kkt_check verifies them independently); with Theta
// positive definite the optimum is unique, so where the iteration stops does
// not depend on the path taken.
Solution solve_fixed_lambda(const CostProblem& problem, const SolveOptions& options = {});

// Largest step t in [0,1] from a feasible point toward a candidate that
// keeps every coordinate inside [lower, upper], and the point moved by it
// (coordinates landing on a bound are snapped exactly). A zero displacement
// reports t = 1 with the point unchanged.
struct LineSearchResult {
    double t = 1.0;
    Eigen::VectorXd moved;
};

LineSearchResult line_search_t_star(const Eigen::VectorXd& from, const Eigen::VectorXd& to,
                                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

struct KktViolation {
    Eigen::Index index;     // -1 for aggregate conditions
    std::string condition;
    double amount;          // how far past the allowed slack
};

struct KktReport {
    bool pass = true;
    // Worst signed violation per condition family (<= 0 means satisfied).
    double worst_stationarity = 0.0;   // free set: lambda(Theta x)_i - rho_i + L_i eta_i - (Y mu)_i
    double worst_constraints = 0.0;    // |Y^T x|
    double worst_bounds = 0.0;         // x outside [x-, x+], or off its claimed bound/zero
    double worst_no_trade = 0.0;       // no-trade band |g_i| <= L_i
    double worst_at_upper = 0.0;       // g_i <= -L_i at the upper bound
    double worst_at_lower = 0.0;       // g_i >= L_i at the lower bound
    std::vector<KktViolation> violations;
};

// Verifies a claimed solution against the problem using only its primal
// trades, duals and partition; nothing from the solver's internals is
// trusted (factor exposures are recomputed from x). Violations are measured
// against tol * max(1, |rho|_inf).
KktReport kkt_check(const CostProblem& problem, const Solution& solution, double tol = 1e-8);

// (R . w - L . |x|) / sqrt(w^T Theta w), the single-period Sharpe the
// rebalanced book realizes after costs. Throws if the portfolio carries no
// risk.
double realized_sharpe(const CostProblem& problem, const Solution& solution);

struct SharpeSearchPoint {
    double lambda = 0.0;
    double sharpe = 0.0;
    bool usable = false;  // solve converged and produced a risky portfolio
};

struct SharpeSearchResult {
    double lambda = 0.0;
    double sharpe = 0.0;
    Solution solution;
    std::vector<SharpeSearchPoint> evaluations;
};

// Scans lambda over a grid (25 log-spaced points across four decades around
// the cost-free closed-form scale when none is given), keeps the realized
// Sharpe maximizer, then sharpens it by golden-section search on the best
// bracket. The family of fixed-lambda optima only approximates the true
// Sharpe frontier once costs bend the scale invariance, so the result is the
// best member of that family, not a certified global maximum. Evaluations at
// distinct lambdas are independent; they are run sequentially so the
// evaluation log is reproducible.
SharpeSearchResult sharpe_search(const CostProblem& base, std::vector<double> grid = {},
                                 const SolveOptions& options = {});

}  // namespace meanrev
