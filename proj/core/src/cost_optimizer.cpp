#include "meanrev/cost_optimizer.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

namespace meanrev {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kBoundNudge = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite())
        throw ValidationError(std::string("cost problem: non-finite ") + what);
}

}  // namespace

CostProblem::CostProblem(FactorModel model_, Eigen::VectorXd returns_, Eigen::VectorXd costs_,
                         Eigen::VectorXd current_, Eigen::VectorXd lower_,
                         Eigen::VectorXd upper_, ConstraintMatrix constraints_, double lambda_)
    : model(std::move(model_)),
      returns(std::move(returns_)),
      costs(std::move(costs_)),
      current(std::move(current_)),
      lower(std::move(lower_)),
      upper(std::move(upper_)),
      constraints(std::move(constraints_)),
      lambda(lambda_) {
    const Eigen::Index n = model.size();
    if (returns.size() != n || costs.size() != n || current.size() != n ||
        lower.size() != n || upper.size() != n)
        throw ValidationError("cost problem: vector lengths do not match the factor model");
    check_finite(returns, "returns");
    check_finite(costs, "costs");
    check_finite(current, "current weights");
    // Position bounds may be infinite -- an infinite bound can never
    // activate -- but NaN or an inverted interval is a caller error.
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isnan(lower(i)) || std::isnan(upper(i)))
            throw ValidationError("cost problem: NaN position bound");
        if (lower(i) == kInf || upper(i) == -kInf || lower(i) > upper(i))
            throw ValidationError("cost problem: empty bound interval for name " +
                                  std::to_string(i));
    }
    if (!(lambda > 0.0)) throw ValidationError("cost problem: lambda must be positive");
    if ((costs.array() < 0.0).any())
        throw ValidationError("cost problem: costs must be nonnegative");

    const Eigen::Index m = constraints.values.cols();
    if (m > 0) {
        if (constraints.values.rows() != n)
            throw ValidationError("cost problem: constraint rows do not match the model");
        if (constraints.columns.empty())
            constraints = ConstraintMatrix::from_values(constraints.values);
        else if (constraints.columns.size() != static_cast<std::size_t>(m))
            throw ValidationError("cost problem: constraint labels out of sync");
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(constraints.values);
        qr.setThreshold(kRankTol);
        if (qr.rank() < m)
            throw SingularError("cost problem: constraint columns are linearly dependent");
        const Eigen::VectorXd resid = constraints.values.transpose() * current;
        for (Eigen::Index a = 0; a < m; ++a) {
            const double scale =
                std::max(1.0, constraints.values.col(a).norm() * current.norm());
            if (std::abs(resid(a)) > 1e-8 * scale)
                throw ValidationError("cost problem: current weights violate constraint '" +
                                      constraints.columns[static_cast<std::size_t>(a)] + "'");
        }
    }

    for (Eigen::Index i = 0; i < n; ++i)
        if (lower(i) > current(i) || current(i) > upper(i))
            throw ValidationError("cost problem: current weight " + std::to_string(i) +
                                  " is outside its bounds");

    trade_lower = lower - current;
    trade_upper = upper - current;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (trade_upper(i) == 0.0) trade_upper(i) = kBoundNudge;
        if (trade_lower(i) == 0.0) trade_lower(i) = -kBoundNudge;
    }

    // Drop loadings columns the constraints pin to zero exposure; they
    // cannot contribute risk on the feasible set but would blur the reduced
    // system.
    if (m > 0 && model.factors() > 0) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraints.values);
        std::vector<Eigen::Index> kept;
        for (Eigen::Index a = 0; a < model.factors(); ++a) {
            const Eigen::VectorXd col = model.loadings().col(a);
            const Eigen::VectorXd fit = constraints.values * qr.solve(col);
            if ((col - fit).norm() <= kRankTol * col.norm())
                dropped_loading_columns.push_back(a);
            else
                kept.push_back(a);
        }
        if (!dropped_loading_columns.empty()) {
            Eigen::MatrixXd pruned(n, static_cast<Eigen::Index>(kept.size()));
            for (std::size_t j = 0; j < kept.size(); ++j)
                pruned.col(static_cast<Eigen::Index>(j)) = model.loadings().col(kept[j]);
            model = FactorModel::from_rotated(model.xi(), std::move(pruned));
        }
    }
}

CostProblem CostProblem::with_lambda(double new_lambda) const {
    if (!(new_lambda > 0.0))
        throw ValidationError("cost problem: lambda must be positive");
    CostProblem copy = *this;
    copy.lambda = new_lambda;
    return copy;
}

Eigen::VectorXd effective_returns(const CostProblem& p) {
    Eigen::VectorXd theta_w =
        (p.model.xi().array().square() * p.current.array()).matrix();
    if (p.model.factors() > 0)
        theta_w += p.model.loadings() * (p.model.loadings().transpose() * p.current);
    return p.returns - p.lambda * theta_w;
}

std::string trade_set_name(TradeSet s) {
    switch (s) {
        case TradeSet::free: return "free";
        case TradeSet::no_trade: return "zero";
        case TradeSet::upper: return "upper";
        case TradeSet::lower: return "lower";
    }
    return "?";
}

TradeSet parse_trade_set(const std::string& name) {
    if (name == "free") return TradeSet::free;
    if (name == "zero") return TradeSet::no_trade;
    if (name == "upper") return TradeSet::upper;
    if (name == "lower") return TradeSet::lower;
    throw ValidationError("unknown trade set label: '" + name + "'");
}

LineSearchResult line_search_t_star(const Eigen::VectorXd& from, const Eigen::VectorXd& to,
                                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    const Eigen::Index n = from.size();
    if (to.size() != n || lower.size() != n || upper.size() != n)
        throw ValidationError("line_search_t_star: dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        const double slack =
            1e-9 * std::max({1.0, std::isfinite(lower(i)) ? std::abs(lower(i)) : 0.0,
                             std::isfinite(upper(i)) ? std::abs(upper(i)) : 0.0});
        if (from(i) < lower(i) - slack || from(i) > upper(i) + slack)
            throw ValidationError("line_search_t_star: starting point is infeasible at index " +
                                  std::to_string(i));
    }

    LineSearchResult res;
    double t = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double q = to(i) - from(i);
        if (q == 0.0) continue;
        const double p = q > 0.0 ? std::min(to(i), upper(i)) : std::max(to(i), lower(i));
        t = std::min(t, (p - from(i)) / q);
    }
    if (t == kInf) {  // zero displacement
        res.t = 1.0;
        res.moved = from;
        return res;
    }
    res.t = std::clamp(t, 0.0, 1.0);
    if (res.t == 1.0) {
        res.moved = to;  // assign exactly; from + (to - from) need not round to `to`
    } else {
        res.moved = from + res.t * (to - from);
    }
    // Land exactly on bounds: classification compares with == and a path
    // point creeping toward a bound must reach it in finitely many steps.
    // Infinite bounds are unreachable and never snapped to.
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isfinite(upper(i))) {
            const double snap = 1e-12 * std::max(1.0, std::abs(upper(i)));
            if (res.moved(i) > upper(i) || std::abs(res.moved(i) - upper(i)) <= snap) {
                res.moved(i) = upper(i);
                continue;
            }
        }
        if (std::isfinite(lower(i))) {
            const double snap = 1e-12 * std::max(1.0, std::abs(lower(i)));
            if (res.moved(i) < lower(i) || std::abs(res.moved(i) - lower(i)) <= snap)
                res.moved(i) = lower(i);
        }
    }
    return res;
}

Solution solve_fixed_lambda(const CostProblem& p, const SolveOptions& options) {
    const Eigen::Index n = p.size();
    const Eigen::Index m = p.constraints.values.cols();
    const Eigen::Index k = p.model.factors();
    const Eigen::Index mk = m + k;

    const Eigen::VectorXd rho = effective_returns(p);
    const Eigen::VectorXd scale = p.lambda * p.model.xi().array().square();  // lambda xi_i^2

    Eigen::MatrixXd aug(n, mk);
    if (m > 0) aug.leftCols(m) = p.constraints.values;
    if (k > 0) aug.rightCols(k) = p.model.loadings();
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(mk, mk);
    phi.bottomRightCorner(k, k).setIdentity();

    std::vector<TradeSet> sets(static_cast<std::size_t>(n), TradeSet::free);
    Eigen::VectorXd eta(n);
    if (options.initial_signs) {
        if (options.initial_signs->size() != n)
            throw ValidationError("solve_fixed_lambda: initial signs length mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = (*options.initial_signs)(i);
            if (e != 1.0 && e != -1.0 && e != 0.0)
                throw ValidationError("solve_fixed_lambda: initial signs must be -1, 0 or +1");
            eta(i) = e;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) eta(i) = sgn(rho(i));
    }
    // A zero sign guess starts the name on the cost kink; the release test
    // frees it again the moment its marginal leaves the no-trade band.
    for (Eigen::Index i = 0; i < n; ++i)
        if (eta(i) == 0.0) sets[static_cast<std::size_t>(i)] = TradeSet::no_trade;

    // Wholesale bound assignment has no termination argument; when it starts
    // revisiting partitions the solve drops into the path-following rule,
    // which walks a feasible segment each sweep and cannot circle.
    bool path_mode = options.growth == SolveOptions::BoundGrowth::incremental;
    std::unordered_set<std::string> seen_partitions;
    const long cap = static_cast<long>(options.max_sweeps_factor) * (n + mk);
    // Pinned names are released only on first-order violations clearly above
    // rounding; anything smaller is the working-set optimum up to noise.
    const double release_slack = 1e-11 * std::max(1.0, rho.cwiseAbs().maxCoeff());

    Eigen::VectorXd xhat = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(mk);
    Eigen::VectorXd x_cand = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd d(n);
    std::vector<TradeSet> prev_sets;
    Eigen::VectorXd prev_eta, u_prev;
    bool converged = false;

    auto build_solution = [&](int sweeps) {
        Solution s;
        s.x = x_cand;
        s.w = p.current + s.x;
        s.sets = sets;
        s.eta.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            switch (sets[static_cast<std::size_t>(i)]) {
                case TradeSet::free: s.eta(i) = eta(i); break;
                case TradeSet::upper: s.eta(i) = 1.0; break;
                case TradeSet::lower: s.eta(i) = -1.0; break;
                case TradeSet::no_trade: s.eta(i) = 0.0; break;
            }
        }
        s.u = u;
        s.multipliers = -p.lambda * u.head(m);
        s.objective = 0.5 * p.lambda * theta_quadratic_form(p.model, s.x) - rho.dot(s.x) +
                      p.costs.dot(s.x.cwiseAbs());
        s.sweeps = sweeps;
        s.converged = converged;
        return s;
    };

    int sweep = 0;
    while (sweep < cap) {
        ++sweep;
        prev_sets = sets;
        prev_eta = eta;
        u_prev = u;

        // Reduced system for the current partition: free names enter with
        // weight 1/xi^2, pinned names contribute their bound trade to the
        // right-hand side.
        if (mk > 0) {
            Eigen::VectorXd zmask = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                switch (sets[static_cast<std::size_t>(i)]) {
                    case TradeSet::free:
                        zmask(i) = 1.0 / (p.model.xi()(i) * p.model.xi()(i));
                        coef(i) = (rho(i) - p.costs(i) * eta(i)) / scale(i);
                        break;
                    case TradeSet::upper: coef(i) = p.trade_upper(i); break;
                    case TradeSet::lower: coef(i) = p.trade_lower(i); break;
                    case TradeSet::no_trade: break;
                }
            }
            Eigen::MatrixXd q = phi;
            q.noalias() += aug.transpose() * zmask.asDiagonal() * aug;
            Eigen::LLT<Eigen::MatrixXd> llt(q);
            if (llt.info() == Eigen::Success) {
                u = llt.solve(aug.transpose() * coef);
            } else {
                // A constraint lost every free name, so the reduced matrix is
                // merely positive semidefinite. The minimum-norm multiplier
                // still solves the system exactly whenever the pinned trades
                // honour the constraint, and keeps the sweep moving when a
                // transient partition does not.
                u = q.completeOrthogonalDecomposition().solve(aug.transpose() * coef);
            }
        }

        d = rho;
        if (mk > 0) d.noalias() -= p.lambda * (aug * u);

        for (Eigen::Index i = 0; i < n; ++i) {
            switch (sets[static_cast<std::size_t>(i)]) {
                case TradeSet::free: x_cand(i) = (d(i) - p.costs(i) * eta(i)) / scale(i); break;
                case TradeSet::upper: x_cand(i) = p.trade_upper(i); break;
                case TradeSet::lower: x_cand(i) = p.trade_lower(i); break;
                case TradeSet::no_trade: x_cand(i) = 0.0; break;
            }
        }

        if (!path_mode) {
            // Wholesale reassignment straight from the fresh marginals.
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::size_t ii = static_cast<std::size_t>(i);
                const double band = p.costs(i);
                if (std::abs(d(i)) <= band) {
                    sets[ii] = TradeSet::no_trade;
                    eta(i) = 0.0;
                } else if (d(i) >= band + scale(i) * p.trade_upper(i)) {
                    sets[ii] = TradeSet::upper;
                    eta(i) = 1.0;
                } else if (d(i) <= -band + scale(i) * p.trade_lower(i)) {
                    sets[ii] = TradeSet::lower;
                    eta(i) = -1.0;
                } else {
                    sets[ii] = TradeSet::free;
                    eta(i) = sgn(d(i));
                }
            }

            std::string state(static_cast<std::size_t>(2 * n), '.');
            for (Eigen::Index i = 0; i < n; ++i) {
                state[static_cast<std::size_t>(i)] =
                    "F0UL"[static_cast<int>(sets[static_cast<std::size_t>(i)])];
                state[static_cast<std::size_t>(n + i)] =
                    eta(i) > 0.0 ? '+' : (eta(i) < 0.0 ? '-' : '0');
            }
            const bool revisited = !seen_partitions.insert(std::move(state)).second;
            if (revisited || 2 * sweep > cap) {
                // Restart as a path walk from the feasible origin.
                path_mode = true;
                xhat.setZero();
                for (Eigen::Index i = 0; i < n; ++i) {
                    eta(i) = sgn(rho(i));
                    sets[static_cast<std::size_t>(i)] =
                        eta(i) == 0.0 ? TradeSet::no_trade : TradeSet::free;
                }
                seen_partitions.clear();
                continue;
            }

            const double du = mk > 0 ? (u - u_prev).cwiseAbs().maxCoeff() : 0.0;
            const double uref = std::max(1.0, mk > 0 ? u.cwiseAbs().maxCoeff() : 0.0);
            converged = sets == prev_sets && (eta.array() == prev_eta.array()).all() &&
                        du <= options.u_tolerance * uref;
            if (converged) break;
            continue;
        }

        // Path walk. Only free names move; pinned and no-trade names already
        // sit on their targets. The first blocking event along the segment is
        // either a position bound or the cost kink at zero, and when both lie
        // ahead the kink comes first because the bounds straddle zero. Events
        // require the target to land beyond the breakpoint by more than
        // rounding: a degenerate partition reproduces the current point up to
        // noise, and blocking on that noise would re-pin a just-released name
        // forever instead of letting the next release candidate through.
        const auto kink_blocks = [&](Eigen::Index i) {
            return eta(i) * x_cand(i) < -1e-12 * std::max(1.0, std::abs(x_cand(i)));
        };
        const auto upper_blocks = [&](Eigen::Index i, double delta) {
            return delta > 0.0 && std::isfinite(p.trade_upper(i)) &&
                   x_cand(i) - p.trade_upper(i) >
                       1e-12 * std::max(1.0, std::abs(p.trade_upper(i)));
        };
        const auto lower_blocks = [&](Eigen::Index i, double delta) {
            return delta < 0.0 && std::isfinite(p.trade_lower(i)) &&
                   p.trade_lower(i) - x_cand(i) >
                       1e-12 * std::max(1.0, std::abs(p.trade_lower(i)));
        };

        double t = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (sets[static_cast<std::size_t>(i)] != TradeSet::free) continue;
            const double delta = x_cand(i) - xhat(i);
            if (delta == 0.0) continue;
            if (kink_blocks(i)) t = std::min(t, -xhat(i) / delta);
            if (upper_blocks(i, delta)) t = std::min(t, (p.trade_upper(i) - xhat(i)) / delta);
            if (lower_blocks(i, delta)) t = std::min(t, (p.trade_lower(i) - xhat(i)) / delta);
        }
        t = std::clamp(t, 0.0, 1.0);

        if (t < 1.0) {
            // Move to the first event and pin exactly the names that blocked;
            // every other classification is kept.
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::size_t ii = static_cast<std::size_t>(i);
                if (sets[ii] != TradeSet::free) continue;
                const double delta = x_cand(i) - xhat(i);
                if (delta == 0.0) continue;
                if (kink_blocks(i) && -xhat(i) / delta <= t) {
                    xhat(i) = 0.0;
                    sets[ii] = TradeSet::no_trade;
                    eta(i) = 0.0;
                } else if (upper_blocks(i, delta) &&
                           (p.trade_upper(i) - xhat(i)) / delta <= t) {
                    xhat(i) = p.trade_upper(i);
                    sets[ii] = TradeSet::upper;
                    eta(i) = 1.0;
                } else if (lower_blocks(i, delta) &&
                           (p.trade_lower(i) - xhat(i)) / delta <= t) {
                    xhat(i) = p.trade_lower(i);
                    sets[ii] = TradeSet::lower;
                    eta(i) = -1.0;
                } else {
                    xhat(i) += t * delta;
                }
            }
            continue;
        }

        // Reached the working-set minimizer: land on it exactly, then release
        // at most one pinned name, the one with the largest first-order
        // violation. Releasing only at a minimizer makes the next segment a
        // strict improvement, so partitions cannot repeat and the walk stops.
        for (Eigen::Index i = 0; i < n; ++i)
            if (sets[static_cast<std::size_t>(i)] == TradeSet::free) xhat(i) = x_cand(i);

        Eigen::Index best = -1;
        double best_violation = release_slack;
        double best_eta = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double band = p.costs(i);
            double v = 0.0;
            double e = 0.0;
            switch (sets[static_cast<std::size_t>(i)]) {
                case TradeSet::free: continue;
                case TradeSet::no_trade:
                    v = std::abs(d(i)) - band;
                    e = sgn(d(i));
                    break;
                case TradeSet::upper:
                    v = band + scale(i) * p.trade_upper(i) - d(i);
                    e = 1.0;
                    break;
                case TradeSet::lower:
                    v = d(i) - (-band + scale(i) * p.trade_lower(i));
                    e = -1.0;
                    break;
            }
            if (v > best_violation) {
                best = i;
                best_violation = v;
                best_eta = e;
            }
        }
        if (best < 0) {
            converged = true;
            break;
        }
        sets[static_cast<std::size_t>(best)] = TradeSet::free;
        eta(best) = best_eta;
    }

    // Reporting convention: a free name that converged exactly onto a
    // breakpoint belongs to the degenerate set it touched, so the labels
    // always mean a strictly interior, sign-consistent trade.
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        if (sets[ii] != TradeSet::free) continue;
        if (std::abs(x_cand(i)) <= 1e-12) {
            x_cand(i) = 0.0;
            sets[ii] = TradeSet::no_trade;
            eta(i) = 0.0;
        } else if (std::isfinite(p.trade_upper(i)) && x_cand(i) >= p.trade_upper(i)) {
            x_cand(i) = p.trade_upper(i);
            sets[ii] = TradeSet::upper;
            eta(i) = 1.0;
        } else if (std::isfinite(p.trade_lower(i)) && x_cand(i) <= p.trade_lower(i)) {
            x_cand(i) = p.trade_lower(i);
            sets[ii] = TradeSet::lower;
            eta(i) = -1.0;
        }
    }

    if (!converged)
        throw NonConvergenceError("cost optimizer: no stable partition after " +
                                      std::to_string(sweep) + " sweeps",
                                  build_solution(sweep));
    return build_solution(sweep);
}

KktReport kkt_check(const CostProblem& p, const Solution& s, double tol) {
    const Eigen::Index n = p.size();
    const Eigen::Index m = p.constraints.values.cols();
    if (s.x.size() != n || s.eta.size() != n ||
        s.sets.size() != static_cast<std::size_t>(n) || s.multipliers.size() != m)
        throw ValidationError("kkt_check: solution shape does not match the problem");

    const Eigen::VectorXd rho = effective_returns(p);
    const double slack = tol * std::max(1.0, rho.cwiseAbs().maxCoeff());

    // Marginal cost of the trade vector, with exposures recomputed from x.
    Eigen::VectorXd theta_x = (p.model.xi().array().square() * s.x.array()).matrix();
    if (p.model.factors() > 0)
        theta_x += p.model.loadings() * (p.model.loadings().transpose() * s.x);
    Eigen::VectorXd g = p.lambda * theta_x - rho;
    if (m > 0) g -= p.constraints.values * s.multipliers;

    KktReport rep;
    rep.worst_stationarity = rep.worst_constraints = rep.worst_bounds = rep.worst_no_trade =
        rep.worst_at_upper = rep.worst_at_lower = -kInf;

    auto record = [&](double& worst, Eigen::Index idx, const char* cond, double excess) {
        worst = std::max(worst, excess);
        if (excess > slack) {
            rep.pass = false;
            rep.violations.push_back(KktViolation{idx, cond, excess - slack});
        }
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        record(rep.worst_bounds, i, "bounds",
               std::max(s.x(i) - p.trade_upper(i), p.trade_lower(i) - s.x(i)));
        switch (s.sets[static_cast<std::size_t>(i)]) {
            case TradeSet::free:
                if (s.eta(i) != 1.0 && s.eta(i) != -1.0)
                    record(rep.worst_stationarity, i, "free sign", 1.0);
                record(rep.worst_stationarity, i, "free sign", -s.x(i) * s.eta(i));
                record(rep.worst_stationarity, i, "stationarity",
                       std::abs(g(i) + p.costs(i) * s.eta(i)));
                break;
            case TradeSet::no_trade:
                record(rep.worst_bounds, i, "zero trade", std::abs(s.x(i)));
                record(rep.worst_no_trade, i, "no-trade band", std::abs(g(i)) - p.costs(i));
                break;
            case TradeSet::upper:
                record(rep.worst_bounds, i, "at upper bound", std::abs(s.x(i) - p.trade_upper(i)));
                record(rep.worst_at_upper, i, "upper inequality", g(i) + p.costs(i));
                break;
            case TradeSet::lower:
                record(rep.worst_bounds, i, "at lower bound", std::abs(s.x(i) - p.trade_lower(i)));
                record(rep.worst_at_lower, i, "lower inequality", p.costs(i) - g(i));
                break;
        }
    }

    if (m > 0) {
        const Eigen::VectorXd resid = p.constraints.values.transpose() * s.x;
        for (Eigen::Index a = 0; a < m; ++a)
            record(rep.worst_constraints, -1, "constraint",
                   std::abs(resid(a)) / std::max(1.0, p.constraints.values.col(a).norm()));
    }

    auto tidy = [](double& w) {
        if (w == -kInf) w = 0.0;
    };
    tidy(rep.worst_stationarity);
    tidy(rep.worst_constraints);
    tidy(rep.worst_bounds);
    tidy(rep.worst_no_trade);
    tidy(rep.worst_at_upper);
    tidy(rep.worst_at_lower);
    return rep;
}

double realized_sharpe(const CostProblem& p, const Solution& s) {
    const double var = theta_quadratic_form(p.model, s.w);
    if (!(var > 0.0))
        throw ValidationError("realized_sharpe: portfolio carries no risk");
    return (p.returns.dot(s.w) - p.costs.dot(s.x.cwiseAbs())) / std::sqrt(var);
}

SharpeSearchResult sharpe_search(const CostProblem& base, std::vector<double> grid,
                                 const SolveOptions& options) {
    if (grid.empty()) {
        double center = 1.0;
        try {
            // Scale at which the cost-free closed form carries unit gross
            // exposure; costs move the interesting lambda at most a couple
            // of decades away from it.
            center = max_sharpe_factor_constrained(base.model, base.returns,
                                                   base.constraints.values)
                         .lambda;
        } catch (const Error&) {
            center = 1.0;
        }
        if (!(center > 0.0) || !std::isfinite(center)) center = 1.0;
        for (int i = 0; i < 25; ++i)
            grid.push_back(center * std::pow(10.0, -2.0 + 4.0 * i / 24.0));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (double l : grid)
        if (!(l > 0.0)) throw ValidationError("sharpe_search: lambdas must be positive");

    SharpeSearchResult res;
    res.sharpe = -kInf;
    bool have = false;
    std::size_t best_grid_index = 0;

    auto eval = [&](double lam, bool from_grid, std::size_t grid_index) {
        SharpeSearchPoint pt;
        pt.lambda = lam;
        double sh = -kInf;
        try {
            const CostProblem prob = base.with_lambda(lam);
            Solution sol = solve_fixed_lambda(prob, options);
            sh = realized_sharpe(prob, sol);
            pt.sharpe = sh;
            pt.usable = true;
            if (!have || sh > res.sharpe) {
                have = true;
                res.sharpe = sh;
                res.lambda = lam;
                res.solution = std::move(sol);
                if (from_grid) best_grid_index = grid_index;
            }
        } catch (const Error&) {
            pt.sharpe = std::numeric_limits<double>::quiet_NaN();
            pt.usable = false;
        }
        res.evaluations.push_back(pt);
        return sh;
    };

    for (std::size_t i = 0; i < grid.size(); ++i) eval(grid[i], true, i);
    if (!have)
        throw ConvergenceError("sharpe_search: no lambda produced a usable portfolio");

    // Golden-section refinement on the bracket around the best grid point,
    // in log-lambda.
    const std::size_t lo_i = best_grid_index == 0 ? 0 : best_grid_index - 1;
    const std::size_t hi_i = std::min(best_grid_index + 1, grid.size() - 1);
    if (grid[lo_i] < grid[hi_i]) {
        constexpr double gr = 0.6180339887498949;
        double a = std::log(grid[lo_i]);
        double b = std::log(grid[hi_i]);
        double c = b - gr * (b - a);
        double d = a + gr * (b - a);
        double fc = eval(std::exp(c), false, 0);
        double fd = eval(std::exp(d), false, 0);
        for (int it = 0; it < 60 && (b - a) > 1e-6; ++it) {
            if (fc >= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = eval(std::exp(c), false, 0);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = eval(std::exp(d), false, 0);
            }
        }
    }
    return res;
}

}  // namespace meanrev
