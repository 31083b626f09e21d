#pragma once

#include <string>
#include <vector>

#include "meanrev/backtest.hpp"
#include "meanrev/cost_optimizer.hpp"
#include "meanrev/loadings.hpp"

namespace meanrev {

// Shortest decimal that round-trips the exact double; "inf"/"nan" spelled
// out. All files written here use it so reruns diff clean.
std::string format_full(double value);

// --- simple per-ticker vectors -------------------------------------------

// Header `ticker,value`, one row per ticker.
void write_vector_csv(const std::string& path, const std::vector<std::string>& tickers,
                      const Eigen::VectorXd& values);

struct NamedVector {
    std::vector<std::string> tickers;  // file order
    Eigen::VectorXd values;
};
NamedVector read_vector_csv(const std::string& path);

// Reorders a named vector onto `tickers`; every ticker must be present
// exactly once, extras are an error.
Eigen::VectorXd align_vector(const NamedVector& named, const std::vector<std::string>& tickers,
                             const std::string& what);

// --- wide loadings matrices ----------------------------------------------

struct NamedLoadings {
    std::vector<std::string> tickers;
    LoadingsMatrix loadings;
};

// Header `ticker,<col>,<col>,...`; returns tickers in file order.
NamedLoadings read_loadings_csv(const std::string& path);
void write_loadings_csv(const std::string& path, const NamedLoadings& loadings);

// --- optimizer problem bundles -------------------------------------------

// One optimization instance in a single sectioned file. Sections hold CSV
// bodies with headers, except [params], which holds `key = value` lines:
//   [returns]            ticker,value            required
//   [specific_risk]      ticker,value            required, positive
//   [costs]              ticker,value            default 0
//   [current]            ticker,value            default 0
//   [bounds]             ticker,lower,upper      default -inf,inf
//   [constraints]        ticker,constraint,value default none
//   [loadings]           ticker,factor,value     default none
//   [factor_covariance]  row,col,value           default identity
//   [params]             lambda = <positive>     default 1
// Tickers come from [returns] and are sorted; every other section may only
// reference them. Factor and constraint names are sorted distinct labels.
struct ProblemBundle {
    std::vector<std::string> tickers;
    Eigen::VectorXd returns;
    Eigen::VectorXd costs;
    Eigen::VectorXd current;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd xi;
    ConstraintMatrix constraints;
    std::vector<std::string> factor_names;
    Eigen::MatrixXd loadings;    // N x K, raw (covariance applied separately)
    Eigen::MatrixXd factor_cov;  // K x K symmetric positive definite

    CostProblem to_problem() const;
    double lambda = 1.0;
};

ProblemBundle load_problem_bundle(const std::string& path);

// --- solutions -------------------------------------------------------------

// Sectioned solution artifact:
//   [solution]     ticker,x,w,set,eta
//   [multipliers]  constraint,value
//   [info]         lambda / objective / sweeps
void write_solution_file(const std::string& path, const std::vector<std::string>& tickers,
                         const Solution& solution, double lambda);

struct SolutionFile {
    Solution solution;
    double lambda = 0.0;
};

// Reads a solution back in the order of `tickers` (the bundle's order).
SolutionFile read_solution_file(const std::string& path,
                                const std::vector<std::string>& tickers);

// --- price panels ------------------------------------------------------------

// Writes the panel in the format load_price_panel reads, chronological
// (oldest date first), tickers in panel order within a date. Missing
// observations become empty fields.
void write_price_panel_csv(const std::string& path, const PricePanel& panel);

// Header ticker,sector,industry,subindustry, one row per ticker.
void write_classification_csv(const std::string& path, const ClassificationMap& classification);

// --- backtest reports -------------------------------------------------------

// Writes daily_pnl.csv (date,total_pnl,cum_pnl), holdings.csv
// (date,ticker,holding,pnl,shares) and summary.txt into `dir`, creating it
// if needed.
void write_backtest_outputs(const std::string& dir, const BacktestReport& report);

}  // namespace meanrev
