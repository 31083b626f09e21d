#pragma once

#include <optional>
#include <string>
#include <vector>

#include "meanrev/panel.hpp"

namespace meanrev {

struct BacktestConfig {
    ClassificationLevel level = ClassificationLevel::industry;
    bool normalize = false;   // squash residual outliers before sizing
    double investment = 2e7;  // gross dollars deployed each day
    int top_n = 2000;         // universe size by liquidity
    int addv_days = 21;       // liquidity lookback, days
    int rebalance_period = 21;
    // Optional clip on traded dates, inclusive ISO bounds. Universe formation
    // still sees the full panel so clipping never changes surviving dates.
    std::optional<std::string> first_date;
    std::optional<std::string> last_date;

    void validate() const;
};

// One traded date; vectors are aligned with `tickers`, the names that carry
// a position that day.
struct DateResult {
    std::string date;
    std::vector<std::string> tickers;
    Eigen::VectorXd holdings;  // dollars, contrarian to the overnight residual
    Eigen::VectorXd pnl;       // open-to-close P&L per name
    Eigen::VectorXd shares;    // establishing plus liquidating shares
    double total_pnl = 0.0;
    double total_shares = 0.0;
    double gross = 0.0;  // sum |D_i|; equals the configured investment
    double net = 0.0;    // sum D_i; hedge slip, ~0 for cluster loadings
};

struct SkippedDate {
    std::string date;
    std::string reason;
};

struct PerformanceStats {
    double roc = 0.0;     // 252 * mean daily P&L / investment
    double sharpe = 0.0;  // sqrt(252) * mean / stdev of daily P&L
    double cps = 0.0;     // cents of P&L per share traded
    int days = 0;
};

struct BacktestReport {
    std::vector<DateResult> days;  // chronological, oldest first
    std::vector<SkippedDate> skipped;
    double total_pnl = 0.0;
    double total_shares = 0.0;
    double investment = 0.0;  // echo of the config, used by the stats
    // Present when the P&L series is non-degenerate.
    std::optional<PerformanceStats> stats;
};

// Day-by-day simulation of the overnight-reversion book:
//   - trading dates are split into rebalance intervals; each interval trades
//     the top_n names by average daily dollar volume measured over the
//     addv_days immediately before the interval (a short tail interval
//     reuses the preceding universe);
//   - per date, close-to-open log returns are regressed on the binary
//     cluster loadings at the configured taxonomy level with unit weights
//     and no extra intercept (the clusters span it);
//   - residuals, optionally normalized, are sized contrarian so the gross
//     book equals `investment` exactly;
//   - fills at the unadjusted open, liquidation at the unadjusted close,
//     no costs or slippage (deliberately idealized);
//   - shares traded per name are 2|D_i| / open_i.
// Names missing a return, a price, or a classification drop out of the day's
// cross-section. A date with fewer than two usable names, or with no
// residual signal, is skipped and reported with its reason. The run is
// deterministic: same inputs, same report, bit for bit.
BacktestReport run_backtest(const PricePanel& panel, const ClassificationMap& classification,
                            const BacktestConfig& config);

// Annualized return on capital, annualized Sharpe ratio and cents per share
// for the report's daily P&L series. 252 trading days per year. Throws when
// the report is empty, the P&L variance is zero, or no shares traded.
PerformanceStats performance_stats(const BacktestReport& report, double investment);

struct NormalizationComparison {
    BacktestReport raw;
    BacktestReport normalized;
};

// The same backtest run twice, differing only in residual normalization.
NormalizationComparison compare_normalization(const PricePanel& panel,
                                              const ClassificationMap& classification,
                                              const BacktestConfig& config);

// Small fixed-width table of raw vs normalized ROC/SR/CPS ("n/a" for a
// degenerate leg).
std::string stats_diff_table(const NormalizationComparison& comparison);

}  // namespace meanrev
