#include "meanrev/backtest.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "meanrev/errors.hpp"
#include "meanrev/regression.hpp"

namespace meanrev {

namespace {

constexpr double kDaysPerYear = 252.0;

std::string cluster_label(const ClassificationRecord& rec, ClassificationLevel level) {
    switch (level) {
        case ClassificationLevel::sector: return rec.sector;
        case ClassificationLevel::industry: return rec.industry;
        case ClassificationLevel::subindustry: return rec.subindustry;
    }
    return {};
}

}  // namespace

void BacktestConfig::validate() const {
    if (!(investment > 0.0))
        throw ValidationError("backtest: investment must be positive");
    if (top_n < 2) throw ValidationError("backtest: universe must hold at least two names");
    if (addv_days < 1) throw ValidationError("backtest: liquidity lookback must be at least 1 day");
    if (rebalance_period < 1)
        throw ValidationError("backtest: rebalance period must be at least 1 day");
    if (first_date && last_date && *first_date > *last_date)
        throw ValidationError("backtest: date range is empty");
}

BacktestReport run_backtest(const PricePanel& panel, const ClassificationMap& classification,
                            const BacktestConfig& config) {
    config.validate();
    const Eigen::Index num_dates = panel.num_dates();
    const auto schedule =
        rebalance_schedule(num_dates, config.rebalance_period, config.addv_days);

    BacktestReport report;
    report.investment = config.investment;

    StrategyShaping shaping;
    shaping.kind = StrategyShaping::Kind::linear;
    shaping.investment = config.investment;

    for (const RebalanceInterval& interval : schedule) {
        // The universe is measured strictly before the interval's first date,
        // so nothing traded inside the interval can see it.
        const Eigen::Index formation_s = num_dates - 1 - interval.formation;
        const PanelSlice liquidity = addv(panel, formation_s, config.addv_days);
        std::vector<std::pair<std::string, double>> named;
        named.reserve(liquidity.index.size());
        for (std::size_t j = 0; j < liquidity.index.size(); ++j)
            named.emplace_back(panel.tickers[static_cast<std::size_t>(liquidity.index[j])],
                               liquidity.value(static_cast<Eigen::Index>(j)));
        const std::vector<std::string> members = select_universe(named, config.top_n);

        for (Eigen::Index c = interval.begin; c < interval.end; ++c) {
            const Eigen::Index s = num_dates - 1 - c;
            const std::string& date = panel.dates[static_cast<std::size_t>(s)];
            if (config.first_date && date < *config.first_date) continue;
            if (config.last_date && date > *config.last_date) continue;

            const PanelSlice overnight = overnight_returns(panel, s);
            std::vector<double> ret_by_row(static_cast<std::size_t>(panel.num_tickers()),
                                           std::numeric_limits<double>::quiet_NaN());
            for (std::size_t j = 0; j < overnight.index.size(); ++j)
                ret_by_row[static_cast<std::size_t>(overnight.index[j])] =
                    overnight.value(static_cast<Eigen::Index>(j));

            std::vector<std::string> names;
            std::vector<double> rets, opens, closes;
            for (const std::string& ticker : members) {
                const auto row_opt = panel.ticker_index(ticker);
                if (!row_opt) continue;
                const Eigen::Index row = *row_opt;
                const double r = ret_by_row[static_cast<std::size_t>(row)];
                const double open = panel.open(row, s);
                const double close = panel.close(row, s);
                if (!std::isfinite(r) || !std::isfinite(open) || !std::isfinite(close))
                    continue;
                const auto rec = classification.find(ticker);
                if (rec == classification.end() ||
                    cluster_label(rec->second, config.level).empty())
                    continue;
                names.push_back(ticker);
                rets.push_back(r);
                opens.push_back(open);
                closes.push_back(close);
            }

            const Eigen::Index n = static_cast<Eigen::Index>(names.size());
            if (n < 2) {
                report.skipped.push_back(
                    {date, "only " + std::to_string(n) + " names with complete data"});
                continue;
            }

            Eigen::VectorXd returns = Eigen::Map<const Eigen::VectorXd>(rets.data(), n);
            const LoadingsMatrix clusters =
                loadings_from_classification(classification, names, config.level);
            const RegressionResult reg = cross_sectional_regression(
                returns, clusters, Eigen::VectorXd::Ones(n));

            Eigen::VectorXd signal = reg.residuals;
            // Residuals that are zero up to roundoff of the inputs carry no
            // signal; sizing them would trade pure noise.
            if (signal.cwiseAbs().sum() <= 1e-12 * returns.cwiseAbs().sum()) {
                report.skipped.push_back({date, "no residual signal"});
                continue;
            }
            if (config.normalize) {
                if (n < 3) {
                    report.skipped.push_back({date, "fewer than 3 names, cannot normalize"});
                    continue;
                }
                signal = normalize_residuals(signal);
            }

            const Holdings book = holdings_from_residuals(signal, shaping);

            DateResult day;
            day.date = date;
            day.tickers = std::move(names);
            day.holdings = book.dollars;
            day.pnl.resize(n);
            day.shares.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::size_t ii = static_cast<std::size_t>(i);
                day.pnl(i) = day.holdings(i) * (closes[ii] / opens[ii] - 1.0);
                day.shares(i) = 2.0 * std::abs(day.holdings(i)) / opens[ii];
            }
            day.total_pnl = day.pnl.sum();
            day.total_shares = day.shares.sum();
            day.gross = day.holdings.cwiseAbs().sum();
            day.net = day.holdings.sum();
            report.total_pnl += day.total_pnl;
            report.total_shares += day.total_shares;
            report.days.push_back(std::move(day));
        }
    }

    try {
        report.stats = performance_stats(report, config.investment);
    } catch (const ValidationError&) {
        report.stats.reset();
    }
    return report;
}

PerformanceStats performance_stats(const BacktestReport& report, double investment) {
    if (report.days.empty())
        throw ValidationError("performance_stats: report has no traded dates");
    if (!(investment > 0.0))
        throw ValidationError("performance_stats: investment must be positive");

    const std::size_t n = report.days.size();
    double mean = 0.0;
    for (const DateResult& day : report.days) mean += day.total_pnl;
    mean /= static_cast<double>(n);

    if (n < 2)
        throw ValidationError("performance_stats: need at least two dates for a Sharpe ratio");
    double var = 0.0;
    for (const DateResult& day : report.days) {
        const double d = day.total_pnl - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    if (!(var > 0.0))
        throw ValidationError("performance_stats: daily P&L variance is zero");

    if (!(report.total_shares > 0.0))
        throw ValidationError("performance_stats: no shares traded");

    PerformanceStats stats;
    stats.roc = mean / investment * kDaysPerYear;
    stats.sharpe = mean / std::sqrt(var) * std::sqrt(kDaysPerYear);
    stats.cps = 100.0 * report.total_pnl / report.total_shares;
    stats.days = static_cast<int>(n);
    return stats;
}

NormalizationComparison compare_normalization(const PricePanel& panel,
                                              const ClassificationMap& classification,
                                              const BacktestConfig& config) {
    NormalizationComparison cmp;
    BacktestConfig c = config;
    c.normalize = false;
    cmp.raw = run_backtest(panel, classification, c);
    c.normalize = true;
    cmp.normalized = run_backtest(panel, classification, c);
    return cmp;
}

std::string stats_diff_table(const NormalizationComparison& comparison) {
    auto line = [](const char* label, const std::optional<PerformanceStats>& s) {
        char buf[128];
        if (s)
            std::snprintf(buf, sizeof buf, "%-12s %8.2f%% %8.2f %8.2f %6d\n", label,
                          100.0 * s->roc, s->sharpe, s->cps, s->days);
        else
            std::snprintf(buf, sizeof buf, "%-12s %9s %8s %8s %6s\n", label, "n/a", "n/a",
                          "n/a", "n/a");
        return std::string(buf);
    };
    std::string out = "              ROC        SR      CPS   days\n";
    out += line("raw", comparison.raw.stats);
    out += line("normalized", comparison.normalized.stats);
    return out;
}

}  // namespace meanrev
