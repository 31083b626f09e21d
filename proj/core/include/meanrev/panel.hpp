#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meanrev/loadings.hpp"

namespace meanrev {

// Daily price history for a set of instruments.
//
// Storage is ticker-major: each matrix is N x T with row i = ticker and
// column s = date. Date index s counts BACKWARDS in time: s = 0 is the most
// recent date, s = T-1 the oldest. Missing observations are NaN; prices are
// strictly positive where present; volumes are nonnegative and integer
// valued (shares).
struct PricePanel {
    std::vector<std::string> tickers;  // sorted, unique
    std::vector<std::string> dates;    // ISO-8601, strictly decreasing (dates[0] newest)
    Eigen::MatrixXd open;              // unadjusted session open
    Eigen::MatrixXd close;             // unadjusted session close
    Eigen::MatrixXd adj_open;          // split/dividend adjusted open
    Eigen::MatrixXd adj_close;         // split/dividend adjusted close
    Eigen::MatrixXd volume;            // shares traded

    Eigen::Index num_tickers() const { return static_cast<Eigen::Index>(tickers.size()); }
    Eigen::Index num_dates() const { return static_cast<Eigen::Index>(dates.size()); }

    std::optional<Eigen::Index> ticker_index(const std::string& ticker) const;

    // Checks all structural invariants; throws ValidationError on the first
    // violation. Loaders and generators call this before returning a panel.
    void validate() const;
};

// Loads a panel from a CSV file with header
//   date,ticker,open,close,adj_open,adj_close,volume
// One row per (date,ticker); a duplicate pair is an error naming it. Empty
// price/volume fields mark the observation missing. Nonpositive prices and
// negative or fractional volumes are errors with the offending line number.
PricePanel load_price_panel(const std::string& path);

struct ClassificationRecord {
    std::string sector;
    std::string industry;
    std::string subindustry;
};

// ticker -> taxonomy levels; each ticker appears exactly once.
using ClassificationMap = std::map<std::string, ClassificationRecord>;

// Loads a classification CSV with header ticker,sector,industry,subindustry.
ClassificationMap load_classification(const std::string& path);

enum class ClassificationLevel { sector, industry, subindustry };

ClassificationLevel parse_level(const std::string& name);
std::string level_name(ClassificationLevel level);

// A cross-sectional vector defined on a subset of the panel.
struct PanelSlice {
    std::vector<Eigen::Index> index;     // panel ticker rows with a value
    Eigen::VectorXd value;               // aligned with index
    std::vector<Eigen::Index> excluded;  // rows skipped for missing inputs
};

// Close-to-open log return ln(adj_open(s) / adj_close(s+1)) for every ticker
// with both inputs present. Requires s+1 < num_dates.
PanelSlice overnight_returns(const PricePanel& panel, Eigen::Index s);

// Open-to-close simple return close(s)/open(s) - 1 on unadjusted prices.
PanelSlice intraday_returns(const PricePanel& panel, Eigen::Index s);

// Average daily dollar volume over the d dates s+1 .. s+d (strictly before
// s): mean of volume * unadjusted close. Tickers missing any of the d
// observations are excluded and reported.
PanelSlice addv(const PricePanel& panel, Eigen::Index s, int d);

// The instruments traded over one rebalance interval.
struct UniverseSnapshot {
    std::string formation_date;        // ADDV measurement date
    std::string first_date;            // oldest traded date (inclusive)
    std::string last_date;             // newest traded date (inclusive)
    std::vector<std::string> members;  // sorted tickers
};

// Keeps the top_n names by liquidity value, ties broken by lexicographically
// smaller ticker. Input order is irrelevant to the result. If fewer than
// top_n names are supplied, all of them are kept.
std::vector<std::string> select_universe(
    const std::vector<std::pair<std::string, double>>& liquidity, int top_n);

// One rebalance interval over chronologically ordered trading dates.
// Positions are chronological offsets c = 0 .. num_dates-1 (c = 0 oldest);
// callers convert to recency index via s = num_dates - 1 - c.
struct RebalanceInterval {
    Eigen::Index begin;      // first chronological position (inclusive)
    Eigen::Index end;        // one past the last position
    Eigen::Index formation;  // position whose trailing window forms the universe
};

// Partitions positions [lookback, num_dates) into consecutive intervals of
// `period` dates. A partial tail shorter than `period` is traded with the
// preceding full interval's formation date (the tail never looks ahead). The
// formation position of a full interval is its own first date. Requires at
// least one full interval: num_dates >= lookback + period.
std::vector<RebalanceInterval> rebalance_schedule(Eigen::Index num_dates, int period,
                                                  int lookback = 0);

// Binary cluster membership for the given tickers at one taxonomy level.
// Columns are the distinct cluster labels, sorted; clusters with no member
// are absent. Every ticker must be classified (error names the first that is
// not). Each row sums to exactly 1.
LoadingsMatrix loadings_from_classification(const ClassificationMap& classification,
                                            const std::vector<std::string>& tickers,
                                            ClassificationLevel level);

}  // namespace meanrev
