#include "meanrev/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "meanrev/csv.hpp"
#include "meanrev/errors.hpp"

namespace meanrev {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool present(double v) { return !std::isnan(v); }

}  // namespace

std::optional<Eigen::Index> PricePanel::ticker_index(const std::string& ticker) const {
    auto it = std::lower_bound(tickers.begin(), tickers.end(), ticker);
    if (it == tickers.end() || *it != ticker) return std::nullopt;
    return static_cast<Eigen::Index>(it - tickers.begin());
}

void PricePanel::validate() const {
    const Eigen::Index n = num_tickers();
    const Eigen::Index t = num_dates();
    if (n == 0 || t == 0) throw ValidationError("price panel has no tickers or no dates");

    for (const Eigen::MatrixXd* m : {&open, &close, &adj_open, &adj_close, &volume})
        if (m->rows() != n || m->cols() != t)
            throw ValidationError("price panel matrix dimensions do not match ticker/date axes");

    if (!std::is_sorted(tickers.begin(), tickers.end()) ||
        std::adjacent_find(tickers.begin(), tickers.end()) != tickers.end())
        throw ValidationError("panel tickers must be sorted and unique");

    for (Eigen::Index s = 0; s + 1 < t; ++s)
        if (dates[s] <= dates[s + 1])
            throw ValidationError("panel dates must be strictly decreasing (index 0 newest): '" +
                                  dates[s] + "' vs '" + dates[s + 1] + "'");

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index s = 0; s < t; ++s) {
            for (const Eigen::MatrixXd* m : {&open, &close, &adj_open, &adj_close}) {
                double v = (*m)(i, s);
                if (present(v) && v <= 0.0)
                    throw ValidationError("nonpositive price for " + tickers[i] + " on " +
                                          dates[s]);
            }
            double v = volume(i, s);
            if (present(v) && (v < 0.0 || v != std::floor(v)))
                throw ValidationError("volume must be a nonnegative whole number of shares: " +
                                      tickers[i] + " on " + dates[s]);
        }
    }
}

PricePanel load_price_panel(const std::string& path) {
    csv::Table t = csv::read_table(
        path, {"date", "ticker", "open", "close", "adj_open", "adj_close", "volume"});

    std::set<std::string> date_set;
    std::set<std::string> ticker_set;
    for (const auto& r : t.rows) {
        if (r[0].empty() || r[1].empty())
            throw ValidationError(path + ": empty date or ticker field");
        date_set.insert(r[0]);
        ticker_set.insert(r[1]);
    }
    if (t.rows.empty()) throw ValidationError(path + ": no data rows");

    PricePanel p;
    p.tickers.assign(ticker_set.begin(), ticker_set.end());
    p.dates.assign(date_set.rbegin(), date_set.rend());  // newest first

    const Eigen::Index n = p.num_tickers();
    const Eigen::Index nd = p.num_dates();
    p.open = Eigen::MatrixXd::Constant(n, nd, kNaN);
    p.close = Eigen::MatrixXd::Constant(n, nd, kNaN);
    p.adj_open = Eigen::MatrixXd::Constant(n, nd, kNaN);
    p.adj_close = Eigen::MatrixXd::Constant(n, nd, kNaN);
    p.volume = Eigen::MatrixXd::Constant(n, nd, kNaN);

    std::unordered_map<std::string, Eigen::Index> date_idx;
    for (Eigen::Index s = 0; s < nd; ++s) date_idx[p.dates[s]] = s;
    std::unordered_map<std::string, Eigen::Index> ticker_idx;
    for (Eigen::Index i = 0; i < n; ++i) ticker_idx[p.tickers[i]] = i;

    std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Eigen::Index s = date_idx[t.rows[r][0]];
        const Eigen::Index i = ticker_idx[t.rows[r][1]];
        if (!seen.insert({i, s}).second)
            throw ParseError(path, t.row_lines[r],
                             "duplicate row for (" + t.rows[r][0] + ", " + t.rows[r][1] + ")");

        Eigen::MatrixXd* fields[5] = {&p.open, &p.close, &p.adj_open, &p.adj_close, &p.volume};
        for (int f = 0; f < 5; ++f) {
            const std::string& cell = t.rows[r][static_cast<std::size_t>(f) + 2];
            if (cell.empty()) continue;  // missing observation
            const double v = csv::parse_number(t, r, static_cast<std::size_t>(f) + 2);
            if (f < 4 && v <= 0.0)
                throw ParseError(path, t.row_lines[r],
                                 "nonpositive " + t.header[static_cast<std::size_t>(f) + 2] +
                                     " for " + t.rows[r][1]);
            if (f == 4 && (v < 0.0 || v != std::floor(v)))
                throw ParseError(path, t.row_lines[r],
                                 "volume must be a nonnegative whole number of shares");
            (*fields[f])(i, s) = v;
        }
    }

    try {
        p.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return p;
}

ClassificationMap load_classification(const std::string& path) {
    csv::Table t = csv::read_table(path, {"ticker", "sector", "industry", "subindustry"});
    ClassificationMap m;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row[0].empty())
            throw ParseError(path, t.row_lines[r], "empty ticker");
        if (row[1].empty() || row[2].empty() || row[3].empty())
            throw ParseError(path, t.row_lines[r], "empty classification level for " + row[0]);
        if (!m.emplace(row[0], ClassificationRecord{row[1], row[2], row[3]}).second)
            throw ParseError(path, t.row_lines[r], "duplicate ticker: " + row[0]);
    }
    return m;
}

ClassificationLevel parse_level(const std::string& name) {
    if (name == "sector") return ClassificationLevel::sector;
    if (name == "industry") return ClassificationLevel::industry;
    if (name == "subindustry") return ClassificationLevel::subindustry;
    throw ValidationError("unknown classification level: '" + name +
                          "' (expected sector, industry or subindustry)");
}

std::string level_name(ClassificationLevel level) {
    switch (level) {
        case ClassificationLevel::sector: return "sector";
        case ClassificationLevel::industry: return "industry";
        case ClassificationLevel::subindustry: return "subindustry";
    }
    return "?";
}

PanelSlice overnight_returns(const PricePanel& panel, Eigen::Index s) {
    if (s < 0 || s + 1 >= panel.num_dates())
        throw ValidationError("overnight_returns: date index " + std::to_string(s) +
                              " needs a previous session in the panel");
    PanelSlice out;
    std::vector<double> vals;
    for (Eigen::Index i = 0; i < panel.num_tickers(); ++i) {
        const double ao = panel.adj_open(i, s);
        const double ac_prev = panel.adj_close(i, s + 1);
        if (present(ao) && present(ac_prev)) {
            out.index.push_back(i);
            vals.push_back(std::log(ao / ac_prev));
        } else {
            out.excluded.push_back(i);
        }
    }
    out.value = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return out;
}

PanelSlice intraday_returns(const PricePanel& panel, Eigen::Index s) {
    if (s < 0 || s >= panel.num_dates())
        throw ValidationError("intraday_returns: date index out of range");
    PanelSlice out;
    std::vector<double> vals;
    for (Eigen::Index i = 0; i < panel.num_tickers(); ++i) {
        const double o = panel.open(i, s);
        const double c = panel.close(i, s);
        if (present(o) && present(c)) {
            out.index.push_back(i);
            vals.push_back(c / o - 1.0);
        } else {
            out.excluded.push_back(i);
        }
    }
    out.value = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return out;
}

PanelSlice addv(const PricePanel& panel, Eigen::Index s, int d) {
    if (d < 1) throw ValidationError("addv: window must be at least 1 day");
    if (s < 0 || s + d >= panel.num_dates())
        throw ValidationError("addv: window of " + std::to_string(d) +
                              " days before date index " + std::to_string(s) +
                              " does not fit in the panel");
    PanelSlice out;
    std::vector<double> vals;
    for (Eigen::Index i = 0; i < panel.num_tickers(); ++i) {
        double sum = 0.0;
        bool complete = true;
        for (Eigen::Index k = 1; k <= d; ++k) {
            const double v = panel.volume(i, s + k);
            const double c = panel.close(i, s + k);
            if (!present(v) || !present(c)) {
                complete = false;
                break;
            }
            sum += v * c;
        }
        if (complete) {
            out.index.push_back(i);
            vals.push_back(sum / d);
        } else {
            out.excluded.push_back(i);
        }
    }
    out.value = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return out;
}

std::vector<std::string> select_universe(
    const std::vector<std::pair<std::string, double>>& liquidity, int top_n) {
    if (top_n < 1) throw ValidationError("select_universe: top_n must be positive");
    if (liquidity.empty()) throw ValidationError("select_universe: no liquidity values supplied");
    std::vector<std::pair<std::string, double>> sorted = liquidity;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (static_cast<std::size_t>(top_n) < sorted.size()) sorted.resize(static_cast<std::size_t>(top_n));
    std::vector<std::string> members;
    members.reserve(sorted.size());
    for (auto& kv : sorted) members.push_back(std::move(kv.first));
    std::sort(members.begin(), members.end());
    return members;
}

std::vector<RebalanceInterval> rebalance_schedule(Eigen::Index num_dates, int period,
                                                  int lookback) {
    if (period < 1) throw ValidationError("rebalance_schedule: period must be at least 1");
    if (lookback < 0) throw ValidationError("rebalance_schedule: negative lookback");
    if (num_dates < lookback + period)
        throw ValidationError("rebalance_schedule: " + std::to_string(num_dates) +
                              " dates cannot fit a " + std::to_string(lookback) +
                              "-day lookback plus one " + std::to_string(period) +
                              "-day interval");

    std::vector<RebalanceInterval> out;
    Eigen::Index begin = lookback;
    while (begin < num_dates) {
        RebalanceInterval iv;
        iv.begin = begin;
        iv.end = std::min<Eigen::Index>(begin + period, num_dates);
        if (iv.end - iv.begin < period) {
            // Partial tail: reuse the previous interval's universe rather
            // than forming a fresh one on a short window.
            iv.formation = out.back().formation;
        } else {
            iv.formation = begin;
        }
        out.push_back(iv);
        begin = iv.end;
    }
    return out;
}

LoadingsMatrix loadings_from_classification(const ClassificationMap& classification,
                                            const std::vector<std::string>& tickers,
                                            ClassificationLevel level) {
    if (tickers.empty()) throw ValidationError("loadings_from_classification: no tickers");

    auto label_of = [&](const std::string& ticker) -> const std::string& {
        auto it = classification.find(ticker);
        if (it == classification.end())
            throw ValidationError("unclassified ticker: " + ticker);
        switch (level) {
            case ClassificationLevel::sector: return it->second.sector;
            case ClassificationLevel::industry: return it->second.industry;
            default: return it->second.subindustry;
        }
    };

    std::set<std::string> labels;
    for (const auto& t : tickers) labels.insert(label_of(t));

    LoadingsMatrix lm;
    lm.columns.assign(labels.begin(), labels.end());
    lm.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tickers.size()),
                                      static_cast<Eigen::Index>(lm.columns.size()));
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        const auto& lbl = label_of(tickers[i]);
        auto pos = std::lower_bound(lm.columns.begin(), lm.columns.end(), lbl);
        lm.values(static_cast<Eigen::Index>(i),
                  static_cast<Eigen::Index>(pos - lm.columns.begin())) = 1.0;
    }
    lm.binary.assign(lm.columns.size(), true);
    return lm;
}

void refresh_binary_flags(LoadingsMatrix& lm) {
    lm.binary.assign(static_cast<std::size_t>(lm.cols()), false);
    for (Eigen::Index a = 0; a < lm.cols(); ++a) {
        bool b = true;
        for (Eigen::Index i = 0; i < lm.rows() && b; ++i) {
            const double v = lm.values(i, a);
            if (v != 0.0 && v != 1.0) b = false;
        }
        lm.binary[static_cast<std::size_t>(a)] = b;
    }
}

}  // namespace meanrev
