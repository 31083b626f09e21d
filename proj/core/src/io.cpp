#include "meanrev/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "meanrev/csv.hpp"
#include "meanrev/errors.hpp"

namespace meanrev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    return out;
}

// One [section] of a sectioned text file, body kept as raw numbered lines.
struct RawSection {
    std::string name;
    long line = 0;
    std::vector<std::pair<long, std::string>> body;
};

std::vector<RawSection> read_raw_sections(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<RawSection> sections;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        std::string trimmed = line.substr(first, last - first + 1);
        if (trimmed.front() == '#') continue;
        if (trimmed.front() == '[') {
            if (trimmed.back() != ']')
                throw ParseError(path, lineno, "malformed section header: " + trimmed);
            sections.push_back({trimmed.substr(1, trimmed.size() - 2), lineno, {}});
            continue;
        }
        if (sections.empty())
            throw ParseError(path, lineno, "content before the first [section]");
        sections.back().body.emplace_back(lineno, trimmed);
    }
    return sections;
}

csv::Table table_from_section(const RawSection& sec, const std::string& path,
                              const std::vector<std::string>& expected_header) {
    if (sec.body.empty())
        throw ParseError(path, sec.line, "section [" + sec.name + "] is empty");
    csv::Table table;
    table.path = path;
    table.header = csv::split_fields(sec.body.front().second);
    if (table.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) {
            if (!want.empty()) want += ',';
            want += h;
        }
        throw ParseError(path, sec.body.front().first,
                         "section [" + sec.name + "] must start with header '" + want + "'");
    }
    for (std::size_t i = 1; i < sec.body.size(); ++i) {
        csv::Row row = csv::split_fields(sec.body[i].second);
        if (row.size() != table.header.size())
            throw ParseError(path, sec.body[i].first, "expected " +
                                 std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(row.size()));
        table.rows.push_back(std::move(row));
        table.row_lines.push_back(sec.body[i].first);
    }
    return table;
}

std::map<std::string, std::string> params_from_section(const RawSection& sec,
                                                       const std::string& path) {
    std::map<std::string, std::string> out;
    for (const auto& [lineno, text] : sec.body) {
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ParseError(path, lineno, "expected 'key = value', got: " + text);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ParseError(path, lineno, "empty key");
        out[key] = value;
    }
    return out;
}

// ticker -> dense index, erroring on strangers.
class TickerIndex {
  public:
    explicit TickerIndex(const std::vector<std::string>& tickers) {
        for (std::size_t i = 0; i < tickers.size(); ++i)
            map_.emplace(tickers[i], static_cast<Eigen::Index>(i));
    }
    Eigen::Index at(const csv::Table& t, std::size_t row, std::size_t col) const {
        const std::string& ticker = t.rows[row][col];
        const auto it = map_.find(ticker);
        if (it == map_.end())
            throw ParseError(t.path, t.row_lines[row],
                             "unknown ticker '" + ticker + "' (not in [returns])");
        return it->second;
    }

  private:
    std::map<std::string, Eigen::Index> map_;
};

Eigen::VectorXd fill_vector(const csv::Table& t, const TickerIndex& index, Eigen::Index n,
                            double default_value) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, default_value);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    const std::size_t tcol = t.column("ticker");
    const std::size_t vcol = t.column("value");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Eigen::Index i = index.at(t, r, tcol);
        if (seen[static_cast<std::size_t>(i)])
            throw ParseError(t.path, t.row_lines[r],
                             "duplicate ticker '" + t.rows[r][tcol] + "'");
        seen[static_cast<std::size_t>(i)] = true;
        v(i) = csv::parse_number(t, r, vcol);
    }
    return v;
}

}  // namespace

std::string format_full(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_vector_csv(const std::string& path, const std::vector<std::string>& tickers,
                      const Eigen::VectorXd& values) {
    if (values.size() != static_cast<Eigen::Index>(tickers.size()))
        throw ValidationError("write_vector_csv: " + std::to_string(tickers.size()) +
                              " tickers vs " + std::to_string(values.size()) + " values");
    std::ofstream out = open_out(path);
    out << "ticker,value\n";
    for (std::size_t i = 0; i < tickers.size(); ++i)
        out << tickers[i] << ',' << format_full(values(static_cast<Eigen::Index>(i))) << '\n';
}

NamedVector read_vector_csv(const std::string& path) {
    const csv::Table t = csv::read_table(path, {"ticker", "value"});
    NamedVector out;
    out.values.resize(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.tickers.push_back(t.rows[r][0]);
        out.values(static_cast<Eigen::Index>(r)) = csv::parse_number(t, r, 1);
    }
    return out;
}

Eigen::VectorXd align_vector(const NamedVector& named, const std::vector<std::string>& tickers,
                             const std::string& what) {
    std::map<std::string, double> by_ticker;
    for (std::size_t i = 0; i < named.tickers.size(); ++i)
        if (!by_ticker.emplace(named.tickers[i], named.values(static_cast<Eigen::Index>(i)))
                 .second)
            throw ValidationError(what + ": duplicate ticker '" + named.tickers[i] + "'");
    if (by_ticker.size() != tickers.size())
        throw ValidationError(what + ": expected " + std::to_string(tickers.size()) +
                              " tickers, got " + std::to_string(by_ticker.size()));
    Eigen::VectorXd out(static_cast<Eigen::Index>(tickers.size()));
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        const auto it = by_ticker.find(tickers[i]);
        if (it == by_ticker.end())
            throw ValidationError(what + ": missing ticker '" + tickers[i] + "'");
        out(static_cast<Eigen::Index>(i)) = it->second;
    }
    return out;
}

NamedLoadings read_loadings_csv(const std::string& path) {
    const csv::Table t = csv::read_table(path);
    if (t.header.empty() || t.header.front() != "ticker")
        throw ParseError(path, 1, "loadings header must start with 'ticker'");
    if (t.header.size() < 2) throw ParseError(path, 1, "loadings file has no columns");
    NamedLoadings out;
    out.loadings.columns.assign(t.header.begin() + 1, t.header.end());
    const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
    const Eigen::Index k = static_cast<Eigen::Index>(out.loadings.columns.size());
    out.loadings.values.resize(n, k);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.tickers.push_back(t.rows[r][0]);
        for (Eigen::Index c = 0; c < k; ++c)
            out.loadings.values(static_cast<Eigen::Index>(r), c) =
                csv::parse_number(t, r, static_cast<std::size_t>(c) + 1);
    }
    refresh_binary_flags(out.loadings);
    return out;
}

void write_loadings_csv(const std::string& path, const NamedLoadings& loadings) {
    const Eigen::Index n = loadings.loadings.values.rows();
    const Eigen::Index k = loadings.loadings.values.cols();
    if (n != static_cast<Eigen::Index>(loadings.tickers.size()))
        throw ValidationError("write_loadings_csv: ticker count mismatch");
    std::ofstream out = open_out(path);
    out << "ticker";
    for (const std::string& c : loadings.loadings.columns) out << ',' << c;
    out << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        out << loadings.tickers[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < k; ++c) out << ',' << format_full(loadings.loadings.values(i, c));
        out << '\n';
    }
}

ProblemBundle load_problem_bundle(const std::string& path) {
    const std::vector<RawSection> sections = read_raw_sections(path);
    std::map<std::string, const RawSection*> by_name;
    for (const RawSection& s : sections)
        if (!by_name.emplace(s.name, &s).second)
            throw ParseError(path, s.line, "duplicate section [" + s.name + "]");
    static const std::set<std::string> known{
        "returns",     "specific_risk", "costs",  "current", "bounds",
        "constraints", "loadings",      "factor_covariance", "params"};
    for (const RawSection& s : sections)
        if (!known.count(s.name)) throw ParseError(path, s.line, "unknown section [" + s.name + "]");

    auto section = [&](const char* name) -> const RawSection* {
        const auto it = by_name.find(name);
        return it == by_name.end() ? nullptr : it->second;
    };
    auto require = [&](const char* name) -> const RawSection& {
        const RawSection* s = section(name);
        if (!s) throw ValidationError(path + ": missing required section [" + name + "]");
        return *s;
    };

    ProblemBundle b;

    {
        const csv::Table t = table_from_section(require("returns"), path, {"ticker", "value"});
        if (t.rows.empty()) throw ValidationError(path + ": [returns] has no rows");
        std::map<std::string, double> by_ticker;
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            if (!by_ticker.emplace(t.rows[r][0], csv::parse_number(t, r, 1)).second)
                throw ParseError(t.path, t.row_lines[r],
                                 "duplicate ticker '" + t.rows[r][0] + "'");
        b.returns.resize(static_cast<Eigen::Index>(by_ticker.size()));
        for (const auto& [ticker, value] : by_ticker) {
            b.returns(static_cast<Eigen::Index>(b.tickers.size())) = value;
            b.tickers.push_back(ticker);
        }
    }
    const Eigen::Index n = static_cast<Eigen::Index>(b.tickers.size());
    const TickerIndex index(b.tickers);

    {
        const csv::Table t =
            table_from_section(require("specific_risk"), path, {"ticker", "value"});
        b.xi = fill_vector(t, index, n, std::numeric_limits<double>::quiet_NaN());
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(b.xi(i) > 0.0))
                throw ValidationError(path + ": [specific_risk] must cover every ticker with a positive value (ticker '" +
                                      b.tickers[static_cast<std::size_t>(i)] + "')");
    }

    b.costs = Eigen::VectorXd::Zero(n);
    if (const RawSection* s = section("costs"))
        b.costs = fill_vector(table_from_section(*s, path, {"ticker", "value"}), index, n, 0.0);
    b.current = Eigen::VectorXd::Zero(n);
    if (const RawSection* s = section("current"))
        b.current = fill_vector(table_from_section(*s, path, {"ticker", "value"}), index, n, 0.0);

    b.lower = Eigen::VectorXd::Constant(n, -kInf);
    b.upper = Eigen::VectorXd::Constant(n, kInf);
    if (const RawSection* s = section("bounds")) {
        const csv::Table t = table_from_section(*s, path, {"ticker", "lower", "upper"});
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const Eigen::Index i = index.at(t, r, 0);
            if (seen[static_cast<std::size_t>(i)])
                throw ParseError(t.path, t.row_lines[r],
                                 "duplicate ticker '" + t.rows[r][0] + "'");
            seen[static_cast<std::size_t>(i)] = true;
            b.lower(i) = csv::parse_number(t, r, 1);
            b.upper(i) = csv::parse_number(t, r, 2);
        }
    }

    if (const RawSection* s = section("constraints")) {
        const csv::Table t =
            table_from_section(*s, path, {"ticker", "constraint", "value"});
        std::set<std::string> labels;
        for (const csv::Row& row : t.rows) labels.insert(row[1]);
        b.constraints.columns.assign(labels.begin(), labels.end());
        std::map<std::string, Eigen::Index> col;
        for (std::size_t j = 0; j < b.constraints.columns.size(); ++j)
            col[b.constraints.columns[j]] = static_cast<Eigen::Index>(j);
        b.constraints.values =
            Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(labels.size()));
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            b.constraints.values(index.at(t, r, 0), col[t.rows[r][1]]) =
                csv::parse_number(t, r, 2);
    }

    if (const RawSection* s = section("loadings")) {
        const csv::Table t = table_from_section(*s, path, {"ticker", "factor", "value"});
        std::set<std::string> labels;
        for (const csv::Row& row : t.rows) labels.insert(row[1]);
        b.factor_names.assign(labels.begin(), labels.end());
        std::map<std::string, Eigen::Index> col;
        for (std::size_t j = 0; j < b.factor_names.size(); ++j)
            col[b.factor_names[j]] = static_cast<Eigen::Index>(j);
        b.loadings = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(labels.size()));
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            b.loadings(index.at(t, r, 0), col[t.rows[r][1]]) = csv::parse_number(t, r, 2);
    } else {
        b.loadings.resize(n, 0);
    }

    const Eigen::Index k = b.loadings.cols();
    b.factor_cov = Eigen::MatrixXd::Identity(k, k);
    if (const RawSection* s = section("factor_covariance")) {
        if (k == 0)
            throw ValidationError(path + ": [factor_covariance] without [loadings]");
        const csv::Table t = table_from_section(*s, path, {"row", "col", "value"});
        std::map<std::string, Eigen::Index> col;
        for (std::size_t j = 0; j < b.factor_names.size(); ++j)
            col[b.factor_names[j]] = static_cast<Eigen::Index>(j);
        Eigen::MatrixXd seen = Eigen::MatrixXd::Zero(k, k);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto find = [&](std::size_t c) {
                const auto it = col.find(t.rows[r][c]);
                if (it == col.end())
                    throw ParseError(t.path, t.row_lines[r],
                                     "unknown factor '" + t.rows[r][c] + "'");
                return it->second;
            };
            const Eigen::Index a = find(0);
            const Eigen::Index c = find(1);
            const double v = csv::parse_number(t, r, 2);
            if (seen(a, c) != 0.0 && b.factor_cov(a, c) != v)
                throw ParseError(t.path, t.row_lines[r], "conflicting covariance entry");
            seen(a, c) = seen(c, a) = 1.0;
            b.factor_cov(a, c) = b.factor_cov(c, a) = v;
        }
    }

    if (const RawSection* s = section("params")) {
        const auto params = params_from_section(*s, path);
        for (const auto& [key, value] : params) {
            if (key == "lambda")
                b.lambda = csv::to_number(value, path + ": params.lambda");
            else
                throw ValidationError(path + ": unknown parameter '" + key + "'");
        }
    }
    return b;
}

CostProblem ProblemBundle::to_problem() const {
    FactorModel model = loadings.cols() > 0
                            ? FactorModel(xi, loadings, factor_cov)
                            : FactorModel::from_rotated(
                                  xi, Eigen::MatrixXd(xi.size(), 0));
    return CostProblem(std::move(model), returns, costs, current, lower, upper, constraints,
                       lambda);
}

void write_solution_file(const std::string& path, const std::vector<std::string>& tickers,
                         const Solution& solution, double lambda) {
    const Eigen::Index n = solution.x.size();
    if (n != static_cast<Eigen::Index>(tickers.size()))
        throw ValidationError("write_solution_file: ticker count mismatch");
    std::ofstream out = open_out(path);
    out << "[solution]\nticker,x,w,set,eta\n";
    for (Eigen::Index i = 0; i < n; ++i)
        out << tickers[static_cast<std::size_t>(i)] << ',' << format_full(solution.x(i)) << ','
            << format_full(solution.w(i)) << ','
            << trade_set_name(solution.sets[static_cast<std::size_t>(i)]) << ','
            << format_full(solution.eta(i)) << '\n';
    out << "[multipliers]\nconstraint,value\n";
    for (Eigen::Index a = 0; a < solution.multipliers.size(); ++a)
        out << 'y' << a << ',' << format_full(solution.multipliers(a)) << '\n';
    out << "[info]\n";
    out << "lambda = " << format_full(lambda) << '\n';
    out << "objective = " << format_full(solution.objective) << '\n';
    out << "sweeps = " << solution.sweeps << '\n';
}

SolutionFile read_solution_file(const std::string& path,
                                const std::vector<std::string>& tickers) {
    const std::vector<RawSection> sections = read_raw_sections(path);
    const RawSection* sol = nullptr;
    const RawSection* mult = nullptr;
    const RawSection* info = nullptr;
    for (const RawSection& s : sections) {
        if (s.name == "solution") sol = &s;
        else if (s.name == "multipliers") mult = &s;
        else if (s.name == "info") info = &s;
        else throw ParseError(path, s.line, "unknown section [" + s.name + "]");
    }
    if (!sol) throw ValidationError(path + ": missing [solution] section");

    SolutionFile out;
    const Eigen::Index n = static_cast<Eigen::Index>(tickers.size());
    const csv::Table t = table_from_section(*sol, path, {"ticker", "x", "w", "set", "eta"});
    const TickerIndex index(tickers);
    out.solution.x.resize(n);
    out.solution.w.resize(n);
    out.solution.eta.resize(n);
    out.solution.sets.assign(static_cast<std::size_t>(n), TradeSet::no_trade);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Eigen::Index i = index.at(t, r, 0);
        if (seen[static_cast<std::size_t>(i)])
            throw ParseError(t.path, t.row_lines[r], "duplicate ticker '" + t.rows[r][0] + "'");
        seen[static_cast<std::size_t>(i)] = true;
        out.solution.x(i) = csv::parse_number(t, r, 1);
        out.solution.w(i) = csv::parse_number(t, r, 2);
        out.solution.sets[static_cast<std::size_t>(i)] = parse_trade_set(t.rows[r][3]);
        out.solution.eta(i) = csv::parse_number(t, r, 4);
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (!seen[static_cast<std::size_t>(i)])
            throw ValidationError(path + ": missing ticker '" +
                                  tickers[static_cast<std::size_t>(i)] + "'");

    if (mult) {
        const csv::Table mt = table_from_section(*mult, path, {"constraint", "value"});
        out.solution.multipliers.resize(static_cast<Eigen::Index>(mt.rows.size()));
        for (std::size_t r = 0; r < mt.rows.size(); ++r)
            out.solution.multipliers(static_cast<Eigen::Index>(r)) = csv::parse_number(mt, r, 1);
    } else {
        out.solution.multipliers.resize(0);
    }

    if (info) {
        const auto params = params_from_section(*info, path);
        if (const auto it = params.find("lambda"); it != params.end())
            out.lambda = csv::to_number(it->second, path + ": info.lambda");
        if (const auto it = params.find("objective"); it != params.end())
            out.solution.objective = csv::to_number(it->second, path + ": info.objective");
        if (const auto it = params.find("sweeps"); it != params.end())
            out.solution.sweeps =
                static_cast<int>(csv::to_integer(it->second, path + ": info.sweeps"));
    }
    return out;
}

void write_price_panel_csv(const std::string& path, const PricePanel& panel) {
    std::ofstream out = open_out(path);
    out << "date,ticker,open,close,adj_open,adj_close,volume\n";
    auto field = [](double v) { return std::isnan(v) ? std::string() : format_full(v); };
    for (Eigen::Index s = panel.num_dates() - 1; s >= 0; --s)
        for (Eigen::Index i = 0; i < panel.num_tickers(); ++i)
            out << panel.dates[static_cast<std::size_t>(s)] << ','
                << panel.tickers[static_cast<std::size_t>(i)] << ',' << field(panel.open(i, s))
                << ',' << field(panel.close(i, s)) << ',' << field(panel.adj_open(i, s)) << ','
                << field(panel.adj_close(i, s)) << ',' << field(panel.volume(i, s)) << '\n';
}

void write_classification_csv(const std::string& path,
                              const ClassificationMap& classification) {
    std::ofstream out = open_out(path);
    out << "ticker,sector,industry,subindustry\n";
    for (const auto& [ticker, rec] : classification)
        out << ticker << ',' << rec.sector << ',' << rec.industry << ',' << rec.subindustry
            << '\n';
}

void write_backtest_outputs(const std::string& dir, const BacktestReport& report) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out = open_out(dir + "/daily_pnl.csv");
        out << "date,total_pnl,cum_pnl\n";
        double cum = 0.0;
        for (const DateResult& day : report.days) {
            cum += day.total_pnl;
            out << day.date << ',' << format_full(day.total_pnl) << ',' << format_full(cum)
                << '\n';
        }
    }
    {
        std::ofstream out = open_out(dir + "/holdings.csv");
        out << "date,ticker,holding,pnl,shares\n";
        for (const DateResult& day : report.days)
            for (std::size_t i = 0; i < day.tickers.size(); ++i) {
                const Eigen::Index ii = static_cast<Eigen::Index>(i);
                out << day.date << ',' << day.tickers[i] << ',' << format_full(day.holdings(ii))
                    << ',' << format_full(day.pnl(ii)) << ',' << format_full(day.shares(ii))
                    << '\n';
            }
    }
    {
        std::ofstream out = open_out(dir + "/summary.txt");
        out << "days = " << report.days.size() << '\n';
        out << "total_pnl = " << format_full(report.total_pnl) << '\n';
        out << "total_shares = " << format_full(report.total_shares) << '\n';
        out << "investment = " << format_full(report.investment) << '\n';
        if (report.stats) {
            out << "roc = " << format_full(report.stats->roc) << '\n';
            out << "sharpe = " << format_full(report.stats->sharpe) << '\n';
            out << "cps = " << format_full(report.stats->cps) << '\n';
        } else {
            out << "stats = unavailable (degenerate P&L series)\n";
        }
        for (const SkippedDate& s : report.skipped)
            out << "skipped " << s.date << ": " << s.reason << '\n';
    }
}

}  // namespace meanrev
