#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meanrev/backtest.hpp"
#include "meanrev/cost_optimizer.hpp"
#include "meanrev/csv.hpp"
#include "meanrev/errors.hpp"
#include "meanrev/io.hpp"
#include "meanrev/optimizer.hpp"
#include "meanrev/regression.hpp"
#include "meanrev/synthetic.hpp"

namespace {

using namespace meanrev;

struct GlobalArgs {
    std::string out_dir = "out";
    bool no_timestamp = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

// Collects run output: echoed to stdout as it happens, flushed to
// <out-dir>/run.log at the end.
class RunLog {
  public:
    void line(const std::string& s) {
        std::cout << s << '\n';
        lines_.push_back(s);
    }
    void write(const std::string& dir, bool with_timestamp) const {
        std::ofstream out(dir + "/run.log");
        if (!out) throw ValidationError("cannot open '" + dir + "/run.log' for writing");
        if (with_timestamp) {
            const std::time_t now = std::time(nullptr);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
            out << "# run at " << buf << '\n';
        }
        for (const std::string& s : lines_) out << s << '\n';
    }

  private:
    std::vector<std::string> lines_;
};

void start_run(const CLI::App* sub, const GlobalArgs& g) {
    std::filesystem::create_directories(g.out_dir);
    std::ofstream out(g.out_dir + "/config.txt");
    if (!out)
        throw ValidationError("cannot open '" + g.out_dir + "/config.txt' for writing");
    out << sub->config_to_str(true, false);
}

// Reorders the rows of a wide loadings file onto `tickers`.
LoadingsMatrix align_loadings(const NamedLoadings& named,
                              const std::vector<std::string>& tickers) {
    std::map<std::string, Eigen::Index> row;
    for (std::size_t i = 0; i < named.tickers.size(); ++i)
        if (!row.emplace(named.tickers[i], static_cast<Eigen::Index>(i)).second)
            throw ValidationError("loadings: duplicate ticker '" + named.tickers[i] + "'");
    if (row.size() != tickers.size())
        throw ValidationError("loadings cover " + std::to_string(row.size()) +
                              " tickers, returns have " + std::to_string(tickers.size()));
    LoadingsMatrix out;
    out.columns = named.loadings.columns;
    out.values.resize(static_cast<Eigen::Index>(tickers.size()), named.loadings.cols());
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        const auto it = row.find(tickers[i]);
        if (it == row.end())
            throw ValidationError("loadings: missing ticker '" + tickers[i] + "'");
        out.values.row(static_cast<Eigen::Index>(i)) = named.loadings.values.row(it->second);
    }
    refresh_binary_flags(out);
    return out;
}

void write_kkt_report(const std::string& path, const KktReport& rep) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << "pass = " << (rep.pass ? "true" : "false") << '\n';
    out << "worst_stationarity = " << format_full(rep.worst_stationarity) << '\n';
    out << "worst_constraints = " << format_full(rep.worst_constraints) << '\n';
    out << "worst_bounds = " << format_full(rep.worst_bounds) << '\n';
    out << "worst_no_trade = " << format_full(rep.worst_no_trade) << '\n';
    out << "worst_at_upper = " << format_full(rep.worst_at_upper) << '\n';
    out << "worst_at_lower = " << format_full(rep.worst_at_lower) << '\n';
    std::size_t shown = 0;
    for (const KktViolation& v : rep.violations) {
        out << "violation " << v.condition << " at index " << v.index << " by "
            << format_full(v.amount) << '\n';
        if (++shown == 50) {
            out << "... " << rep.violations.size() - shown << " more\n";
            break;
        }
    }
}

struct BacktestArgs {
    std::string config;
    std::string prices, classes, synthetic_cfg;
    std::string level = "industry";
    bool normalize = false;
    double investment = 2e7;
    int top_n = 2000;
    int addv_days = 21;
    int period = 21;
    std::string first_date, last_date;
};

int run_backtest_cmd(const CLI::App* sub, const GlobalArgs& g, const BacktestArgs& a) {
    start_run(sub, g);
    RunLog log;

    PricePanel panel;
    ClassificationMap cmap;
    if (!a.synthetic_cfg.empty()) {
        SyntheticConfig sc = load_synthetic_config(a.synthetic_cfg);
        if (g.seed_set) sc.spec.seed = g.seed;
        panel = generate_synthetic_panel(sc.spec);
        cmap = synthetic_classification(panel.tickers, sc.cluster);
        log.line("synthetic panel: " + std::to_string(panel.tickers.size()) + " tickers, " +
                 std::to_string(panel.dates.size()) + " dates, seed " +
                 std::to_string(sc.spec.seed));
    } else {
        if (a.prices.empty() || a.classes.empty())
            throw ValidationError("backtest needs --prices and --class, or --synthetic");
        panel = load_price_panel(a.prices);
        cmap = load_classification(a.classes);
    }

    BacktestConfig bc;
    bc.level = parse_level(a.level);
    bc.normalize = a.normalize;
    bc.investment = a.investment;
    bc.top_n = a.top_n;
    bc.addv_days = a.addv_days;
    bc.rebalance_period = a.period;
    if (!a.first_date.empty()) bc.first_date = a.first_date;
    if (!a.last_date.empty()) bc.last_date = a.last_date;

    const BacktestReport report = run_backtest(panel, cmap, bc);
    write_backtest_outputs(g.out_dir, report);

    log.line("dates traded = " + std::to_string(report.days.size()));
    log.line("dates skipped = " + std::to_string(report.skipped.size()));
    log.line("total_pnl = " + format_full(report.total_pnl));
    if (report.stats) {
        log.line("roc = " + format_full(report.stats->roc));
        log.line("sharpe = " + format_full(report.stats->sharpe));
        log.line("cps = " + format_full(report.stats->cps));
    } else {
        log.line("stats unavailable (degenerate P&L series)");
    }
    log.write(g.out_dir, !g.no_timestamp);
    return 0;
}

struct RegressArgs {
    std::string config;
    std::string returns, loadings, classes;
    std::string level = "industry";
    std::string weights = "unit";
    std::string variances;
    bool intercept = false;
    bool drop_dependent = false;
    std::string shape;
    double investment = 1.0;
    double kappa = 0.0;
    bool kappa_set = false;
};

int run_regress_cmd(const CLI::App* sub, const GlobalArgs& g, const RegressArgs& a) {
    start_run(sub, g);
    RunLog log;

    if (a.returns.empty()) throw ValidationError("regress needs --returns");
    const NamedVector ret = read_vector_csv(a.returns);
    LoadingsMatrix lm;
    if (!a.loadings.empty()) {
        lm = align_loadings(read_loadings_csv(a.loadings), ret.tickers);
    } else if (!a.classes.empty()) {
        lm = loadings_from_classification(load_classification(a.classes), ret.tickers,
                                          parse_level(a.level));
    } else if (a.intercept) {
        // Intercept-only: demean against the unit column the regression appends.
        lm.values.resize(ret.values.size(), 0);
    } else {
        throw ValidationError("regress needs --loadings, --class, or --intercept");
    }

    Eigen::VectorXd weights;
    if (a.weights == "unit") {
        weights = Eigen::VectorXd::Ones(ret.values.size());
    } else if (a.weights == "inverse-variance") {
        if (a.variances.empty())
            throw ValidationError("--weights inverse-variance needs --variances");
        const Eigen::VectorXd var =
            align_vector(read_vector_csv(a.variances), ret.tickers, "variances");
        if ((var.array() <= 0.0).any())
            throw ValidationError("variances must be positive");
        weights = var.cwiseInverse();
    } else {
        weights = align_vector(read_vector_csv(a.weights), ret.tickers, "weights");
    }

    RegressionOptions opts;
    opts.with_intercept = a.intercept;
    opts.drop_dependent = a.drop_dependent;
    const RegressionResult reg = cross_sectional_regression(ret.values, lm, weights, opts);

    write_vector_csv(g.out_dir + "/residuals.csv", ret.tickers, reg.residuals);
    write_vector_csv(g.out_dir + "/regressed.csv", ret.tickers, reg.regressed);
    {
        std::ofstream out(g.out_dir + "/coefficients.csv");
        if (!out) throw ValidationError("cannot write coefficients.csv");
        out << "column,value\n";
        for (std::size_t j = 0; j < reg.columns.size(); ++j)
            out << reg.columns[j] << ','
                << format_full(reg.coefficients(static_cast<Eigen::Index>(j))) << '\n';
    }

    log.line("names = " + std::to_string(ret.tickers.size()));
    log.line("columns used = " + std::to_string(reg.columns.size()));
    for (const std::string& col : reg.dropped) log.line("dropped dependent column: " + col);

    if (!a.shape.empty()) {
        StrategyShaping shaping;
        shaping.kind = parse_shaping_kind(a.shape);
        shaping.investment = a.investment;
        if (a.kappa_set) shaping.kappa = a.kappa;
        const Holdings held = holdings_from_residuals(reg.regressed, shaping);
        write_vector_csv(g.out_dir + "/holdings.csv", ret.tickers, held.dollars);
        log.line("gross = " + format_full(held.dollars.cwiseAbs().sum()));
        log.line("net = " + format_full(held.mishedge));
        if (shaping.kind == StrategyShaping::Kind::tanh)
            log.line("kappa = " + format_full(held.kappa));
    }
    log.write(g.out_dir, !g.no_timestamp);
    return 0;
}

struct OptimizeArgs {
    std::string config;
    std::string problem;
    double lambda = 0.0;
    bool lambda_set = false;
    bool sharpe_search_mode = false;
    std::string grid;
    std::string check_kkt;
    std::string growth = "incremental";
    double kkt_tol = 1e-8;
};

std::vector<double> parse_grid(const std::string& csv_list) {
    std::vector<double> out;
    std::size_t begin = 0;
    while (begin <= csv_list.size()) {
        std::size_t end = csv_list.find(',', begin);
        if (end == std::string::npos) end = csv_list.size();
        const std::string item = csv_list.substr(begin, end - begin);
        if (!item.empty()) out.push_back(csv::to_number(item, "--grid"));
        begin = end + 1;
    }
    return out;
}

int run_optimize_cmd(const CLI::App* sub, const GlobalArgs& g, const OptimizeArgs& a) {
    start_run(sub, g);
    RunLog log;

    if (a.problem.empty()) throw ValidationError("optimize needs --problem");
    ProblemBundle bundle = load_problem_bundle(a.problem);
    if (a.lambda_set) bundle.lambda = a.lambda;
    const CostProblem problem = bundle.to_problem();

    SolveOptions options;
    if (a.growth == "incremental")
        options.growth = SolveOptions::BoundGrowth::incremental;
    else if (a.growth == "inequality")
        options.growth = SolveOptions::BoundGrowth::inequality;
    else
        throw ValidationError("--growth must be incremental or inequality");

    if (!a.check_kkt.empty()) {
        const SolutionFile sf = read_solution_file(a.check_kkt, bundle.tickers);
        const CostProblem checked =
            sf.lambda > 0.0 ? problem.with_lambda(sf.lambda) : problem;
        const KktReport rep = kkt_check(checked, sf.solution, a.kkt_tol);
        write_kkt_report(g.out_dir + "/kkt.txt", rep);
        log.line(rep.pass ? "KKT PASS" : "KKT FAIL");
        log.line("worst stationarity = " + format_full(rep.worst_stationarity));
        log.write(g.out_dir, !g.no_timestamp);
        return rep.pass ? 0 : 1;
    }

    if (a.sharpe_search_mode) {
        const SharpeSearchResult res = sharpe_search(problem, parse_grid(a.grid), options);
        {
            std::ofstream out(g.out_dir + "/search.csv");
            if (!out) throw ValidationError("cannot write search.csv");
            out << "lambda,sharpe,usable\n";
            for (const SharpeSearchPoint& pt : res.evaluations)
                out << format_full(pt.lambda) << ',' << format_full(pt.sharpe) << ','
                    << (pt.usable ? 1 : 0) << '\n';
        }
        write_solution_file(g.out_dir + "/solution.csv", bundle.tickers, res.solution,
                            res.lambda);
        write_kkt_report(g.out_dir + "/kkt.txt",
                         kkt_check(problem.with_lambda(res.lambda), res.solution, a.kkt_tol));
        log.line("best lambda = " + format_full(res.lambda));
        log.line("realized sharpe = " + format_full(res.sharpe));
        try {
            const HoldingWeights cf = max_sharpe_factor_constrained(
                problem.model, problem.returns, problem.constraints.values);
            const double cf_sharpe =
                problem.returns.dot(cf.weights) /
                std::sqrt(theta_quadratic_form(problem.model, cf.weights));
            log.line("cost-free closed-form sharpe = " + format_full(cf_sharpe));
        } catch (const Error&) {
            log.line("cost-free closed-form sharpe unavailable");
        }
        log.line("evaluations = " + std::to_string(res.evaluations.size()));
        log.write(g.out_dir, !g.no_timestamp);
        return 0;
    }

    Solution solution;
    try {
        solution = solve_fixed_lambda(problem, options);
    } catch (const NonConvergenceError& e) {
        write_solution_file(g.out_dir + "/last_state.csv", bundle.tickers, e.last_state,
                            problem.lambda);
        std::cerr << "error: " << e.what() << " (last state written to " << g.out_dir
                  << "/last_state.csv)\n";
        return 2;
    }
    const KktReport rep = kkt_check(problem, solution, a.kkt_tol);
    write_solution_file(g.out_dir + "/solution.csv", bundle.tickers, solution, problem.lambda);
    write_kkt_report(g.out_dir + "/kkt.txt", rep);
    log.line("lambda = " + format_full(problem.lambda));
    log.line("objective = " + format_full(solution.objective));
    log.line("sweeps = " + std::to_string(solution.sweeps));
    log.line(rep.pass ? "KKT PASS" : "KKT FAIL");
    log.write(g.out_dir, !g.no_timestamp);
    return rep.pass ? 0 : 2;
}

struct SynthArgs {
    std::string config;
    std::string spec;
};

int run_synth_cmd(const CLI::App* sub, const GlobalArgs& g, const SynthArgs& a) {
    start_run(sub, g);
    RunLog log;
    if (a.spec.empty()) throw ValidationError("synth needs --spec");
    SyntheticConfig sc = load_synthetic_config(a.spec);
    if (g.seed_set) sc.spec.seed = g.seed;
    const PricePanel panel = generate_synthetic_panel(sc.spec);
    const ClassificationMap cmap = synthetic_classification(panel.tickers, sc.cluster);
    write_price_panel_csv(g.out_dir + "/prices.csv", panel);
    write_classification_csv(g.out_dir + "/classification.csv", cmap);
    log.line("tickers = " + std::to_string(panel.tickers.size()));
    log.line("dates = " + std::to_string(panel.dates.size()));
    log.line("seed = " + std::to_string(sc.spec.seed));
    log.write(g.out_dir, !g.no_timestamp);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-reversion portfolio construction toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--out-dir", g.out_dir, "directory for all output files");
    app.add_flag("--no-timestamp", g.no_timestamp, "omit the timestamp line from run.log");
    auto* seed_opt = app.add_option("--seed", g.seed, "override the synthetic panel seed");

    BacktestArgs ba;
    CLI::App* bt = app.add_subcommand("backtest", "simulate the overnight-reversion book");
    bt->add_option("--config", ba.config, "read option defaults from a key = value file");
    bt->add_option("--prices", ba.prices, "price panel CSV");
    bt->add_option("--class", ba.classes, "classification CSV");
    bt->add_option("--synthetic", ba.synthetic_cfg, "generate the panel from this spec file");
    bt->add_option("--level", ba.level, "sector|industry|subindustry");
    bt->add_flag("--normalize", ba.normalize, "squash residual outliers before sizing");
    bt->add_option("--investment", ba.investment, "gross dollars per day");
    bt->add_option("--top-n", ba.top_n, "universe size");
    bt->add_option("--addv-days", ba.addv_days, "liquidity lookback days");
    bt->add_option("--period", ba.period, "rebalance period days");
    bt->add_option("--first-date", ba.first_date, "clip traded dates (inclusive)");
    bt->add_option("--last-date", ba.last_date, "clip traded dates (inclusive)");

    RegressArgs ra;
    CLI::App* rg = app.add_subcommand("regress", "cross-sectional regression and holdings");
    rg->add_option("--config", ra.config, "read option defaults from a key = value file");
    rg->add_option("--returns", ra.returns, "returns CSV (ticker,value)");
    rg->add_option("--loadings", ra.loadings, "wide loadings CSV");
    rg->add_option("--class", ra.classes, "classification CSV for binary clusters");
    rg->add_option("--level", ra.level, "sector|industry|subindustry");
    rg->add_option("--weights", ra.weights, "unit | inverse-variance | weights CSV path");
    rg->add_option("--variances", ra.variances, "variance CSV for inverse-variance weights");
    rg->add_flag("--intercept", ra.intercept, "add an intercept column if not spanned");
    rg->add_flag("--drop-dependent", ra.drop_dependent,
                 "drop dependent loadings columns instead of failing");
    rg->add_option("--shape", ra.shape, "linear|sign|tanh|power|rank holdings from residuals");
    rg->add_option("--investment", ra.investment, "gross dollars for the holdings");
    auto* kappa_opt = rg->add_option("--kappa", ra.kappa, "tanh scale override");

    OptimizeArgs oa;
    CLI::App* op = app.add_subcommand("optimize", "cost-aware portfolio optimization");
    op->add_option("--config", oa.config, "read option defaults from a key = value file");
    op->add_option("--problem", oa.problem, "problem bundle file");
    auto* lambda_opt = op->add_option("--lambda", oa.lambda, "risk aversion (fixed solve)");
    op->add_flag("--sharpe-search", oa.sharpe_search_mode,
                 "search lambda for the best net Sharpe ratio");
    op->add_option("--grid", oa.grid, "comma-separated lambda grid for the search");
    op->add_option("--check-kkt", oa.check_kkt, "verify a previously written solution file");
    op->add_option("--growth", oa.growth, "bound handling: incremental | inequality");
    op->add_option("--kkt-tol", oa.kkt_tol, "KKT certification tolerance");

    SynthArgs sa;
    CLI::App* sy = app.add_subcommand("synth", "write a synthetic price panel");
    sy->add_option("--config", sa.config, "read option defaults from a key = value file");
    sy->add_option("--spec", sa.spec, "synthetic spec file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    try {
        // Config files hold defaults; anything given on the command line wins
        // because values only land on options that are still empty.
        const auto merge_config = [](CLI::App* sub, const std::string& path) {
            if (!sub->parsed() || path.empty()) return;
            std::ifstream in(path);
            if (!in) throw ValidationError("cannot open config file '" + path + "'");
            sub->parse_from_stream(in);
        };
        merge_config(bt, ba.config);
        merge_config(rg, ra.config);
        merge_config(op, oa.config);
        merge_config(sy, sa.config);

        g.seed_set = seed_opt->count() > 0;
        ra.kappa_set = kappa_opt->count() > 0;
        oa.lambda_set = lambda_opt->count() > 0;

        if (bt->parsed()) return run_backtest_cmd(bt, g, ba);
        if (rg->parsed()) return run_regress_cmd(rg, g, ra);
        if (op->parsed()) return run_optimize_cmd(op, g, oa);
        if (sy->parsed()) return run_synth_cmd(sy, g, sa);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
