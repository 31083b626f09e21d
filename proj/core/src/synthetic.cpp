#include "meanrev/synthetic.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>

#include "meanrev/csv.hpp"
#include "meanrev/errors.hpp"
#include "meanrev/rng.hpp"

namespace meanrev {

namespace {

// Proleptic Gregorian day count (days since 1970-01-01).
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long yy = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = static_cast<int>(yy + (m <= 2));
}

std::string iso_date(long day_number) {
    int y, m, d;
    civil_from_days(day_number, y, m, d);
    char buf[36];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
    return buf;
}

std::string ticker_name(Eigen::Index i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%04d", static_cast<int>(i));
    return buf;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    // trim
    for (auto& f : out) {
        auto b = f.find_first_not_of(" \t");
        auto e = f.find_last_not_of(" \t");
        f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

}  // namespace

void SyntheticSpec::validate() const {
    const Eigen::Index n = xi.size();
    const Eigen::Index k = omega_raw.cols();
    if (n < 1) throw ValidationError("synthetic spec: need at least one ticker");
    if (num_dates < 2) throw ValidationError("synthetic spec: need at least two dates");
    if (base_price <= 0.0) throw ValidationError("synthetic spec: base_price must be positive");
    if ((xi.array() <= 0.0).any())
        throw ValidationError("synthetic spec: specific risks must be strictly positive");
    if (omega_raw.rows() != n)
        throw ValidationError("synthetic spec: loadings row count does not match xi");
    if (phi.rows() != k || phi.cols() != k)
        throw ValidationError("synthetic spec: factor covariance must be K x K");
    if (k > 0) {
        if (!phi.isApprox(phi.transpose(), 1e-12))
            throw ValidationError("synthetic spec: factor covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(phi);
        if (llt.info() != Eigen::Success)
            throw ValidationError("synthetic spec: factor covariance is not positive definite");
    }
}

PricePanel generate_synthetic_panel(const SyntheticSpec& spec) {
    spec.validate();
    const Eigen::Index n = spec.xi.size();
    const Eigen::Index k = spec.omega_raw.cols();
    const Eigen::Index t = spec.num_dates;

    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(k, k);
    if (k > 0) chol = Eigen::LLT<Eigen::MatrixXd>(spec.phi).matrixL();

    PricePanel p;
    p.tickers.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) p.tickers[static_cast<std::size_t>(i)] = ticker_name(i);
    const long anchor = days_from_civil(2019, 12, 31);
    p.dates.resize(static_cast<std::size_t>(t));
    for (Eigen::Index s = 0; s < t; ++s) p.dates[static_cast<std::size_t>(s)] = iso_date(anchor - s);

    p.open.resize(n, t);
    p.close.resize(n, t);
    p.adj_open.resize(n, t);
    p.adj_close.resize(n, t);
    p.volume.resize(n, t);

    Rng rng(spec.seed);

    Eigen::VectorXd liquidity(n);
    for (Eigen::Index i = 0; i < n; ++i)
        liquidity(i) = 1.0e6 * std::exp(0.5 * rng.normal());

    auto draw_return = [&](Eigen::VectorXd& r) {
        Eigen::VectorXd f(k);
        for (Eigen::Index a = 0; a < k; ++a) f(a) = rng.normal();
        r.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) r(i) = spec.xi(i) * rng.normal();
        if (k > 0) r += spec.omega_raw * (chol * f);
    };

    Eigen::VectorXd prev_close = Eigen::VectorXd::Constant(n, spec.base_price);
    Eigen::VectorXd r_overnight, r_intraday;
    for (Eigen::Index c = 0; c < t; ++c) {
        const Eigen::Index s = t - 1 - c;  // chronological position -> recency index
        draw_return(r_overnight);
        draw_return(r_intraday);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ao = prev_close(i) * std::exp(r_overnight(i));
            const double ac = ao * std::exp(r_intraday(i));
            p.adj_open(i, s) = ao;
            p.adj_close(i, s) = ac;
            p.open(i, s) = ao;
            p.close(i, s) = ac;
            p.volume(i, s) = std::max(1.0, std::floor(liquidity(i) * std::exp(0.25 * rng.normal()) + 0.5));
            prev_close(i) = ac;
        }
    }

    p.validate();
    return p;
}

SyntheticConfig load_synthetic_config(const std::string& path) {
    auto kv = csv::read_key_values(path);
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ValidationError(path + ": missing key '" + key + "'");
        return it->second;
    };

    SyntheticConfig cfg;
    const long n = csv::to_integer(need("n"), path + ": n");
    const long k = csv::to_integer(need("k"), path + ": k");
    if (n < 1) throw ValidationError(path + ": n must be positive");
    if (k < 0) throw ValidationError(path + ": k must be nonnegative");
    cfg.spec.num_dates = csv::to_integer(need("dates"), path + ": dates");
    cfg.spec.seed = static_cast<std::uint64_t>(csv::to_integer(need("seed"), path + ": seed"));
    if (auto it = kv.find("base_price"); it != kv.end())
        cfg.spec.base_price = csv::to_number(it->second, path + ": base_price");

    {
        auto fields = split_list(need("xi"), ',');
        cfg.spec.xi.resize(n);
        if (fields.size() == 1) {
            cfg.spec.xi.setConstant(csv::to_number(fields[0], path + ": xi"));
        } else if (fields.size() == static_cast<std::size_t>(n)) {
            for (long i = 0; i < n; ++i)
                cfg.spec.xi(i) = csv::to_number(fields[static_cast<std::size_t>(i)], path + ": xi");
        } else {
            throw ValidationError(path + ": xi must be one value or exactly n values");
        }
    }

    if (k == 0) {
        cfg.spec.phi.resize(0, 0);
        if (kv.count("phi"))
            throw ValidationError(path + ": phi given but k = 0 requests no factors");
    } else {
        const std::string& raw = need("phi");
        cfg.spec.phi = Eigen::MatrixXd::Zero(k, k);
        if (raw.find(',') == std::string::npos) {
            const double v = csv::to_number(raw, path + ": phi");
            cfg.spec.phi = v * Eigen::MatrixXd::Identity(k, k);
        } else {
            for (const auto& trip : split_list(raw, ';')) {
                auto f = split_list(trip, ',');
                if (f.size() != 3) throw ValidationError(path + ": phi triplet must be 'A,B,value'");
                const long a = csv::to_integer(f[0], path + ": phi");
                const long b = csv::to_integer(f[1], path + ": phi");
                if (a < 0 || a >= k || b < 0 || b >= k)
                    throw ValidationError(path + ": phi index out of range");
                const double v = csv::to_number(f[2], path + ": phi");
                cfg.spec.phi(a, b) = v;
                cfg.spec.phi(b, a) = v;
            }
        }
    }

    {
        const std::string& raw = need("omega");
        cfg.spec.omega_raw = Eigen::MatrixXd::Zero(n, k);
        if (raw == "clusters") {
            if (k < 1) throw ValidationError(path + ": omega=clusters needs k >= 1");
            cfg.cluster.resize(static_cast<std::size_t>(n));
            for (long i = 0; i < n; ++i) {
                const long c = std::min<long>(i * k / n, k - 1);
                cfg.cluster[static_cast<std::size_t>(i)] = static_cast<int>(c);
                cfg.spec.omega_raw(i, c) = 1.0;
            }
        } else if (raw == "none") {
            if (k != 0) throw ValidationError(path + ": omega=none requires k = 0");
        } else {
            for (const auto& trip : split_list(raw, ';')) {
                auto f = split_list(trip, ',');
                if (f.size() != 3)
                    throw ValidationError(path + ": omega triplet must be 'i,A,value'");
                const long i = csv::to_integer(f[0], path + ": omega");
                const long a = csv::to_integer(f[1], path + ": omega");
                if (i < 0 || i >= n || a < 0 || a >= k)
                    throw ValidationError(path + ": omega index out of range");
                cfg.spec.omega_raw(i, a) = csv::to_number(f[2], path + ": omega");
            }
        }
    }

    cfg.spec.validate();
    return cfg;
}

ClassificationMap synthetic_classification(const std::vector<std::string>& tickers,
                                           const std::vector<int>& cluster) {
    if (!cluster.empty() && cluster.size() != tickers.size())
        throw ValidationError("synthetic_classification: cluster list length mismatch");
    ClassificationMap m;
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        const int c = cluster.empty() ? 0 : cluster[i];
        char sec[16], ind[16], sub[16];
        std::snprintf(sec, sizeof sec, "SEC%02d", c);
        std::snprintf(ind, sizeof ind, "IND%02d", c);
        std::snprintf(sub, sizeof sub, "SUB%02d", c);
        m[tickers[i]] = ClassificationRecord{sec, ind, sub};
    }
    return m;
}

}  // namespace meanrev
