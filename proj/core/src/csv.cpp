#include "meanrev/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>

#include "meanrev/errors.hpp"

namespace meanrev::csv {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Row split_fields(const std::string& line) {
    Row out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::size_t Table::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw ValidationError(path + ": missing required column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);

    Table t;
    t.path = path;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (!have_header) {
            t.header = split_fields(line);
            have_header = true;
            continue;
        }
        Row r = split_fields(line);
        if (r.size() != t.header.size())
            throw ParseError(path, lineno,
                             "expected " + std::to_string(t.header.size()) +
                                 " fields, got " + std::to_string(r.size()));
        t.rows.push_back(std::move(r));
        t.row_lines.push_back(lineno);
    }
    if (!have_header) throw ValidationError(path + ": empty file, header required");
    return t;
}

Table read_table(const std::string& path, const std::vector<std::string>& expected) {
    Table t = read_table(path);
    if (t.header != expected) {
        std::string want;
        for (const auto& h : expected) {
            if (!want.empty()) want += ',';
            want += h;
        }
        throw ValidationError(path + ": header must be exactly '" + want + "'");
    }
    return t;
}

double to_number(const std::string& s, const std::string& context) {
    if (s.empty()) throw ValidationError(context + ": empty numeric field");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        throw ValidationError(context + ": not a number: '" + s + "'");
    return v;
}

long to_integer(const std::string& s, const std::string& context) {
    if (s.empty()) throw ValidationError(context + ": empty integer field");
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        throw ValidationError(context + ": not an integer: '" + s + "'");
    return v;
}

double parse_number(const Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    if (s.empty())
        throw ParseError(t.path, t.row_lines[row], "empty numeric field in column '" +
                                                       t.header[col] + "'");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        throw ParseError(t.path, t.row_lines[row],
                         "not a number: '" + s + "' in column '" + t.header[col] + "'");
    return v;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);

    std::map<std::string, std::string> kv;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string s = trim(line);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError(path, lineno, "expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (key.empty()) throw ParseError(path, lineno, "empty key");
        kv[key] = val;
    }
    return kv;
}

}  // namespace meanrev::csv
