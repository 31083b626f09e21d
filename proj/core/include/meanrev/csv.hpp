#pragma once

#include <map>
#include <string>
#include <vector>

namespace meanrev::csv {

// One parsed row. Fields are raw strings; empty string means the field was
// empty in the file.
using Row = std::vector<std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;        // data rows, header excluded
    std::vector<long> row_lines;  // 1-based line number of each data row
    std::string path;

    // Index of a header column; throws ValidationError if absent.
    std::size_t column(const std::string& name) const;
};

// Reads a comma-separated file with a mandatory header line. Blank lines are
// skipped. Fields are trimmed of surrounding whitespace; no quoting rules
// (tickers and labels here never contain commas).
Table read_table(const std::string& path);

// Same, but requires the header to match `expected` exactly (order included).
Table read_table(const std::string& path, const std::vector<std::string>& expected);

// Parses one double field; throws ParseError naming file:line on garbage.
double parse_number(const Table& t, std::size_t row, std::size_t col);

// Splits a comma-separated line, trimming whitespace from each field.
Row split_fields(const std::string& line);

// Reads a flat `key = value` config file ('#' starts a comment, blank lines
// ignored). Later keys override earlier ones.
std::map<std::string, std::string> read_key_values(const std::string& path);

double to_number(const std::string& s, const std::string& context);
long to_integer(const std::string& s, const std::string& context);

}  // namespace meanrev::csv
