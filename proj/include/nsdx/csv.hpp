#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nsdx::csv {

// Minimal comma-separated reader for the project's own tabular formats.
// No quoting: none of the formats carry commas inside a field.
struct Row {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

std::vector<std::string> split(std::string_view line);

// Reads a header line plus data rows. Blank lines are skipped; a trailing
// '\r' is stripped. Throws ParseError on an empty stream.
Table read(std::istream& in);
Table read_file(const std::string& path);

std::string join(const std::vector<std::string>& fields);

// Shortest decimal form that parses back to the same double.
std::string format_real(double v);

double parse_real(std::string_view text, std::size_t line);
long long parse_int(std::string_view text, std::size_t line);

}  // namespace nsdx::csv
