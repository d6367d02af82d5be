#include "nsdx/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "nsdx/errors.hpp"

namespace nsdx::csv {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

Table read(std::istream& in) {
  Table table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      // tolerate a UTF-8 byte-order mark
      if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
      table.header = split(line);
      have_header = true;
      continue;
    }
    table.rows.push_back(Row{lineno, split(line)});
  }
  if (!have_header) throw ParseError(lineno == 0 ? 1 : lineno, "missing header row");
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read(in);
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ValueError("line " + std::to_string(line) + ": not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text, std::size_t line) {
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ValueError("line " + std::to_string(line) + ": not an integer: '" + std::string(text) + "'");
  return v;
}

}  // namespace nsdx::csv
