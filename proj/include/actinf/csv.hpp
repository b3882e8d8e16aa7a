#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "actinf/error.hpp"

namespace actinf::csv {

/// A parsed CSV table. Lines starting with '#' and blank lines are skipped;
/// the first remaining line is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based file line of each row

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require_column(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw SchemaError("missing column '" + std::string(name) + "'");
  }
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    const auto cell = line.substr(start, comma == std::string_view::npos
                                             ? std::string_view::npos
                                             : comma - start);
    cells.emplace_back(trim(cell));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline Table read(std::istream& in) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cells = split_line(t);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError(line_no, "expected " +
                                    std::to_string(table.header.size()) +
                                    " cells, found " +
                                    std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw DataError("CSV input has no header row");
  return table;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read(in);
}

/// Parse a decimal floating-point cell. Throws ParseError naming the line.
inline double parse_double(std::string_view cell, std::size_t line_no,
                           std::string_view column) {
  double value = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw ParseError(line_no, "column '" + std::string(column) +
                                  "': not a number: '" + std::string(cell) +
                                  "'");
  return value;
}

inline std::optional<double> parse_optional(std::string_view cell,
                                            std::size_t line_no,
                                            std::string_view column) {
  if (cell.empty()) return std::nullopt;
  return parse_double(cell, line_no, column);
}

/// Shortest representation that round-trips exactly.
inline std::string format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format(const std::optional<double>& v) {
  return v ? format(*v) : std::string();
}

template <typename... Cells>
void write_row(std::ostream& out, const Cells&... cells) {
  bool first = true;
  auto put = [&](const auto& c) {
    if (!first) out << ',';
    first = false;
    using T = std::decay_t<decltype(c)>;
    if constexpr (std::is_same_v<T, double> ||
                  std::is_same_v<T, std::optional<double>>)
      out << format(c);
    else
      out << c;
  };
  (put(cells), ...);
  out << '\n';
}

}  // namespace actinf::csv
