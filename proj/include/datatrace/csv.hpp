#pragma once

#include <initializer_list>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "datatrace/error.hpp"
#include "datatrace/text.hpp"

namespace datatrace::csv {

using Row = std::vector<std::string>;

/// `|` wins when the header line contains one, otherwise `,`.
inline char detect_delimiter(std::string_view text) {
  auto header = text.substr(0, text.find('\n'));
  return header.find('|') != std::string_view::npos ? '|' : ',';
}

/// RFC 4180 reader. Unquoted cells are trimmed so that `a | b` style tables
/// read naturally; quoted cells are kept verbatim. Blank lines are skipped.
inline std::vector<Row> parse(std::string_view text, char delim) {
  std::vector<Row> rows;
  Row row;
  std::string cell;
  bool quoted = false, in_quotes = false, row_has_content = false;

  auto finish_cell = [&] {
    row.push_back(quoted ? cell : text::trim(cell));
    cell.clear();
    quoted = false;
  };
  auto finish_row = [&] {
    finish_cell();
    if (row_has_content) rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"' && text::trim_view(cell).empty()) {
      cell.clear();
      in_quotes = quoted = row_has_content = true;
    } else if (c == delim) {
      finish_cell();
      row_has_content = true;
    } else if (c == '\n') {
      finish_row();
    } else if (c == '\r') {
      // swallowed; '\n' terminates the row
    } else {
      cell.push_back(c);
      if (!text::is_space(c)) row_has_content = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::MalformedRow, "unterminated quoted cell");
  if (!cell.empty() || !row.empty() || row_has_content) finish_row();
  return rows;
}

inline std::vector<Row> parse(std::string_view text) { return parse(text, detect_delimiter(text)); }

inline std::string quote(std::string_view cell, char delim = ',') {
  if (cell.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string_view::npos &&
      (cell.empty() || (!text::is_space(cell.front()) && !text::is_space(cell.back()))))
    return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& os, const Row& row, char delim = ',') {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << delim;
    os << quote(row[i], delim);
  }
  os << '\n';
}

inline std::string to_string(const std::vector<Row>& rows, char delim = ',') {
  std::ostringstream os;
  for (const auto& r : rows) write_row(os, r, delim);
  return os.str();
}

/// Maps lowercase header names to column indices.
class Header {
 public:
  explicit Header(const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) names_.push_back(text::to_lower(text::trim(row[i])));
  }

  std::optional<std::size_t> find(std::initializer_list<std::string_view> candidates) const {
    for (auto cand : candidates)
      for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == cand) return i;
    return std::nullopt;
  }

  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

}  // namespace datatrace::csv
