#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bpreg::cli {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws CsvError naming the column if absent.
  std::size_t column(std::string_view name) const;
  /// Parses every cell of a column as a finite double.
  std::vector<double> numeric_column(std::string_view name) const;
};

/// RFC 4180 style: comma separated, optional double-quoted fields with ""
/// escapes, LF or CRLF line ends, first record is the header.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

}  // namespace bpreg::cli
