#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace capcritic::csv {

// Quotes a field when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Splits one CSV line honoring double-quoted fields.
std::vector<std::string> parse_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, or -1.
  int column(std::string_view name) const;
};

// Reads a whole CSV file with a header row. Throws DataError on I/O failure
// or ragged rows.
Table read_file(const std::string& path);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace capcritic::csv
