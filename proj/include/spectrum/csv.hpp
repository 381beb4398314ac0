#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spectrum {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

std::string quote_csv(std::string_view text);

using Cell = std::variant<double, long long, std::string>;

/// Column-named rows; the unit every output file is built from.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(std::string_view name) const;  // throws if absent
};

/// CSV with LF endings; `comment` (if non-empty) becomes a leading "# " line.
void write_table_csv(std::ostream& out, const Table& t, std::string_view comment = {});

/// One JSON object per row; `comment` becomes a {"#": ...} first record.
void write_table_jsonl(std::ostream& out, const Table& t, std::string_view comment = {});

/// Reads either format back. Numeric-looking CSV cells become doubles.
Table read_table(const std::filesystem::path& path);
Table parse_csv(std::string_view text);

}  // namespace spectrum
