#include "spectrum/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "spectrum/error.hpp"

namespace spectrum {

namespace {

std::string cell_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  if (const auto* n = std::get_if<long long>(&cell)) return std::to_string(*n);
  return quote_csv(std::get<std::string>(cell));
}

Cell parse_cell(const std::string& text, bool was_quoted) {
  if (was_quoted || text.empty()) return text;
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec == std::errc() && res.ptr == end) return v;
  return text;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string quote_csv(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string q = "\"";
  for (char ch : text) {
    if (ch == '"') q += '"';
    q += ch;
  }
  q += '"';
  return q;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw Error(ErrorKind::kInvalidArgument, "no column named '" + std::string(name) + "'");
}

void write_table_csv(std::ostream& out, const Table& t, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out << ',';
    out << quote_csv(t.columns[i]);
  }
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << cell_text(row[i]);
    }
    out << '\n';
  }
}

void write_table_jsonl(std::ostream& out, const Table& t, std::string_view comment) {
  if (!comment.empty()) out << nlohmann::json{{"#", comment}}.dump() << '\n';
  for (const auto& row : t.rows) {
    // ordered_json keeps the column order of the table.
    nlohmann::ordered_json rec = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size() && i < t.columns.size(); ++i) {
      const Cell& cell = row[i];
      if (const auto* d = std::get_if<double>(&cell)) {
        // JSON has no inf/nan; those go out as strings.
        if (std::isfinite(*d)) {
          rec[t.columns[i]] = *d;
        } else {
          rec[t.columns[i]] = format_double(*d);
        }
      } else if (const auto* n = std::get_if<long long>(&cell)) {
        rec[t.columns[i]] = *n;
      } else {
        rec[t.columns[i]] = std::get<std::string>(cell);
      }
    }
    out << rec.dump() << '\n';
  }
}

Table parse_csv(std::string_view text) {
  Table t;
  std::vector<std::pair<std::string, bool>> fields;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  bool header_done = false;
  bool at_line_start = true;
  bool comment_line = false;

  auto end_row = [&]() {
    fields.emplace_back(field, quoted);
    field.clear();
    quoted = false;
    if (!header_done) {
      for (auto& f : fields) t.columns.push_back(f.first);
      header_done = true;
    } else {
      std::vector<Cell> row;
      for (auto& f : fields) row.push_back(parse_cell(f.first, f.second));
      t.rows.push_back(std::move(row));
    }
    fields.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (at_line_start) {
      at_line_start = false;
      comment_line = ch == '#';
    }
    if (comment_line) {
      if (ch == '\n') at_line_start = true;
      continue;
    }
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        quoted = true;
        break;
      case ',':
        fields.emplace_back(field, quoted);
        field.clear();
        quoted = false;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        at_line_start = true;
        break;
      default:
        field += ch;
    }
  }
  if (!field.empty() || !fields.empty()) end_row();
  return t;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.extension() != ".jsonl") return parse_csv(text);

  Table t;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::ordered_json::parse(line);
    if (rec.contains("#")) continue;
    if (t.columns.empty()) {
      for (auto it = rec.begin(); it != rec.end(); ++it) t.columns.push_back(it.key());
    }
    std::vector<Cell> row;
    for (const auto& col : t.columns) {
      const auto& v = rec.at(col);
      if (v.is_number_integer()) {
        row.emplace_back(v.get<long long>());
      } else if (v.is_number()) {
        row.emplace_back(v.get<double>());
      } else {
        row.push_back(parse_cell(v.get<std::string>(), false));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace spectrum
