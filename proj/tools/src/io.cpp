#include "io.hpp"

#include "glmfunk/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace glmfunk::cli {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw DataError(where(path, line) + ": column `" + column + "` holds `" + text + "`, not a number");
  }
  if (!std::isfinite(v)) {
    throw DataError(where(path, line) + ": column `" + column + "` holds non-finite value `" + text + "`");
  }
  return v;
}

Index parse_unit(const std::string& text, const fs::path& path, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || v < 0) {
    throw DataError(where(path, line) + ": unit_id `" + text + "` is not a non-negative integer");
  }
  return static_cast<Index>(v);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw DataError(where(path, number) + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(number);
  }
  if (t.header.empty()) throw DataError(path.string() + ": empty file");
  return t;
}

void check_unique(const std::vector<Index>& units, const fs::path& path) {
  std::unordered_map<Index, int> seen;
  for (Index u : units) {
    if (++seen[u] > 1) throw DataError(path.string() + ": unit_id " + std::to_string(u) + " appears twice");
  }
}

}  // namespace

Design read_design(const fs::path& path) {
  const Table t = read_table(path);
  Design d;
  d.feature_names.assign(t.header.begin() + 1, t.header.end());
  d.X.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(d.feature_names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    d.units.push_back(parse_unit(t.rows[r][0], path, t.lines[r]));
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      d.X(static_cast<Index>(r), static_cast<Index>(c - 1)) =
          parse_number(t.rows[r][c], path, t.lines[r], t.header[c]);
    }
  }
  check_unique(d.units, path);
  return d;
}

Outcomes read_outcomes(const fs::path& path, bool require_y) {
  const Table t = read_table(path);
  int y_col = -1;
  int off_col = -1;
  int split_col = -1;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    if (t.header[c] == "y") y_col = static_cast<int>(c);
    else if (t.header[c] == "offset") off_col = static_cast<int>(c);
    else if (t.header[c] == "split") split_col = static_cast<int>(c);
  }
  if (require_y && y_col < 0) throw DataError(path.string() + ": no `y` column");
  Outcomes o;
  o.has_y = y_col >= 0;
  const auto n = static_cast<Index>(t.rows.size());
  o.y = Vector::Zero(n);
  o.offsets = Vector::Zero(n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    o.units.push_back(parse_unit(t.rows[r][0], path, t.lines[r]));
    if (y_col >= 0) o.y[i] = parse_number(t.rows[r][static_cast<std::size_t>(y_col)], path, t.lines[r], "y");
    if (off_col >= 0) {
      o.offsets[i] = parse_number(t.rows[r][static_cast<std::size_t>(off_col)], path, t.lines[r], "offset");
    }
    if (split_col >= 0) o.split.push_back(t.rows[r][static_cast<std::size_t>(split_col)]);
  }
  check_unique(o.units, path);
  return o;
}

Outcomes align_outcomes(const Outcomes& o, const std::vector<Index>& units, const fs::path& source) {
  std::unordered_map<Index, Index> row;
  for (std::size_t r = 0; r < o.units.size(); ++r) row[o.units[r]] = static_cast<Index>(r);
  Outcomes out;
  out.has_y = o.has_y;
  const auto n = static_cast<Index>(units.size());
  out.y.resize(n);
  out.offsets.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto it = row.find(units[static_cast<std::size_t>(i)]);
    if (it == row.end()) {
      throw DataError(source.string() + ": no outcome row for unit_id " + std::to_string(units[static_cast<std::size_t>(i)]));
    }
    out.units.push_back(units[static_cast<std::size_t>(i)]);
    out.y[i] = o.y[it->second];
    out.offsets[i] = o.offsets[it->second];
    if (!o.split.empty()) out.split.push_back(o.split[static_cast<std::size_t>(it->second)]);
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::string text;
  auto append = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) text += ',';
      text += cells[c];
    }
    text += '\n';
  };
  append(header);
  for (const auto& r : rows) append(r);
  write_text(path, text);
}

void write_json(const fs::path& path, const json& value) { write_text(path, value.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

std::vector<std::pair<std::string, double>> read_key_values(const fs::path& path) {
  const Table t = read_table(path);
  if (t.header.size() != 2) throw DataError(path.string() + ": expected two columns");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.emplace_back(t.rows[r][0], parse_number(t.rows[r][1], path, t.lines[r], t.header[1]));
  }
  return out;
}

}  // namespace glmfunk::cli
