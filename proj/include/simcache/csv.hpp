#pragma once

#include "simcache/errors.hpp"
#include "simcache/popularity.hpp"
#include "simcache/space.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace simcache::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parses a number; "inf" / "infinity" (any case, optional sign) are accepted.
inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  std::string lower(s);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "inf" || lower == "+inf" || lower == "infinity") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline double to_double(std::string_view s, std::size_t line) {
  double v;
  if (!parse_double(s, v)) throw ConfigError("line " + std::to_string(line) + ": not a number: '" + std::string(s) + "'");
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

/// Square cost matrix, one row per object.
inline FiniteSpace read_matrix(std::istream& in) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto fields = split(line);
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols) throw ConfigError("line " + std::to_string(lineno) + ": ragged cost matrix row");
    for (auto f : fields) values.push_back(to_double(f, lineno));
    ++rows;
  }
  if (rows != cols) throw ConfigError("cost matrix is " + std::to_string(rows) + "x" + std::to_string(cols));
  try {
    return FiniteSpace(rows, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline FiniteSpace read_matrix(const std::string& path) {
  auto in = open_in(path);
  return read_matrix(in);
}

/// `object_id,rate` rows; a non-numeric first line is taken as a header.
inline PopularityField read_rates(std::istream& in, std::size_t catalog) {
  std::vector<PopularityField::Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line);
    double id, rate;
    if (f.size() < 2 || !parse_double(f[0], id)) {
      if (lineno == 1) continue;
      throw ConfigError("line " + std::to_string(lineno) + ": expected object_id,rate");
    }
    rate = to_double(f[1], lineno);
    if (id < 0 || id != std::floor(id)) throw ConfigError("line " + std::to_string(lineno) + ": bad object id");
    entries.emplace_back(static_cast<ObjectId>(id), rate);
  }
  try {
    return PopularityField::sparse(catalog, std::move(entries));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

inline PopularityField read_rates(const std::string& path, std::size_t catalog) {
  auto in = open_in(path);
  return read_rates(in, catalog);
}

/// Rate field laid out as an L x L grid of numbers (row-major object ids).
inline std::vector<double> read_grid(std::istream& in) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line);
    if (cols == 0) cols = f.size();
    if (f.size() != cols) throw ConfigError("line " + std::to_string(lineno) + ": ragged grid row");
    for (auto v : f) values.push_back(to_double(v, lineno));
    ++rows;
  }
  if (rows != cols) throw ConfigError("rate grid must be square");
  return values;
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace simcache::csv
