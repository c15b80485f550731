#pragma once

// Density and grid-function files.
//
// JSON:  {"grid_x": {"min": a, "max": b, "n": k}, "grid_y": {...}, "values": [...]}
//        grid_y is omitted for 1D densities; values is row-major (x outer),
//        flat or nested. A grid may instead be given as {"edges": [...]}.
// CSV:   optional "# grid_x=min,max,n grid_y=min,max,n" comment, then a header
//        row "x\y,<y centers...>", then one row per x cell: "<x center>,<values...>".
//
// Reading a density floors and renormalizes it; reading a grid function does not.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"

namespace planar_mk {

/// Values on a grid as read from disk, before any density validation.
struct RawGrid
{
  Grid1D grid_x;
  std::optional<Grid1D> grid_y;
  GridField values;  ///< ny == 1 for 1D files
};

namespace detail {

inline Grid1D parse_grid_spec(const nlohmann::json& g, const char* name)
{
  if (!g.is_object())
    throw ParseError(std::string(name) + " must be an object");
  if (g.contains("edges")) {
    if (!g["edges"].is_array())
      throw ParseError(std::string(name) + ".edges must be an array");
    return Grid1D(g["edges"].get<std::vector<double>>());
  }
  for (const char* key : {"min", "max", "n"}) {
    if (!g.contains(key))
      throw ParseError(std::string(name) + " is missing \"" + key + "\"");
  }
  if (!g["n"].is_number_integer() || g["n"].get<long long>() < 1)
    throw ParseError(std::string(name) + ".n must be a positive integer");
  return Grid1D::uniform(g["min"].get<double>(), g["max"].get<double>(), g["n"].get<std::size_t>());
}

inline void flatten_values(const nlohmann::json& v, std::vector<double>& out)
{
  if (v.is_array()) {
    for (const auto& e : v)
      flatten_values(e, out);
  } else if (v.is_number()) {
    out.push_back(v.get<double>());
  } else {
    throw ParseError("values must contain only numbers");
  }
}

inline std::string format_double(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    cells.push_back(cell);
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

inline double parse_number(const std::string& s)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: \"" + s + "\"");
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\r' || s[used] == '\t'))
    ++used;
  if (used != s.size())
    throw ParseError("trailing characters in number: \"" + s + "\"");
  return v;
}

inline Grid1D grid_from_centers(const std::vector<double>& centers)
{
  if (centers.size() < 2)
    throw ParseError("CSV grid with a single cell needs a '# grid_x=... grid_y=...' comment");
  const double w = (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1);
  return Grid1D::uniform(centers.front() - 0.5 * w, centers.back() + 0.5 * w, centers.size());
}

inline std::optional<Grid1D> parse_comment_grid(const std::string& comment, const std::string& key)
{
  auto pos = comment.find(key + "=");
  if (pos == std::string::npos)
    return std::nullopt;
  std::istringstream ss(comment.substr(pos + key.size() + 1));
  std::string token;
  ss >> token;
  auto parts = split_csv_line(token);
  if (parts.size() != 3)
    throw ParseError("malformed " + key + " comment");
  return Grid1D::uniform(parse_number(parts[0]), parse_number(parts[1]),
                         static_cast<std::size_t>(parse_number(parts[2])));
}

} // namespace detail

inline RawGrid parse_grid_json(const nlohmann::json& doc)
{
  if (!doc.is_object())
    throw ParseError("density file must be a JSON object");
  if (!doc.contains("grid_x"))
    throw ParseError("density file is missing \"grid_x\"");
  if (!doc.contains("values"))
    throw ParseError("density file is missing \"values\"");
  Grid1D gx = detail::parse_grid_spec(doc["grid_x"], "grid_x");
  std::optional<Grid1D> gy;
  if (doc.contains("grid_y") && !doc["grid_y"].is_null())
    gy = detail::parse_grid_spec(doc["grid_y"], "grid_y");
  std::vector<double> flat;
  detail::flatten_values(doc["values"], flat);
  const std::size_t ny = gy ? gy->cells() : 1;
  if (flat.size() != gx.cells() * ny)
    throw ParseError("values has " + std::to_string(flat.size()) + " entries, expected " +
                     std::to_string(gx.cells() * ny));
  GridField f(gx.cells(), ny, std::move(flat));
  return RawGrid{std::move(gx), std::move(gy), std::move(f)};
}

inline RawGrid parse_grid_csv(std::istream& in)
{
  std::string line;
  std::optional<Grid1D> gx;
  std::optional<Grid1D> gy;
  std::vector<double> y_centers;
  bool have_header = false;
  std::vector<double> x_centers;
  std::vector<double> values;
  std::size_t ncols = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      if (auto g = detail::parse_comment_grid(line, "grid_x"))
        gx = std::move(g);
      if (auto g = detail::parse_comment_grid(line, "grid_y"))
        gy = std::move(g);
      continue;
    }
    auto cells = detail::split_csv_line(line);
    if (!have_header) {
      if (cells.size() < 2)
        throw ParseError("CSV header needs a label and at least one y node");
      for (std::size_t k = 1; k < cells.size(); ++k)
        y_centers.push_back(detail::parse_number(cells[k]));
      ncols = y_centers.size();
      have_header = true;
      continue;
    }
    if (cells.size() != ncols + 1)
      throw ParseError("CSV row has " + std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(ncols + 1));
    x_centers.push_back(detail::parse_number(cells[0]));
    for (std::size_t k = 1; k < cells.size(); ++k)
      values.push_back(detail::parse_number(cells[k]));
  }
  if (!have_header || x_centers.empty())
    throw ParseError("CSV grid has no data rows");
  if (!gx)
    gx = detail::grid_from_centers(x_centers);
  if (!gy)
    gy = detail::grid_from_centers(y_centers);
  if (gx->cells() != x_centers.size() || gy->cells() != ncols)
    throw ParseError("CSV grid comment does not match the data shape");
  GridField f(x_centers.size(), ncols, std::move(values));
  return RawGrid{std::move(*gx), std::move(*gy), std::move(f)};
}

inline RawGrid read_grid_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ": JSON parse error: " + e.what());
    }
    return parse_grid_json(doc);
  }
  std::istringstream ss(text);
  return parse_grid_csv(ss);
}

inline DiscreteDensity2D read_density_2d(const std::string& path)
{
  RawGrid raw = read_grid_file(path);
  if (!raw.grid_y)
    throw ParseError(path + ": expected a 2D density (grid_y missing)");
  return DiscreteDensity2D::normalized(std::move(raw.grid_x), std::move(*raw.grid_y), std::move(raw.values));
}

inline DiscreteDensity1D read_density_1d(const std::string& path)
{
  RawGrid raw = read_grid_file(path);
  if (raw.grid_y && raw.values.ny() != 1)
    throw ParseError(path + ": expected a 1D density");
  auto v = std::vector<double>(raw.values.values().begin(), raw.values.values().end());
  return DiscreteDensity1D::normalized(std::move(raw.grid_x), std::move(v));
}

inline void write_grid_csv(std::ostream& out, const Grid1D& gx, const Grid1D& gy, const GridField& values)
{
  using detail::format_double;
  if (gx.is_uniform() && gy.is_uniform()) {
    out << "# grid_x=" << format_double(gx.lower()) << ',' << format_double(gx.upper()) << ',' << gx.cells()
        << " grid_y=" << format_double(gy.lower()) << ',' << format_double(gy.upper()) << ',' << gy.cells()
        << '\n';
  }
  out << "x\\y";
  for (std::size_t j = 0; j < gy.cells(); ++j)
    out << ',' << format_double(gy.center(j));
  out << '\n';
  for (std::size_t i = 0; i < gx.cells(); ++i) {
    out << format_double(gx.center(i));
    for (std::size_t j = 0; j < gy.cells(); ++j)
      out << ',' << format_double(values(i, j));
    out << '\n';
  }
}

inline void write_grid_csv(const std::string& path, const Grid1D& gx, const Grid1D& gy, const GridField& values)
{
  std::ofstream out(path);
  if (!out)
    throw ParseError("cannot write " + path);
  write_grid_csv(out, gx, gy, values);
}

inline nlohmann::json grid_to_json(const Grid1D& g)
{
  if (g.is_uniform())
    return {{"min", g.lower()}, {"max", g.upper()}, {"n", g.cells()}};
  return {{"edges", std::vector<double>(g.edges().begin(), g.edges().end())}};
}

inline nlohmann::json density_to_json(const DiscreteDensity2D& d)
{
  return {{"grid_x", grid_to_json(d.grid_x())},
          {"grid_y", grid_to_json(d.grid_y())},
          {"values", std::vector<double>(d.values().values().begin(), d.values().values().end())}};
}

} // namespace planar_mk
