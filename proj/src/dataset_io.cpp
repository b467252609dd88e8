/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rqk/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rqk/errors.hpp"

namespace rqk {

namespace {

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string &s, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char *first = s.data();
  const char *last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty())
    throw ParseError("line " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                     ": not a number: '" + s + "'");
  if (!std::isfinite(v))
    throw ParseError("line " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                     ": value is not finite");
  return v;
}

}  // namespace

Dataset parse_dataset_csv(std::istream &in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (!in && line.empty()) throw ParseError("empty dataset");
  Dataset d;
  d.columns = split(line);
  if (d.columns.size() < 2) throw ParseError("header needs a grid column and at least one function");
  d.axis = d.columns.front();
  if (d.axis != "x" && d.axis != "t")
    throw ParseError("first header column must be 'x' or 't', got '" + d.axis + "'");
  d.columns.erase(d.columns.begin());
  const std::size_t m = d.columns.size();

  std::vector<double> grid;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != m + 1)
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(m + 1) +
                       " fields, found " + std::to_string(cells.size()));
    grid.push_back(parse_number(cells[0], lineno, 0));
    std::vector<double> row(m);
    for (std::size_t c = 0; c < m; ++c) row[c] = parse_number(cells[c + 1], lineno, c + 1);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dataset has no rows");
  try {
    d.grid = Grid(grid);
  } catch (const Error &e) {
    throw ParseError(std::string("invalid grid: ") + e.what());
  }
  d.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(m));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < m; ++c)
      d.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return d;
}

Dataset read_dataset_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_dataset_csv(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

void write_dataset_csv(std::ostream &out, const std::string &axis, const Grid &grid,
                       const Matrix &values, const std::string &prefix) {
  if (values.rows() != static_cast<Index>(grid.size()))
    throw DimensionMismatch("write_dataset_csv: rows must match the grid");
  out << axis;
  for (Index c = 0; c < values.cols(); ++c) out << ',' << prefix << (c + 1);
  out << '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    out << format_double(grid[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < values.cols(); ++c) out << ',' << format_double(values(r, c));
    out << '\n';
  }
}

void write_dataset_csv(const std::string &path, const std::string &axis, const Grid &grid,
                       const Matrix &values, const std::string &prefix) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_dataset_csv(out, axis, grid, values, prefix);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace rqk
