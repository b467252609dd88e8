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

#pragma once

// Plain CSV for datasets: first column is the strictly increasing grid
// (header `x` or `t`), the remaining columns are one function each.

#include <iosfwd>
#include <string>
#include <vector>

#include "rqk/types.hpp"

namespace rqk {

struct Dataset {
  std::string axis;  ///< "x" (observations) or "t" (counts)
  Grid grid;
  Matrix values;     ///< n x m
  std::vector<std::string> columns;
};

/// Throws ParseError on malformed, ragged or non-finite input and on grids
/// that are not strictly increasing.
Dataset parse_dataset_csv(std::istream &in);
/// Throws IoError when the file cannot be opened.
Dataset read_dataset_csv(const std::string &path);

/// Columns are named prefix1..prefixm.
void write_dataset_csv(std::ostream &out, const std::string &axis, const Grid &grid,
                       const Matrix &values, const std::string &prefix);
void write_dataset_csv(const std::string &path, const std::string &axis, const Grid &grid,
                       const Matrix &values, const std::string &prefix);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace rqk
