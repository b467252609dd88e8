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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rqk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Strictly increasing 1-D sampling grid shared by all functions.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<double> points);

  /// Regular grid of n interior points of (lo, hi): lo + (hi-lo)*j/(n+1).
  static Grid regular(std::size_t n, double lo = 0.0, double hi = 1.0);

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> points() const { return points_; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }

 private:
  std::vector<double> points_;
};

/// Named log-scale hyperparameter vector.
class Hyperparams {
 public:
  Hyperparams() = default;
  Hyperparams(std::vector<std::string> names, Vector values);

  std::size_t size() const { return names_.size(); }
  const Vector &values() const { return values_; }
  const std::vector<std::string> &names() const { return names_; }
  double operator[](std::size_t i) const { return values_[static_cast<Index>(i)]; }

  /// Position of `name`; throws Error if absent.
  std::size_t index_of(const std::string &name) const;

  Hyperparams with_values(const Vector &values) const;
  Hyperparams with(std::size_t i, double value) const;

 private:
  std::vector<std::string> names_;
  Vector values_;
};

/// Column-major reshape helpers between vec(X) and the n x m matrix X.
inline Eigen::Map<const Matrix> as_matrix(const Vector &v, Index n, Index m) {
  return Eigen::Map<const Matrix>(v.data(), n, m);
}
inline Vector vec(const Matrix &x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

}  // namespace rqk
