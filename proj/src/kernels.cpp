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

#include "rqk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "rqk/errors.hpp"

namespace rqk {

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error("grid must contain at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i])) throw Error("grid contains a non-finite point");
    if (i > 0 && !(points_[i] > points_[i - 1]))
      throw Error("grid must be strictly increasing");
  }
}

Grid Grid::regular(std::size_t n, double lo, double hi) {
  std::vector<double> pts(n);
  for (std::size_t j = 0; j < n; ++j)
    pts[j] = lo + (hi - lo) * static_cast<double>(j + 1) / static_cast<double>(n + 1);
  return Grid(std::move(pts));
}

Hyperparams::Hyperparams(std::vector<std::string> names, Vector values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (static_cast<Index>(names_.size()) != values_.size())
    throw DimensionMismatch("hyperparameter names and values differ in length");
  if (!values_.allFinite()) throw Error("hyperparameters must be finite");
}

std::size_t Hyperparams::index_of(const std::string &name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error("unknown hyperparameter '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

Hyperparams Hyperparams::with_values(const Vector &values) const {
  return Hyperparams(names_, values);
}

Hyperparams Hyperparams::with(std::size_t i, double value) const {
  Vector v = values_;
  v[static_cast<Index>(i)] = value;
  return Hyperparams(names_, v);
}

double Mask::operator()(double t) const {
  const double r = (t - t0) / s_t;
  return std::exp(-r * r);
}

namespace {

struct KernelEval {
  double value;
  double d_log_length;
  double d_log_variance;
};

KernelEval eval_stationary(KernelFamily family, double log_length, double log_variance,
                           double d) {
  switch (family) {
    case KernelFamily::SquaredExponential: {
      const double s = std::exp(-log_length) * d * d / 2.0;
      const double k = std::exp(-s + log_variance);
      return {k, k * s, k};
    }
    case KernelFamily::Matern52: {
      const double u = std::sqrt(5.0) * d * std::exp(-log_length);
      const double e = std::exp(-u + log_variance);
      const double k = (1.0 + u + u * u / 3.0) * e;
      return {k, e * u * u * (1.0 + u) / 3.0, k};
    }
    case KernelFamily::MaskedSum:
      break;
  }
  throw Error("MaskedSum cannot be a constituent kernel");
}

KernelEval eval_stationary(const StationaryKernel &k, const Hyperparams &theta, double d) {
  return eval_stationary(k.family, theta[k.log_length_index], theta[k.log_variance_index], d);
}

}  // namespace

KernelSpec KernelSpec::matern52(std::size_t log_length_index, std::size_t log_variance_index) {
  KernelSpec s;
  s.family_ = KernelFamily::Matern52;
  s.a_ = {KernelFamily::Matern52, log_length_index, log_variance_index};
  return s;
}

KernelSpec KernelSpec::squared_exponential(std::size_t log_length_index,
                                           std::size_t log_variance_index) {
  KernelSpec s;
  s.family_ = KernelFamily::SquaredExponential;
  s.a_ = {KernelFamily::SquaredExponential, log_length_index, log_variance_index};
  return s;
}

KernelSpec KernelSpec::masked_sum(StationaryKernel a, StationaryKernel b, Mask mask) {
  if (a.family == KernelFamily::MaskedSum || b.family == KernelFamily::MaskedSum)
    throw Error("MaskedSum constituents must be stationary kernels");
  if (!(mask.s_t > 0.0)) throw Error("mask width must be positive");
  KernelSpec s;
  s.family_ = KernelFamily::MaskedSum;
  s.a_ = a;
  s.b_ = b;
  s.mask_ = mask;
  return s;
}

std::vector<std::size_t> KernelSpec::theta_indices() const {
  std::vector<std::size_t> idx{a_.log_length_index, a_.log_variance_index};
  if (b_) {
    idx.push_back(b_->log_length_index);
    idx.push_back(b_->log_variance_index);
  }
  return idx;
}

bool KernelSpec::depends_on(std::size_t j) const {
  const auto idx = theta_indices();
  return std::find(idx.begin(), idx.end(), j) != idx.end();
}

void KernelSpec::check_bound(const Hyperparams &theta) const {
  const auto idx = theta_indices();
  std::set<std::size_t> seen(idx.begin(), idx.end());
  if (seen.size() != idx.size()) throw Error("kernel hyperparameter indices must be distinct");
  for (auto i : idx)
    if (i >= theta.size()) throw Error("kernel hyperparameter index out of range");
}

double kernel_value(const KernelSpec &spec, const Hyperparams &theta, double x, double xp) {
  const double d = std::abs(x - xp);
  double k = eval_stationary(spec.primary(), theta, d).value;
  if (spec.masked())
    k += spec.mask()(x) * spec.mask()(xp) * eval_stationary(*spec.masked(), theta, d).value;
  return k;
}

Matrix build_kernel_matrix(const KernelSpec &spec, const Hyperparams &theta, const Grid &grid,
                           double jitter) {
  if (jitter < 0.0) throw Error("jitter must be non-negative");
  const auto n = static_cast<Index>(grid.size());
  Matrix k(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      const double v = kernel_value(spec, theta, grid[i], grid[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  k.diagonal().array() += jitter * std::exp(theta[spec.primary().log_variance_index]);
  return k;
}

Matrix kernel_matrix_grad(const KernelSpec &spec, const Hyperparams &theta, const Grid &grid,
                          std::size_t j, double jitter) {
  const auto n = static_cast<Index>(grid.size());
  Matrix g = Matrix::Zero(n, n);
  if (!spec.depends_on(j)) return g;

  auto slot_derivative = [j](const StationaryKernel &k, const KernelEval &e) {
    double d = 0.0;
    if (k.log_length_index == j) d += e.d_log_length;
    if (k.log_variance_index == j) d += e.d_log_variance;
    return d;
  };

  for (Index c = 0; c < n; ++c) {
    for (Index r = c; r < n; ++r) {
      const double dist = std::abs(grid[r] - grid[c]);
      double v = slot_derivative(spec.primary(), eval_stationary(spec.primary(), theta, dist));
      if (spec.masked()) {
        const auto &b = *spec.masked();
        v += spec.mask()(grid[r]) * spec.mask()(grid[c]) *
             slot_derivative(b, eval_stationary(b, theta, dist));
      }
      g(r, c) = v;
      g(c, r) = v;
    }
  }
  if (spec.primary().log_variance_index == j)
    g.diagonal().array() += jitter * std::exp(theta[j]);
  return g;
}

}  // namespace rqk
