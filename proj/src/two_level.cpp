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

#include "rqk/two_level.hpp"

#include <algorithm>

namespace rqk {

std::size_t TwoLevelPrior::kernel_param_count() const {
  std::size_t count = 0;
  for (auto i : kernel_f.theta_indices()) count = std::max(count, i + 1);
  for (auto i : kernel_d.theta_indices()) count = std::max(count, i + 1);
  return count;
}

Matrix TwoLevelPrior::K(const Hyperparams &theta) const {
  return build_kernel_matrix(kernel_f, theta, grid, jitter);
}

Matrix TwoLevelPrior::A(const Hyperparams &theta) const {
  return build_kernel_matrix(kernel_d, theta, grid, jitter);
}

RqkMatrix TwoLevelPrior::covariance(const Hyperparams &theta, std::size_t m) const {
  return RqkMatrix(A(theta), K(theta), m);
}

RqkDerivative TwoLevelPrior::derivative(const Hyperparams &theta, std::size_t j) const {
  return {kernel_matrix_grad(kernel_d, theta, grid, j, jitter),
          kernel_matrix_grad(kernel_f, theta, grid, j, jitter)};
}

Vector gaussian_logdensity_grad(const RqkFactor &f, const Matrix &alpha,
                                const std::vector<RqkDerivative> &derivs) {
  const Index n = f.n();
  const double md = static_cast<double>(f.m());
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix head_inv = f.U().solve_full(eye);
  const Matrix a_inv = f.V().solve_full(eye);
  const Matrix outer = alpha * alpha.transpose();
  const Vector s = alpha.rowwise().sum();

  Vector grad = Vector::Zero(static_cast<Index>(derivs.size()));
  for (std::size_t j = 0; j < derivs.size(); ++j) {
    const auto &d = derivs[j];
    if (d.is_zero()) continue;
    const double quad = (d.dA.cwiseProduct(outer)).sum() + s.dot(d.dK * s);
    const double trace = (head_inv.cwiseProduct(d.dA + md * d.dK)).sum() +
                         (md - 1.0) * (a_inv.cwiseProduct(d.dA)).sum();
    grad[static_cast<Index>(j)] = 0.5 * (quad - trace);
  }
  return grad;
}

}  // namespace rqk
