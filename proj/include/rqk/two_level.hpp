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

// Prior shared by both model families: f ~ GP(0, k_f), g_i | f ~ GP(f, k_d),
// so that vec(G) ~ N(0, rQK(A, K)) with K from k_f and A from k_d.

#include <optional>
#include <vector>

#include "rqk/kernels.hpp"
#include "rqk/rqk.hpp"

namespace rqk {

/// Derivative of an rQK matrix with respect to one hyperparameter; it is
/// itself rQK(dA, dK).
struct RqkDerivative {
  Matrix dA;
  Matrix dK;
  bool is_zero() const { return dA.isZero(0.0) && dK.isZero(0.0); }
};

struct TwoLevelPrior {
  KernelSpec kernel_f;  ///< builds K (shared mean function)
  KernelSpec kernel_d;  ///< builds A (individual deviations)
  Grid grid;
  double jitter = kDefaultJitter;

  /// Number of hyperparameter slots read by the two kernels.
  std::size_t kernel_param_count() const;

  Matrix K(const Hyperparams &theta) const;
  Matrix A(const Hyperparams &theta) const;
  RqkMatrix covariance(const Hyperparams &theta, std::size_t m) const;
  RqkDerivative derivative(const Hyperparams &theta, std::size_t j) const;
};

/// Gradient of log N(x; 0, Sigma) for Sigma factored as `f`, one entry per
/// derivative: 0.5 * (a^t dSigma a - tr(Sigma^{-1} dSigma)) with a = Sigma^{-1} x.
/// The trace uses tr((A + mK)^{-1}(dA + m dK)) + (m - 1) tr(A^{-1} dA).
/// `alpha` is Sigma^{-1} x reshaped to n x m.
Vector gaussian_logdensity_grad(const RqkFactor &f, const Matrix &alpha,
                                const std::vector<RqkDerivative> &derivs);

}  // namespace rqk
