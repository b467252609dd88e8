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

#include <optional>
#include <vector>

#include "rqk/types.hpp"

namespace rqk {

enum class KernelFamily { SquaredExponential, Matern52, MaskedSum };

/// A stationary kernel bound to two hyperparameter slots:
/// log length-scale and log marginal variance.
struct StationaryKernel {
  KernelFamily family = KernelFamily::Matern52;
  std::size_t log_length_index = 0;
  std::size_t log_variance_index = 1;
};

/// Gaussian bump m(t) = exp(-(t - t0)^2 / s_t^2) gating the second kernel of a
/// MaskedSum. Both values are in grid units and are not hyperparameters.
struct Mask {
  double t0 = 0.3;
  double s_t = 0.2;
  double operator()(double t) const;
};

class KernelSpec {
 public:
  static KernelSpec matern52(std::size_t log_length_index, std::size_t log_variance_index);
  static KernelSpec squared_exponential(std::size_t log_length_index,
                                        std::size_t log_variance_index);
  /// k(x, x') = k_a(x, x') + m(x) m(x') k_b(x, x').
  static KernelSpec masked_sum(StationaryKernel a, StationaryKernel b, Mask mask = {});

  KernelFamily family() const { return family_; }
  const StationaryKernel &primary() const { return a_; }
  const std::optional<StationaryKernel> &masked() const { return b_; }
  const Mask &mask() const { return mask_; }

  /// Every hyperparameter slot this kernel reads.
  std::vector<std::size_t> theta_indices() const;
  bool depends_on(std::size_t j) const;

  /// Throws Error if indices collide or exceed `theta.size()`.
  void check_bound(const Hyperparams &theta) const;

 private:
  KernelFamily family_ = KernelFamily::Matern52;
  StationaryKernel a_{};
  std::optional<StationaryKernel> b_;
  Mask mask_{};
};

inline constexpr double kDefaultJitter = 1e-8;

double kernel_value(const KernelSpec &spec, const Hyperparams &theta, double x, double xp);

/// K_ij = k(x_i, x_j) + jitter * exp(theta2) * [i == j]; theta2 is the log
/// variance of the primary kernel.
Matrix build_kernel_matrix(const KernelSpec &spec, const Hyperparams &theta, const Grid &grid,
                           double jitter = kDefaultJitter);

/// Entrywise derivative of build_kernel_matrix with respect to theta[j]
/// (zero matrix when the kernel does not read slot j).
Matrix kernel_matrix_grad(const KernelSpec &spec, const Hyperparams &theta, const Grid &grid,
                          std::size_t j, double jitter = kDefaultJitter);

}  // namespace rqk
