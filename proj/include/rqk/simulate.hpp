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

// Synthetic datasets for both model families. Every generator is a pure
// function of its options, including the seed.

#include <cstdint>

#include "rqk/kernels.hpp"
#include "rqk/types.hpp"

namespace rqk {

struct GaussianSimOptions {
  std::size_t n = 100;
  std::size_t m = 6;
  double sigma = 1.0;  ///< observation noise sd; 0 gives noiseless data
  double weight_variance = 4.0;
  std::uint64_t seed = 0;
};

/// f(x) = sin(12x) + sin(24x), g_i = f + w_i1 cos(6x) + w_i2 cos(3x),
/// y_ij = g_i(x_j) + eps_ij on the regular grid j / (n + 1).
struct GaussianDataset {
  Grid grid;
  Matrix y;        ///< n x m observations
  Vector f_true;   ///< n
  Matrix g_true;   ///< n x m
  Matrix weights;  ///< m x 2
};

GaussianDataset simulate_gaussian(const GaussianSimOptions &opts);

struct PoissonSimOptions {
  std::size_t n = 100;
  std::size_t m = 10;
  double bin_width = 0.02;
  /// Constant added to every latent function; exp(baseline) is the typical
  /// intensity in events per unit time.
  double log_rate_baseline = 3.5;
  /// (log_len_K, log_var_K, log_len_A, log_var_A) for Matern 5/2 priors.
  Vector theta = (Vector(4) << -1.6, -0.7, -1.6, -1.4).finished();
  std::uint64_t seed = 0;
};

struct PoissonDataset {
  Grid grid;
  Matrix counts;      ///< n x m
  double bin_width = 0.02;
  Vector f_true;      ///< n, shared log intensity (baseline included)
  Matrix log_intensity;  ///< n x m, g_i
};

PoissonDataset simulate_poisson(const PoissonSimOptions &opts);

}  // namespace rqk
