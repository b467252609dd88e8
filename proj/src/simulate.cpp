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

#include "rqk/simulate.hpp"

#include <cmath>
#include <random>

#include "rqk/errors.hpp"
#include "rqk/rqk.hpp"
#include "rqk/two_level.hpp"

namespace rqk {

GaussianDataset simulate_gaussian(const GaussianSimOptions &opts) {
  if (opts.n < 1 || opts.m < 1) throw Error("simulate: n and m must be at least 1");
  if (!(opts.sigma >= 0.0)) throw Error("simulate: sigma must be nonnegative");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = static_cast<Index>(opts.n);
  const Index m = static_cast<Index>(opts.m);

  GaussianDataset d;
  d.grid = Grid::regular(opts.n);
  d.f_true.resize(n);
  for (Index j = 0; j < n; ++j) {
    const double x = d.grid[static_cast<std::size_t>(j)];
    d.f_true[j] = std::sin(12.0 * x) + std::sin(24.0 * x);
  }
  const double wsd = std::sqrt(opts.weight_variance);
  d.weights.resize(m, 2);
  for (Index i = 0; i < m; ++i) {
    d.weights(i, 0) = wsd * normal(rng);
    d.weights(i, 1) = wsd * normal(rng);
  }
  d.g_true.resize(n, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      const double x = d.grid[static_cast<std::size_t>(j)];
      d.g_true(j, i) = d.f_true[j] + d.weights(i, 0) * std::cos(6.0 * x) +
                       d.weights(i, 1) * std::cos(3.0 * x);
    }
  d.y = d.g_true;
  if (opts.sigma > 0.0)
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) d.y(j, i) += opts.sigma * normal(rng);
  return d;
}

PoissonDataset simulate_poisson(const PoissonSimOptions &opts) {
  if (opts.n < 1 || opts.m < 1) throw Error("simulate: n and m must be at least 1");
  if (!(opts.bin_width > 0.0)) throw Error("simulate: bin width must be positive");
  if (opts.theta.size() != 4) throw DimensionMismatch("simulate: expected 4 prior hyperparameters");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = static_cast<Index>(opts.n);
  const Index m = static_cast<Index>(opts.m);

  PoissonDataset d;
  d.grid = Grid::regular(opts.n);
  d.bin_width = opts.bin_width;
  const Hyperparams theta({"log_len_K", "log_var_K", "log_len_A", "log_var_A"}, opts.theta);
  const TwoLevelPrior prior{KernelSpec::matern52(0, 1), KernelSpec::matern52(2, 3), d.grid,
                            kDefaultJitter};

  // f and the deviations d_i drawn separately so the truth for f is known.
  const Matrix kf = prior.K(theta);
  const Matrix ka = prior.A(theta);
  const Eigen::LLT<Matrix> lf(kf);
  const Eigen::LLT<Matrix> la(ka);
  if (lf.info() != Eigen::Success) throw NotPositiveDefinite("K", "simulate");
  if (la.info() != Eigen::Success) throw NotPositiveDefinite("A", "simulate");

  Vector z(n);
  for (Index j = 0; j < n; ++j) z[j] = normal(rng);
  d.f_true = (lf.matrixL() * z).array() + opts.log_rate_baseline;
  d.log_intensity.resize(n, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) z[j] = normal(rng);
    d.log_intensity.col(i) = d.f_true + la.matrixL() * z;
  }
  d.counts.resize(n, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      std::poisson_distribution<long long> pois(opts.bin_width * std::exp(d.log_intensity(j, i)));
      d.counts(j, i) = static_cast<double>(pois(rng));
    }
  return d;
}

}  // namespace rqk
