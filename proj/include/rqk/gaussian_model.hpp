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

// Two-level functional additive model with Gaussian observations:
//   y_ij ~ N(g_ij, sigma^2),  vec(G) ~ N(0, rQK(A, K)),
// so that y ~ N(0, rQK(A + sigma^2 I, K)).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rqk/optim.hpp"
#include "rqk/two_level.hpp"

namespace rqk {

class GaussianModel {
 public:
  /// `data` is n x m, one column per function.
  GaussianModel(TwoLevelPrior prior, Matrix data, std::size_t noise_index);

  /// Matern 5/2 for both kernels with hyperparameter layout
  /// (log_len_K, log_var_K, log_len_A, log_var_A, log_noise).
  static GaussianModel stationary(Grid grid, Matrix data, double jitter = kDefaultJitter);
  static std::vector<std::string> stationary_names();

  const TwoLevelPrior &prior() const { return prior_; }
  const Grid &grid() const { return prior_.grid; }
  const Matrix &data() const { return data_; }
  std::size_t noise_index() const { return noise_index_; }
  Index n() const { return data_.rows(); }
  std::size_t m() const { return static_cast<std::size_t>(data_.cols()); }
  std::size_t param_count() const;

  double noise_variance(const Hyperparams &theta) const;
  /// rQK(A + sigma^2 I, K).
  RqkMatrix marginal_covariance(const Hyperparams &theta) const;

  void check(const Hyperparams &theta) const;

 private:
  TwoLevelPrior prior_;
  Matrix data_;
  std::size_t noise_index_;
};

double marginal_loglik(const GaussianModel &model, const Hyperparams &theta);
Vector marginal_loglik_grad(const GaussianModel &model, const Hyperparams &theta);

struct ValueAndGrad {
  double value = 0.0;
  Vector grad;
};
/// Both of the above from a single factorization.
ValueAndGrad marginal_loglik_with_grad(const GaussianModel &model, const Hyperparams &theta);

/// Gaussian posterior of f or g given y and theta. Covariances are kept in
/// the stable forms K - m K (A' + mK)^{-1} K and sigma^2 I - sigma^4 Sigma'^{-1},
/// which do not invert K or A.
struct ConditionalPosterior {
  enum class Kind { DenseN, Rqk };
  Kind kind = Kind::DenseN;
  Vector mean;
  std::variant<Matrix, RqkMatrix> covariance;
  Vector marginal_sd;  ///< same length as mean
};

ConditionalPosterior posterior_f(const GaussianModel &model, const Hyperparams &theta);
ConditionalPosterior posterior_g(const GaussianModel &model, const Hyperparams &theta);
/// Q_f = K^{-1} + m (A + sigma^2 I)^{-1}.
Matrix posterior_f_precision(const GaussianModel &model, const Hyperparams &theta);
/// Q_g = Sigma^{-1} + sigma^{-2} I as an rQK matrix.
RqkMatrix posterior_g_precision(const GaussianModel &model, const Hyperparams &theta);

/// Log prior density over theta; writes its gradient.
using LogPrior = std::function<double(const Vector &theta, Vector &grad)>;
/// Independent N(mean_j, sd_j^2) on each log-scale hyperparameter.
LogPrior independent_normal_prior(Vector mean, Vector sd);

struct FitOptions {
  LbfgsOptions lbfgs{.tol = 1e-6, .max_iter = 500, .rel_value_tol = 1e-15};
  /// Hyperparameters held at their initial values.
  std::vector<std::size_t> fixed;
};

struct MapFit {
  Hyperparams theta_star;
  /// Covariance of the Gaussian approximation at the mode (zero rows and
  /// columns for fixed hyperparameters).
  Matrix covariance;
  double log_objective = 0.0;  ///< log-likelihood (+ log prior) at theta_star
  Vector gradient;             ///< of the objective at theta_star
  OptimResult optim;
};

/// Maximizes marginal_loglik (+ prior) with L-BFGS. The Gaussian-approximation
/// covariance comes from central differences of the analytic gradient with
/// step 1e-4 * max(1, |theta_j|). Throws OptimizerDiverged when the objective
/// is not finite at `init`.
MapFit fit_map(const GaussianModel &model, const Hyperparams &init,
               const std::optional<LogPrior> &prior = std::nullopt, const FitOptions &opts = {});

/// Negative inverse of a finite-difference Hessian built from `grad`, with
/// eigenvalues of the negated Hessian clamped to keep the result SPD.
Matrix laplace_covariance(const std::function<Vector(const Vector &)> &grad, const Vector &x,
                          const std::vector<std::size_t> &fixed);

struct PosteriorSamples {
  std::vector<Hyperparams> thetas;
  std::vector<double> log_posts;
  double acceptance_rate = 0.0;  ///< accepted / proposed, burn-in included
  std::size_t accepted = 0;
  std::size_t proposed = 0;
};

struct MhOptions {
  std::size_t n_samples = 1000;
  std::size_t n_burn = 200;
  std::uint64_t seed = 0;
};

/// Random-walk Metropolis-Hastings with Gaussian proposals of covariance
/// (2.38^2 / dim) * proposal_cov. Non-finite target values are rejected.
PosteriorSamples metropolis_hastings(const std::function<double(const Vector &)> &log_target,
                                     const Hyperparams &init, const Matrix &proposal_cov,
                                     const MhOptions &opts);

/// MH over log p(y | theta) + log p(theta).
PosteriorSamples mh_sample(const GaussianModel &model, const Hyperparams &theta_star,
                           const Matrix &proposal_cov, const MhOptions &opts,
                           const std::optional<LogPrior> &prior = std::nullopt);

struct ConfidenceBand {
  Vector lower;
  Vector upper;
  double alpha = 0.05;
};

/// Pointwise band from an equal-weight Gaussian mixture: inverts the mixture
/// CDF at alpha/2 and 1 - alpha/2 by bisection. Throws EmptyMixture (Error)
/// for empty input.
ConfidenceBand confidence_band(const std::vector<Vector> &means, const std::vector<Vector> &sds,
                               double alpha);

}  // namespace rqk
