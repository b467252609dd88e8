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

// Poisson latent Gaussian model over the two-level prior:
//   x = vec(G) ~ N(0, Sigma),  Sigma = rQK(A, K),
//   y_ij ~ Poi(delta * exp(x_ij)).
// The negative Hessian of the log-posterior, W + Sigma^{-1}, is quasi-Kronecker
// with blocks W_i + A^{-1} and low-rank part ee^t (x) ((A + mK)^{-1} - A^{-1}) / m.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rqk/optim.hpp"
#include "rqk/two_level.hpp"

namespace rqk {

/// Observation model of a latent-field model. Poisson is the real use case;
/// Gaussian (known noise variance) exists so Laplace exactness can be tested.
enum class ObservationModel { Poisson, Gaussian };

/// Latent values above this are clamped before exponentiation.
inline constexpr double kLatentClamp = 30.0;

struct LikelihoodTerms {
  double loglik = 0.0;
  Vector grad;           ///< d loglik / dx
  Vector neg_hess_diag;  ///< W = -d^2 loglik / dx^2
  Vector third_diag;     ///< d^3 loglik / dx^3
  bool clamped = false;
};

class PoissonModel {
 public:
  /// `counts` is n x m of nonnegative integers; `bin_width` is delta > 0.
  PoissonModel(TwoLevelPrior prior, Matrix counts, double bin_width);

  /// Matern 5/2 for K and A; layout (log_len_K, log_var_K, log_len_A, log_var_A).
  static PoissonModel stationary(Grid grid, Matrix counts, double bin_width,
                                 double jitter = kDefaultJitter);
  static std::vector<std::string> stationary_names();

  /// K from a MaskedSum of two Matern 5/2 kernels; layout
  /// (log_len_a, log_var_a, log_len_b, log_var_b, log_len_A, log_var_A).
  static PoissonModel nonstationary(Grid grid, Matrix counts, double bin_width, Mask mask = {},
                                    double jitter = kDefaultJitter);
  static std::vector<std::string> nonstationary_names();

  /// Gaussian observations y_ij ~ N(x_ij, noise_variance) over the same prior.
  static PoissonModel gaussian_hook(TwoLevelPrior prior, Matrix y, double noise_variance);

  const TwoLevelPrior &prior() const { return prior_; }
  const Grid &grid() const { return prior_.grid; }
  const Matrix &data() const { return data_; }
  double bin_width() const { return bin_width_; }
  ObservationModel observation() const { return observation_; }
  double noise_variance() const { return noise_variance_; }
  Index n() const { return data_.rows(); }
  std::size_t m() const { return static_cast<std::size_t>(data_.cols()); }
  Index dim() const { return data_.size(); }
  std::size_t param_count() const { return prior_.kernel_param_count(); }
  void check(const Hyperparams &theta) const;

  /// Moment-matched starting point log((Y + 0.5) / delta) (Y itself for the
  /// Gaussian hook).
  Vector initial_latent() const;

 private:
  PoissonModel() = default;
  TwoLevelPrior prior_;
  Matrix data_;
  double bin_width_ = 1.0;
  ObservationModel observation_ = ObservationModel::Poisson;
  double noise_variance_ = 1.0;
};

LikelihoodTerms poisson_terms(const PoissonModel &model, const Vector &x);

/// Sigma^{-1} = rQK(A^{-1}, K') built from the Cholesky factor of Sigma.
RqkMatrix prior_precision(const RqkFactor &f);

/// Negative Hessian W + Sigma^{-1} as a QK matrix.
QkMatrix negative_hessian(const RqkMatrix &precision, const Vector &w);

struct ModeResult {
  Vector x_star;
  double logpost_at_mode = 0.0;
  QkMatrix hessian;  ///< negative Hessian at x_star
  int iterations = 0;
  double grad_norm = 0.0;
  bool clamped = false;
};

struct ModeOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

/// Newton iterations x <- x + t H^{-1} grad with QK solves and step halving.
/// Throws MaxIterExceeded, NonConcave.
ModeResult find_mode_newton(const PoissonModel &model, const Hyperparams &theta,
                            const Vector &x0, const ModeOptions &opts = {});

struct QnModeOptions {
  double tol = 1e-9;  ///< on the whitened-gradient infinity norm
  int max_iter = 2000;
  bool precondition = true;
};

struct QnModeResult {
  ModeResult mode;
  OptimResult optim;
};

/// L-BFGS over whitened coordinates z with x = G^t z, optionally preconditioned
/// by diag(d0) from precondition_diag at x0. Throws OptimizerDiverged.
QnModeResult find_mode_qn(const PoissonModel &model, const Hyperparams &theta, const Vector &x0,
                          const QnModeOptions &opts = {});

/// Diagonal of the whitened negative Hessian I + G diag(w) G^t (x = G^t z),
/// computed as 1 + (T_k o T_k) [W (B o B)]_k per column with T_1 = U, T_k = V.
Vector precondition_diag(const RqkFactor &f, const Vector &w);

/// Unnormalized log posterior log p(y | x) + log N(x; 0, Sigma).
double log_posterior(const PoissonModel &model, const RqkFactor &prior_factor, const Vector &x);

struct LaplaceValue {
  double value = 0.0;
  ModeResult mode;
};

/// Exact evaluates tr(H^{-1} dH) from the diagonal inverse blocks, O(mn^3).
/// Hutchinson uses seeded Rademacher probes. Auto picks Exact for mn <= 2000.
enum class TraceMethod { Exact, Hutchinson, Auto };
inline constexpr Index kExactTraceCutoff = 2000;

struct LaplaceOptions {
  ModeOptions mode{};
  TraceMethod trace = TraceMethod::Exact;
  int hutchinson_probes = 64;
  std::uint64_t hutchinson_seed = 0;
};

/// log p(y | theta) ~= f(x*) + (mn/2) log(2 pi) - 0.5 log det(W + Sigma^{-1}).
LaplaceValue laplace(const PoissonModel &model, const Hyperparams &theta,
                     const std::optional<Vector> &x0 = std::nullopt,
                     const LaplaceOptions &opts = {});

struct LaplaceGradient {
  double value = 0.0;
  Vector grad;
  ModeResult mode;
  TraceMethod trace = TraceMethod::Exact;
};

/// Value and gradient of the Laplace approximation via the implicit mode
/// derivative dx*/dtheta_j = H^{-1} G_j x*, G_j = Sigma^{-1} dSigma_j Sigma^{-1}.
LaplaceGradient laplace_with_grad(const PoissonModel &model, const Hyperparams &theta,
                                  const std::optional<Vector> &x0 = std::nullopt,
                                  const LaplaceOptions &opts = {});
Vector laplace_grad(const PoissonModel &model, const Hyperparams &theta,
                    const LaplaceOptions &opts = {});

struct LaplaceFitOptions {
  LbfgsOptions lbfgs{.tol = 1e-4, .max_iter = 300, .rel_value_tol = 1e-12};
  LaplaceOptions laplace{};
  std::vector<std::size_t> fixed;
};

struct LaplaceFit {
  Hyperparams theta_star;
  double value = 0.0;
  Vector gradient;
  ModeResult mode;
  OptimResult optim;
};

/// Maximizes the Laplace approximation over theta, warm-starting every mode
/// search from the previous mode.
LaplaceFit fit_laplace_map(const PoissonModel &model, const Hyperparams &init,
                           const LaplaceFitOptions &opts = {});

}  // namespace rqk
