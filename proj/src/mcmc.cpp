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

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "rqk/errors.hpp"
#include "rqk/gaussian_model.hpp"

namespace rqk {

PosteriorSamples metropolis_hastings(const std::function<double(const Vector &)> &log_target,
                                     const Hyperparams &init, const Matrix &proposal_cov,
                                     const MhOptions &opts) {
  const Index dim = static_cast<Index>(init.size());
  if (proposal_cov.rows() != dim || proposal_cov.cols() != dim)
    throw DimensionMismatch("proposal covariance must be dim x dim");

  // Symmetric square root; zero-variance directions (fixed parameters) stay put.
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (proposal_cov + proposal_cov.transpose()));
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  Index active = 0;
  const double top = lam.size() ? lam.maxCoeff() : 0.0;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam[i] > 1e-14 * top) ++active;
  if (active == 0) active = 1;
  const double scale = 2.38 / std::sqrt(static_cast<double>(active));
  const Matrix root = scale * es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Vector current = init.values();
  double current_lp = log_target(current);
  if (!std::isfinite(current_lp)) throw Error("MH: target is not finite at the initial point");

  PosteriorSamples out;
  out.thetas.reserve(opts.n_samples);
  out.log_posts.reserve(opts.n_samples);
  const std::size_t total = opts.n_burn + opts.n_samples;
  Vector eps(dim);
  for (std::size_t it = 0; it < total; ++it) {
    for (Index i = 0; i < dim; ++i) eps[i] = normal(rng);
    const Vector proposal = current + root * eps;
    const double lp = log_target(proposal);
    const double u = uniform(rng);
    ++out.proposed;
    if (std::isfinite(lp) && std::log(u) < lp - current_lp) {
      current = proposal;
      current_lp = lp;
      ++out.accepted;
    }
    if (it >= opts.n_burn) {
      out.thetas.push_back(init.with_values(current));
      out.log_posts.push_back(current_lp);
    }
  }
  out.acceptance_rate =
      out.proposed ? static_cast<double>(out.accepted) / static_cast<double>(out.proposed) : 0.0;
  return out;
}

PosteriorSamples mh_sample(const GaussianModel &model, const Hyperparams &theta_star,
                           const Matrix &proposal_cov, const MhOptions &opts,
                           const std::optional<LogPrior> &prior) {
  model.check(theta_star);
  auto target = [&](const Vector &theta) {
    if (!theta.allFinite()) return -std::numeric_limits<double>::infinity();
    try {
      double lp = marginal_loglik(model, theta_star.with_values(theta));
      if (prior) {
        Vector g;
        lp += (*prior)(theta, g);
      }
      return lp;
    } catch (const NotPositiveDefinite &) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  return metropolis_hastings(target, theta_star, proposal_cov, opts);
}

}  // namespace rqk
