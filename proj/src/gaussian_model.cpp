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

#include "rqk/gaussian_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rqk/errors.hpp"

namespace rqk {

GaussianModel::GaussianModel(TwoLevelPrior prior, Matrix data, std::size_t noise_index)
    : prior_(std::move(prior)), data_(std::move(data)), noise_index_(noise_index) {
  if (data_.rows() != static_cast<Index>(prior_.grid.size()))
    throw DimensionMismatch("data rows must match the grid length");
  if (data_.cols() < 1) throw DimensionMismatch("data needs at least one function");
  if (!data_.allFinite()) throw Error("data must be finite");
  if (prior_.kernel_f.depends_on(noise_index_) || prior_.kernel_d.depends_on(noise_index_))
    throw Error("noise hyperparameter slot collides with a kernel slot");
}

GaussianModel GaussianModel::stationary(Grid grid, Matrix data, double jitter) {
  TwoLevelPrior prior{KernelSpec::matern52(0, 1), KernelSpec::matern52(2, 3), std::move(grid),
                      jitter};
  return GaussianModel(std::move(prior), std::move(data), 4);
}

std::vector<std::string> GaussianModel::stationary_names() {
  return {"log_len_K", "log_var_K", "log_len_A", "log_var_A", "log_noise"};
}

std::size_t GaussianModel::param_count() const {
  return std::max(prior_.kernel_param_count(), noise_index_ + 1);
}

void GaussianModel::check(const Hyperparams &theta) const {
  if (theta.size() != param_count())
    throw DimensionMismatch("expected " + std::to_string(param_count()) + " hyperparameters");
}

double GaussianModel::noise_variance(const Hyperparams &theta) const {
  return std::exp(theta[noise_index_]);
}

RqkMatrix GaussianModel::marginal_covariance(const Hyperparams &theta) const {
  check(theta);
  Matrix a = prior_.A(theta);
  a.diagonal().array() += noise_variance(theta);
  return RqkMatrix(std::move(a), prior_.K(theta), m());
}

double marginal_loglik(const GaussianModel &model, const Hyperparams &theta) {
  const RqkFactor f = rqk_factor(model.marginal_covariance(theta));
  return rqk_logdensity(f, vec(model.data()));
}

ValueAndGrad marginal_loglik_with_grad(const GaussianModel &model, const Hyperparams &theta) {
  const RqkFactor f = rqk_factor(model.marginal_covariance(theta));
  ValueAndGrad out;
  out.value = rqk_logdensity(f, vec(model.data()));

  const Matrix alpha = rqk_solve_columns(f, model.data());
  std::vector<RqkDerivative> derivs;
  derivs.reserve(theta.size());
  const Index n = model.n();
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (j == model.noise_index()) {
      derivs.push_back({model.noise_variance(theta) * Matrix::Identity(n, n), Matrix::Zero(n, n)});
    } else {
      derivs.push_back(model.prior().derivative(theta, j));
    }
  }
  out.grad = gaussian_logdensity_grad(f, alpha, derivs);
  return out;
}

Vector marginal_loglik_grad(const GaussianModel &model, const Hyperparams &theta) {
  return marginal_loglik_with_grad(model, theta).grad;
}

ConditionalPosterior posterior_f(const GaussianModel &model, const Hyperparams &theta) {
  const RqkMatrix sigma = model.marginal_covariance(theta);
  const double md = static_cast<double>(model.m());
  SquareRoot head;
  try {
    head = SquareRoot::factor(sigma.A() + md * sigma.K(), FactorMethod::Cholesky, "A'+mK");
  } catch (const NotPositiveDefinite &e) {
    throw SingularMatrix(e.what());
  }
  const Matrix &k = sigma.K();
  ConditionalPosterior post;
  post.kind = ConditionalPosterior::Kind::DenseN;
  post.mean = k * head.solve_full(model.data().rowwise().sum());
  Matrix cov = k - md * (k * head.solve_full(k));
  cov = 0.5 * (cov + cov.transpose());
  post.marginal_sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  post.covariance = std::move(cov);
  return post;
}

ConditionalPosterior posterior_g(const GaussianModel &model, const Hyperparams &theta) {
  const RqkMatrix sigma = model.marginal_covariance(theta);
  RqkFactor f = [&] {
    try {
      return rqk_factor(sigma);
    } catch (const NotPositiveDefinite &e) {
      throw SingularMatrix(e.what());
    }
  }();
  const double s2 = model.noise_variance(theta);
  ConditionalPosterior post;
  post.kind = ConditionalPosterior::Kind::Rqk;
  post.mean = vec(model.data() - s2 * rqk_solve_columns(f, model.data()));

  // Cov(g | y) = sigma^2 I - sigma^4 rQK(A'^{-1}, ((A' + mK)^{-1} - A'^{-1}) / m).
  const Index n = model.n();
  const double md = static_cast<double>(model.m());
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix a_inv = f.V().solve_full(eye);
  const Matrix head_inv = f.U().solve_full(eye);
  Matrix cov_a = s2 * eye - s2 * s2 * a_inv;
  Matrix cov_k = -s2 * s2 * (head_inv - a_inv) / md;
  cov_a = 0.5 * (cov_a + cov_a.transpose());
  cov_k = 0.5 * (cov_k + cov_k.transpose());
  const Vector sd = (cov_a + cov_k).diagonal().cwiseMax(0.0).cwiseSqrt();
  post.marginal_sd = sd.replicate(static_cast<Index>(model.m()), 1);
  post.covariance = RqkMatrix(std::move(cov_a), std::move(cov_k), model.m());
  return post;
}

Matrix posterior_f_precision(const GaussianModel &model, const Hyperparams &theta) {
  const RqkMatrix sigma = model.marginal_covariance(theta);
  const Index n = model.n();
  const Matrix eye = Matrix::Identity(n, n);
  const SquareRoot k = SquareRoot::factor(sigma.K(), FactorMethod::Cholesky, "K");
  const SquareRoot a = SquareRoot::factor(sigma.A(), FactorMethod::Cholesky, "A'");
  return k.solve_full(eye) + static_cast<double>(model.m()) * a.solve_full(eye);
}

RqkMatrix posterior_g_precision(const GaussianModel &model, const Hyperparams &theta) {
  const TwoLevelPrior &prior = model.prior();
  const RqkMatrix inv = rqk_inverse(prior.covariance(theta, model.m()));
  Matrix a = inv.A();
  a.diagonal().array() += 1.0 / model.noise_variance(theta);
  return RqkMatrix(std::move(a), inv.K(), model.m());
}

LogPrior independent_normal_prior(Vector mean, Vector sd) {
  if (mean.size() != sd.size() || !(sd.array() > 0.0).all())
    throw Error("normal prior needs matching means and positive sds");
  return [mean = std::move(mean), sd = std::move(sd)](const Vector &theta, Vector &grad) {
    const Vector z = (theta - mean).cwiseQuotient(sd);
    grad = -z.cwiseQuotient(sd);
    return -0.5 * z.squaredNorm() - sd.array().log().sum() -
           0.5 * static_cast<double>(z.size()) * std::log(2.0 * M_PI);
  };
}

namespace {

std::vector<std::size_t> free_indices(std::size_t dim, const std::vector<std::size_t> &fixed) {
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < dim; ++j)
    if (std::find(fixed.begin(), fixed.end(), j) == fixed.end()) free.push_back(j);
  return free;
}

}  // namespace

Matrix laplace_covariance(const std::function<Vector(const Vector &)> &grad, const Vector &x,
                          const std::vector<std::size_t> &fixed) {
  const auto dim = static_cast<std::size_t>(x.size());
  const auto free = free_indices(dim, fixed);
  const auto p = static_cast<Index>(free.size());
  Matrix cov = Matrix::Zero(x.size(), x.size());
  if (p == 0) return cov;

  Matrix hess(p, p);
  for (Index c = 0; c < p; ++c) {
    const auto j = static_cast<Index>(free[static_cast<std::size_t>(c)]);
    const double h = 1e-4 * std::max(1.0, std::abs(x[j]));
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Vector gp = grad(xp);
    const Vector gm = grad(xm);
    for (Index r = 0; r < p; ++r) {
      const auto i = static_cast<Index>(free[static_cast<std::size_t>(r)]);
      hess(r, c) = (gp[i] - gm[i]) / (2.0 * h);
    }
  }
  const Matrix neg = -0.5 * (hess + hess.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(neg);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  const Vector lam = es.eigenvalues().cwiseMax(1e-8 * top);
  const Matrix sub = es.eigenvectors() * lam.cwiseInverse().asDiagonal() *
                     es.eigenvectors().transpose();
  for (Index r = 0; r < p; ++r)
    for (Index c = 0; c < p; ++c)
      cov(static_cast<Index>(free[static_cast<std::size_t>(r)]),
          static_cast<Index>(free[static_cast<std::size_t>(c)])) = sub(r, c);
  return cov;
}

MapFit fit_map(const GaussianModel &model, const Hyperparams &init,
               const std::optional<LogPrior> &prior, const FitOptions &opts) {
  model.check(init);
  const auto free = free_indices(init.size(), opts.fixed);
  const Vector base = init.values();

  auto full_objective = [&](const Vector &theta, Vector &grad) {
    ValueAndGrad vg = marginal_loglik_with_grad(model, init.with_values(theta));
    if (prior) {
      Vector pg;
      vg.value += (*prior)(theta, pg);
      vg.grad += pg;
    }
    grad = vg.grad;
    return vg.value;
  };
  auto expand = [&](const Vector &sub) {
    Vector theta = base;
    for (std::size_t k = 0; k < free.size(); ++k)
      theta[static_cast<Index>(free[k])] = sub[static_cast<Index>(k)];
    return theta;
  };

  Objective obj;
  obj.dim = static_cast<Index>(free.size());
  obj.eval = [&](const Vector &sub, Vector &g) {
    g.setZero(obj.dim);
    if (!sub.allFinite()) return std::numeric_limits<double>::infinity();
    try {
      Vector full_grad;
      const double v = full_objective(expand(sub), full_grad);
      for (std::size_t k = 0; k < free.size(); ++k)
        g[static_cast<Index>(k)] = -full_grad[static_cast<Index>(free[k])];
      return -v;
    } catch (const NotPositiveDefinite &) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Vector x0(obj.dim);
  for (std::size_t k = 0; k < free.size(); ++k) x0[static_cast<Index>(k)] = base[static_cast<Index>(free[k])];

  MapFit fit;
  fit.optim = lbfgs(obj, x0, opts.lbfgs);
  const Vector theta_star = expand(fit.optim.x_opt);
  fit.theta_star = init.with_values(theta_star);
  fit.log_objective = full_objective(theta_star, fit.gradient);
  for (auto j : opts.fixed) fit.gradient[static_cast<Index>(j)] = 0.0;
  fit.covariance = laplace_covariance(
      [&](const Vector &theta) {
        Vector g;
        full_objective(theta, g);
        return g;
      },
      theta_star, opts.fixed);
  return fit;
}

namespace {

double mixture_cdf(double x, const std::vector<Vector> &means, const std::vector<Vector> &sds,
                   Index i) {
  double acc = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double mu = means[k][i];
    const double s = sds[k][i];
    if (s > 0.0) {
      acc += 0.5 * std::erfc(-(x - mu) / (s * M_SQRT2));
    } else {
      acc += x >= mu ? 1.0 : 0.0;
    }
  }
  return acc / static_cast<double>(means.size());
}

}  // namespace

ConfidenceBand confidence_band(const std::vector<Vector> &means, const std::vector<Vector> &sds,
                               double alpha) {
  if (means.empty()) throw EmptyMixture();
  if (means.size() != sds.size()) throw DimensionMismatch("confidence_band: list lengths differ");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("confidence_band: alpha must lie in (0, 1)");
  const Index n = means.front().size();
  for (std::size_t k = 0; k < means.size(); ++k)
    if (means[k].size() != n || sds[k].size() != n)
      throw DimensionMismatch("confidence_band: component lengths differ");

  const double count = static_cast<double>(means.size());
  ConfidenceBand band;
  band.alpha = alpha;
  band.lower.resize(n);
  band.upper.resize(n);
  for (Index i = 0; i < n; ++i) {
    double mean = 0.0, second = 0.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
      mean += means[k][i];
      second += means[k][i] * means[k][i] + sds[k][i] * sds[k][i];
    }
    mean /= count;
    const double sd = std::sqrt(std::max(second / count - mean * mean, 0.0));
    auto invert = [&](double p) {
      double lo = mean - 10.0 * sd, hi = mean + 10.0 * sd;
      if (sd == 0.0) return mean;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = mixture_cdf(mid, means, sds, i);
        if (c < p) lo = mid; else hi = mid;
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(mid))) break;
      }
      return 0.5 * (lo + hi);
    };
    band.lower[i] = invert(alpha / 2.0);
    band.upper[i] = invert(1.0 - alpha / 2.0);
  }
  return band;
}

}  // namespace rqk
