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

#include "rqk/poisson_lgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rqk/errors.hpp"

namespace rqk {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kGainFloor = 4.0 * std::numeric_limits<double>::epsilon();

std::vector<std::string> matern_names(std::initializer_list<const char *> tags) {
  std::vector<std::string> out;
  for (const char *t : tags) {
    out.push_back(std::string("log_len_") + t);
    out.push_back(std::string("log_var_") + t);
  }
  return out;
}

}  // namespace

PoissonModel::PoissonModel(TwoLevelPrior prior, Matrix counts, double bin_width)
    : prior_(std::move(prior)), data_(std::move(counts)), bin_width_(bin_width) {
  if (data_.rows() != static_cast<Index>(prior_.grid.size()))
    throw DimensionMismatch("count rows must match the grid length");
  if (data_.cols() < 1) throw DimensionMismatch("counts need at least one function");
  if (!(bin_width_ > 0.0) || !std::isfinite(bin_width_)) throw Error("bin width must be positive");
  for (Index k = 0; k < data_.size(); ++k) {
    const double y = data_.data()[k];
    if (!(y >= 0.0) || y != std::floor(y) || !std::isfinite(y))
      throw Error("counts must be nonnegative integers");
  }
}

PoissonModel PoissonModel::stationary(Grid grid, Matrix counts, double bin_width, double jitter) {
  TwoLevelPrior prior{KernelSpec::matern52(0, 1), KernelSpec::matern52(2, 3), std::move(grid),
                      jitter};
  return PoissonModel(std::move(prior), std::move(counts), bin_width);
}

std::vector<std::string> PoissonModel::stationary_names() { return matern_names({"K", "A"}); }

PoissonModel PoissonModel::nonstationary(Grid grid, Matrix counts, double bin_width, Mask mask,
                                         double jitter) {
  const StationaryKernel a{KernelFamily::Matern52, 0, 1};
  const StationaryKernel b{KernelFamily::Matern52, 2, 3};
  TwoLevelPrior prior{KernelSpec::masked_sum(a, b, mask), KernelSpec::matern52(4, 5),
                      std::move(grid), jitter};
  return PoissonModel(std::move(prior), std::move(counts), bin_width);
}

std::vector<std::string> PoissonModel::nonstationary_names() {
  return matern_names({"a", "b", "A"});
}

PoissonModel PoissonModel::gaussian_hook(TwoLevelPrior prior, Matrix y, double noise_variance) {
  if (!(noise_variance > 0.0)) throw Error("noise variance must be positive");
  if (y.rows() != static_cast<Index>(prior.grid.size()))
    throw DimensionMismatch("data rows must match the grid length");
  if (y.cols() < 1) throw DimensionMismatch("data needs at least one function");
  if (!y.allFinite()) throw Error("data must be finite");
  PoissonModel model;
  model.prior_ = std::move(prior);
  model.data_ = std::move(y);
  model.observation_ = ObservationModel::Gaussian;
  model.noise_variance_ = noise_variance;
  return model;
}

void PoissonModel::check(const Hyperparams &theta) const {
  if (theta.size() != param_count())
    throw DimensionMismatch("expected " + std::to_string(param_count()) + " hyperparameters");
}

Vector PoissonModel::initial_latent() const {
  if (observation_ == ObservationModel::Gaussian) return vec(data_);
  return ((vec(data_).array() + 0.5) / bin_width_).log().matrix();
}

LikelihoodTerms poisson_terms(const PoissonModel &model, const Vector &x) {
  if (x.size() != model.dim()) throw DimensionMismatch("latent vector length must be n*m");
  const Vector y = vec(model.data());
  LikelihoodTerms t;
  if (model.observation() == ObservationModel::Gaussian) {
    const double s2 = model.noise_variance();
    const Vector r = y - x;
    t.loglik = -0.5 * r.squaredNorm() / s2 - 0.5 * static_cast<double>(x.size()) * (kLog2Pi + std::log(s2));
    t.grad = r / s2;
    t.neg_hess_diag = Vector::Constant(x.size(), 1.0 / s2);
    t.third_diag = Vector::Zero(x.size());
    return t;
  }
  const double delta = model.bin_width();
  Vector mu(x.size());
  double ll = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    double xk = x[k];
    if (xk > kLatentClamp) {
      xk = kLatentClamp;
      t.clamped = true;
    }
    mu[k] = delta * std::exp(xk);
    ll += y[k] * x[k] - mu[k] - std::lgamma(y[k] + 1.0);
  }
  t.loglik = ll;
  t.grad = y - mu;
  t.neg_hess_diag = mu;
  t.third_diag = -mu;
  return t;
}

RqkMatrix prior_precision(const RqkFactor &f) {
  const Matrix eye = Matrix::Identity(f.n(), f.n());
  Matrix a_inv = f.V().solve_full(eye);
  Matrix head_inv = f.U().solve_full(eye);
  a_inv = 0.5 * (a_inv + a_inv.transpose()).eval();
  head_inv = 0.5 * (head_inv + head_inv.transpose()).eval();
  Matrix kp = (head_inv - a_inv) / static_cast<double>(f.m());
  return RqkMatrix(std::move(a_inv), std::move(kp), f.m());
}

QkMatrix negative_hessian(const RqkMatrix &precision, const Vector &w) {
  const Index n = precision.n();
  const std::size_t m = precision.m();
  if (w.size() != precision.dim()) throw DimensionMismatch("W diagonal length must be n*m");
  std::vector<Matrix> blocks;
  blocks.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Matrix b = precision.A();
    b.diagonal() += w.segment(static_cast<Index>(i) * n, n);
    blocks.push_back(std::move(b));
  }
  const Vector e = Vector::Ones(static_cast<Index>(m));
  return QkMatrix(std::move(blocks), e, e, precision.K());
}

double log_posterior(const PoissonModel &model, const RqkFactor &prior_factor, const Vector &x) {
  return poisson_terms(model, x).loglik + rqk_logdensity(prior_factor, x);
}

namespace {

struct ModeState {
  LikelihoodTerms terms;
  Vector x;
  Vector alpha;  // Sigma^{-1} x
  Vector grad;   // gradient of the log posterior
  double logpost = 0.0;
  double scale = 1.0;  // rough size of the terms summed into logpost
};

// The iterate is carried as alpha with x = Sigma alpha, so the gradient
// loglik'(x) - alpha needs no solve and has no eps * cond(Sigma) floor.
ModeState evaluate_alpha(const PoissonModel &model, const RqkMatrix &sigma, const RqkFactor &f,
                         Vector alpha) {
  ModeState s;
  s.x = rqk_matvec(sigma, alpha);
  s.alpha = std::move(alpha);
  s.terms = poisson_terms(model, s.x);
  s.grad = s.terms.grad - s.alpha;
  const double quad = s.alpha.dot(s.x);
  s.logpost = s.terms.loglik -
              0.5 * (quad + rqk_logdet(f) + static_cast<double>(s.x.size()) * kLog2Pi);
  s.scale = 1.0 + std::abs(s.terms.loglik) + std::abs(quad) +
            s.x.lpNorm<1>() * (s.terms.grad.lpNorm<Eigen::Infinity>() +
                               s.terms.neg_hess_diag.lpNorm<Eigen::Infinity>());
  return s;
}

ModeState evaluate(const PoissonModel &model, const RqkFactor &f, const Vector &x) {
  ModeState s;
  s.x = x;
  s.alpha = rqk_solve(f, x);
  s.terms = poisson_terms(model, x);
  s.grad = s.terms.grad - s.alpha;
  s.logpost = s.terms.loglik + rqk_logdensity(f, x);
  return s;
}

void check_concave(const Vector &w) {
  for (Index k = 0; k < w.size(); ++k)
    if (!(w[k] >= 0.0)) throw NonConcave("negative or non-finite likelihood curvature");
}

ModeResult finish_mode(const RqkMatrix &precision, const ModeState &s, int iterations) {
  ModeResult r;
  r.x_star = s.x;
  r.logpost_at_mode = s.logpost;
  r.hessian = negative_hessian(precision, s.terms.neg_hess_diag);
  r.iterations = iterations;
  r.grad_norm = s.grad.lpNorm<Eigen::Infinity>();
  r.clamped = s.terms.clamped;
  return r;
}

ModeState newton(const PoissonModel &model, const RqkMatrix &sigma, const RqkFactor &f,
                 const RqkMatrix &precision, const Vector &x0, const ModeOptions &opts,
                 int *iterations) {
  if (x0.size() != model.dim()) throw DimensionMismatch("x0 length must be n*m");
  if (!x0.allFinite()) throw Error("x0 must be finite");
  ModeState s = evaluate_alpha(model, sigma, f, rqk_solve(f, x0));
  for (int it = 0;; ++it) {
    *iterations = it;
    if (s.grad.lpNorm<Eigen::Infinity>() < opts.tol) return s;
    if (it >= opts.max_iter)
      throw MaxIterExceeded("Newton mode search did not converge in " +
                            std::to_string(opts.max_iter) + " iterations (gradient norm " +
                            std::to_string(s.grad.lpNorm<Eigen::Infinity>()) + ")");
    check_concave(s.terms.neg_hess_diag);
    const QkSolver solver(negative_hessian(precision, s.terms.neg_hess_diag));
    const Vector dx = solver.solve(s.grad);
    // H dx = g gives Sigma^{-1} dx = g - W dx.
    const Vector da = s.grad - s.terms.neg_hess_diag.cwiseProduct(dx);
    // Near the mode the log posterior cannot resolve the gain, so changes
    // within the rounding of its summands count as ascent.
    const double floor = s.logpost - kGainFloor * s.scale;
    double t = 1.0;
    ModeState next = evaluate_alpha(model, sigma, f, s.alpha + da);
    while (!(next.logpost >= floor) && t > 1e-10) {
      t *= 0.5;
      next = evaluate_alpha(model, sigma, f, s.alpha + t * da);
    }
    if (!(next.logpost >= floor)) {
      throw MaxIterExceeded("Newton line search stalled (gradient norm " +
                            std::to_string(s.grad.lpNorm<Eigen::Infinity>()) + ")");
    }
    s = std::move(next);
  }
}

}  // namespace

ModeResult find_mode_newton(const PoissonModel &model, const Hyperparams &theta,
                            const Vector &x0, const ModeOptions &opts) {
  model.check(theta);
  const RqkMatrix sigma = model.prior().covariance(theta, model.m());
  const RqkFactor f = rqk_factor(sigma);
  const RqkMatrix precision = prior_precision(f);
  int iterations = 0;
  const ModeState s = newton(model, sigma, f, precision, x0, opts, &iterations);
  return finish_mode(precision, s, iterations);
}

Vector precondition_diag(const RqkFactor &f, const Vector &w) {
  if (w.size() != f.dim()) throw DimensionMismatch("precondition_diag: w length must be n*m");
  const Index n = f.n();
  const Index m = static_cast<Index>(f.m());
  const Matrix y = f.rotation().apply_squared(as_matrix(w, n, m));
  const Matrix t0 = f.U().dense();
  const Matrix tv = f.V().dense();
  Matrix d(n, m);
  d.col(0) = (t0.cwiseProduct(t0)) * y.col(0);
  if (m > 1) d.rightCols(m - 1) = (tv.cwiseProduct(tv)) * y.rightCols(m - 1);
  d.array() += 1.0;
  return vec(d);
}

QnModeResult find_mode_qn(const PoissonModel &model, const Hyperparams &theta, const Vector &x0,
                          const QnModeOptions &opts) {
  model.check(theta);
  if (x0.size() != model.dim()) throw DimensionMismatch("x0 length must be n*m");
  if (!x0.allFinite()) throw Error("x0 must be finite");
  const RqkFactor f = rqk_factor(model.prior().covariance(theta, model.m()), FactorMethod::Eigen);

  Objective obj;
  obj.dim = model.dim();
  obj.eval = [&](const Vector &z, Vector &g) {
    const Vector x = correlate(f, z);
    const LikelihoodTerms t = poisson_terms(model, x);
    g = z - factor_apply(f, t.grad);
    return -(t.loglik - 0.5 * z.squaredNorm());
  };
  if (opts.precondition) obj.hessian_diag = precondition_diag(f, poisson_terms(model, x0).neg_hess_diag);

  LbfgsOptions lo;
  lo.tol = opts.tol;
  lo.max_iter = opts.max_iter;
  lo.rel_value_tol = 0.0;
  QnModeResult out;
  out.optim = lbfgs(obj, whiten(f, x0), lo);
  const Vector x = correlate(f, out.optim.x_opt);
  out.mode = finish_mode(prior_precision(f), evaluate(model, f, x), out.optim.iterations);
  return out;
}

namespace {

struct Prepared {
  RqkFactor factor;
  RqkMatrix precision;
  ModeResult mode;
  ModeState state;
  SignedLogDet logdet;
  double value = 0.0;
};

// logdet(Sigma H) = logdet(I + S Sigma S) with S = diag(sqrt(w)). Each block
// D_i = I + S_i A S_i has eigenvalues >= 1 and the coupling goes through
// det(I + K sum_i S_i D_i^{-1} S_i) (Sylvester), so unlike logdet Sigma +
// logdet H nothing cancels when A or K is close to singular.
double logdet_sigma_hessian(const RqkMatrix &sigma, const Vector &w) {
  const Index n = sigma.n();
  const std::size_t m = sigma.m();
  Matrix coupling = Matrix::Zero(n, n);
  double ld = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const Vector s = w.segment(static_cast<Index>(i) * n, n).cwiseMax(0.0).cwiseSqrt();
    Matrix d = s.asDiagonal() * sigma.A() * s.asDiagonal();
    d.diagonal().array() += 1.0;
    const Eigen::LLT<Matrix> llt(d);
    if (llt.info() != Eigen::Success) throw NonSpdHessian("I + S A S is not positive definite");
    ld += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    coupling += s.asDiagonal() * llt.solve(Matrix(s.asDiagonal()));
  }
  Matrix c = sigma.K() * coupling;
  c.diagonal().array() += 1.0;
  const Eigen::PartialPivLU<Matrix> lu(c);
  const Vector u = lu.matrixLU().diagonal();
  double sign = lu.permutationP().determinant();
  for (Index k = 0; k < n; ++k) {
    if (u[k] < 0.0) sign = -sign;
    ld += std::log(std::abs(u[k]));
  }
  if (!(sign > 0.0) || !std::isfinite(ld)) throw NonSpdHessian("I + Sigma W has no positive determinant");
  return ld;
}

TraceMethod resolve(TraceMethod t, Index dim) {
  if (t != TraceMethod::Auto) return t;
  return dim <= kExactTraceCutoff ? TraceMethod::Exact : TraceMethod::Hutchinson;
}

Prepared prepare(const PoissonModel &model, const Hyperparams &theta,
                 const std::optional<Vector> &x0, const LaplaceOptions &opts,
                 std::optional<QkSolver> *solver_out) {
  model.check(theta);
  const RqkMatrix sigma = model.prior().covariance(theta, model.m());
  RqkFactor f = rqk_factor(sigma);
  RqkMatrix precision = prior_precision(f);
  int iterations = 0;
  ModeState state =
      newton(model, sigma, f, precision, x0 ? *x0 : model.initial_latent(), opts.mode, &iterations);
  ModeResult mode = finish_mode(precision, state, iterations);
  QkSolver solver(mode.hessian);
  const SignedLogDet ld = solver.logdet();
  if (ld.sign != 1) throw NonSpdHessian("negative Hessian at the mode is not positive definite");
  const double value =
      state.terms.loglik -
      0.5 * (state.alpha.dot(state.x) + logdet_sigma_hessian(sigma, state.terms.neg_hess_diag));
  if (solver_out) solver_out->emplace(std::move(solver));
  return {std::move(f), std::move(precision), std::move(mode), std::move(state), ld, value};
}

}  // namespace

LaplaceValue laplace(const PoissonModel &model, const Hyperparams &theta,
                     const std::optional<Vector> &x0, const LaplaceOptions &opts) {
  Prepared p = prepare(model, theta, x0, opts, nullptr);
  return {p.value, std::move(p.mode)};
}

LaplaceGradient laplace_with_grad(const PoissonModel &model, const Hyperparams &theta,
                                  const std::optional<Vector> &x0, const LaplaceOptions &opts) {
  std::optional<QkSolver> solver;
  Prepared p = prepare(model, theta, x0, opts, &solver);
  const Index n = model.n();
  const std::size_t m = model.m();
  const Index dim = model.dim();
  const std::size_t np = theta.size();

  std::vector<RqkDerivative> derivs;
  derivs.reserve(np);
  for (std::size_t j = 0; j < np; ++j) derivs.push_back(model.prior().derivative(theta, j));

  const Vector &alpha_vec = p.state.alpha;
  const Matrix alpha = as_matrix(alpha_vec, n, static_cast<Index>(m));

  LaplaceGradient out;
  out.trace = resolve(opts.trace, dim);
  out.value = p.value;
  out.grad = gaussian_logdensity_grad(p.factor, alpha, derivs);

  // d mu / dx along the implicit mode derivative enters through -third_diag.
  const Vector curvature_rate = -p.state.terms.third_diag;

  std::vector<RqkMatrix> g_mats;
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < np; ++j) {
    if (derivs[j].is_zero()) continue;
    const RqkMatrix ds(derivs[j].dA, derivs[j].dK, m);
    g_mats.push_back(rqk_mul(rqk_mul(p.precision, ds), p.precision));
    active.push_back(j);
  }

  std::vector<double> trace_g(active.size(), 0.0);
  Vector hinv_diag(dim);
  if (out.trace == TraceMethod::Exact) {
    const auto inv = solver->inverse_blocks();
    for (std::size_t i = 0; i < m; ++i)
      hinv_diag.segment(static_cast<Index>(i) * n, n) = inv.diagonal[i].diagonal();
    for (std::size_t a = 0; a < active.size(); ++a) {
      const RqkMatrix &g = g_mats[a];
      double tr = inv.block_sum.cwiseProduct(g.K().transpose()).sum();
      for (std::size_t i = 0; i < m; ++i) tr += inv.diagonal[i].cwiseProduct(g.A().transpose()).sum();
      trace_g[a] = tr;
    }
  } else {
    std::mt19937_64 rng(opts.hutchinson_seed);
    std::bernoulli_distribution coin(0.5);
    hinv_diag.setZero();
    const int probes = std::max(1, opts.hutchinson_probes);
    for (int q = 0; q < probes; ++q) {
      Vector r(dim);
      for (Index k = 0; k < dim; ++k) r[k] = coin(rng) ? 1.0 : -1.0;
      const Vector h = solver->solve(r);
      hinv_diag += r.cwiseProduct(h);
      for (std::size_t a = 0; a < active.size(); ++a) trace_g[a] += h.dot(rqk_matvec(g_mats[a], r));
    }
    hinv_diag /= static_cast<double>(probes);
    for (auto &t : trace_g) t /= static_cast<double>(probes);
  }

  for (std::size_t a = 0; a < active.size(); ++a) {
    const std::size_t j = active[a];
    const RqkMatrix ds(derivs[j].dA, derivs[j].dK, m);
    const Vector gx = rqk_solve(p.factor, rqk_matvec(ds, alpha_vec));
    const Vector dx = solver->solve(gx);
    const double diag_part = hinv_diag.dot(curvature_rate.cwiseProduct(dx));
    out.grad[static_cast<Index>(j)] -= 0.5 * (diag_part - trace_g[a]);
  }
  out.mode = std::move(p.mode);
  return out;
}

Vector laplace_grad(const PoissonModel &model, const Hyperparams &theta,
                    const LaplaceOptions &opts) {
  return laplace_with_grad(model, theta, std::nullopt, opts).grad;
}

LaplaceFit fit_laplace_map(const PoissonModel &model, const Hyperparams &init,
                           const LaplaceFitOptions &opts) {
  model.check(init);
  if (!init.values().allFinite()) throw OptimizerDiverged("initial hyperparameters not finite");
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < init.size(); ++j)
    if (std::find(opts.fixed.begin(), opts.fixed.end(), j) == opts.fixed.end()) free.push_back(j);
  const Vector base = init.values();
  auto expand = [&](const Vector &sub) {
    Vector theta = base;
    for (std::size_t k = 0; k < free.size(); ++k)
      theta[static_cast<Index>(free[k])] = sub[static_cast<Index>(k)];
    return theta;
  };

  std::optional<Vector> warm;
  Objective obj;
  obj.dim = static_cast<Index>(free.size());
  obj.eval = [&](const Vector &sub, Vector &g) {
    g.setZero(obj.dim);
    if (!sub.allFinite()) return std::numeric_limits<double>::infinity();
    try {
      LaplaceGradient lg = laplace_with_grad(model, init.with_values(expand(sub)), warm, opts.laplace);
      if (!std::isfinite(lg.value)) return std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < free.size(); ++k)
        g[static_cast<Index>(k)] = -lg.grad[static_cast<Index>(free[k])];
      warm = lg.mode.x_star;
      return -lg.value;
    } catch (const NotPositiveDefinite &) {
      return std::numeric_limits<double>::infinity();
    } catch (const MaxIterExceeded &) {
      return std::numeric_limits<double>::infinity();
    } catch (const SingularMatrix &) {
      return std::numeric_limits<double>::infinity();
    } catch (const NonSpdHessian &) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Vector x0(obj.dim);
  for (std::size_t k = 0; k < free.size(); ++k) x0[static_cast<Index>(k)] = base[static_cast<Index>(free[k])];

  LaplaceFit fit;
  fit.optim = lbfgs(obj, x0, opts.lbfgs);
  fit.theta_star = init.with_values(expand(fit.optim.x_opt));
  LaplaceGradient lg = laplace_with_grad(model, fit.theta_star, warm, opts.laplace);
  fit.value = lg.value;
  fit.gradient = lg.grad;
  for (auto j : opts.fixed) fit.gradient[static_cast<Index>(j)] = 0.0;
  fit.mode = std::move(lg.mode);
  return fit;
}

}  // namespace rqk
