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

#include <gtest/gtest.h>

#include <cmath>

#include "rqk/errors.hpp"
#include "rqk/gaussian_model.hpp"
#include "rqk/simulate.hpp"
#include "test_util.hpp"

using namespace rqk;
using namespace rqk::testing;

namespace {

Grid random_grid(Rng &rng, std::size_t n) {
  std::vector<double> pts;
  double x = 0.0;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(x += rng.uniform(0.02, 0.15));
  return Grid(pts);
}

Vector random_theta(Rng &rng) {
  return (Vector(5) << rng.uniform(-2.0, -0.5), rng.uniform(-1, 1), rng.uniform(-2.0, -0.5),
          rng.uniform(-1.5, 0.5), rng.uniform(-2, 0))
      .finished();
}

Hyperparams hp(const Vector &v) { return Hyperparams(GaussianModel::stationary_names(), v); }

struct Instance {
  GaussianModel model;
  Hyperparams theta;
};

Instance random_instance(Rng &rng, std::size_t n_max = 16, std::size_t m_max = 5) {
  const std::size_t n = rng.integer(1, n_max), m = rng.integer(1, m_max);
  const Grid g = random_grid(rng, n);
  return {GaussianModel::stationary(g, rng.normal_matrix(static_cast<Index>(n), static_cast<Index>(m))),
          hp(random_theta(rng))};
}

Matrix dense_marginal(const GaussianModel &model, const Hyperparams &theta) {
  const RqkMatrix s = model.marginal_covariance(theta);
  return to_dense(s);
}

// Dense joint-Gaussian oracle for (f, y) and (g, y).
struct DenseJoint {
  Vector f_mean;
  Matrix f_cov;
  Vector g_mean;
  Matrix g_cov;
};

DenseJoint dense_joint(const GaussianModel &model, const Hyperparams &theta) {
  const Index n = model.n();
  const auto m = static_cast<Index>(model.m());
  const Matrix k = model.prior().K(theta);
  const Matrix a = model.prior().A(theta);
  const double s2 = model.noise_variance(theta);
  Matrix prior_g(n * m, n * m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) prior_g.block(i * n, j * n, n, n) = (i == j ? a + k : k);
  const Matrix cov_y = prior_g + s2 * Matrix::Identity(n * m, n * m);
  Matrix cov_fy(n, n * m);
  for (Index i = 0; i < m; ++i) cov_fy.block(0, i * n, n, n) = k;
  const Eigen::LLT<Matrix> llt(cov_y);
  const Vector y = vec(model.data());
  DenseJoint d;
  d.f_mean = cov_fy * llt.solve(y);
  d.f_cov = k - cov_fy * llt.solve(Matrix(cov_fy.transpose()));
  d.g_mean = prior_g * llt.solve(y);
  d.g_cov = prior_g - prior_g * llt.solve(prior_g);
  return d;
}

}  // namespace

TEST(MarginalLoglik, ScalarCase) {
  const Grid g({0.5});
  const Matrix y = Matrix::Constant(1, 1, 0.7);
  const GaussianModel model = GaussianModel::stationary(g, y, 0.0);
  const Hyperparams th = hp((Vector(5) << 0.0, std::log(0.8), 0.0, std::log(1.3), std::log(0.4)).finished());
  const double v = 0.8 + 1.3 + 0.4;
  EXPECT_NEAR(marginal_loglik(model, th), -0.5 * (std::log(2 * M_PI * v) + 0.49 / v), 1e-14);
}

TEST(MarginalLoglik, DenseOracle) {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const Instance in = random_instance(rng);
    const double ref = dense_logdensity(dense_marginal(in.model, in.theta), vec(in.model.data()));
    EXPECT_NEAR(marginal_loglik(in.model, in.theta), ref, 1e-8) << "trial " << t;
  }
}

TEST(MarginalLoglik, ZeroDataIsScaleInvariant) {
  const GaussianModel m0 = GaussianModel::stationary(Grid::regular(6), Matrix::Zero(6, 3));
  const GaussianModel m1 = GaussianModel::stationary(Grid::regular(6), 2.0 * Matrix::Zero(6, 3));
  const Hyperparams th = hp((Vector(5) << -1, 0, -1, 0, 0).finished());
  EXPECT_EQ(marginal_loglik(m0, th), marginal_loglik(m1, th));
}

TEST(MarginalLoglik, RejectsMismatchedData) {
  EXPECT_THROW(GaussianModel::stationary(Grid::regular(5), Matrix::Zero(4, 2)), DimensionMismatch);
  const GaussianModel m = GaussianModel::stationary(Grid::regular(5), Matrix::Zero(5, 2));
  EXPECT_THROW(marginal_loglik(m, Hyperparams({"a"}, Vector::Zero(1))), DimensionMismatch);
}

TEST(MarginalLoglikGrad, MatchesFiniteDifferences) {
  Rng rng(22);
  for (int t = 0; t < 40; ++t) {
    const Instance in = random_instance(rng, 16, 4);
    const Vector an = marginal_loglik_grad(in.model, in.theta);
    const ValueAndGrad vg = marginal_loglik_with_grad(in.model, in.theta);
    EXPECT_EQ(vg.value, marginal_loglik(in.model, in.theta));
    EXPECT_TRUE(vg.grad == an);
    for (std::size_t j = 0; j < 5; ++j) {
      const double h = 1e-5;
      const double fd = (marginal_loglik(in.model, in.theta.with(j, in.theta[j] + h)) -
                         marginal_loglik(in.model, in.theta.with(j, in.theta[j] - h))) / (2 * h);
      EXPECT_LT(std::abs(an[static_cast<Index>(j)] - fd) / std::max(1.0, std::abs(fd)), 1e-5)
          << "trial " << t << " j " << j;
    }
  }
}

TEST(MarginalLoglikGrad, UnusedSlotIsZero) {
  // Kernels read slots 0-3, noise sits in slot 5, slot 4 is unused.
  const Grid g = Grid::regular(6);
  TwoLevelPrior prior{KernelSpec::matern52(0, 1), KernelSpec::matern52(2, 3), g, kDefaultJitter};
  Rng rng(23);
  const GaussianModel model(prior, rng.normal_matrix(6, 3), 5);
  ASSERT_EQ(model.param_count(), 6u);
  const Hyperparams th({"a", "b", "c", "d", "unused", "noise"},
                       (Vector(6) << -1, 0, -1, -0.5, 3.0, -1).finished());
  EXPECT_EQ(marginal_loglik_grad(model, th)[4], 0.0);
}

TEST(MarginalLoglikGrad, LargeNoiseAsymptote) {
  Rng rng(24);
  const GaussianModel model = GaussianModel::stationary(Grid::regular(10), 1e3 * rng.normal_matrix(10, 3));
  const Hyperparams th = hp((Vector(5) << -1, 0, -1, 0, std::log(1e6)).finished());
  const Matrix &y = model.data();
  const double asym = 0.5 * (y.squaredNorm() / 1e6 - static_cast<double>(y.size()));
  EXPECT_LT(std::abs(marginal_loglik_grad(model, th)[4] - asym) / std::abs(asym), 1e-2);
}

TEST(PosteriorF, ScalarExample) {
  const GaussianModel model = GaussianModel::stationary(Grid({0.5}), Matrix::Constant(1, 2, 2.0), 0.0);
  const Hyperparams th = hp(Vector::Zero(5));
  const ConditionalPosterior p = posterior_f(model, th);
  EXPECT_NEAR(p.mean[0], 1.0, 1e-14);
  EXPECT_NEAR(p.marginal_sd[0] * p.marginal_sd[0], 0.5, 1e-14);
  EXPECT_NEAR(posterior_f_precision(model, th)(0, 0), 2.0, 1e-14);
}

TEST(Posteriors, ZeroDataGivesZeroMean) {
  const GaussianModel model = GaussianModel::stationary(Grid::regular(7), Matrix::Zero(7, 3));
  const Hyperparams th = hp((Vector(5) << -1, 0, -1, 0, 0).finished());
  EXPECT_EQ(posterior_f(model, th).mean.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(posterior_g(model, th).mean.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Posteriors, DenseJointOracleAndPrecisions) {
  Rng rng(25);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = rng.integer(1, 10), m = rng.integer(1, 4);
    const GaussianModel model = GaussianModel::stationary(
        random_grid(rng, n), rng.normal_matrix(static_cast<Index>(n), static_cast<Index>(m)), 1e-4);
    const Hyperparams th = hp((Vector(5) << rng.uniform(-1.5, -0.5), rng.uniform(-0.5, 0.5),
                               rng.uniform(-1.5, -0.5), rng.uniform(-1, 0), rng.uniform(-1.5, 0)).finished());
    const DenseJoint d = dense_joint(model, th);
    const ConditionalPosterior pf = posterior_f(model, th);
    const ConditionalPosterior pg = posterior_g(model, th);
    ASSERT_EQ(pf.kind, ConditionalPosterior::Kind::DenseN);
    ASSERT_EQ(pg.kind, ConditionalPosterior::Kind::Rqk);
    EXPECT_LT(max_rel_diff(pf.mean, d.f_mean), 1e-8);
    EXPECT_LT(max_rel_diff(std::get<Matrix>(pf.covariance), d.f_cov), 1e-8);
    EXPECT_LT(max_rel_diff(pg.mean, d.g_mean), 1e-8);
    EXPECT_LT(max_rel_diff(to_dense(std::get<RqkMatrix>(pg.covariance)), d.g_cov), 1e-8);
    EXPECT_LT(max_rel_diff(pf.marginal_sd, d.f_cov.diagonal().cwiseMax(0).cwiseSqrt()), 1e-7);

    // Precision forms: Q mean = rhs and Q^{-1} = covariance.
    const Matrix qf = posterior_f_precision(model, th);
    EXPECT_LT(max_rel_diff(qf.inverse(), d.f_cov), 1e-6);
    const double s2 = model.noise_variance(th);
    const Matrix a_noise = model.prior().A(th) + s2 * Matrix::Identity(model.n(), model.n());
    const Vector rhs_f = a_noise.llt().solve(Vector(model.data().rowwise().sum()));
    EXPECT_LT((qf * pf.mean - rhs_f).norm() / std::max(1.0, rhs_f.norm()), 1e-6);
    const Matrix qg = to_dense(posterior_g_precision(model, th));
    EXPECT_LT((qg * pg.mean - vec(model.data()) / s2).norm() / (vec(model.data()) / s2).norm(), 1e-8);
    EXPECT_LT(max_rel_diff(qg.inverse(), d.g_cov), 1e-8);

    // Averaging identity: mean over i of E[g_i | y] - E[f | y] = (A/m) (A'+mK)^{-1} sum_i y_i.
    const Matrix gm = as_matrix(pg.mean, model.n(), static_cast<Index>(m));
    const Vector avg_g = gm.rowwise().mean();
    const Matrix head = a_noise + static_cast<double>(m) * model.prior().K(th);
    const Vector s = head.llt().solve(Vector(model.data().rowwise().sum()));
    const Vector expected = model.prior().A(th) * s / static_cast<double>(m);
    EXPECT_LT(max_rel_diff(avg_g - pf.mean, expected), 1e-8);
  }
}

TEST(PosteriorG, InterpolatesAsNoiseVanishes) {
  Rng rng(26);
  const GaussianModel model = GaussianModel::stationary(Grid::regular(12), rng.normal_matrix(12, 3));
  const Hyperparams th = hp((Vector(5) << -2, 0, -2, 0, std::log(1e-10)).finished());
  EXPECT_LT((posterior_g(model, th).mean - vec(model.data())).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FitMap, RecoversNoiseAndSatisfiesFirstOrderCondition) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GaussianSimOptions so;
    so.n = 100;
    so.m = 6;
    so.seed = seed;
    const GaussianDataset d = simulate_gaussian(so);
    const GaussianModel model = GaussianModel::stationary(d.grid, d.y);
    const MapFit fit = fit_map(model, hp((Vector(5) << std::log(0.1), 0, std::log(0.1), 0, 0).finished()));
    EXPECT_LT(fit.gradient.lpNorm<Eigen::Infinity>(), 1e-4) << "seed " << seed;
    if (std::abs(fit.theta_star[4] - 0.0) <= 0.3) ++hits;  // log(sigma^2) = 0
    EXPECT_EQ(Eigen::LLT<Matrix>(fit.covariance).info(), Eigen::Success);
  }
  EXPECT_GE(hits, 24);
}

TEST(FitMap, StationaryInitIsReturned) {
  GaussianSimOptions so;
  so.n = 40;
  so.m = 4;
  so.seed = 3;
  const GaussianDataset d = simulate_gaussian(so);
  const GaussianModel model = GaussianModel::stationary(d.grid, d.y);
  const MapFit first = fit_map(model, hp((Vector(5) << -2, 0, -2, 0, 0).finished()));
  FitOptions loose;
  loose.lbfgs.tol = 2.0 * std::max(first.gradient.lpNorm<Eigen::Infinity>(), 1e-12);
  const MapFit again = fit_map(model, first.theta_star, std::nullopt, loose);
  EXPECT_EQ(again.optim.iterations, 0);
  EXPECT_TRUE(again.theta_star.values() == first.theta_star.values());
}

TEST(FitMap, FixedParametersStayPut) {
  GaussianSimOptions so;
  so.n = 30;
  so.m = 3;
  const GaussianDataset d = simulate_gaussian(so);
  const GaussianModel model = GaussianModel::stationary(d.grid, d.y);
  FitOptions fo;
  fo.fixed = {4};
  const MapFit fit = fit_map(model, hp((Vector(5) << -2, 0, -2, 0, 0.25).finished()), std::nullopt, fo);
  EXPECT_EQ(fit.theta_star[4], 0.25);
  EXPECT_EQ(fit.covariance.row(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FitMap, DivergesOnNonFiniteStart) {
  const GaussianModel model = GaussianModel::stationary(Grid::regular(5), Matrix::Zero(5, 2));
  // Huge variances overflow the kernel, so the objective is not finite at init.
  EXPECT_THROW(fit_map(model, hp((Vector(5) << 0, 800, 0, 800, 800).finished())), OptimizerDiverged);
}

TEST(Mh, ConstantTargetAcceptsEverything) {
  MhOptions o;
  o.n_samples = 500;
  o.n_burn = 50;
  const auto s = metropolis_hastings([](const Vector &) { return 0.0; },
                                     Hyperparams({"a", "b"}, Vector::Zero(2)), Matrix::Identity(2, 2), o);
  EXPECT_EQ(s.acceptance_rate, 1.0);
  EXPECT_EQ(s.accepted, s.proposed);
  EXPECT_EQ(s.thetas.size(), 500u);
}

TEST(Mh, StandardNormalMoments) {
  MhOptions o;
  o.n_samples = 100000;
  o.n_burn = 1000;
  o.seed = 9;
  const auto s = metropolis_hastings([](const Vector &x) { return -0.5 * x.squaredNorm(); },
                                     Hyperparams({"a"}, Vector::Zero(1)), Matrix::Identity(1, 1), o);
  double mean = 0, sq = 0;
  for (const auto &t : s.thetas) {
    mean += t[0];
    sq += t[0] * t[0];
  }
  mean /= static_cast<double>(s.thetas.size());
  const double var = sq / static_cast<double>(s.thetas.size()) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.1);
  EXPECT_EQ(s.acceptance_rate, static_cast<double>(s.accepted) / static_cast<double>(s.proposed));
}

TEST(Mh, SeededChainsAreIdentical) {
  GaussianSimOptions so;
  so.n = 30;
  so.m = 3;
  const GaussianDataset d = simulate_gaussian(so);
  const GaussianModel model = GaussianModel::stationary(d.grid, d.y);
  const MapFit fit = fit_map(model, hp((Vector(5) << -2, 0, -2, 0, 0).finished()));
  MhOptions o;
  o.n_samples = 200;
  o.n_burn = 20;
  o.seed = 77;
  const auto a = mh_sample(model, fit.theta_star, fit.covariance, o);
  const auto b = mh_sample(model, fit.theta_star, fit.covariance, o);
  ASSERT_EQ(a.thetas.size(), b.thetas.size());
  for (std::size_t i = 0; i < a.thetas.size(); ++i) EXPECT_TRUE(a.thetas[i].values() == b.thetas[i].values());
  EXPECT_EQ(a.log_posts, b.log_posts);
  EXPECT_GT(a.acceptance_rate, 0.05);
}

TEST(ConfidenceBand, Examples) {
  const auto one = confidence_band({Vector::Zero(1)}, {Vector::Ones(1)}, 0.05);
  EXPECT_NEAR(one.lower[0], -1.959964, 1e-5);
  EXPECT_NEAR(one.upper[0], 1.959964, 1e-5);

  const Vector mu = (Vector(3) << 0.3, -1.0, 2.0).finished();
  const Vector sd = (Vector(3) << 0.5, 1.0, 2.0).finished();
  const auto single = confidence_band({mu}, {sd}, 0.1);
  const auto triple = confidence_band({mu, mu, mu}, {sd, sd, sd}, 0.1);
  EXPECT_LT((single.lower - triple.lower).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((single.upper - triple.upper).cwiseAbs().maxCoeff(), 1e-9);

  const auto sym = confidence_band({Vector::Constant(1, -1.5), Vector::Constant(1, 1.5)},
                                   {Vector::Ones(1), Vector::Ones(1)}, 0.05);
  EXPECT_NEAR(sym.lower[0], -sym.upper[0], 1e-8);
  EXPECT_LE(sym.lower[0], sym.upper[0]);
  EXPECT_THROW(confidence_band({}, {}, 0.05), EmptyMixture);
}
