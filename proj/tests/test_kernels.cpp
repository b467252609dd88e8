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
#include "rqk/kernels.hpp"
#include "test_util.hpp"

using namespace rqk;
using rqk::testing::Rng;

namespace {

Hyperparams two(double t1, double t2) {
  return Hyperparams({"log_len", "log_var"}, (Vector(2) << t1, t2).finished());
}

Hyperparams four(const Vector &v) {
  return Hyperparams({"log_len_a", "log_var_a", "log_len_b", "log_var_b"}, v);
}

}  // namespace

TEST(Kernels, MaternAtZeroDistanceIsVariance) {
  const auto k = KernelSpec::matern52(0, 1);
  EXPECT_DOUBLE_EQ(kernel_value(k, two(0, 0), 0.3, 0.3), 1.0);
  EXPECT_NEAR(kernel_value(k, two(0.7, 1.5), 2.0, 2.0), std::exp(1.5), 1e-12);
}

TEST(Kernels, MaternScalarValue) {
  const auto k = KernelSpec::matern52(0, 1);
  const double expected = 7.0 / 3.0 * std::exp(-1.0);
  EXPECT_NEAR(kernel_value(k, two(0, 0), 0.0, 1.0 / std::sqrt(5.0)), expected, 1e-14);
  EXPECT_NEAR(expected, 0.858385, 5e-7);
}

TEST(Kernels, SquaredExponentialScalarValue) {
  const auto k = KernelSpec::squared_exponential(0, 1);
  EXPECT_NEAR(kernel_value(k, two(0, 0), 0.0, std::sqrt(2.0)), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(std::exp(-1.0), 0.367879, 5e-7);
}

TEST(Kernels, MaskedSumValue) {
  const Mask mask{0.3, 0.2};
  const auto k = KernelSpec::masked_sum({KernelFamily::Matern52, 0, 1},
                                        {KernelFamily::SquaredExponential, 2, 3}, mask);
  const Vector th = (Vector(4) << -1.0, 0.2, -0.5, -0.3).finished();
  const double x = 0.25, xp = 0.4;
  const double ka = kernel_value(KernelSpec::matern52(0, 1), two(th[0], th[1]), x, xp);
  const double kb = kernel_value(KernelSpec::squared_exponential(0, 1), two(th[2], th[3]), x, xp);
  const double mx = std::exp(-std::pow((x - 0.3) / 0.2, 2));
  const double mxp = std::exp(-std::pow((xp - 0.3) / 0.2, 2));
  EXPECT_NEAR(kernel_value(k, four(th), x, xp), ka + mx * mxp * kb, 1e-14);
  EXPECT_DOUBLE_EQ(mask(0.3), 1.0);
}

TEST(Kernels, SingletonMatrix) {
  const Grid g({0.5});
  const Matrix k = build_kernel_matrix(KernelSpec::squared_exponential(0, 1), two(0.3, 0.0), g, 0.0);
  ASSERT_EQ(k.rows(), 1);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.0);
}

TEST(Kernels, TwoPointMaternMatrix) {
  const Grid g({0.0, 1.0 / std::sqrt(5.0)});
  const Matrix k = build_kernel_matrix(KernelSpec::matern52(0, 1), two(0, 0), g, 0.0);
  EXPECT_NEAR(k(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(k(0, 1), 0.858385, 5e-7);
  EXPECT_EQ(k(0, 1), k(1, 0));
}

TEST(Kernels, JitterScalesWithVariance) {
  const Grid g({0.1, 0.2});
  const auto spec = KernelSpec::matern52(0, 1);
  const Matrix k0 = build_kernel_matrix(spec, two(-1, 2.0), g, 0.0);
  const Matrix k1 = build_kernel_matrix(spec, two(-1, 2.0), g, 1e-3);
  EXPECT_NEAR(k1(0, 0) - k0(0, 0), 1e-3 * std::exp(2.0), 1e-15);
  EXPECT_EQ(k1(0, 1), k0(0, 1));
}

TEST(Kernels, SymmetricWithDuplicateDistances) {
  const Grid g({0.0, 0.1, 0.2, 0.3, 0.4});
  const Matrix k = build_kernel_matrix(KernelSpec::squared_exponential(0, 1), two(-2, 0.5), g);
  EXPECT_TRUE(k == k.transpose());
}

TEST(Kernels, CholeskySucceedsOverParameterBox) {
  Rng rng(11);
  for (auto fam : {0, 1}) {
    for (int trial = 0; trial < 12; ++trial) {
      const std::size_t n = std::vector<std::size_t>{8, 64, 256, 512}[static_cast<std::size_t>(trial % 4)];
      const auto spec = fam ? KernelSpec::matern52(0, 1) : KernelSpec::squared_exponential(0, 1);
      const double t1 = rng.uniform(-5, 5), t2 = rng.uniform(-5, 5);
      const Matrix k = build_kernel_matrix(spec, two(t1, t2), Grid::regular(n));
      EXPECT_TRUE(k == k.transpose());
      if (fam == 1) {
        EXPECT_EQ(Eigen::LLT<Matrix>(k).info(), Eigen::Success) << "theta " << t1 << "," << t2 << " n " << n;
      }
    }
  }
}

TEST(Kernels, GradientZeroForUnboundSlot) {
  const Grid g = Grid::regular(5);
  const Hyperparams th = four((Vector(4) << -1, 0, -1, 0).finished());
  const Matrix d = kernel_matrix_grad(KernelSpec::matern52(0, 1), th, g, 3);
  EXPECT_TRUE(d.isZero(0.0));
}

TEST(Kernels, MaternLengthGradientVanishesAtZeroDistance) {
  const Grid g({0.5});
  const Matrix d = kernel_matrix_grad(KernelSpec::matern52(0, 1), two(0, 0), g, 0, 0.0);
  EXPECT_EQ(d(0, 0), 0.0);
}

TEST(Kernels, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const Mask mask{0.3, 0.2};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = rng.integer(2, 32);
    std::vector<double> pts;
    double x = 0.0;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(x += rng.uniform(0.005, 0.1));
    const Grid g(pts);
    const Vector th = (Vector(4) << rng.uniform(-3, 0.5), rng.uniform(-2, 2), rng.uniform(-3, 0.5),
                       rng.uniform(-2, 2)).finished();
    const std::vector<KernelSpec> specs = {
        KernelSpec::matern52(0, 1), KernelSpec::squared_exponential(2, 3),
        KernelSpec::masked_sum({KernelFamily::Matern52, 0, 1}, {KernelFamily::SquaredExponential, 2, 3}, mask)};
    for (const auto &spec : specs) {
      for (std::size_t j = 0; j < 4; ++j) {
        const Matrix an = kernel_matrix_grad(spec, four(th), g, j);
        const double h = 1e-6;
        Vector tp = th, tm = th;
        tp[static_cast<Index>(j)] += h;
        tm[static_cast<Index>(j)] -= h;
        const Matrix fd = (build_kernel_matrix(spec, four(tp), g) - build_kernel_matrix(spec, four(tm), g)) / (2 * h);
        for (Index r = 0; r < an.rows(); ++r)
          for (Index c = 0; c < an.cols(); ++c)
            ASSERT_NEAR(an(r, c), fd(r, c), 1e-6 * std::max(1.0, std::abs(an(r, c))))
                << "trial " << trial << " j " << j;
      }
    }
  }
}

TEST(Kernels, MaskedSumWithVanishingSecondVarianceReducesToFirst) {
  const Grid g = Grid::regular(40);
  const auto masked = KernelSpec::masked_sum({KernelFamily::Matern52, 0, 1},
                                             {KernelFamily::Matern52, 2, 3});
  const Vector th = (Vector(4) << -1.2, 0.4, -2.0, -30.0).finished();
  const Matrix a = build_kernel_matrix(KernelSpec::matern52(0, 1), two(th[0], th[1]), g);
  EXPECT_LT((build_kernel_matrix(masked, four(th), g) - a).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Kernels, CheckBoundRejectsOutOfRangeAndCollisions) {
  EXPECT_THROW(KernelSpec::matern52(0, 5).check_bound(two(0, 0)), Error);
  EXPECT_THROW(KernelSpec::matern52(1, 1).check_bound(two(0, 0)), Error);
  EXPECT_NO_THROW(KernelSpec::matern52(0, 1).check_bound(two(0, 0)));
}

TEST(Grid, RejectsNonIncreasingAndEmpty) {
  EXPECT_THROW(Grid(std::vector<double>{}), Error);
  EXPECT_THROW(Grid({0.0, 0.0}), Error);
  EXPECT_THROW(Grid({0.2, 0.1}), Error);
  EXPECT_THROW(Grid({0.0, std::nan("")}), Error);
  const Grid g = Grid::regular(4);
  EXPECT_DOUBLE_EQ(g[0], 0.2);
  EXPECT_DOUBLE_EQ(g.back(), 0.8);
}

TEST(Hyperparams, RejectsNonFiniteAndLooksUpNames) {
  EXPECT_THROW(two(0, std::numeric_limits<double>::infinity()), Error);
  const auto h = two(1, 2);
  EXPECT_EQ(h.index_of("log_var"), 1u);
  EXPECT_THROW(h.index_of("nope"), Error);
  EXPECT_DOUBLE_EQ(h.with(0, 5)[0], 5.0);
}
