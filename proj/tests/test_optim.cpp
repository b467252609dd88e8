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
#include "rqk/optim.hpp"
#include "test_util.hpp"

using namespace rqk;

namespace {

Objective quadratic(const Vector &d) {
  Objective o;
  o.dim = d.size();
  o.eval = [d](const Vector &x, Vector &g) {
    g = d.cwiseProduct(x);
    return 0.5 * x.dot(g);
  };
  return o;
}

Objective rosenbrock() {
  Objective o;
  o.dim = 2;
  o.eval = [](const Vector &x, Vector &g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  return o;
}

}  // namespace

TEST(Lbfgs, DiagonalQuadratic) {
  const Vector d = (Vector(6) << 1, 2, 5, 10, 30, 100).finished();
  LbfgsOptions opts;
  opts.tol = 1e-9;
  opts.rel_value_tol = 0.0;
  const OptimResult r = lbfgs(quadratic(d), Vector::Ones(6), opts);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.grad_norm, 1e-8);
  EXPECT_LE(r.iterations, 6 + 5);
  EXPECT_LT(r.x_opt.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Lbfgs, Rosenbrock) {
  LbfgsOptions opts;
  opts.tol = 1e-8;
  opts.rel_value_tol = 0.0;
  const OptimResult r = lbfgs(rosenbrock(), (Vector(2) << -1.2, 1.0).finished(), opts);
  EXPECT_NEAR(r.x_opt[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x_opt[1], 1.0, 1e-5);
  EXPECT_LT(r.iterations, 200);
}

TEST(Lbfgs, AlreadyOptimal) {
  const OptimResult r = lbfgs(quadratic(Vector::Ones(3)), Vector::Zero(3));
  EXPECT_EQ(r.iterations, 0);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.status, OptimStatus::GradientTolerance);
}

TEST(Lbfgs, ConvergedImpliesToleranceAndMonotoneTrace) {
  const OptimResult r = lbfgs(rosenbrock(), (Vector(2) << -1.2, 1.0).finished());
  if (r.converged) EXPECT_LT(r.grad_norm, 1e-6);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].value, r.trace[i - 1].value);
}

TEST(Lbfgs, Deterministic) {
  const auto a = lbfgs(rosenbrock(), (Vector(2) << -1.2, 1.0).finished());
  const auto b = lbfgs(rosenbrock(), (Vector(2) << -1.2, 1.0).finished());
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].value, b.trace[i].value);
    EXPECT_EQ(a.trace[i].grad_norm, b.trace[i].grad_norm);
  }
  EXPECT_TRUE(a.x_opt == b.x_opt);
}

TEST(Lbfgs, DiagonalPreconditionerHelpsBadScaling) {
  Vector d(20);
  for (Index i = 0; i < 20; ++i) d[i] = std::pow(10.0, static_cast<double>(i) / 4.0);
  LbfgsOptions opts;
  opts.tol = 1e-8;
  opts.rel_value_tol = 0.0;
  Objective plain = quadratic(d);
  Objective pre = quadratic(d);
  pre.hessian_diag = d;
  const auto a = lbfgs(plain, Vector::Ones(20), opts);
  const auto b = lbfgs(pre, Vector::Ones(20), opts);
  EXPECT_TRUE(b.converged);
  EXPECT_LE(b.iterations, 2);
  EXPECT_LT(b.iterations, a.iterations);
}

TEST(Lbfgs, NonFiniteStartThrows) {
  Objective o;
  o.dim = 1;
  o.eval = [](const Vector &, Vector &g) {
    g = Vector::Zero(1);
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(lbfgs(o, Vector::Zero(1)), OptimizerDiverged);
}

TEST(Lbfgs, InfiniteRegionIsAvoidedByLineSearch) {
  // f = x^2 - log(1 - x) on x < 1, +inf beyond.
  Objective o;
  o.dim = 1;
  o.eval = [](const Vector &x, Vector &g) {
    g.resize(1);
    if (x[0] >= 1.0) {
      g[0] = 0.0;
      return std::numeric_limits<double>::infinity();
    }
    g[0] = 2.0 * x[0] + 1.0 / (1.0 - x[0]);
    return x[0] * x[0] - std::log(1.0 - x[0]);
  };
  LbfgsOptions opts;
  opts.rel_value_tol = 0.0;
  const auto r = lbfgs(o, (Vector(1) << -5.0).finished(), opts);
  // Minimizer solves 2x(1 - x) + 1 = 0 on x < 1.
  EXPECT_NEAR(r.x_opt[0], (1.0 - std::sqrt(3.0)) / 2.0, 1e-6);
}

TEST(FdGradCheck, LinearObjectiveIsExact) {
  const Vector c = (Vector(4) << 1.5, -2.0, 0.25, 3.0).finished();
  Objective o;
  o.dim = 4;
  o.eval = [c](const Vector &x, Vector &g) {
    g = c;
    return c.dot(x);
  };
  EXPECT_LT(fd_grad_check(o, Vector::Ones(4)), 1e-10);
}

TEST(FdGradCheck, DetectsWrongGradient) {
  Objective o = quadratic(Vector::Ones(2));
  Objective bad = o;
  bad.eval = [o](const Vector &x, Vector &g) {
    const double v = o.eval(x, g);
    g *= 2.0;
    return v;
  };
  EXPECT_GT(fd_grad_check(bad, Vector::Ones(2)), 0.1);
}
