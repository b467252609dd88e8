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

#include "rqk/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "rqk/errors.hpp"

namespace rqk {

namespace {

constexpr double kApproxWolfeSlack = 1e3 * std::numeric_limits<double>::epsilon();

struct Probe {
  double alpha = 0.0;
  double f = 0.0;
  double dg = 0.0;  // directional derivative
  Vector x;
  Vector g;
};

class LineSearch {
 public:
  LineSearch(const Objective &obj, const LbfgsOptions &opts, const Vector &x, double f0,
             double dg0, const Vector &d, int &evals)
      : obj_(obj), opts_(opts), x_(x), f0_(f0), dg0_(dg0), d_(d), evals_(evals) {}

  // Nocedal & Wright, Algorithms 3.5 and 3.6.
  std::optional<Probe> run(double alpha) {
    Probe prev{0.0, f0_, dg0_, x_, Vector()};
    for (int i = 0; i < opts_.max_line_search; ++i) {
      Probe cur = probe(alpha);
      if (approx_wolfe(cur)) return cur;
      if (!std::isfinite(cur.f) || cur.f > f0_ + opts_.c1 * alpha * dg0_ ||
          (i > 0 && cur.f >= prev.f))
        return zoom(prev, cur);
      if (std::abs(cur.dg) <= -opts_.c2 * dg0_) return opts_.refine_step ? refine(std::move(cur)) : cur;
      if (cur.dg >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return std::nullopt;
  }

 private:
  // Once f(alpha) and f(0) agree to rounding the Armijo test carries no
  // information; accept on the derivative alone (Hager & Zhang's approximate
  // Wolfe conditions).
  bool approx_wolfe(const Probe &p) const {
    if (!std::isfinite(p.f) || !std::isfinite(p.dg)) return false;
    const double slack = kApproxWolfeSlack * std::max(1.0, std::abs(f0_));
    return std::abs(p.f - f0_) <= slack && p.dg >= opts_.c2 * dg0_ &&
           p.dg <= (2.0 * opts_.c1 - 1.0) * dg0_;
  }

  Probe probe(double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x = x_ + alpha * d_;
    p.g.resize(x_.size());
    p.f = obj_.eval(p.x, p.g);
    ++evals_;
    if (!std::isfinite(p.f) || !p.g.allFinite()) {
      p.f = std::numeric_limits<double>::infinity();
      p.dg = std::numeric_limits<double>::quiet_NaN();
    } else {
      p.dg = p.g.dot(d_);
    }
    return p;
  }

  // One extra probe at the minimizer of the cubic through (0, f0, dg0) and the
  // accepted point; exact on quadratics, which restores the finite termination
  // of exact-line-search quasi-Newton there.
  Probe refine(Probe acc) {
    const double a = acc.alpha;
    const double d1 = dg0_ + acc.dg - 3.0 * (f0_ - acc.f) / (0.0 - a);
    const double disc = d1 * d1 - dg0_ * acc.dg;
    if (!(disc >= 0.0)) return acc;
    const double d2 = std::sqrt(disc);
    const double denom = acc.dg - dg0_ + 2.0 * d2;
    if (denom == 0.0) return acc;
    const double trial = a - a * (acc.dg + d2 - d1) / denom;
    if (!std::isfinite(trial) || trial <= 0.0 || trial > 4.0 * a ||
        std::abs(trial - a) <= 1e-3 * a)
      return acc;
    Probe cur = probe(trial);
    if (std::isfinite(cur.f) && cur.f < acc.f && cur.f <= f0_ + opts_.c1 * trial * dg0_ &&
        std::abs(cur.dg) <= -opts_.c2 * dg0_)
      return cur;
    return acc;
  }

  double interpolate(const Probe &lo, const Probe &hi) const {
    const double lo_a = lo.alpha, hi_a = hi.alpha;
    const double width = hi_a - lo_a;
    double trial = 0.5 * (lo_a + hi_a);
    if (std::isfinite(hi.f) && std::isfinite(hi.dg)) {
      const double d1 = lo.dg + hi.dg - 3.0 * (lo.f - hi.f) / (lo_a - hi_a);
      const double disc = d1 * d1 - lo.dg * hi.dg;
      if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), width);
        const double denom = hi.dg - lo.dg + 2.0 * d2;
        if (denom != 0.0) trial = hi_a - width * (hi.dg + d2 - d1) / denom;
      }
    }
    const double a = std::min(lo_a, hi_a) + 0.1 * std::abs(width);
    const double b = std::max(lo_a, hi_a) - 0.1 * std::abs(width);
    if (!std::isfinite(trial) || trial < a || trial > b) trial = 0.5 * (lo_a + hi_a);
    return trial;
  }

  std::optional<Probe> zoom(Probe lo, Probe hi) {
    for (int j = 0; j < opts_.max_line_search; ++j) {
      if (std::abs(hi.alpha - lo.alpha) <= 1e-14 * std::max(1.0, lo.alpha)) break;
      Probe cur = probe(interpolate(lo, hi));
      if (approx_wolfe(cur)) return cur;
      if (!std::isfinite(cur.f) || cur.f > f0_ + opts_.c1 * cur.alpha * dg0_ || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.dg) <= -opts_.c2 * dg0_) return cur;
        if (cur.dg * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // lo always satisfies sufficient decrease; accept it if it moved.
    if (lo.alpha > 0.0 && lo.f < f0_) return lo;
    return std::nullopt;
  }

  const Objective &obj_;
  const LbfgsOptions &opts_;
  const Vector &x_;
  double f0_;
  double dg0_;
  const Vector &d_;
  int &evals_;
};

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

Vector two_loop(const std::deque<Pair> &mem, const Vector &g, const Vector &hinv0) {
  Vector q = g;
  std::vector<double> alphas(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    alphas[k] = mem[k].rho * mem[k].s.dot(q);
    q -= alphas[k] * mem[k].y;
  }
  double gamma = 1.0;
  if (!mem.empty()) {
    const auto &last = mem.back();
    gamma = last.s.dot(last.y) / last.y.dot(hinv0.cwiseProduct(last.y));
  }
  Vector r = gamma * hinv0.cwiseProduct(q);
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double beta = mem[k].rho * mem[k].y.dot(r);
    r += (alphas[k] - beta) * mem[k].s;
  }
  return -r;
}

}  // namespace

std::string to_string(OptimStatus s) {
  switch (s) {
    case OptimStatus::GradientTolerance: return "gradient_tolerance";
    case OptimStatus::ValueTolerance: return "value_tolerance";
    case OptimStatus::MaxIterations: return "max_iterations";
    case OptimStatus::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

OptimResult lbfgs(const Objective &obj, const Vector &x0, const LbfgsOptions &opts) {
  if (x0.size() != obj.dim) throw DimensionMismatch("lbfgs: |x0| != objective dimension");
  Vector hinv0 = Vector::Ones(obj.dim);
  if (obj.hessian_diag) {
    if (obj.hessian_diag->size() != obj.dim || !(obj.hessian_diag->array() > 0.0).all())
      throw Error("lbfgs: preconditioner must be a positive vector of length dim");
    hinv0 = obj.hessian_diag->cwiseInverse();
  }

  OptimResult res;
  Vector x = x0;
  Vector g(obj.dim);
  double f = obj.eval(x, g);
  res.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite())
    throw OptimizerDiverged("lbfgs: objective not finite at the starting point");

  auto gnorm = [](const Vector &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  res.trace.push_back({f, gnorm(g)});

  std::deque<Pair> mem;
  res.status = OptimStatus::MaxIterations;
  if (gnorm(g) < opts.tol) {
    res.status = OptimStatus::GradientTolerance;
  } else {
    for (int iter = 0; iter < opts.max_iter; ++iter) {
      std::optional<Probe> step;
      for (int attempt = 0; attempt < 2 && !step; ++attempt) {
        if (attempt == 1) {
          if (mem.empty()) break;
          mem.clear();
        }
        Vector d = two_loop(mem, g, hinv0);
        double dg = g.dot(d);
        if (!(dg < 0.0)) {
          mem.clear();
          d = -hinv0.cwiseProduct(g);
          dg = g.dot(d);
        }
        double alpha = 1.0;
        if (mem.empty() && !obj.hessian_diag) alpha = std::min(1.0, 1.0 / d.norm());
        LineSearch ls(obj, opts, x, f, dg, d, res.evaluations);
        step = ls.run(alpha);
      }
      if (!step) {
        res.status = OptimStatus::LineSearchFailed;
        break;
      }
      Pair p{step->x - x, step->g - g, 0.0};
      const double sy = p.s.dot(p.y);
      if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
        p.rho = 1.0 / sy;
        mem.push_back(std::move(p));
        if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
      }
      const double f_old = f;
      x = std::move(step->x);
      g = std::move(step->g);
      f = step->f;
      ++res.iterations;
      res.trace.push_back({f, gnorm(g)});
      if (gnorm(g) < opts.tol) {
        res.status = OptimStatus::GradientTolerance;
        break;
      }
      if (opts.rel_value_tol > 0.0 && std::abs(f_old - f) <=
          opts.rel_value_tol * std::max({std::abs(f_old), std::abs(f), 1.0})) {
        res.status = OptimStatus::ValueTolerance;
        break;
      }
    }
  }
  res.x_opt = x;
  res.value = f;
  res.grad_norm = gnorm(g);
  res.converged = res.grad_norm < opts.tol;
  return res;
}

double fd_grad_check(const Objective &obj, const Vector &x, double h) {
  Vector g(obj.dim);
  obj.eval(x, g);
  Vector scratch(obj.dim);
  double worst = 0.0;
  for (Index j = 0; j < obj.dim; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (obj.eval(xp, scratch) - obj.eval(xm, scratch)) / (2.0 * h);
    worst = std::max(worst, std::abs(g[j] - fd) / std::max(1.0, std::abs(g[j])));
  }
  return worst;
}

}  // namespace rqk
