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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rqk/types.hpp"

namespace rqk {

/// Smooth objective to be minimized. `eval` returns f(x) and writes the
/// gradient into its second argument.
struct Objective {
  std::function<double(const Vector &, Vector &)> eval;
  Index dim = 0;
  /// Optional positive diagonal approximation of the Hessian. Its inverse is
  /// used as the initial inverse-Hessian scaling of L-BFGS.
  std::optional<Vector> hessian_diag;
};

struct LbfgsOptions {
  int memory = 10;
  double tol = 1e-6;  ///< on the gradient infinity norm
  int max_iter = 500;
  double rel_value_tol = 1e-10;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 40;
  /// After a step passes the Wolfe test on the first bracket phase, probe once
  /// more at the cubic-interpolated minimizer and keep it if it is better.
  bool refine_step = true;
};

enum class OptimStatus { GradientTolerance, ValueTolerance, MaxIterations, LineSearchFailed };

struct OptimResult {
  Vector x_opt;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;  ///< grad_norm < tol
  OptimStatus status = OptimStatus::MaxIterations;
  struct TraceEntry {
    double value;
    double grad_norm;
  };
  std::vector<TraceEntry> trace;
};

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// Throws OptimizerDiverged when the objective is not finite at x0. A failed
/// line search (after one restart from steepest descent) ends the run with
/// status LineSearchFailed rather than throwing, so callers keep the best
/// iterate.
OptimResult lbfgs(const Objective &obj, const Vector &x0, const LbfgsOptions &opts = {});

/// Largest |analytic_j - central_fd_j| / max(1, |analytic_j|) over coordinates.
double fd_grad_check(const Objective &obj, const Vector &x, double h = 1e-5);

std::string to_string(OptimStatus s);

}  // namespace rqk
