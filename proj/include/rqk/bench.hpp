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

// Timing harness: structured vs dense Gaussian densities, and end-to-end MAP
// fits, with log-log slope fits in m.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rqk/types.hpp"

namespace rqk {

enum class BenchMethod { NaiveCholesky, RqkCholesky, RqkEigen };
std::string to_string(BenchMethod m);

struct BenchRow {
  std::size_t n = 0;
  std::size_t m = 0;
  BenchMethod method = BenchMethod::RqkCholesky;
  double median_seconds = 0.0;
  int replicates = 0;
  int failures = 0;  ///< replicates excluded from the median
};

struct BenchResult {
  std::vector<BenchRow> rows;
  /// Cells skipped or degraded, one human-readable line each.
  std::vector<std::string> notes;
};

struct BenchOptions {
  int replicates = 5;  ///< at least 5; one extra warm-up run is discarded
  std::uint64_t seed = 0;
  /// Largest n*m for the dense arm; larger cells are left out.
  std::size_t dense_cap = 6400;
  double agreement_tol = 1e-6;
};

/// Times the three density arms per (n, m) after checking they agree to
/// `agreement_tol`. Throws Error with a diagnostic if they disagree.
BenchResult bench_density(const std::vector<std::size_t> &ns, const std::vector<std::size_t> &ms,
                          const BenchOptions &opts = {});

/// Times fit_map on freshly simulated joint-smoothing datasets (RqkCholesky
/// rows only). Diverged fits are counted in `failures`.
BenchResult bench_map(const std::vector<std::size_t> &ns, const std::vector<std::size_t> &ms,
                      const BenchOptions &opts = {});

struct SlopeFit {
  BenchMethod method;
  std::size_t n;
  double slope_m;
};

/// Least-squares slope of log(median_seconds) against log(m), per (method, n)
/// with at least two distinct m.
std::vector<SlopeFit> fit_slopes(const BenchResult &r);

void write_bench_csv(std::ostream &out, const BenchResult &r);

}  // namespace rqk
