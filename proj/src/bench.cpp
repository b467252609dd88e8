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

#include "rqk/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <random>

#include "rqk/dataset_io.hpp"
#include "rqk/errors.hpp"
#include "rqk/gaussian_model.hpp"
#include "rqk/rqk.hpp"
#include "rqk/simulate.hpp"

namespace rqk {

std::string to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::NaiveCholesky: return "naive_cholesky";
    case BenchMethod::RqkCholesky: return "rqk_cholesky";
    case BenchMethod::RqkEigen: return "rqk_eigen";
  }
  return "unknown";
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

template <class F>
double seconds(F &&f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

double naive_logdensity(const RqkMatrix &s, const Vector &x, std::size_t cap) {
  const Matrix dense = to_dense(s, cap);
  const Eigen::LLT<Matrix> llt(dense);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("Sigma", "naive density");
  const Vector w = llt.matrixL().solve(x);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (w.squaredNorm() + logdet + static_cast<double>(x.size()) * kLog2Pi);
}

double rqk_density(const RqkMatrix &s, const Vector &x, FactorMethod method) {
  return rqk_logdensity(rqk_factor(s, method), x);
}

// Matern 5/2 at (log 0.1, 0) for both levels, with a small nugget on A so the
// dense arm stays well conditioned at large n*m.
RqkMatrix bench_covariance(std::size_t n, std::size_t m) {
  const Grid grid = Grid::regular(n);
  const Hyperparams theta({"log_len", "log_var"}, (Vector(2) << std::log(0.1), 0.0).finished());
  const KernelSpec spec = KernelSpec::matern52(0, 1);
  Matrix a = build_kernel_matrix(spec, theta, grid);
  a.diagonal().array() += 0.1;
  return RqkMatrix(std::move(a), build_kernel_matrix(spec, theta, grid), m);
}

}  // namespace

BenchResult bench_density(const std::vector<std::size_t> &ns, const std::vector<std::size_t> &ms,
                          const BenchOptions &opts) {
  if (opts.replicates < 5) throw Error("bench: at least 5 replicates are required");
  BenchResult result;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  for (auto n : ns) {
    for (auto m : ms) {
      const RqkMatrix s = bench_covariance(n, m);
      Vector x(static_cast<Index>(n * m));
      for (Index k = 0; k < x.size(); ++k) x[k] = normal(rng);
      const bool dense_ok = n * m <= opts.dense_cap;

      // Correctness gate before any timing.
      const double ref_chol = rqk_density(s, x, FactorMethod::Cholesky);
      const double ref_eig = rqk_density(s, x, FactorMethod::Eigen);
      auto disagree = [&](double a, double b) { return !(std::abs(a - b) <= opts.agreement_tol); };
      if (disagree(ref_chol, ref_eig))
        throw Error("bench: arms disagree at n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                    ": rqk_cholesky " + format_double(ref_chol) + " vs rqk_eigen " +
                    format_double(ref_eig));
      if (dense_ok) {
        const double ref_naive = naive_logdensity(s, x, opts.dense_cap);
        if (disagree(ref_chol, ref_naive))
          throw Error("bench: arms disagree at n=" + std::to_string(n) + ", m=" +
                      std::to_string(m) + ": rqk_cholesky " + format_double(ref_chol) +
                      " vs naive_cholesky " + format_double(ref_naive));
      } else {
        result.notes.push_back("naive_cholesky skipped at n=" + std::to_string(n) + ", m=" +
                               std::to_string(m) + " (n*m above dense cap " +
                               std::to_string(opts.dense_cap) + ")");
      }

      auto time_arm = [&](BenchMethod method) {
        std::vector<double> t;
        volatile double sink = 0.0;
        for (int r = 0; r <= opts.replicates; ++r) {
          const double dt = seconds([&] {
            switch (method) {
              case BenchMethod::NaiveCholesky: sink = naive_logdensity(s, x, opts.dense_cap); break;
              case BenchMethod::RqkCholesky: sink = rqk_density(s, x, FactorMethod::Cholesky); break;
              case BenchMethod::RqkEigen: sink = rqk_density(s, x, FactorMethod::Eigen); break;
            }
          });
          if (r > 0) t.push_back(dt);  // r == 0 is the warm-up
        }
        (void)sink;
        result.rows.push_back({n, m, method, median(t), opts.replicates, 0});
      };
      if (dense_ok) time_arm(BenchMethod::NaiveCholesky);
      time_arm(BenchMethod::RqkCholesky);
      time_arm(BenchMethod::RqkEigen);
    }
  }
  return result;
}

BenchResult bench_map(const std::vector<std::size_t> &ns, const std::vector<std::size_t> &ms,
                      const BenchOptions &opts) {
  if (opts.replicates < 5) throw Error("bench: at least 5 replicates are required");
  BenchResult result;
  const Vector init_values =
      (Vector(5) << std::log(0.1), 0.0, std::log(0.1), 0.0, 0.0).finished();
  for (auto n : ns) {
    for (auto m : ms) {
      std::vector<double> t;
      int failures = 0;
      for (int r = 0; r <= opts.replicates; ++r) {
        GaussianSimOptions so;
        so.n = n;
        so.m = m;
        so.seed = opts.seed + static_cast<std::uint64_t>(r);
        const GaussianDataset d = simulate_gaussian(so);
        const GaussianModel model = GaussianModel::stationary(d.grid, d.y);
        const Hyperparams init(GaussianModel::stationary_names(), init_values);
        bool ok = true;
        const double dt = seconds([&] {
          try {
            fit_map(model, init);
          } catch (const OptimizerDiverged &) {
            ok = false;
          }
        });
        if (r == 0) continue;  // warm-up
        if (ok) {
          t.push_back(dt);
        } else {
          ++failures;
        }
      }
      if (t.empty()) {
        result.notes.push_back("bench_map: every replicate diverged at n=" + std::to_string(n) +
                               ", m=" + std::to_string(m));
        continue;
      }
      result.rows.push_back({n, m, BenchMethod::RqkCholesky, median(t),
                             static_cast<int>(t.size()), failures});
    }
  }
  return result;
}

std::vector<SlopeFit> fit_slopes(const BenchResult &r) {
  std::map<std::pair<int, std::size_t>, std::vector<std::pair<double, double>>> groups;
  for (const auto &row : r.rows)
    if (row.median_seconds > 0.0)
      groups[{static_cast<int>(row.method), row.n}].push_back(
          {std::log(static_cast<double>(row.m)), std::log(row.median_seconds)});
  std::vector<SlopeFit> out;
  for (const auto &[key, pts] : groups) {
    if (pts.size() < 2) continue;
    double mx = 0.0, my = 0.0;
    for (const auto &[x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto &[x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
    if (sxx == 0.0) continue;
    out.push_back({static_cast<BenchMethod>(key.first), key.second, sxy / sxx});
  }
  return out;
}

void write_bench_csv(std::ostream &out, const BenchResult &r) {
  out << "n,m,method,median_seconds,replicates\n";
  for (const auto &row : r.rows)
    out << row.n << ',' << row.m << ',' << to_string(row.method) << ','
        << format_double(row.median_seconds) << ',' << row.replicates << '\n';
}

}  // namespace rqk
