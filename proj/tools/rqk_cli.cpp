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

// Command-line front end: simulate, fit-gaussian, fit-poisson, bench.
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rqk/bench.hpp"
#include "rqk/dataset_io.hpp"
#include "rqk/errors.hpp"
#include "rqk/gaussian_model.hpp"
#include "rqk/poisson_lgm.hpp"
#include "rqk/simulate.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace rqk;

constexpr int kFormatVersion = 1;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t> &flag) {
  if (flag) return *flag;
  if (const char *env = std::getenv("RQK_SEED")) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(env, &pos);
      if (pos == std::string(env).size()) return v;
    } catch (const std::exception &) {
    }
    throw InputError(std::string("RQK_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

json to_json(const Vector &v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Row-major: one inner array per grid point.
json to_json(const Matrix &m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

json theta_json(const Hyperparams &theta) {
  json t = json::object();
  for (std::size_t j = 0; j < theta.size(); ++j) t[theta.names()[j]] = theta[j];
  return t;
}

void write_json(const std::string &path, const json &j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

double normal_quantile(double p) {
  // Bisection on erfc; only used for band half-widths.
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vector parse_values(const std::vector<double> &v, std::size_t expected, const char *what) {
  if (v.size() != expected)
    throw InputError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                     std::to_string(v.size()));
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = v[i];
  return out;
}

// Applies NAME=VALUE pairs; returns the fixed indices.
std::vector<std::size_t> apply_fixes(Hyperparams &theta, const std::vector<std::string> &fixes) {
  std::vector<std::size_t> idx;
  for (const auto &f : fixes) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw InputError("--fix expects NAME=VALUE, got '" + f + "'");
    const std::string name = f.substr(0, eq);
    double value = 0.0;
    try {
      std::size_t pos = 0;
      value = std::stod(f.substr(eq + 1), &pos);
      if (pos != f.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      throw InputError("--fix: bad value in '" + f + "'");
    }
    std::size_t j = 0;
    try {
      j = theta.index_of(name);
    } catch (const Error &) {
      throw InputError("--fix: unknown hyperparameter '" + name + "'");
    }
    theta = theta.with(j, value);
    idx.push_back(j);
  }
  return idx;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string kind = "gaussian";
  std::size_t n = 100;
  std::size_t m = 6;
  std::optional<std::uint64_t> seed;
  double sigma = 1.0;
  double delta = 0.02;
  double baseline = PoissonSimOptions{}.log_rate_baseline;
  std::string out;
  std::string truth;
};

int run_simulate(const SimulateArgs &a) {
  const std::uint64_t seed = resolve_seed(a.seed);
  const std::string truth_path = a.truth.empty() ? a.out + ".truth.csv" : a.truth;
  if (a.kind == "gaussian") {
    GaussianSimOptions o;
    o.n = a.n;
    o.m = a.m;
    o.sigma = a.sigma;
    o.seed = seed;
    const GaussianDataset d = simulate_gaussian(o);
    write_dataset_csv(a.out, "x", d.grid, d.y, "y");
    Matrix truth(d.g_true.rows(), d.g_true.cols() + 1);
    truth << d.f_true, d.g_true;
    std::ofstream t(truth_path);
    if (!t) throw IoError("cannot write " + truth_path);
    std::ostringstream body;
    write_dataset_csv(body, "x", d.grid, truth, "g");
    // Rename the first value column to f: g1 holds f, g2.. hold g_1..
    std::string s = body.str();
    std::string header = "x,f";
    for (Index i = 1; i <= d.g_true.cols(); ++i) header += ",g" + std::to_string(i);
    s = header + s.substr(s.find('\n'));
    t << s;
  } else if (a.kind == "poisson") {
    PoissonSimOptions o;
    o.n = a.n;
    o.m = a.m;
    o.bin_width = a.delta;
    o.log_rate_baseline = a.baseline;
    o.seed = seed;
    const PoissonDataset d = simulate_poisson(o);
    write_dataset_csv(a.out, "t", d.grid, d.counts, "c");
    Matrix truth(d.log_intensity.rows(), d.log_intensity.cols() + 1);
    truth << d.f_true, d.log_intensity;
    std::ostringstream body;
    write_dataset_csv(body, "t", d.grid, truth, "g");
    std::string s = body.str();
    std::string header = "t,f";
    for (Index i = 1; i <= d.log_intensity.cols(); ++i) header += ",g" + std::to_string(i);
    s = header + s.substr(s.find('\n'));
    std::ofstream t(truth_path);
    if (!t) throw IoError("cannot write " + truth_path);
    t << s;
  } else {
    throw InputError("--kind must be gaussian or poisson");
  }
  return 0;
}

// ---- fit-gaussian ---------------------------------------------------------

struct FitGaussianArgs {
  std::string data;
  std::vector<double> init;
  double prior_sd = 0.0;
  bool mcmc = false;
  std::size_t n_samples = 1000;
  std::size_t n_burn = 200;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> fixes;
  std::string out;
};

bool fit_ok(const OptimResult &r) {
  return r.status == OptimStatus::GradientTolerance || r.status == OptimStatus::ValueTolerance ||
         r.grad_norm < 1e-3;
}

json diagnostics(const OptimResult &r, std::uint64_t seed) {
  return json{{"iterations", r.iterations},
              {"evaluations", r.evaluations},
              {"grad_norm", r.grad_norm},
              {"status", to_string(r.status)},
              {"converged", r.converged},
              {"seed", seed}};
}

Vector default_gaussian_init(const Matrix &y) {
  const double mean = y.mean();
  const double var = std::max((y.array() - mean).square().mean(), 1e-6);
  return (Vector(5) << std::log(0.1), std::log(0.5 * var), std::log(0.1), std::log(0.25 * var),
          std::log(0.25 * var))
      .finished();
}

int run_fit_gaussian(const FitGaussianArgs &a) {
  const std::uint64_t seed = resolve_seed(a.seed);
  const Dataset d = read_dataset_csv(a.data);
  if (d.axis != "x") throw InputError("fit-gaussian expects an 'x,y1..ym' dataset");
  const GaussianModel model = GaussianModel::stationary(d.grid, d.values);
  Hyperparams init(GaussianModel::stationary_names(),
                   a.init.empty() ? default_gaussian_init(d.values) : parse_values(a.init, 5, "--init"));
  FitOptions fo;
  fo.fixed = apply_fixes(init, a.fixes);
  std::optional<LogPrior> prior;
  if (a.prior_sd > 0.0)
    prior = independent_normal_prior(init.values(), Vector::Constant(5, a.prior_sd));

  json out;
  out["format_version"] = kFormatVersion;
  out["model"] = "gaussian";
  MapFit fit;
  try {
    fit = fit_map(model, init, prior, fo);
  } catch (const OptimizerDiverged &e) {
    out["error"] = e.what();
    out["diagnostics"] = json{{"seed", seed}};
    write_json(a.out, out);
    throw;
  }
  const Hyperparams &th = fit.theta_star;
  const ConditionalPosterior pf = posterior_f(model, th);
  const ConditionalPosterior pg = posterior_g(model, th);
  const double z = normal_quantile(1.0 - a.alpha / 2.0);

  out["theta_star"] = theta_json(th);
  out["logdensity_at_opt"] = fit.log_objective;
  out["means"] = to_json(Matrix(as_matrix(pg.mean, model.n(), static_cast<Index>(model.m()))));
  out["g_sd"] = to_json(Matrix(as_matrix(pg.marginal_sd, model.n(), static_cast<Index>(model.m()))));
  out["f_mean"] = to_json(pf.mean);
  out["f_sd"] = to_json(pf.marginal_sd);
  out["bands"] = json{{"lower", to_json(Vector(pf.mean - z * pf.marginal_sd))},
                      {"upper", to_json(Vector(pf.mean + z * pf.marginal_sd))},
                      {"alpha", a.alpha}};
  if (a.mcmc) {
    MhOptions mo;
    mo.n_samples = a.n_samples;
    mo.n_burn = a.n_burn;
    mo.seed = seed;
    const PosteriorSamples ps = mh_sample(model, th, fit.covariance, mo, prior);
    std::vector<Vector> means, sds;
    means.reserve(ps.thetas.size());
    sds.reserve(ps.thetas.size());
    for (const auto &t : ps.thetas) {
      const ConditionalPosterior p = posterior_f(model, t);
      means.push_back(p.mean);
      sds.push_back(p.marginal_sd);
    }
    const ConfidenceBand band = confidence_band(means, sds, a.alpha);
    json samples = json::array();
    for (const auto &t : ps.thetas) samples.push_back(to_json(t.values()));
    out["mcmc"] = json{{"bands", {{"lower", to_json(band.lower)},
                                  {"upper", to_json(band.upper)},
                                  {"alpha", a.alpha}}},
                       {"acceptance_rate", ps.acceptance_rate},
                       {"n_samples", ps.thetas.size()},
                       {"n_burn", a.n_burn},
                       {"samples", std::move(samples)}};
  }
  out["diagnostics"] = diagnostics(fit.optim, seed);
  write_json(a.out, out);
  return fit_ok(fit.optim) ? 0 : 2;
}

// ---- fit-poisson ----------------------------------------------------------

struct FitPoissonArgs {
  std::string data;
  double delta = 0.0;
  bool nonstationary = false;
  double t0 = Mask{}.t0;
  double s_t = Mask{}.s_t;
  std::vector<double> init;
  std::vector<std::string> fixes;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_fit_poisson(const FitPoissonArgs &a) {
  const std::uint64_t seed = resolve_seed(a.seed);
  if (!(a.delta > 0.0)) throw InputError("--delta must be positive");
  const Dataset d = read_dataset_csv(a.data);
  if (d.axis != "t") throw InputError("fit-poisson expects a 't,c1..cm' dataset");
  PoissonModel model = [&] {
    try {
      return a.nonstationary ? PoissonModel::nonstationary(d.grid, d.values, a.delta, Mask{a.t0, a.s_t})
                             : PoissonModel::stationary(d.grid, d.values, a.delta);
    } catch (const DimensionMismatch &) {
      throw;
    } catch (const Error &e) {
      throw InputError(e.what());
    }
  }();
  const auto names =
      a.nonstationary ? PoissonModel::nonstationary_names() : PoissonModel::stationary_names();
  Vector init_values;
  if (!a.init.empty()) {
    init_values = parse_values(a.init, names.size(), "--init");
  } else if (a.nonstationary) {
    init_values = (Vector(6) << std::log(0.2), std::log(0.5), std::log(0.2), std::log(0.5),
                   std::log(0.2), std::log(0.25)).finished();
  } else {
    init_values = (Vector(4) << std::log(0.2), std::log(0.5), std::log(0.2), std::log(0.25)).finished();
  }
  Hyperparams init(names, init_values);
  LaplaceFitOptions lo;
  lo.fixed = apply_fixes(init, a.fixes);
  lo.laplace.hutchinson_seed = seed;

  json out;
  out["format_version"] = kFormatVersion;
  out["model"] = a.nonstationary ? "poisson_nonstationary" : "poisson";
  LaplaceFit fit;
  try {
    fit = fit_laplace_map(model, init, lo);
  } catch (const OptimizerDiverged &e) {
    out["error"] = e.what();
    out["diagnostics"] = json{{"seed", seed}};
    write_json(a.out, out);
    throw;
  }
  const Index n = model.n();
  const Index m = static_cast<Index>(model.m());
  const Matrix xs = as_matrix(fit.mode.x_star, n, m);
  const QkSolver solver(fit.mode.hessian);
  const auto inv = solver.inverse_blocks();
  Matrix sd(n, m);
  for (Index i = 0; i < m; ++i)
    sd.col(i) = inv.diagonal[static_cast<std::size_t>(i)].diagonal().cwiseMax(0.0).cwiseSqrt();
  // E[f | g = x*] under the prior.
  const RqkMatrix prior = model.prior().covariance(fit.theta_star, model.m());
  const Matrix head = prior.A() + static_cast<double>(m) * prior.K();
  const Vector f_mean = prior.K() * head.llt().solve(Vector(xs.rowwise().sum()));
  const double z = normal_quantile(1.0 - a.alpha / 2.0);

  out["theta_star"] = theta_json(fit.theta_star);
  out["logdensity_at_opt"] = fit.value;
  out["means"] = to_json(xs);
  out["f_mean"] = to_json(f_mean);
  out["intensities"] = to_json(Matrix(xs.array().exp().matrix()));
  out["bands"] = json{{"lower", to_json(Matrix(xs - z * sd))},
                      {"upper", to_json(Matrix(xs + z * sd))},
                      {"alpha", a.alpha}};
  out["delta"] = a.delta;
  if (a.nonstationary) out["mask"] = json{{"t0", a.t0}, {"s_t", a.s_t}};
  json diag = diagnostics(fit.optim, seed);
  diag["mode_iterations"] = fit.mode.iterations;
  diag["mode_grad_norm"] = fit.mode.grad_norm;
  diag["latent_clamped"] = fit.mode.clamped;
  diag["laplace_grad_norm"] = fit.gradient.lpNorm<Eigen::Infinity>();
  out["diagnostics"] = std::move(diag);
  write_json(a.out, out);
  return fit_ok(fit.optim) ? 0 : 2;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string mode = "density";
  std::vector<std::size_t> ns{100};
  std::vector<std::size_t> ms{2, 4, 8, 16, 32, 64};
  int replicates = 5;
  std::size_t dense_cap = BenchOptions{}.dense_cap;
  std::optional<std::uint64_t> seed;
  std::string out = "bench";
};

int run_bench(const BenchArgs &a) {
  BenchOptions o;
  o.replicates = a.replicates;
  o.seed = resolve_seed(a.seed);
  o.dense_cap = a.dense_cap;
  BenchResult r;
  if (a.mode == "density") {
    r = bench_density(a.ns, a.ms, o);
  } else if (a.mode == "map") {
    r = bench_map(a.ns, a.ms, o);
  } else {
    throw InputError("--mode must be density or map");
  }
  {
    std::ofstream csv(a.out + ".csv");
    if (!csv) throw IoError("cannot write " + a.out + ".csv");
    write_bench_csv(csv, r);
  }
  json slopes = json::array();
  for (const auto &s : fit_slopes(r)) {
    slopes.push_back(json{{"method", to_string(s.method)}, {"n", s.n}, {"slope_m", s.slope_m}});
    std::cout << to_string(s.method) << " n=" << s.n << " slope_m=" << format_double(s.slope_m)
              << '\n';
  }
  json notes = json::array();
  for (const auto &n : r.notes) {
    notes.push_back(n);
    std::cerr << "note: " << n << '\n';
  }
  write_json(a.out + "_slopes.json",
             json{{"format_version", kFormatVersion}, {"mode", a.mode}, {"slopes", slopes},
                  {"notes", notes}});
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Two-level functional models with restricted quasi-Kronecker covariances"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto *s = app.add_subcommand("simulate", "Write a synthetic dataset and its truth sidecar");
  s->add_option("--kind", sim.kind, "gaussian or poisson")->check(CLI::IsMember({"gaussian", "poisson"}));
  s->add_option("--n", sim.n, "grid points")->check(CLI::PositiveNumber);
  s->add_option("--m", sim.m, "functions")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "RNG seed (falls back to RQK_SEED, then 0)");
  s->add_option("--sigma", sim.sigma, "noise sd for the gaussian kind")->check(CLI::NonNegativeNumber);
  s->add_option("--delta", sim.delta, "bin width for the poisson kind")->check(CLI::PositiveNumber);
  s->add_option("--log-rate", sim.baseline, "baseline log intensity for the poisson kind");
  s->add_option("--out", sim.out, "dataset CSV")->required();
  s->add_option("--truth", sim.truth, "truth CSV (default <out>.truth.csv)");

  FitGaussianArgs fg;
  auto *g = app.add_subcommand("fit-gaussian", "MAP fit of the joint smoothing model");
  g->add_option("--data", fg.data, "x,y1..ym CSV")->required();
  g->add_option("--init", fg.init, "5 initial log hyperparameters")->delimiter(',');
  g->add_option("--prior-sd", fg.prior_sd, "sd of independent normal priors centred on init");
  g->add_flag("--mcmc", fg.mcmc, "sample hyperparameters and add mixture bands");
  g->add_option("--n-samples", fg.n_samples, "MH samples kept");
  g->add_option("--n-burn", fg.n_burn, "MH burn-in");
  g->add_option("--alpha", fg.alpha, "band level")->check(CLI::Range(1e-6, 0.999999));
  g->add_option("--fix", fg.fixes, "hold NAME=VALUE fixed");
  g->add_option("--seed", fg.seed, "RNG seed (falls back to RQK_SEED, then 0)");
  g->add_option("--out", fg.out, "fit JSON")->required();

  FitPoissonArgs fp;
  auto *p = app.add_subcommand("fit-poisson", "Laplace MAP fit of the spike-count model");
  p->add_option("--data", fp.data, "t,c1..cm CSV")->required();
  p->add_option("--delta", fp.delta, "bin width")->required();
  p->add_flag("--nonstationary", fp.nonstationary, "masked two-kernel prior on the mean");
  p->add_option("--t0", fp.t0, "mask centre");
  p->add_option("--s-t", fp.s_t, "mask width")->check(CLI::PositiveNumber);
  p->add_option("--init", fp.init, "initial log hyperparameters")->delimiter(',');
  p->add_option("--fix", fp.fixes, "hold NAME=VALUE fixed");
  p->add_option("--alpha", fp.alpha, "band level")->check(CLI::Range(1e-6, 0.999999));
  p->add_option("--seed", fp.seed, "RNG seed (falls back to RQK_SEED, then 0)");
  p->add_option("--out", fp.out, "fit JSON")->required();

  BenchArgs bn;
  auto *b = app.add_subcommand("bench", "Scaling benchmarks");
  b->add_option("--mode", bn.mode, "density or map")->check(CLI::IsMember({"density", "map"}));
  b->add_option("--ns", bn.ns, "grid sizes")->delimiter(',');
  b->add_option("--ms", bn.ms, "function counts")->delimiter(',');
  b->add_option("--replicates", bn.replicates, "timed replicates (>= 5)")->check(CLI::Range(5, 1000000));
  b->add_option("--dense-cap", bn.dense_cap, "largest n*m for the dense arm");
  b->add_option("--seed", bn.seed, "RNG seed (falls back to RQK_SEED, then 0)");
  b->add_option("--out", bn.out, "output prefix for .csv and _slopes.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*g) return run_fit_gaussian(fg);
    if (*p) return run_fit_poisson(fp);
    if (*b) return run_bench(bn);
  } catch (const InputError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IoError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionMismatch &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
