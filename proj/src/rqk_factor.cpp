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

#include <atomic>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "rqk/errors.hpp"
#include "rqk/rqk.hpp"

namespace rqk {

namespace {
std::atomic<std::size_t> g_factorizations{0};
}  // namespace

namespace instrument {
std::size_t factorization_count() { return g_factorizations.load(); }
}  // namespace instrument

SquareRoot SquareRoot::factor(const Matrix &m, FactorMethod method, const char *which) {
  if (m.rows() != m.cols()) throw DimensionMismatch("square root of a non-square matrix");
  ++g_factorizations;
  SquareRoot r;
  r.method_ = method;
  r.n_ = m.rows();
  if (method == FactorMethod::Cholesky) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite(which, "Cholesky");
    r.lower_ = llt.matrixL();
    const auto diag = r.lower_.diagonal().array();
    if (!(diag > 0.0).all() || !diag.allFinite()) throw NotPositiveDefinite(which, "Cholesky");
    r.logdet_ = 2.0 * diag.log().sum();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw NotPositiveDefinite(which, "eigendecomposition");
    if (!(es.eigenvalues().array() > 0.0).all()) throw NotPositiveDefinite(which, "eigendecomposition");
    r.evecs_ = es.eigenvectors();
    r.sqrt_evals_ = es.eigenvalues().array().sqrt();
    r.logdet_ = es.eigenvalues().array().log().sum();
  }
  return r;
}

Matrix SquareRoot::apply_t(const Matrix &z) const {
  if (method_ == FactorMethod::Cholesky) return lower_.triangularView<Eigen::Lower>() * z;
  return evecs_ * (sqrt_evals_.asDiagonal() * z);
}

Matrix SquareRoot::apply(const Matrix &z) const {
  if (method_ == FactorMethod::Cholesky)
    return lower_.transpose().triangularView<Eigen::Upper>() * z;
  return sqrt_evals_.asDiagonal() * (evecs_.transpose() * z);
}

Matrix SquareRoot::solve_t(const Matrix &y) const {
  if (method_ == FactorMethod::Cholesky) return lower_.triangularView<Eigen::Lower>().solve(y);
  return sqrt_evals_.cwiseInverse().asDiagonal() * (evecs_.transpose() * y);
}

Matrix SquareRoot::solve(const Matrix &y) const {
  if (method_ == FactorMethod::Cholesky)
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  return evecs_ * (sqrt_evals_.cwiseInverse().asDiagonal() * y);
}

Matrix SquareRoot::dense() const {
  if (method_ == FactorMethod::Cholesky) return lower_.transpose();
  return sqrt_evals_.asDiagonal() * evecs_.transpose();
}

Matrix SquareRoot::inverse_t_dense() const { return solve_t(Matrix::Identity(n_, n_)); }

RqkFactor::RqkFactor(SquareRoot u, SquareRoot v, std::size_t m)
    : u_(std::move(u)), v_(std::move(v)), rot_(m) {
  if (u_.n() != v_.n()) throw DimensionMismatch("rQK factor blocks differ in size");
}

RqkFactor rqk_factor(const RqkMatrix &s, FactorMethod method) {
  const double md = static_cast<double>(s.m());
  SquareRoot u = SquareRoot::factor(s.A() + md * s.K(), method, "A+mK");
  SquareRoot v = SquareRoot::factor(s.A(), method, "A");
  return RqkFactor(std::move(u), std::move(v), s.m());
}

namespace {

Matrix reshape_checked(const RqkFactor &f, const Vector &x, const char *what) {
  if (x.size() != f.dim()) throw DimensionMismatch(std::string(what) + ": |x| != mn");
  return as_matrix(x, f.n(), static_cast<Index>(f.m()));
}

// Column 0 goes through the A+mK root, the rest through the A root.
template <typename Head, typename Tail>
Matrix per_column(const Matrix &x, Head head, Tail tail) {
  Matrix out(x.rows(), x.cols());
  out.col(0) = head(x.col(0));
  if (x.cols() > 1) out.rightCols(x.cols() - 1) = tail(x.rightCols(x.cols() - 1));
  return out;
}

}  // namespace

Vector correlate(const RqkFactor &f, const Vector &z) {
  const Matrix zm = reshape_checked(f, z, "correlate");
  const Matrix y = per_column(
      zm, [&](const Matrix &c) { return f.U().apply_t(c); },
      [&](const Matrix &c) { return f.V().apply_t(c); });
  return vec(f.rotation().apply(y));
}

Vector whiten(const RqkFactor &f, const Vector &x) {
  const Matrix y = f.rotation().apply(reshape_checked(f, x, "whiten"));
  return vec(per_column(
      y, [&](const Matrix &c) { return f.U().solve_t(c); },
      [&](const Matrix &c) { return f.V().solve_t(c); }));
}

Vector factor_apply(const RqkFactor &f, const Vector &v) {
  const Matrix y = f.rotation().apply(reshape_checked(f, v, "factor_apply"));
  return vec(per_column(
      y, [&](const Matrix &c) { return f.U().apply(c); },
      [&](const Matrix &c) { return f.V().apply(c); }));
}

Vector factor_solve(const RqkFactor &f, const Vector &v) {
  const Matrix y = per_column(
      reshape_checked(f, v, "factor_solve"), [&](const Matrix &c) { return f.U().solve(c); },
      [&](const Matrix &c) { return f.V().solve(c); });
  return vec(f.rotation().apply(y));
}

Matrix rqk_solve_columns(const RqkFactor &f, const Matrix &b) {
  if (b.rows() != f.n() || b.cols() != static_cast<Index>(f.m()))
    throw DimensionMismatch("rqk_solve: operand has wrong shape");
  const Matrix y = per_column(
      f.rotation().apply(b), [&](const Matrix &c) { return f.U().solve_full(c); },
      [&](const Matrix &c) { return f.V().solve_full(c); });
  return f.rotation().apply(y);
}

Vector rqk_solve(const RqkFactor &f, const Vector &b) {
  return vec(rqk_solve_columns(f, reshape_checked(f, b, "rqk_solve")));
}

double rqk_logdet(const RqkFactor &f) {
  return f.logdet_ApmK() + static_cast<double>(f.m() - 1) * f.logdet_A();
}

double rqk_logdensity(const RqkFactor &f, const Vector &x) {
  const Vector z = whiten(f, x);
  const double dim = static_cast<double>(f.dim());
  return -0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * rqk_logdet(f) -
         0.5 * z.squaredNorm();
}

Matrix to_dense(const RqkFactor &f, std::size_t cap) {
  if (static_cast<std::size_t>(f.dim()) > cap)
    throw CapExceeded("dense materialization of the rQK factor exceeds cap");
  const Index n = f.n();
  const auto m = static_cast<Index>(f.m());
  const Matrix b = f.rotation().dense();
  const Matrix u = f.U().dense();
  const Matrix v = f.V().dense();
  Matrix g(f.dim(), f.dim());
  for (Index k = 0; k < m; ++k)
    for (Index l = 0; l < m; ++l) g.block(k * n, l * n, n, n) = b(k, l) * (k == 0 ? u : v);
  return g;
}

}  // namespace rqk
