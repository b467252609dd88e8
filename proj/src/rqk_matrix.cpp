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

#include <algorithm>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rqk/errors.hpp"
#include "rqk/rqk.hpp"

namespace rqk {

namespace {

void check_cap(Index dim, std::size_t cap) {
  if (static_cast<std::size_t>(dim) > cap)
    throw CapExceeded("dense materialization of dimension " + std::to_string(dim) +
                      " exceeds cap " + std::to_string(cap));
}

Matrix checked_inverse(const Matrix &m, const char *which) {
  Eigen::PartialPivLU<Matrix> lu(m);
  if (!(lu.rcond() > std::numeric_limits<double>::epsilon() * 1e-2))
    throw SingularMatrix(std::string("matrix ") + which + " is singular");
  return lu.inverse();
}

}  // namespace

RqkMatrix::RqkMatrix(Matrix a, Matrix k, std::size_t m)
    : a_(std::move(a)), k_(std::move(k)), m_(m) {
  if (m_ == 0) throw Error("rQK replication count must be >= 1");
  if (a_.rows() != a_.cols() || k_.rows() != k_.cols() || a_.rows() != k_.rows())
    throw DimensionMismatch("rQK blocks A and K must be square with equal size");
}

Matrix rqk_matmul_columns(const RqkMatrix &s, const Matrix &x) {
  if (x.rows() != s.n() || x.cols() != static_cast<Index>(s.m()))
    throw DimensionMismatch("rqk_matvec: operand has wrong shape");
  Matrix out = s.A() * x;
  out.colwise() += s.K() * x.rowwise().sum();
  return out;
}

Vector rqk_matvec(const RqkMatrix &s, const Vector &x) {
  if (x.size() != s.dim()) throw DimensionMismatch("rqk_matvec: |x| != mn");
  return vec(rqk_matmul_columns(s, as_matrix(x, s.n(), static_cast<Index>(s.m()))));
}

RqkMatrix rqk_mul(const RqkMatrix &s1, const RqkMatrix &s2) {
  if (s1.n() != s2.n() || s1.m() != s2.m())
    throw DimensionMismatch("rqk_mul: operands differ in n or m");
  const double md = static_cast<double>(s1.m());
  Matrix a = s1.A() * s2.A();
  Matrix k = s1.A() * s2.K() + s1.K() * s2.A() + md * (s1.K() * s2.K());
  return RqkMatrix(std::move(a), std::move(k), s1.m());
}

RqkMatrix rqk_inverse(const RqkMatrix &s) {
  const double md = static_cast<double>(s.m());
  Matrix a_inv = checked_inverse(s.A(), "A");
  Matrix head_inv = checked_inverse(s.A() + md * s.K(), "A+mK");
  Matrix k = (head_inv - a_inv) / md;
  return RqkMatrix(std::move(a_inv), std::move(k), s.m());
}

Matrix to_dense(const RqkMatrix &s, std::size_t cap) {
  check_cap(s.dim(), cap);
  const Index n = s.n();
  const auto m = static_cast<Index>(s.m());
  Matrix d(s.dim(), s.dim());
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i) d.block(i * n, j * n, n, n) = s.K();
  for (Index i = 0; i < m; ++i) d.block(i * n, i * n, n, n) += s.A();
  return d;
}

Vector EigenRqk::spectrum() const {
  const Index n = eigvals_head.size();
  const auto m = static_cast<Index>(rotation.m());
  Vector all(n * m);
  all.head(n) = eigvals_head;
  for (Index i = 1; i < m; ++i) all.segment(i * n, n) = eigvals_tail;
  std::sort(all.data(), all.data() + all.size());
  return all;
}

EigenRqk rqk_eigen(const RqkMatrix &s) {
  const double md = static_cast<double>(s.m());
  Eigen::SelfAdjointEigenSolver<Matrix> head(s.A() + md * s.K());
  Eigen::SelfAdjointEigenSolver<Matrix> tail(s.A());
  if (head.info() != Eigen::Success || tail.info() != Eigen::Success)
    throw Error("rqk_eigen: eigendecomposition did not converge");
  EigenRqk e;
  e.eigvals_head = head.eigenvalues();
  e.eigvals_tail = tail.eigenvalues();
  e.eigvecs_head = head.eigenvectors();
  e.eigvecs_tail = tail.eigenvectors();
  e.rotation = BlockRotation(s.m());
  return e;
}

}  // namespace rqk
