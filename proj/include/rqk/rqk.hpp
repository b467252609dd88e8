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

// Restricted quasi-Kronecker (rQK) and quasi-Kronecker (QK) matrices.
//
// An rQK matrix is Sigma = I_m (x) A + ee^t (x) K: an m x m grid of n x n
// blocks with A + K on the diagonal and K elsewhere. Conjugating by the block
// rotation R = B (x) I_n turns it into bdiag(A + mK, A, ..., A), which is what
// every fast routine below exploits. Vectors of length mn are vec(X) of an
// n x m matrix X, one column per function.

#include <memory>
#include <cstddef>
#include <vector>

#include "rqk/types.hpp"

namespace rqk {

/// Largest dimension to_dense() will materialize by default.
inline constexpr std::size_t kDenseCap = 4096;

/// Symmetric orthogonal m x m matrix B with first row e^t / sqrt(m):
///
///   B = [ a  a    a   ...  ]
///       [ a  b+1  b   ...  ]
///       [ a  b    b+1 ...  ]
///
/// with a = 1/sqrt(m) and b = -(1 + 1/sqrt(m)) / (m - 1). Products with B cost
/// O(m) per row.
class BlockRotation {
 public:
  explicit BlockRotation(std::size_t m);

  std::size_t m() const { return m_; }
  double a() const { return a_; }
  /// Undefined (zero) for m = 1, where B = [1].
  double b() const { return b_; }

  Matrix dense() const;

  /// X B in O(nm); X is n x m.
  Matrix apply(const Matrix &x) const;
  /// X (B o B) in O(nm), o the elementwise product.
  Matrix apply_squared(const Matrix &x) const;

 private:
  std::size_t m_;
  double a_;
  double b_;
};

Matrix rotation_apply(const BlockRotation &rot, const Matrix &x);

/// Sigma = I_m (x) A + ee^t (x) K.
class RqkMatrix {
 public:
  RqkMatrix(Matrix a, Matrix k, std::size_t m);

  const Matrix &A() const { return a_; }
  const Matrix &K() const { return k_; }
  std::size_t m() const { return m_; }
  Index n() const { return a_.rows(); }
  Index dim() const { return n() * static_cast<Index>(m_); }

 private:
  Matrix a_;
  Matrix k_;
  std::size_t m_;
};

/// Sigma x in O(n^2 m).
Vector rqk_matvec(const RqkMatrix &s, const Vector &x);
/// Same as rqk_matvec on the n x m reshape of x.
Matrix rqk_matmul_columns(const RqkMatrix &s, const Matrix &x);

/// rQK(A1, K1) rQK(A2, K2) = rQK(A1 A2, A1 K2 + K1 A2 + m K1 K2).
RqkMatrix rqk_mul(const RqkMatrix &s1, const RqkMatrix &s2);

/// rQK(A, K)^{-1} = rQK(A^{-1}, ((A + mK)^{-1} - A^{-1}) / m).
RqkMatrix rqk_inverse(const RqkMatrix &s);

Matrix to_dense(const RqkMatrix &s, std::size_t cap = kDenseCap);

enum class FactorMethod { Cholesky, Eigen };

/// Square root U of an SPD matrix M with U^t U = M, backed either by the
/// Cholesky factor (U = L^t) or the eigendecomposition (U = diag(sqrt(l)) E^t).
class SquareRoot {
 public:
  /// Throws NotPositiveDefinite naming `which` on failure.
  static SquareRoot factor(const Matrix &m, FactorMethod method, const char *which);

  FactorMethod method() const { return method_; }
  Index n() const { return n_; }

  Matrix apply_t(const Matrix &z) const;  ///< U^t z
  Matrix apply(const Matrix &z) const;    ///< U z
  Matrix solve_t(const Matrix &y) const;  ///< U^{-t} y
  Matrix solve(const Matrix &y) const;    ///< U^{-1} y
  /// M^{-1} y.
  Matrix solve_full(const Matrix &y) const { return solve(solve_t(y)); }

  Matrix dense() const;
  /// Explicit U^{-t}; O(n^3).
  Matrix inverse_t_dense() const;
  /// log det M.
  double logdet() const { return logdet_; }

 private:
  FactorMethod method_ = FactorMethod::Cholesky;
  Index n_ = 0;
  Matrix lower_;  // Cholesky: L with M = L L^t
  Matrix evecs_;  // Eigen: E
  Vector sqrt_evals_;
  double logdet_ = 0.0;
};

/// Implicit square root G = bdiag(U, V, ..., V) R of an rQK matrix, with
/// U^t U = A + mK and V^t V = A, so that Sigma = G^t G.
class RqkFactor {
 public:
  RqkFactor(SquareRoot u, SquareRoot v, std::size_t m);

  const SquareRoot &U() const { return u_; }
  const SquareRoot &V() const { return v_; }
  FactorMethod method() const { return u_.method(); }
  const BlockRotation &rotation() const { return rot_; }
  std::size_t m() const { return rot_.m(); }
  Index n() const { return u_.n(); }
  Index dim() const { return n() * static_cast<Index>(m()); }
  double logdet_ApmK() const { return u_.logdet(); }
  double logdet_A() const { return v_.logdet(); }

 private:
  SquareRoot u_;
  SquareRoot v_;
  BlockRotation rot_;
};

/// Performs exactly two n x n factorizations (A + mK and A).
RqkFactor rqk_factor(const RqkMatrix &s, FactorMethod method = FactorMethod::Cholesky);

Vector correlate(const RqkFactor &f, const Vector &z);     ///< G^t z
Vector whiten(const RqkFactor &f, const Vector &x);        ///< G^{-t} x
Vector factor_apply(const RqkFactor &f, const Vector &v);  ///< G v
Vector factor_solve(const RqkFactor &f, const Vector &v);  ///< G^{-1} v
/// Sigma^{-1} b in O(mn^2).
Vector rqk_solve(const RqkFactor &f, const Vector &b);
Matrix rqk_solve_columns(const RqkFactor &f, const Matrix &b);

/// log det Sigma = log det(A + mK) + (m - 1) log det A.
double rqk_logdet(const RqkFactor &f);

/// log N(x; 0, Sigma), including the -(mn/2) log(2 pi) constant.
double rqk_logdensity(const RqkFactor &f, const Vector &x);

/// Materializes G (mn x mn).
Matrix to_dense(const RqkFactor &f, std::size_t cap = kDenseCap);

/// Spectrum of Sigma: eigenpairs of A + mK (once) and of A (m - 1 times),
/// with eigenvectors of Sigma given by R^t bdiag(E_head, E_tail, ...).
struct EigenRqk {
  Vector eigvals_head;
  Vector eigvals_tail;
  Matrix eigvecs_head;
  Matrix eigvecs_tail;
  BlockRotation rotation{1};

  /// Full sorted multiset of mn eigenvalues.
  Vector spectrum() const;
};

EigenRqk rqk_eigen(const RqkMatrix &s);

/// Q = bdiag(A_1, ..., A_m) + u v^t (x) K.
class QkMatrix {
 public:
  QkMatrix() = default;
  QkMatrix(std::vector<Matrix> blocks, Vector u, Vector v, Matrix k);

  const std::vector<Matrix> &blocks() const { return blocks_; }
  const Vector &u() const { return u_; }
  const Vector &v() const { return v_; }
  const Matrix &K() const { return k_; }
  std::size_t m() const { return blocks_.size(); }
  Index n() const { return k_.rows(); }
  Index dim() const { return n() * static_cast<Index>(m()); }

 private:
  std::vector<Matrix> blocks_;
  Vector u_;
  Vector v_;
  Matrix k_;
};

struct SignedLogDet {
  int sign = 1;
  double logabsdet = 0.0;
};

Vector qk_matvec(const QkMatrix &q, const Vector &x);
Matrix to_dense(const QkMatrix &q, std::size_t cap = kDenseCap);

/// Cached Sherman-Morrison-Woodbury solver for a QK matrix.
///
/// K is factored as E S E^t (symmetric eigendecomposition, zero modes
/// dropped) so that u v^t (x) K = (u (x) E S)(v (x) E)^t holds for indefinite K.
/// The capacitance matrix P = I_r + sum_i u_i v_i E^t A_i^{-1} E S is r x r,
/// r = rank K <= n. Setup costs O(mn^3); each solve costs O(mn^2).
class QkSolver {
 public:
  explicit QkSolver(const QkMatrix &q);

  std::size_t m() const { return m_; }
  Index n() const { return n_; }
  Index rank() const { return l1_.cols(); }

  Vector solve(const Vector &b) const;
  SignedLogDet logdet() const { return logdet_; }

  /// Diagonal n x n blocks of Q^{-1} together with the sum of all m^2 blocks.
  struct InverseBlocks {
    std::vector<Matrix> diagonal;
    Matrix block_sum;
  };
  InverseBlocks inverse_blocks() const;

 private:
  struct BlockFactor;
  Matrix block_solve(std::size_t i, const Matrix &rhs) const;

  std::size_t m_;
  Index n_;
  std::vector<std::shared_ptr<const BlockFactor>> blocks_;
  Vector u_;
  Vector v_;
  Matrix l1_;  // E S
  Matrix l2_;  // E
  std::shared_ptr<const Eigen::PartialPivLU<Matrix>> capacitance_;
  SignedLogDet logdet_;
};

Vector qk_solve(const QkMatrix &q, const Vector &b);
SignedLogDet qk_logdet(const QkMatrix &q);

namespace instrument {
/// Number of n x n factorizations performed by SquareRoot::factor so far.
std::size_t factorization_count();
}  // namespace instrument

}  // namespace rqk
