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
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rqk/errors.hpp"
#include "rqk/rqk.hpp"

namespace rqk {

namespace {

constexpr double kSingularRcond = std::numeric_limits<double>::epsilon() * 1e-2;
constexpr double kRankTolerance = 1e-14;

SignedLogDet lu_logdet(const Eigen::PartialPivLU<Matrix> &lu) {
  SignedLogDet d;
  d.sign = static_cast<int>(lu.permutationP().determinant());
  const Matrix &packed = lu.matrixLU();
  for (Index i = 0; i < packed.rows(); ++i) {
    const double p = packed(i, i);
    if (p < 0.0) d.sign = -d.sign;
    d.logabsdet += std::log(std::abs(p));
  }
  return d;
}

}  // namespace

QkMatrix::QkMatrix(std::vector<Matrix> blocks, Vector u, Vector v, Matrix k)
    : blocks_(std::move(blocks)), u_(std::move(u)), v_(std::move(v)), k_(std::move(k)) {
  if (blocks_.empty()) throw Error("QK matrix needs at least one block");
  if (k_.rows() != k_.cols()) throw DimensionMismatch("QK: K must be square");
  for (const auto &b : blocks_)
    if (b.rows() != k_.rows() || b.cols() != k_.rows())
      throw DimensionMismatch("QK: blocks must be n x n with n = dim K");
  const auto m = static_cast<Index>(blocks_.size());
  if (u_.size() != m || v_.size() != m) throw DimensionMismatch("QK: |u| and |v| must equal m");
}

Vector qk_matvec(const QkMatrix &q, const Vector &x) {
  if (x.size() != q.dim()) throw DimensionMismatch("qk_matvec: |x| != mn");
  const Index n = q.n();
  const auto m = static_cast<Index>(q.m());
  const auto xm = as_matrix(x, n, m);
  const Vector kv = q.K() * (xm * q.v());
  Matrix out(n, m);
  for (Index i = 0; i < m; ++i)
    out.col(i) = q.blocks()[static_cast<std::size_t>(i)] * xm.col(i) + q.u()[i] * kv;
  return vec(out);
}

Matrix to_dense(const QkMatrix &q, std::size_t cap) {
  if (static_cast<std::size_t>(q.dim()) > cap)
    throw CapExceeded("dense materialization of the QK matrix exceeds cap");
  const Index n = q.n();
  const auto m = static_cast<Index>(q.m());
  Matrix d(q.dim(), q.dim());
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i) d.block(i * n, j * n, n, n) = q.u()[i] * q.v()[j] * q.K();
  for (Index i = 0; i < m; ++i) d.block(i * n, i * n, n, n) += q.blocks()[static_cast<std::size_t>(i)];
  return d;
}

struct QkSolver::BlockFactor {
  bool spd = false;
  Eigen::LLT<Matrix> llt;
  Eigen::PartialPivLU<Matrix> lu;

  Matrix solve(const Matrix &rhs) const { return spd ? Matrix(llt.solve(rhs)) : Matrix(lu.solve(rhs)); }
};

QkSolver::QkSolver(const QkMatrix &q)
    : m_(q.m()), n_(q.n()), u_(q.u()), v_(q.v()) {
  blocks_.reserve(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    auto f = std::make_shared<BlockFactor>();
    const Matrix &a = q.blocks()[i];
    const bool symmetric = (a - a.transpose()).cwiseAbs().maxCoeff() <=
                           1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff());
    if (symmetric) f->llt.compute(a);
    if (symmetric && f->llt.info() == Eigen::Success &&
        (f->llt.matrixLLT().diagonal().array() > 0.0).all()) {
      f->spd = true;
      logdet_.logabsdet += 2.0 * f->llt.matrixLLT().diagonal().array().log().sum();
    } else {
      f->lu.compute(a);
      if (!(f->lu.rcond() > kSingularRcond)) throw SingularBlock(i);
      const auto d = lu_logdet(f->lu);
      logdet_.sign *= d.sign;
      logdet_.logabsdet += d.logabsdet;
    }
    blocks_.push_back(std::move(f));
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(q.K());
  if (es.info() != Eigen::Success) throw Error("QK: eigendecomposition of K failed");
  const Vector &s = es.eigenvalues();
  const double scale = s.size() > 0 ? s.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Index> keep;
  for (Index i = 0; i < s.size(); ++i)
    if (std::abs(s[i]) > kRankTolerance * scale && scale > 0.0) keep.push_back(i);
  const auto r = static_cast<Index>(keep.size());
  l1_.resize(n_, r);
  l2_.resize(n_, r);
  for (Index c = 0; c < r; ++c) {
    l2_.col(c) = es.eigenvectors().col(keep[static_cast<std::size_t>(c)]);
    l1_.col(c) = s[keep[static_cast<std::size_t>(c)]] * l2_.col(c);
  }

  Matrix p = Matrix::Identity(r, r);
  if (r > 0) {
    for (std::size_t i = 0; i < m_; ++i) {
      const double w = u_[static_cast<Index>(i)] * v_[static_cast<Index>(i)];
      if (w != 0.0) p.noalias() += w * (l2_.transpose() * blocks_[i]->solve(l1_));
    }
  }
  auto cap = std::make_shared<Eigen::PartialPivLU<Matrix>>(p);
  if (r > 0) {
    if (!(cap->rcond() > kSingularRcond)) throw SingularCapacitance();
    const auto d = lu_logdet(*cap);
    logdet_.sign *= d.sign;
    logdet_.logabsdet += d.logabsdet;
  }
  capacitance_ = std::move(cap);
}

Matrix QkSolver::block_solve(std::size_t i, const Matrix &rhs) const { return blocks_[i]->solve(rhs); }

Vector QkSolver::solve(const Vector &b) const {
  const auto m = static_cast<Index>(m_);
  if (b.size() != n_ * m) throw DimensionMismatch("qk_solve: |b| != mn");
  const auto bm = as_matrix(b, n_, m);
  Matrix c(n_, m);
  for (Index i = 0; i < m; ++i) c.col(i) = block_solve(static_cast<std::size_t>(i), bm.col(i));
  if (rank() == 0) return vec(c);
  const Vector t = l2_.transpose() * (c * v_);
  const Vector corr = l1_ * capacitance_->solve(t);
  for (Index i = 0; i < m; ++i)
    if (u_[i] != 0.0) c.col(i) -= u_[i] * block_solve(static_cast<std::size_t>(i), corr);
  return vec(c);
}

// Block (i, l) of Q^{-1} is [i == l] D_i^{-1} - u_i v_l (D_i^{-1} L1) P^{-1} (L2^t D_l^{-1}).
QkSolver::InverseBlocks QkSolver::inverse_blocks() const {
  InverseBlocks out;
  out.diagonal.reserve(m_);
  out.block_sum = Matrix::Zero(n_, n_);
  const Index r = rank();
  Matrix left_sum = Matrix::Zero(n_, r);
  Matrix right_sum = Matrix::Zero(r, n_);
  const Matrix eye = Matrix::Identity(n_, n_);
  for (std::size_t i = 0; i < m_; ++i) {
    const auto ii = static_cast<Index>(i);
    Matrix dinv = block_solve(i, eye);
    out.block_sum += dinv;
    if (r > 0) {
      const Matrix left = dinv * l1_;
      const Matrix right = l2_.transpose() * dinv;
      dinv.noalias() -= u_[ii] * v_[ii] * (left * capacitance_->solve(right));
      left_sum += u_[ii] * left;
      right_sum += v_[ii] * right;
    }
    out.diagonal.push_back(std::move(dinv));
  }
  if (r > 0) out.block_sum.noalias() -= left_sum * capacitance_->solve(right_sum);
  return out;
}

Vector qk_solve(const QkMatrix &q, const Vector &b) { return QkSolver(q).solve(b); }

SignedLogDet qk_logdet(const QkMatrix &q) { return QkSolver(q).logdet(); }

}  // namespace rqk
