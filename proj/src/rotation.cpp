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

#include <cmath>

#include "rqk/errors.hpp"
#include "rqk/rqk.hpp"

namespace rqk {

BlockRotation::BlockRotation(std::size_t m) : m_(m) {
  if (m == 0) throw Error("block rotation needs m >= 1");
  const double md = static_cast<double>(m);
  a_ = 1.0 / std::sqrt(md);
  b_ = m > 1 ? -(1.0 + a_) / (md - 1.0) : 0.0;
}

Matrix BlockRotation::dense() const {
  const auto m = static_cast<Index>(m_);
  if (m == 1) return Matrix::Ones(1, 1);
  Matrix b = Matrix::Constant(m, m, b_);
  b.diagonal().array() += 1.0;
  b.row(0).setConstant(a_);
  b.col(0).setConstant(a_);
  return b;
}

// Column 0 of X B is a * rowsum(X); column k >= 1 is
// a x_0 + b * sum_{l >= 1} x_l + x_k.
Matrix BlockRotation::apply(const Matrix &x) const {
  if (x.cols() != static_cast<Index>(m_))
    throw DimensionMismatch("rotation_apply: expected " + std::to_string(m_) + " columns");
  if (m_ == 1) return x;
  const Vector tail = x.rightCols(x.cols() - 1).rowwise().sum();
  Matrix out(x.rows(), x.cols());
  out.col(0) = a_ * (x.col(0) + tail);
  const Vector shift = a_ * x.col(0) + b_ * tail;
  for (Index k = 1; k < x.cols(); ++k) out.col(k) = shift + x.col(k);
  return out;
}

// B o B has a^2 in row and column 0, b^2 off the diagonal elsewhere and
// (b + 1)^2 = b^2 + 2b + 1 on the trailing diagonal.
Matrix BlockRotation::apply_squared(const Matrix &x) const {
  if (x.cols() != static_cast<Index>(m_))
    throw DimensionMismatch("apply_squared: expected " + std::to_string(m_) + " columns");
  if (m_ == 1) return x;
  const double a2 = a_ * a_;
  const double b2 = b_ * b_;
  const Vector tail = x.rightCols(x.cols() - 1).rowwise().sum();
  Matrix out(x.rows(), x.cols());
  out.col(0) = a2 * (x.col(0) + tail);
  const Vector shift = a2 * x.col(0) + b2 * tail;
  for (Index k = 1; k < x.cols(); ++k) out.col(k) = shift + (2.0 * b_ + 1.0) * x.col(k);
  return out;
}

Matrix rotation_apply(const BlockRotation &rot, const Matrix &x) { return rot.apply(x); }

}  // namespace rqk
