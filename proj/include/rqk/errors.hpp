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

#include <stdexcept>
#include <string>

namespace rqk {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A Cholesky or eigen factorization found a non-positive pivot/eigenvalue.
/// `which()` names the offending matrix ("A", "A+mK", "K", ...).
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::string which, const std::string &context)
      : Error(context + ": matrix " + which + " is not positive definite"),
        which_(std::move(which)) {}
  const std::string &which() const { return which_; }

 private:
  std::string which_;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// Block `index()` of a quasi-Kronecker matrix is singular.
class SingularBlock : public SingularMatrix {
 public:
  explicit SingularBlock(std::size_t index)
      : SingularMatrix("singular diagonal block " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class SingularCapacitance : public SingularMatrix {
 public:
  SingularCapacitance() : SingularMatrix("singular capacitance matrix") {}
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

class OptimizerDiverged : public Error {
 public:
  using Error::Error;
};

class LineSearchFailed : public Error {
 public:
  using Error::Error;
};

class MaxIterExceeded : public Error {
 public:
  using Error::Error;
};

class NonConcave : public Error {
 public:
  using Error::Error;
};

class NonSpdHessian : public Error {
 public:
  using Error::Error;
};

class EmptyMixture : public Error {
 public:
  EmptyMixture() : Error("confidence band needs at least one mixture component") {}
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rqk
