#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ardiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Bad user input: malformed shapes, out-of-range parameters, unknown options.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that could not be carried out: failed factorization,
// non-finite values, divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace ardiff
