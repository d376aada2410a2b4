#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace badr {

using Index = std::size_t;
using Vector = Eigen::VectorXd;
// Samples are rows; row-major keeps per-sample access contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-group row lists. The full dataset uses Dataset::group_index; minibatches
// use a strict subset with the same shape.
using GroupRows = std::vector<std::vector<Index>>;

// Bad input: malformed files, unknown names, violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed: divergence, non-convergence, non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace badr
