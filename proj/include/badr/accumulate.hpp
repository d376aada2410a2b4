#pragma once

#include <cmath>
#include <vector>

#include "badr/core.hpp"

namespace badr {

// Exactly rounded floating-point sum (Shewchuk's non-overlapping partials, as in
// Python's math.fsum). The result does not depend on the order of the terms.
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // Round-half-even correction when the remaining partials push past a tie.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

// Coordinate-wise ExactSum of vectors.
class ExactVectorSum {
 public:
  explicit ExactVectorSum(Eigen::Index dim) : sums_(static_cast<std::size_t>(dim)) {}

  template <typename Derived>
  void add(const Eigen::MatrixBase<Derived>& v, double scale = 1.0) {
    for (Eigen::Index j = 0; j < v.size(); ++j) sums_[static_cast<std::size_t>(j)].add(scale * v(j));
  }

  Vector value() const {
    Vector out(static_cast<Eigen::Index>(sums_.size()));
    for (std::size_t j = 0; j < sums_.size(); ++j) out[static_cast<Eigen::Index>(j)] = sums_[j].value();
    return out;
  }

 private:
  std::vector<ExactSum> sums_;
};

}  // namespace badr
