#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "badr/core.hpp"

namespace badr {

// Euclidean projection onto {l : l >= 0, sum l = 1}.
//
// Sort-based: with u sorted decreasingly, the support size k is the largest
// index with u_k > (sum_{j<=k} u_j - 1) / k, and the result is max(x - theta, 0)
// for that threshold. Ties in the sort are broken by index.
inline Vector project_simplex(const Vector& x) {
  const auto S = x.size();
  if (S < 1) throw Error("project_simplex: empty vector");
  if (!x.allFinite()) throw NumericError("project_simplex: non-finite input");
  if (x.minCoeff() >= 0.0 && x.sum() == 1.0) return x;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(S));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) { return x[l] > x[r]; });

  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < S; ++k) {
    cumsum += x[order[static_cast<std::size_t>(k)]];
    const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (x[order[static_cast<std::size_t>(k)]] - candidate > 0.0) theta = candidate;
  }

  Vector out = (x.array() - theta).cwiseMax(0.0);
  // Absorb rounding drift in the largest coordinate so the sum is 1.
  const double drift = 1.0 - out.sum();
  Eigen::Index top = order.front();
  out[top] = std::max(0.0, out[top] + drift);
  return out;
}

inline Vector simplex_vertex(Index a, Index S) {
  if (a >= S) throw Error("simplex_vertex: group id " + std::to_string(a) + " out of range for S=" + std::to_string(S));
  Vector e = Vector::Zero(static_cast<Eigen::Index>(S));
  e[static_cast<Eigen::Index>(a)] = 1.0;
  return e;
}

inline Vector uniform_weights(Index S) {
  if (S < 1) throw Error("uniform_weights: S must be >= 1");
  return Vector::Constant(static_cast<Eigen::Index>(S), 1.0 / static_cast<double>(S));
}

inline bool on_simplex(const Vector& lambda, double tol = 1e-12) {
  return lambda.size() > 0 && lambda.minCoeff() >= 0.0 && std::abs(lambda.sum() - 1.0) <= tol;
}

}  // namespace badr
