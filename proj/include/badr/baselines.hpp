#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "badr/twoloop.hpp"

namespace badr {

// Group weights and the weighted-sum model they induce.
struct WeightedFit {
  Vector lambda;
  Vector w;
};

inline constexpr double kBaselineTol = 1e-10;

inline WeightedFit fit_weights(const Problem& p, Vector lambda, double tol = kBaselineTol) {
  WeightedFit out{std::move(lambda), {}};
  out.w = solve_lower(p, out.lambda, tol).w;
  return out;
}

// Barycenter of the simplex.
inline WeightedFit uniform_fit(const Problem& p, double tol = kBaselineTol) {
  return fit_weights(p, uniform_weights(p.num_groups()), tol);
}

// lambda_a proportional to 1 / n_a.
inline Vector balanced_weights(const Dataset& ds) {
  Vector lambda(static_cast<Eigen::Index>(ds.num_groups()));
  for (Index a = 0; a < ds.num_groups(); ++a)
    lambda[static_cast<Eigen::Index>(a)] = 1.0 / static_cast<double>(ds.group_size(a));
  return lambda / lambda.sum();
}

inline WeightedFit balanced_fit(const Problem& p, double tol = kBaselineTol) {
  return fit_weights(p, balanced_weights(p.ds()), tol);
}

// Fits each group alone and keeps the fairest model (lowest index on ties).
inline WeightedFit one_group_fit(const Problem& p, double tol = kBaselineTol) {
  WeightedFit best;
  double best_value = std::numeric_limits<double>::infinity();
  for (Index a = 0; a < p.num_groups(); ++a) {
    auto fit = fit_weights(p, simplex_vertex(a, p.num_groups()), tol);
    const double value = metric_value(p.metric, fit.w, p.ds());
    if (value < best_value) {
      best_value = value;
      best = std::move(fit);
    }
  }
  return best;
}

struct MinimaxConfig {
  Index iters = 2000;
  double step = 0.5;
};

// Worst-group-loss minimization by simultaneous multiplicative-weights ascent on
// lambda and gradient descent on w; the final weights are refit exactly.
inline WeightedFit minimax_fit(const Problem& p, const MinimaxConfig& cfg = {}, double tol = kBaselineTol) {
  if (!(p.model.reg > 0.0)) throw Error("minimax_fit needs model.reg > 0");
  const Dataset& ds = p.ds();
  const Index S = p.num_groups();
  Vector lambda = uniform_weights(S);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(p.dim()));
  const double tau = 1.0 / p.smoothness;
  for (Index t = 0; t < cfg.iters; ++t) {
    Vector losses(static_cast<Eigen::Index>(S));
    for (Index a = 0; a < S; ++a) losses[static_cast<Eigen::Index>(a)] = group_loss(p.model, w, ds, a);
    const Vector g = scalarized_grad(p.model, w, ds, lambda);
    // Shift by the max loss before exponentiating; it cancels in the normalization.
    Vector next = lambda.array() * (cfg.step * (losses.array() - losses.maxCoeff())).exp();
    lambda = next / next.sum();
    w -= tau * g;
    detail::guard(w, "w", t);
  }
  return fit_weights(p, lambda, tol);
}

struct PathPoint {
  double nu = 0.0;
  Vector w;
  bool converged = false;
  double grad_norm = 0.0;
};

// Sample-average weights n_a / n: the plain empirical risk.
inline Vector erm_weights(const Dataset& ds) {
  Vector lambda(static_cast<Eigen::Index>(ds.num_groups()));
  for (Index a = 0; a < ds.num_groups(); ++a)
    lambda[static_cast<Eigen::Index>(a)] = static_cast<double>(ds.group_size(a)) / static_cast<double>(ds.n());
  return lambda;
}

// 10 log-spaced penalty weights from 1e-6 to 10^-0.5.
inline std::vector<double> default_nu_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 10; ++k) grid.push_back(std::pow(10.0, -6.0 + 5.5 * k / 9.0));
  return grid;
}

struct PenaltyConfig {
  double tol = 1e-6;
  Index max_iter = 5000;
};

// For each nu: minimize ERM(w) + metric(w) / nu by gradient descent with
// Armijo backtracking, started from the ERM model. A grid point that misses the
// tolerance is reported unconverged and the path continues.
inline std::vector<PathPoint> penalized_path(const Problem& p, const std::vector<double>& nu_grid,
                                             const PenaltyConfig& cfg = {}) {
  for (double nu : nu_grid)
    if (!(nu > 0.0)) throw Error("penalized_path: every nu must be > 0");
  const Dataset& ds = p.ds();
  const Vector erm = erm_weights(ds);
  const Vector w_erm = solve_lower(p, erm, kBaselineTol).w;
  std::vector<PathPoint> path;
  for (double nu : nu_grid) {
    const double weight = 1.0 / nu;
    auto objective = [&](const Vector& w) { return scalarized_loss(p.model, w, ds, erm) + weight * metric_value(p.metric, w, ds); };
    auto gradient = [&](const Vector& w) {
      return Vector(scalarized_grad(p.model, w, ds, erm) + weight * metric_grad(p.metric, w, ds));
    };
    PathPoint pt{nu, w_erm, false, 0.0};
    double step = 1.0 / (p.smoothness * (1.0 + weight));
    double f = objective(pt.w);
    Vector g = gradient(pt.w);
    for (Index it = 0; it < cfg.max_iter; ++it) {
      pt.grad_norm = g.norm();
      if (pt.grad_norm <= cfg.tol) {
        pt.converged = true;
        break;
      }
      bool moved = false;
      for (int h = 0; h < 60; ++h) {
        const Vector trial = pt.w - step * g;
        const double ft = objective(trial);
        if (ft <= f - 0.5 * step * g.squaredNorm()) {
          pt.w = trial;
          f = ft;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
      g = gradient(pt.w);
      step *= 2.0;
    }
    pt.grad_norm = g.norm();
    if (pt.grad_norm <= cfg.tol) pt.converged = true;
    path.push_back(std::move(pt));
  }
  return path;
}

}  // namespace badr
