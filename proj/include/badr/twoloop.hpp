#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "badr/bilevel.hpp"

namespace badr {

// The lower-level solver stopped before reaching its gradient tolerance.
class NonConvergence : public NumericError {
 public:
  NonConvergence(const std::string& what, double grad_norm) : NumericError(what), grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  double grad_norm_;
};

struct LowerSolution {
  Vector w;
  double grad_norm = 0.0;
  Index iterations = 0;
};

// argmin_w sum_a lambda_a F_a(w) by gradient descent with stepsize 1/L, halving
// the stepsize whenever an update fails to decrease the objective.
inline LowerSolution solve_lower(const Problem& p, const Vector& lambda, double tol, Index max_iter = 100000,
                                 const std::optional<Vector>& warm_start = std::nullopt) {
  if (!(p.model.reg > 0.0)) throw Error("solve_lower needs model.reg > 0");
  if (!(tol > 0.0)) throw Error("solve_lower: tol must be > 0");
  check_simplex(lambda, p.num_groups());
  const Dataset& ds = p.ds();
  LowerSolution out;
  out.w = warm_start ? *warm_start : Vector::Zero(static_cast<Eigen::Index>(p.dim()));
  double step = 1.0 / p.smoothness;
  double f = scalarized_loss(p.model, out.w, ds, lambda);
  Vector g = scalarized_grad(p.model, out.w, ds, lambda);
  for (out.iterations = 0;; ++out.iterations) {
    out.grad_norm = g.norm();
    if (out.grad_norm <= tol) return out;
    if (out.iterations >= max_iter || !std::isfinite(out.grad_norm))
      throw NonConvergence("lower-level solve did not reach tol " + std::to_string(tol) + " in " +
                               std::to_string(max_iter) + " iterations (gradient norm " +
                               std::to_string(out.grad_norm) + ")",
                           out.grad_norm);
    const Vector w_next = out.w - step * g;
    const double f_next = scalarized_loss(p.model, w_next, ds, lambda);
    if (f_next > f + 1e-12 * std::max(1.0, std::abs(f))) {
      step *= 0.5;
      continue;
    }
    out.w = w_next;
    f = f_next;
    g = scalarized_grad(p.model, out.w, ds, lambda);
  }
}

struct CgResult {
  Vector x;
  Index iterations = 0;
  double residual = 0.0;
};

// Conjugate gradients for A x = b with A symmetric positive definite, given only
// as a product. Stops when ||r|| <= tol * ||b||.
template <typename Apply>
CgResult conjugate_gradient(Apply&& apply, const Vector& b, double tol, Index max_iter) {
  CgResult out;
  out.x = Vector::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;
  Vector r = b;
  Vector dir = r;
  double rr = r.squaredNorm();
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    out.residual = std::sqrt(rr);
    if (out.residual <= tol * bnorm) return out;
    const Vector Ad = apply(dir);
    const double curvature = dir.dot(Ad);
    if (!(curvature > 0.0)) throw NumericError("conjugate gradients: operator is not positive definite");
    const double alpha = rr / curvature;
    out.x += alpha * dir;
    r -= alpha * Ad;
    const double rr_next = r.squaredNorm();
    dir = r + (rr_next / rr) * dir;
    rr = rr_next;
  }
  out.residual = std::sqrt(rr);
  if (out.residual <= tol * bnorm) return out;
  throw NumericError("conjugate gradients did not converge (relative residual " +
                     std::to_string(out.residual / bnorm) + ")");
}

struct ImplicitGradient {
  Vector grad;     // gradient of phi(lambda) = metric(w*(lambda))
  Vector w;        // lower-level solution
  Vector adjoint;  // u solving H u = grad metric(w)
  double phi = 0.0;
};

inline constexpr double kAdjointTol = 1e-10;

// grad phi(lambda) = -D(w*) H(w*)^{-1} grad metric(w*), with D the cross
// derivative and H the scalarized Hessian. The metric has no direct lambda term.
inline ImplicitGradient implicit_gradient(const Problem& p, const Vector& lambda, double tol,
                                          const std::optional<Vector>& warm_start = std::nullopt) {
  const Dataset& ds = p.ds();
  ImplicitGradient out;
  out.w = solve_lower(p, lambda, tol, 100000, warm_start).w;
  const Vector b = metric_grad(p.metric, out.w, ds);
  const auto cg = conjugate_gradient(
      [&](const Vector& v) { return scalarized_hvp(p.model, out.w, ds, lambda, v); }, b, kAdjointTol,
      10 * p.dim() + 100);
  out.adjoint = cg.x;
  out.grad = -rows_dot(cross_derivative(p.model, out.w, ds), out.adjoint);
  out.phi = metric_value(p.metric, out.w, ds);
  return out;
}

struct TwoLoopConfig {
  Index max_iter = 500;
  double gap_tol = 1e-6;  // Frank-Wolfe
  double f_tol = 1e-5;    // projected gradient
  double lower_tol = 1e-10;
};

struct TwoLoopResult {
  Vector lambda;
  Vector w;
  Trajectory trajectory;
  std::vector<double> running_min;
  Index iterations = 0;
  bool converged = false;
};

namespace detail {

inline TrajectoryPoint twoloop_point(const Problem& p, Index t, const Vector& lambda, const ImplicitGradient& ig,
                                     double stationarity) {
  TrajectoryPoint pt;
  pt.t = t;
  pt.fairness = ig.phi;
  pt.group_losses.resize(static_cast<Eigen::Index>(p.num_groups()));
  for (Index a = 0; a < p.num_groups(); ++a)
    pt.group_losses[static_cast<Eigen::Index>(a)] = group_loss(p.model, ig.w, p.ds(), a);
  pt.grad_norm = scalarized_grad(p.model, ig.w, p.ds(), lambda).norm();
  pt.stationarity = stationarity;
  pt.dual_norm = ig.adjoint.norm();
  pt.lambda = lambda;
  return pt;
}

inline void push_running_min(TwoLoopResult& r, double phi) {
  r.running_min.push_back(r.running_min.empty() ? phi : std::min(r.running_min.back(), phi));
}

}  // namespace detail

inline double frank_wolfe_stepsize(Index t) { return 2.0 / (static_cast<double>(t) + 2.0); }

// Frank-Wolfe over the simplex with the oblivious stepsize 2/(t+2), stopping when
// the gap <g, lambda - s> falls to gap_tol.
inline TwoLoopResult frank_wolfe(const Problem& p, const TwoLoopConfig& cfg = {},
                                 const std::optional<Vector>& start = std::nullopt) {
  if (cfg.max_iter < 1) throw Error("frank_wolfe: max_iter must be >= 1");
  TwoLoopResult out;
  out.lambda = start ? *start : uniform_weights(p.num_groups());
  std::optional<Vector> warm;
  for (Index t = 0;; ++t) {
    const auto ig = implicit_gradient(p, out.lambda, cfg.lower_tol, warm);
    warm = ig.w;
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < ig.grad.size(); ++a)
      if (ig.grad[a] < ig.grad[best]) best = a;
    const double gap = ig.grad.dot(out.lambda) - ig.grad[best];
    out.trajectory.push_back(detail::twoloop_point(p, t, out.lambda, ig, gap));
    detail::push_running_min(out, ig.phi);
    out.w = ig.w;
    out.iterations = t;
    if (gap <= cfg.gap_tol) {
      out.converged = true;
      return out;
    }
    if (t == cfg.max_iter) return out;
    const double eta = frank_wolfe_stepsize(t);
    out.lambda = (1.0 - eta) * out.lambda;
    out.lambda[best] += eta;
  }
}

// Projected gradient on the simplex: lambda+ = Proj(lambda - eta g) with eta
// starting at 1 and halved until phi does not increase. Stops when
// |phi+ - phi| <= f_tol.
inline TwoLoopResult projected_gradient(const Problem& p, const TwoLoopConfig& cfg = {},
                                        const std::optional<Vector>& start = std::nullopt) {
  if (cfg.max_iter < 1) throw Error("projected_gradient: max_iter must be >= 1");
  constexpr int kMaxHalvings = 50;
  constexpr double kAcceptTol = 1e-12;
  TwoLoopResult out;
  out.lambda = start ? *start : uniform_weights(p.num_groups());
  auto ig = implicit_gradient(p, out.lambda, cfg.lower_tol);
  out.w = ig.w;
  for (Index t = 0; t < cfg.max_iter; ++t) {
    out.trajectory.push_back(
        detail::twoloop_point(p, t, out.lambda, ig, generalized_gradient_norm(out.lambda, ig.grad, 1.0)));
    detail::push_running_min(out, ig.phi);
    double eta = 1.0;
    std::optional<ImplicitGradient> accepted;
    Vector next = out.lambda;
    for (int h = 0; h < kMaxHalvings; ++h, eta *= 0.5) {
      next = project_simplex(out.lambda - eta * ig.grad);
      if ((next - out.lambda).norm() == 0.0) break;
      auto trial = implicit_gradient(p, next, cfg.lower_tol, ig.w);
      if (trial.phi <= ig.phi + kAcceptTol) {
        accepted = std::move(trial);
        break;
      }
    }
    out.iterations = t + 1;
    if (!accepted) {
      // Null step: no decrease available along the projected direction.
      out.converged = true;
      break;
    }
    const double change = std::abs(accepted->phi - ig.phi);
    out.lambda = next;
    ig = std::move(*accepted);
    out.w = ig.w;
    if (change <= cfg.f_tol) {
      out.converged = true;
      break;
    }
  }
  out.trajectory.push_back(
      detail::twoloop_point(p, out.iterations, out.lambda, ig, generalized_gradient_norm(out.lambda, ig.grad, 1.0)));
  detail::push_running_min(out, ig.phi);
  return out;
}

}  // namespace badr
