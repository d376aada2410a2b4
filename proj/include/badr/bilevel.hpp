#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "badr/problem.hpp"
#include "badr/random.hpp"
#include "badr/simplex.hpp"

namespace badr {

enum class BadrVariant { gd, sgd };

struct BadrConfig {
  double tau = 0.0;       // lower-level (model) stepsize
  double rho_dual = 0.0;  // dual stepsize
  double gamma = 1e-2;    // group-weight stepsize
  double clip_threshold = 1.0;
  Index iters = 1000;
  Index batch = 32;
  std::uint64_t seed = 0;
  Index record_every = 10;
  BadrVariant variant = BadrVariant::gd;
};

// Iterate (w, v, lambda) of the single-loop solvers.
struct BadrState {
  Vector w;
  Vector v;
  Vector lambda;
  Index t = 0;
};

// One recorded point of a solver run. The two-loop solvers reuse this layout:
// `grad_norm` is the lower-level gradient norm and `stationarity` the solver's
// own certificate (generalized gradient norm, Frank-Wolfe gap, ...).
struct TrajectoryPoint {
  Index t = 0;
  double fairness = 0.0;
  Vector group_losses;
  double grad_norm = 0.0;
  double stationarity = 0.0;
  double dual_norm = 0.0;
  Vector lambda;
};

using Trajectory = std::vector<TrajectoryPoint>;

// A solver aborted; carries everything recorded before the failure.
class SolverFailure : public NumericError {
 public:
  SolverFailure(const std::string& what, Trajectory partial)
      : NumericError(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

inline constexpr double kDivergenceBound = 1e8;

inline BadrState initial_state(const Problem& p) {
  return {Vector::Zero(static_cast<Eigen::Index>(p.dim())), Vector::Zero(static_cast<Eigen::Index>(p.dim())),
          uniform_weights(p.num_groups()), 0};
}

inline void validate(const BadrConfig& cfg, const Problem& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string("solver.") + name + " must be finite and > 0");
  };
  positive(cfg.tau, "tau");
  positive(cfg.rho_dual, "rho_dual");
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) throw Error("solver.gamma must be finite and >= 0");
  if (cfg.variant == BadrVariant::sgd) {
    positive(cfg.clip_threshold, "clip_threshold");
    if (cfg.batch < 1 || cfg.batch > p.ds().n()) throw Error("solver.batch must lie in [1, n]");
  }
  if (cfg.record_every < 1) throw Error("solver.record_every must be >= 1");
}

// g * min(1, C / ||g||).
inline Vector clip(const Vector& g, double threshold) {
  const double nrm = g.norm();
  if (nrm <= threshold || nrm == 0.0) return g;
  return g * (threshold / nrm);
}

// ||(lambda - Proj(lambda - gamma * grad)) / gamma||.
inline double generalized_gradient_norm(const Vector& lambda, const Vector& grad, double gamma) {
  if (!(gamma > 0.0)) throw Error("generalized_gradient_norm: gamma must be > 0");
  return ((lambda - project_simplex(lambda - gamma * grad)) / gamma).norm();
}

namespace detail {

inline void guard(const Vector& x, const char* name, Index t) {
  if (!x.allFinite() || x.norm() > kDivergenceBound)
    throw NumericError(std::string("divergence at step ") + std::to_string(t) + ": " + name +
                       (x.allFinite() ? " exceeded norm bound 1e8" : " is not finite"));
}

// Stratified minibatch: ceil(b * n_a / n) rows of each group, uniformly without
// replacement. A group whose quota covers it is used whole, in index order.
inline GroupRows stratified_batch(const Dataset& ds, Index batch, Rng& rng) {
  const Index n = ds.n();
  GroupRows out(ds.num_groups());
  for (Index a = 0; a < ds.num_groups(); ++a) {
    const Index na = ds.group_size(a);
    const Index k = std::min(na, (batch * na + n - 1) / n);
    out[a] = k == na ? ds.group_index[a] : sample_without_replacement(ds.group_index[a], k, rng);
  }
  return out;
}

// One Jacobi update from the oracles evaluated on the given row views.
inline BadrState jacobi_step(const BadrState& s, const Problem& p, const BadrConfig& cfg, const GroupRows& rows_w,
                             const GroupRows& rows_metric, const GroupRows& rows_hvp, const GroupRows& rows_cross,
                             bool clipped) {
  const Dataset& ds = p.ds();
  const Matrix Dw = cross_derivative(p.model, s.w, ds, rows_w);
  const Vector metric_g = metric_grad(p.metric, s.w, ds, rows_metric);
  const Vector hv = scalarized_hvp(p.model, s.w, ds, rows_hvp, s.lambda, s.v);
  const Matrix& Dl = (&rows_cross == &rows_w) ? Dw : cross_derivative(p.model, s.w, ds, rows_cross);
  Vector direction = rows_dot(Dl, s.v);
  if (clipped) direction = clip(direction, cfg.clip_threshold);

  BadrState next;
  next.w = s.w - cfg.tau * weighted_rows(Dw, s.lambda);
  next.v = s.v - cfg.rho_dual * (metric_g + hv);
  guard(next.w, "w", s.t);
  guard(next.v, "v", s.t);
  guard(direction, "lambda direction", s.t);
  next.lambda = project_simplex(s.lambda - cfg.gamma * direction);
  next.t = s.t + 1;
  return next;
}

}  // namespace detail

inline BadrState badr_gd_step(const BadrState& s, const Problem& p, const BadrConfig& cfg) {
  const auto& all = p.ds().group_index;
  return detail::jacobi_step(s, p, cfg, all, all, all, all, false);
}

// Stochastic step: an independent stratified batch per oracle and a clipped
// group-weight direction. With batch = n every batch is the full data and the
// step is bit-identical to badr_gd_step apart from clipping.
inline BadrState badr_sgd_step(const BadrState& s, const Problem& p, const BadrConfig& cfg, Rng& rng) {
  const Dataset& ds = p.ds();
  const GroupRows rows_w = detail::stratified_batch(ds, cfg.batch, rng);
  const GroupRows rows_metric = detail::stratified_batch(ds, cfg.batch, rng);
  const GroupRows rows_hvp = detail::stratified_batch(ds, cfg.batch, rng);
  const GroupRows rows_cross = detail::stratified_batch(ds, cfg.batch, rng);
  return detail::jacobi_step(s, p, cfg, rows_w, rows_metric, rows_hvp, rows_cross, true);
}

inline TrajectoryPoint record_point(const BadrState& s, const Problem& p, const BadrConfig& cfg) {
  const Dataset& ds = p.ds();
  const Matrix D = cross_derivative(p.model, s.w, ds);
  TrajectoryPoint pt;
  pt.t = s.t;
  pt.fairness = metric_value(p.metric, s.w, ds);
  pt.group_losses.resize(static_cast<Eigen::Index>(p.num_groups()));
  for (Index a = 0; a < p.num_groups(); ++a) pt.group_losses[static_cast<Eigen::Index>(a)] = group_loss(p.model, s.w, ds, a);
  pt.grad_norm = weighted_rows(D, s.lambda).norm();
  pt.stationarity = cfg.gamma > 0.0 ? generalized_gradient_norm(s.lambda, rows_dot(D, s.v), cfg.gamma) : 0.0;
  pt.dual_norm = s.v.norm();
  pt.lambda = s.lambda;
  return pt;
}

struct BadrRun {
  BadrState state;
  Trajectory trajectory;
};

// Runs cfg.iters steps from `init`, recording every cfg.record_every steps and at
// the end. On failure the partial trajectory travels with the SolverFailure.
inline BadrRun run(const Problem& p, const BadrConfig& cfg, BadrState init) {
  validate(cfg, p);
  if (cfg.iters < 1) throw Error("solver.iters must be >= 1");
  check_simplex(init.lambda, p.num_groups());
  Rng rng(cfg.seed);
  BadrRun out;
  out.state = std::move(init);
  try {
    for (Index k = 0; k < cfg.iters; ++k) {
      if (k % cfg.record_every == 0) out.trajectory.push_back(record_point(out.state, p, cfg));
      out.state = cfg.variant == BadrVariant::gd ? badr_gd_step(out.state, p, cfg)
                                                 : badr_sgd_step(out.state, p, cfg, rng);
    }
    out.trajectory.push_back(record_point(out.state, p, cfg));
  } catch (const NumericError& e) {
    throw SolverFailure(e.what(), std::move(out.trajectory));
  }
  return out;
}

inline BadrRun run(const Problem& p, const BadrConfig& cfg) { return run(p, cfg, initial_state(p)); }

struct Stepsizes {
  double tau = 0.0;
  double rho_dual = 0.0;
  double gamma = 0.0;
  double smoothness = 0.0;
};

// tau = rho = 1/L with L the worst group's curvature at w = 0 plus reg (20 power
// iterations); gamma is the grid value whose 50-step probe run ends fairest.
inline Stepsizes default_stepsizes(const Problem& p, const std::vector<double>& gamma_grid = {1e-4, 1e-3, 1e-2, 1e-1}) {
  if (!(p.model.reg > 0.0))
    throw Error("default stepsizes need strong convexity: model.reg must be > 0");
  Stepsizes out;
  out.smoothness = p.smoothness;
  out.tau = out.rho_dual = 1.0 / out.smoothness;
  double best = std::numeric_limits<double>::infinity();
  for (double gamma : gamma_grid) {
    BadrConfig probe;
    probe.tau = out.tau;
    probe.rho_dual = out.rho_dual;
    probe.gamma = gamma;
    probe.iters = 50;
    probe.record_every = 50;
    probe.variant = BadrVariant::gd;
    try {
      const auto r = run(p, probe);
      const double f = metric_value(p.metric, r.state.w, p.ds());
      if (f < best) {
        best = f;
        out.gamma = gamma;
      }
    } catch (const NumericError&) {
    }
  }
  if (out.gamma == 0.0) throw NumericError("default stepsizes: every gamma probe diverged");
  return out;
}

}  // namespace badr
