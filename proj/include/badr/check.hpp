#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "badr/toys.hpp"
#include "badr/twoloop.hpp"

namespace badr {

// One line of the oracle table: the worst error seen over all cases.
struct CheckRow {
  std::string name;
  double worst = 0.0;
  double tol = 0.0;
  Index cases = 0;
  bool passed() const { return worst <= tol; }
};

struct CheckOptions {
  Index instances = 20;
  std::uint64_t seed = 0;
  double fd_step = 1e-6;
  // Test hook: perturb the analytic gradient of this metric before comparing.
  std::optional<MetricKind> corrupt;
};

inline constexpr double kGradTol = 1e-5;
inline constexpr double kImplicitTol = 1e-3;
inline constexpr double kProjectionTol = 1e-9;

// ||a - b|| / max(||b||, floor). The floor keeps nearly flat points (saturated
// sigmoids, say) from turning difference-quotient rounding noise into a large
// relative error.
inline constexpr double kGradFloor = 1e-3;

inline double relative_error(const Vector& a, const Vector& b, double floor = kGradFloor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

template <typename Fn>
Vector central_difference(Fn&& f, const Vector& w, double h) {
  Vector g(w.size());
  Vector x = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    x[j] = w[j] + h;
    const double up = f(x);
    x[j] = w[j] - h;
    const double down = f(x);
    x[j] = w[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

// Nearest simplex point by enumerating every support set and keeping the
// closest feasible KKT candidate. Exponential in S; only for small S.
inline Vector project_simplex_bruteforce(const Vector& x) {
  const Eigen::Index S = x.size();
  Vector best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << S); ++mask) {
    double sum = 0.0;
    int k = 0;
    for (Eigen::Index a = 0; a < S; ++a)
      if (mask & (1u << a)) {
        sum += x[a];
        ++k;
      }
    const double shift = (sum - 1.0) / k;
    Vector cand = Vector::Zero(S);
    bool feasible = true;
    for (Eigen::Index a = 0; a < S; ++a)
      if (mask & (1u << a)) {
        cand[a] = x[a] - shift;
        if (cand[a] < 0.0) feasible = false;
      }
    if (!feasible) continue;
    const double dist = (cand - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

namespace detail {

// Random biased dataset with 2-3 groups, n <= 180 and d <= 16 after the
// intercept; classification draws are redrawn until every group has both labels.
inline Dataset random_instance(Rng& rng, Task task) {
  for (;;) {
    const Index S = 2 + uniform_index(rng, 2);
    std::vector<Index> sizes;
    for (Index a = 0; a < S; ++a) sizes.push_back(10 + uniform_index(rng, 51));
    const Index d = 1 + uniform_index(rng, 15);
    const double shift = 1.5 * uniform01(rng);
    Dataset ds = standardize(synth_biased(sizes, d, shift, rng(), task));
    if (task == Task::regression) return ds;
    bool both = true;
    for (const auto& rows : ds.group_index) {
      bool pos = false, neg = false;
      for (Index i : rows) (ds.y[static_cast<Eigen::Index>(i)] > 0 ? pos : neg) = true;
      both = both && pos && neg;
    }
    if (both) return ds;
  }
}

inline Vector random_vector(Rng& rng, Index d, double scale) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = scale * standard_normal(rng);
  return v;
}

inline Vector random_weights(Rng& rng, Index S) {
  Vector l(static_cast<Eigen::Index>(S));
  for (Eigen::Index a = 0; a < l.size(); ++a) l[a] = -std::log(1.0 - uniform01(rng));
  return l / l.sum();
}

inline void note(CheckRow& row, double err) {
  row.worst = std::max(row.worst, std::isnan(err) ? std::numeric_limits<double>::infinity() : err);
  ++row.cases;
}

}  // namespace detail

// Group and scalarized loss gradients and Hessian-vector products against central
// differences, on random instances.
inline std::vector<CheckRow> check_losses(const CheckOptions& opt) {
  std::vector<CheckRow> rows;
  for (LossKind kind : {LossKind::ridge, LossKind::logistic, LossKind::svm2}) {
    Rng rng(opt.seed + 101 * (static_cast<std::uint64_t>(kind) + 1));
    const Task task = kind == LossKind::ridge ? Task::regression : Task::classification;
    const LossModel m{kind, 1e-2};
    CheckRow grad{"loss-gradient/" + to_string(kind), 0.0, kGradTol, 0};
    CheckRow hvp{"hvp/" + to_string(kind), 0.0, kGradTol, 0};
    for (Index k = 0; k < opt.instances; ++k) {
      const Dataset ds = detail::random_instance(rng, task);
      const Vector w = detail::random_vector(rng, ds.d(), 0.5);
      const Vector lambda = detail::random_weights(rng, ds.num_groups());
      for (Index a = 0; a < ds.num_groups(); ++a) {
        const Vector fd = central_difference([&](const Vector& x) { return group_loss(m, x, ds, a); }, w, opt.fd_step);
        detail::note(grad, relative_error(group_grad(m, w, ds, a), fd));
      }
      const Vector fd = central_difference([&](const Vector& x) { return scalarized_loss(m, x, ds, lambda); }, w,
                                           opt.fd_step);
      detail::note(grad, relative_error(scalarized_grad(m, w, ds, lambda), fd));

      const Vector v = detail::random_vector(rng, ds.d(), 1.0);
      const Vector dir = (scalarized_grad(m, w + opt.fd_step * v, ds, lambda) -
                          scalarized_grad(m, w - opt.fd_step * v, ds, lambda)) /
                         (2.0 * opt.fd_step);
      detail::note(hvp, relative_error(scalarized_hvp(m, w, ds, lambda, v), dir));
    }
    rows.push_back(grad);
    rows.push_back(hvp);
  }
  return rows;
}

// Every metric gradient against central differences of its value. Metrics that
// accept both tasks alternate between them; individual fairness runs uncapped.
inline std::vector<CheckRow> check_metrics(const CheckOptions& opt) {
  std::vector<CheckRow> rows;
  for (const auto& [name, kind] : metric_names()) {
    Rng rng(opt.seed + 7919 * (static_cast<std::uint64_t>(kind) + 1));
    CheckRow row{"metric-gradient/" + name, 0.0, kGradTol, 0};
    for (Index k = 0; k < opt.instances; ++k) {
      Task task = supports(kind, Task::classification) ? Task::classification : Task::regression;
      if (k % 2 == 1 && supports(kind, Task::regression)) task = Task::regression;
      const Dataset ds = detail::random_instance(rng, task);
      FairnessMetric fm;
      fm.kind = kind;
      fm.if_pair_cap = 0;
      fm.model = LossModel{task == Task::regression ? LossKind::ridge : LossKind::logistic, 1e-2};
      const Vector w = detail::random_vector(rng, ds.d(), 0.5);
      Vector g = metric_grad(fm, w, ds);
      if (opt.corrupt == kind) g[0] += 1e-2 * (1.0 + std::abs(g[0]));
      const Vector fd = central_difference([&](const Vector& x) { return metric_value(fm, x, ds); }, w, opt.fd_step);
      detail::note(row, relative_error(g, fd));
    }
    rows.push_back(row);
  }
  return rows;
}

// Implicit gradient on the bundled toy against central differences of
// phi(lambda) = metric(w*(lambda)) along the simplex tangent, lower level to 1e-12.
inline CheckRow check_implicit_gradient(const Problem& p, const std::vector<double>& points, double step = 1e-5) {
  if (p.num_groups() != 2) throw Error("check_implicit_gradient expects two groups");
  CheckRow row{"implicit-gradient", 0.0, kImplicitTol, 0};
  Vector t(2);
  t << 1.0, -1.0;
  auto phi = [&](const Vector& lambda) { return metric_value(p.metric, solve_lower(p, lambda, 1e-12).w, p.ds()); };
  for (double l0 : points) {
    Vector lambda(2);
    lambda << l0, 1.0 - l0;
    const double analytic = implicit_gradient(p, lambda, 1e-12).grad.dot(t);
    const double fd = (phi(lambda + step * t) - phi(lambda - step * t)) / (2.0 * step);
    detail::note(row, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-8));
  }
  return row;
}

// Projection against the support-enumeration oracle, plus non-expansiveness
// (reported as the worst excess of ||Px - Py|| over ||x - y||).
inline std::vector<CheckRow> check_projection(Index points, std::uint64_t seed) {
  Rng rng(seed + 31337);
  CheckRow exact{"projection/oracle", 0.0, kProjectionTol, 0};
  CheckRow contract{"projection/nonexpansive", 0.0, 1e-12, 0};
  for (Index k = 0; k < points; ++k) {
    const Index S = 1 + k % 4;
    const double scale = 0.1 + 3.0 * uniform01(rng);
    const Vector x = detail::random_vector(rng, S, scale);
    const Vector y = detail::random_vector(rng, S, scale);
    detail::note(exact, (project_simplex(x) - project_simplex_bruteforce(x)).norm());
    detail::note(contract, std::max(0.0, (project_simplex(x) - project_simplex(y)).norm() - (x - y).norm()));
  }
  return {exact, contract};
}

inline std::vector<CheckRow> run_checks(const CheckOptions& opt = {}) {
  std::vector<CheckRow> rows = check_losses(opt);
  for (auto& r : check_metrics(opt)) rows.push_back(r);
  rows.push_back(check_implicit_gradient(biased_toy(), {0.2, 0.35, 0.5, 0.65, 0.8}));
  for (auto& r : check_projection(1000, opt.seed)) rows.push_back(r);
  return rows;
}

}  // namespace badr
