#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "badr/accumulate.hpp"
#include "badr/models.hpp"
#include "badr/random.hpp"

namespace badr {

enum class MetricKind {
  group_variance,
  individual_fairness,
  demographic_parity,
  disparate_mistreatment,
  equal_opportunity,
  equalized_odds,
  hsic
};

inline const std::vector<std::pair<std::string, MetricKind>>& metric_names() {
  static const std::vector<std::pair<std::string, MetricKind>> names = {
      {"gv", MetricKind::group_variance},          {"if", MetricKind::individual_fairness},
      {"dp", MetricKind::demographic_parity},      {"dm", MetricKind::disparate_mistreatment},
      {"eop", MetricKind::equal_opportunity},      {"eod", MetricKind::equalized_odds},
      {"hsic", MetricKind::hsic}};
  return names;
}

inline std::string to_string(MetricKind k) {
  for (const auto& [name, kind] : metric_names())
    if (kind == k) return name;
  return "?";
}

inline MetricKind parse_metric(const std::string& s) {
  std::string valid;
  for (const auto& [name, kind] : metric_names()) {
    if (name == s) return kind;
    valid += (valid.empty() ? "" : ", ") + name;
  }
  throw Error("unknown metric '" + s + "' (valid: " + valid + ")");
}

struct FairnessMetric {
  MetricKind kind = MetricKind::individual_fairness;
  // Sharpness of the sigmoid / log-sum-exp relaxations (dp, eop, eod).
  double smooth = 20.0;
  // Loss model whose group losses enter the group-variance metric.
  LossModel model;
  // Individual fairness on regression data: pairs per group pair above which a
  // seeded subsample of this size is used. 0 disables the cap.
  Index if_pair_cap = 2000;
  std::uint64_t if_seed = 0;
};

inline bool supports(MetricKind k, Task t) {
  switch (k) {
    case MetricKind::disparate_mistreatment:
    case MetricKind::equal_opportunity:
    case MetricKind::equalized_odds: return t == Task::classification;
    case MetricKind::hsic: return t == Task::regression;
    default: return true;
  }
}

namespace detail {

struct MetricEval {
  double value = 0.0;
  Vector grad;
};

inline void check_metric(const FairnessMetric& fm, const Dataset& ds) {
  if (!supports(fm.kind, ds.task))
    throw Error("metric '" + to_string(fm.kind) + "' does not support " + to_string(ds.task) + " tasks");
  if (!(fm.smooth > 0.0)) throw Error("metric smoothing parameter must be > 0");
}

inline Index view_size(const GroupRows& rows) {
  Index n = 0;
  for (const auto& g : rows) n += g.size();
  return n;
}

// Predictions for every row in the view, keyed by row id.
inline std::vector<double> predictions(const Vector& w, const Dataset& ds, const GroupRows& rows) {
  std::vector<double> f(ds.n(), 0.0);
  for (const auto& g : rows)
    for (Index i : g) f[i] = ds.X.row(static_cast<Eigen::Index>(i)).dot(w);
  return f;
}

// Order-independent group loss and gradient (same formulas as models.hpp).
inline void exact_group_loss(const LossModel& m, const Vector& w, const Dataset& ds,
                             const std::vector<Index>& g, const std::vector<double>& f, double& loss,
                             Vector& grad) {
  ExactSum l;
  ExactVectorSum gr(w.size());
  for (Index i : g) {
    const auto r = static_cast<Eigen::Index>(i);
    l.add(data_loss(m.kind, f[i], ds.y[r]));
    gr.add(ds.X.row(r), data_loss_slope(m.kind, f[i], ds.y[r]));
  }
  const double inv = 1.0 / static_cast<double>(g.size());
  loss = l.value() * inv + 0.5 * m.reg * w.squaredNorm();
  grad = gr.value() * inv + m.reg * w;
}

inline MetricEval group_variance(const FairnessMetric& fm, const Vector& w, const Dataset& ds,
                                 const GroupRows& rows, bool want_grad) {
  const auto f = predictions(w, ds, rows);
  const Index S = rows.size();
  std::vector<double> F(S);
  std::vector<Vector> G(S);
  for (Index a = 0; a < S; ++a) {
    check_group(rows, a);
    exact_group_loss(fm.model, w, ds, rows[a], f, F[a], G[a]);
  }
  double mean = 0.0;
  for (double v : F) mean += v;
  mean /= static_cast<double>(S);
  MetricEval out;
  out.grad = Vector::Zero(w.size());
  for (Index a = 0; a < S; ++a) {
    const double dev = F[a] - mean;
    out.value += dev * dev;
    if (want_grad) out.grad += (2.0 * dev) * G[a];
  }
  out.value /= static_cast<double>(S);
  out.grad /= static_cast<double>(S);
  return out;
}

// Sum over i in A, j in B of (f_i - f_j)^2 and its gradient, from first and
// second moments of each cell.
struct CellMoments {
  double count = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  Vector x1;
  Vector fx;
};

inline CellMoments cell_moments(const std::vector<Index>& rows, const Dataset& ds,
                                const std::vector<double>& f, Eigen::Index dim) {
  ExactSum s1, s2;
  ExactVectorSum x1(dim), fx(dim);
  for (Index i : rows) {
    const auto x = ds.X.row(static_cast<Eigen::Index>(i));
    s1.add(f[i]);
    s2.add(f[i] * f[i]);
    x1.add(x);
    fx.add(x, f[i]);
  }
  return {static_cast<double>(rows.size()), s1.value(), s2.value(), x1.value(), fx.value()};
}

inline MetricEval individual_fairness(const FairnessMetric& fm, const Vector& w, const Dataset& ds,
                                      const GroupRows& rows, bool want_grad) {
  const auto f = predictions(w, ds, rows);
  const Index S = rows.size();
  const Eigen::Index dim = w.size();
  MetricEval out;
  out.grad = Vector::Zero(dim);
  double normalizer = 0.0;
  for (Index a = 0; a < S; ++a)
    for (Index b = a + 1; b < S; ++b)
      normalizer += static_cast<double>(rows[a].size()) * static_cast<double>(rows[b].size());
  if (normalizer == 0.0) return out;

  if (ds.task == Task::classification) {
    // Labels are +-1, so the pair weight exp(-|y_i - y_j|) takes two values and
    // the pair sum factors through per-(group, label) moments.
    std::vector<std::array<CellMoments, 2>> cells(S);
    for (Index a = 0; a < S; ++a) {
      std::array<std::vector<Index>, 2> split;
      for (Index i : rows[a]) split[ds.y[static_cast<Eigen::Index>(i)] > 0.0 ? 1 : 0].push_back(i);
      for (int c = 0; c < 2; ++c) cells[a][c] = cell_moments(split[c], ds, f, dim);
    }
    ExactSum value;
    ExactVectorSum grad(dim);
    for (Index a = 0; a < S; ++a)
      for (Index b = a + 1; b < S; ++b)
        for (int p = 0; p < 2; ++p)
          for (int q = 0; q < 2; ++q) {
            const auto& A = cells[a][p];
            const auto& B = cells[b][q];
            const double weight = p == q ? 1.0 : std::exp(-2.0);
            value.add(weight * B.count * A.s2);
            value.add(weight * A.count * B.s2);
            value.add(-2.0 * weight * A.s1 * B.s1);
            if (want_grad) {
              grad.add(B.count * A.fx, 2.0 * weight);
              grad.add(A.count * B.fx, 2.0 * weight);
              grad.add(B.s1 * A.x1, -2.0 * weight);
              grad.add(A.s1 * B.x1, -2.0 * weight);
            }
          }
    // The moment form can round a tiny true value below zero.
    out.value = std::max(0.0, value.value()) / normalizer;
    if (want_grad) out.grad = grad.value() / normalizer;
    return out;
  }

  ExactSum value;
  ExactVectorSum grad(dim);
  auto add_pair = [&](Index i, Index j, double scale) {
    const auto ri = static_cast<Eigen::Index>(i);
    const auto rj = static_cast<Eigen::Index>(j);
    const double c = scale * std::exp(-std::abs(ds.y[ri] - ds.y[rj]));
    const double diff = f[i] - f[j];
    value.add(c * diff * diff);
    if (want_grad) grad.add(ds.X.row(ri) - ds.X.row(rj), 2.0 * c * diff);
  };
  for (Index a = 0; a < S; ++a)
    for (Index b = a + 1; b < S; ++b) {
      const Index na = rows[a].size();
      const Index nb = rows[b].size();
      if (fm.if_pair_cap == 0 || na * nb <= fm.if_pair_cap) {
        for (Index i : rows[a])
          for (Index j : rows[b]) add_pair(i, j, 1.0);
      } else {
        // Seeded subsample of pairs, rescaled to estimate the full pair sum.
        Rng rng(fm.if_seed ^ (0x9E3779B97F4A7C15ULL * (a * S + b + 1)));
        const double scale = static_cast<double>(na * nb) / static_cast<double>(fm.if_pair_cap);
        for (Index k = 0; k < fm.if_pair_cap; ++k)
          add_pair(rows[a][uniform_index(rng, na)], rows[b][uniform_index(rng, nb)], scale);
      }
    }
  out.value = value.value() / normalizer;
  if (want_grad) out.grad = grad.value() / normalizer;
  return out;
}

// Soft maximum (1/rho) log sum exp(rho z) and its weights d/dz.
inline double soft_max(const std::vector<double>& z, double rho, std::vector<double>* weights) {
  double top = z.front();
  for (double v : z) top = std::max(top, v);
  double total = 0.0;
  std::vector<double> e(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    e[k] = std::exp(rho * (z[k] - top));
    total += e[k];
  }
  if (weights) {
    weights->resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) (*weights)[k] = e[k] / total;
  }
  return top + std::log(total) / rho;
}

// Smoothed positive rate (1/|rows|) sum sigmoid(rho f_i) and its gradient.
inline void smoothed_rate(const std::vector<Index>& rows, const Dataset& ds, const std::vector<double>& f,
                          double rho, Eigen::Index dim, double& rate, Vector& grad) {
  ExactSum r;
  ExactVectorSum g(dim);
  for (Index i : rows) {
    const double s = sigmoid(rho * f[i]);
    r.add(s);
    g.add(ds.X.row(static_cast<Eigen::Index>(i)), rho * s * (1.0 - s));
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  rate = r.value() * inv;
  grad = g.value() * inv;
}

inline MetricEval demographic_parity(const FairnessMetric& fm, const Vector& w, const Dataset& ds,
                                     const GroupRows& rows, bool want_grad) {
  const auto f = predictions(w, ds, rows);
  const Index S = rows.size();
  std::vector<double> p(S);
  std::vector<Vector> dp(S);
  for (Index a = 0; a < S; ++a) {
    check_group(rows, a);
    smoothed_rate(rows[a], ds, f, fm.smooth, w.size(), p[a], dp[a]);
  }
  double pbar = 0.0;
  Vector dpbar = Vector::Zero(w.size());
  for (Index a = 0; a < S; ++a) {
    pbar += p[a];
    dpbar += dp[a];
  }
  pbar /= static_cast<double>(S);
  dpbar /= static_cast<double>(S);
  std::vector<double> gap(S);
  for (Index a = 0; a < S; ++a) gap[a] = std::sqrt((p[a] - pbar) * (p[a] - pbar));
  std::vector<double> weights;
  MetricEval out;
  out.value = soft_max(gap, fm.smooth, &weights);
  out.grad = Vector::Zero(w.size());
  if (want_grad) {
    for (Index a = 0; a < S; ++a) {
      const double diff = p[a] - pbar;
      // d|z|/dz taken as 0 at z = 0.
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      out.grad += (weights[a] * sgn) * (dp[a] - dpbar);
    }
  }
  return out;
}

// (1/rho) log sum exp(rho r) - (1/rho) log sum exp(-rho r) over group rates r.
inline double rate_spread(const std::vector<double>& r, const std::vector<Vector>& dr, double rho,
                          Vector& grad) {
  std::vector<double> neg(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) neg[k] = -r[k];
  std::vector<double> wp, wn;
  const double value = soft_max(r, rho, &wp) - soft_max(neg, rho, &wn);
  grad = Vector::Zero(dr.front().size());
  for (std::size_t k = 0; k < r.size(); ++k) grad += (wp[k] + wn[k]) * dr[k];
  return value;
}

inline MetricEval equalized_rates(const FairnessMetric& fm, const Vector& w, const Dataset& ds,
                                  const GroupRows& rows, bool with_fpr) {
  const auto f = predictions(w, ds, rows);
  const Index S = rows.size();
  std::vector<double> tpr(S), fpr(S);
  std::vector<Vector> dtpr(S), dfpr(S);
  for (Index a = 0; a < S; ++a) {
    std::vector<Index> pos, neg;
    for (Index i : rows[a]) (ds.y[static_cast<Eigen::Index>(i)] > 0.0 ? pos : neg).push_back(i);
    if (pos.empty())
      throw Error("metric '" + to_string(fm.kind) + "': group " + std::to_string(a) + " has no positive samples");
    if (with_fpr && neg.empty())
      throw Error("metric '" + to_string(fm.kind) + "': group " + std::to_string(a) + " has no negative samples");
    smoothed_rate(pos, ds, f, fm.smooth, w.size(), tpr[a], dtpr[a]);
    if (with_fpr) smoothed_rate(neg, ds, f, fm.smooth, w.size(), fpr[a], dfpr[a]);
  }
  MetricEval out;
  out.value = rate_spread(tpr, dtpr, fm.smooth, out.grad);
  if (with_fpr) {
    Vector g;
    out.value += rate_spread(fpr, dfpr, fm.smooth, g);
    out.grad += g;
  }
  return out;
}

// (scale * sum_i (a_i - abar)(f_i - fbar))^2 with a_i the group label.
inline MetricEval label_covariance(const Vector& w, const Dataset& ds, const GroupRows& rows, bool sample) {
  const Index n = view_size(rows);
  const auto f = predictions(w, ds, rows);
  ExactSum label_sum, f_sum;
  ExactVectorSum x_sum(w.size());
  for (Index a = 0; a < rows.size(); ++a)
    for (Index i : rows[a]) {
      label_sum.add(static_cast<double>(a));
      f_sum.add(f[i]);
      x_sum.add(ds.X.row(static_cast<Eigen::Index>(i)));
    }
  const double nn = static_cast<double>(n);
  const double abar = label_sum.value() / nn;
  const double fbar = f_sum.value() / nn;
  const Vector xbar = x_sum.value() / nn;
  ExactSum cov;
  ExactVectorSum dcov(w.size());
  for (Index a = 0; a < rows.size(); ++a)
    for (Index i : rows[a]) {
      const double da = static_cast<double>(a) - abar;
      cov.add(da * (f[i] - fbar));
      dcov.add(ds.X.row(static_cast<Eigen::Index>(i)).transpose() - xbar, da);
    }
  const double scale = 1.0 / (sample ? nn - 1.0 : nn);
  const double c = cov.value() * scale;
  MetricEval out;
  out.value = c * c;
  out.grad = (2.0 * c * scale) * dcov.value();
  return out;
}

inline MetricEval evaluate(const FairnessMetric& fm, const Vector& w, const Dataset& ds, const GroupRows& rows,
                           bool want_grad) {
  check_dims(w, ds);
  check_metric(fm, ds);
  for (Index a = 0; a < rows.size(); ++a) check_group(rows, a);
  switch (fm.kind) {
    case MetricKind::group_variance: return group_variance(fm, w, ds, rows, want_grad);
    case MetricKind::individual_fairness: return individual_fairness(fm, w, ds, rows, want_grad);
    case MetricKind::demographic_parity: return demographic_parity(fm, w, ds, rows, want_grad);
    case MetricKind::disparate_mistreatment: return label_covariance(w, ds, rows, false);
    case MetricKind::equal_opportunity: return equalized_rates(fm, w, ds, rows, false);
    case MetricKind::equalized_odds: return equalized_rates(fm, w, ds, rows, true);
    case MetricKind::hsic: {
      if (view_size(rows) < 2) throw Error("hsic needs at least 2 samples");
      return label_covariance(w, ds, rows, true);
    }
  }
  throw Error("unhandled metric");
}

}  // namespace detail

inline double metric_value(const FairnessMetric& fm, const Vector& w, const Dataset& ds, const GroupRows& rows) {
  return detail::evaluate(fm, w, ds, rows, false).value;
}

inline double metric_value(const FairnessMetric& fm, const Vector& w, const Dataset& ds) {
  return metric_value(fm, w, ds, ds.group_index);
}

inline Vector metric_grad(const FairnessMetric& fm, const Vector& w, const Dataset& ds, const GroupRows& rows) {
  return detail::evaluate(fm, w, ds, rows, true).grad;
}

inline Vector metric_grad(const FairnessMetric& fm, const Vector& w, const Dataset& ds) {
  return metric_grad(fm, w, ds, ds.group_index);
}

}  // namespace badr
