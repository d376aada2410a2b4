#pragma once

#include <cmath>
#include <string>

#include "badr/dataset.hpp"

namespace badr {

enum class LossKind { ridge, logistic, svm2 };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::ridge: return "ridge";
    case LossKind::logistic: return "logistic";
    case LossKind::svm2: return "svm2";
  }
  return "?";
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "ridge") return LossKind::ridge;
  if (s == "logistic") return LossKind::logistic;
  if (s == "svm2") return LossKind::svm2;
  throw Error("unknown loss '" + s + "' (valid: ridge, logistic, svm2)");
}

// A linear predictor <w, x> with an l2-regularized per-sample loss.
struct LossModel {
  LossKind kind = LossKind::logistic;
  double reg = 1e-2;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
inline double log1p_exp_neg(double m) { return std::log1p(std::exp(-std::abs(m))) + std::max(0.0, -m); }

namespace detail {

inline void check_dims(const Vector& w, const Dataset& ds) {
  if (static_cast<Index>(w.size()) != ds.d())
    throw Error("dimension mismatch: w has " + std::to_string(w.size()) + " entries, data has " +
                std::to_string(ds.d()) + " features");
}

// Loss without the regularizer, as a function of the prediction.
inline double data_loss(LossKind kind, double pred, double y) {
  switch (kind) {
    case LossKind::ridge: return (y - pred) * (y - pred);
    case LossKind::logistic: return log1p_exp_neg(y * pred);
    case LossKind::svm2: {
      const double h = 1.0 - y * pred;
      return h > 0.0 ? h * h : 0.0;
    }
  }
  return 0.0;
}

// d(data_loss)/d(pred).
inline double data_loss_slope(LossKind kind, double pred, double y) {
  switch (kind) {
    case LossKind::ridge: return -2.0 * (y - pred);
    case LossKind::logistic: return -y * sigmoid(-y * pred);
    case LossKind::svm2: {
      const double h = 1.0 - y * pred;
      return h > 0.0 ? -2.0 * y * h : 0.0;
    }
  }
  return 0.0;
}

// d^2(data_loss)/d(pred)^2. The squared hinge uses a strict indicator.
inline double data_loss_curvature(LossKind kind, double pred, double y) {
  switch (kind) {
    case LossKind::ridge: return 2.0;
    case LossKind::logistic: {
      const double s = sigmoid(y * pred);
      return s * (1.0 - s);
    }
    case LossKind::svm2: return 1.0 - y * pred > 0.0 ? 2.0 : 0.0;
  }
  return 0.0;
}

inline void check_group(const GroupRows& rows, Index a) {
  if (a >= rows.size()) throw Error("unknown group id " + std::to_string(a));
  if (rows[a].empty()) throw Error("group " + std::to_string(a) + " is empty");
}

}  // namespace detail

inline double sample_loss(const LossModel& m, const Vector& w, const Eigen::Ref<const Vector>& x, double y) {
  if (w.size() != x.size()) throw Error("dimension mismatch between w and x");
  return detail::data_loss(m.kind, w.dot(x), y) + 0.5 * m.reg * w.squaredNorm();
}

// F_a(w): mean loss over the rows of group a (restricted to `rows`).
inline double group_loss(const LossModel& m, const Vector& w, const Dataset& ds, const GroupRows& rows,
                         Index a) {
  detail::check_dims(w, ds);
  detail::check_group(rows, a);
  double sum = 0.0;
  for (Index i : rows[a]) {
    const auto r = static_cast<Eigen::Index>(i);
    sum += detail::data_loss(m.kind, ds.X.row(r).dot(w), ds.y[r]);
  }
  return sum / static_cast<double>(rows[a].size()) + 0.5 * m.reg * w.squaredNorm();
}

inline double group_loss(const LossModel& m, const Vector& w, const Dataset& ds, Index a) {
  return group_loss(m, w, ds, ds.group_index, a);
}

inline Vector group_grad(const LossModel& m, const Vector& w, const Dataset& ds, const GroupRows& rows,
                         Index a) {
  detail::check_dims(w, ds);
  detail::check_group(rows, a);
  Vector g = Vector::Zero(w.size());
  for (Index i : rows[a]) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto x = ds.X.row(r);
    g += detail::data_loss_slope(m.kind, x.dot(w), ds.y[r]) * x.transpose();
  }
  g /= static_cast<double>(rows[a].size());
  g += m.reg * w;
  return g;
}

inline Vector group_grad(const LossModel& m, const Vector& w, const Dataset& ds, Index a) {
  return group_grad(m, w, ds, ds.group_index, a);
}

// S x d matrix whose row a is grad F_a(w); this is the cross derivative of the
// scalarized objective with respect to (w, lambda).
inline Matrix cross_derivative(const LossModel& m, const Vector& w, const Dataset& ds, const GroupRows& rows) {
  Matrix D(static_cast<Eigen::Index>(rows.size()), w.size());
  for (Index a = 0; a < rows.size(); ++a)
    D.row(static_cast<Eigen::Index>(a)) = group_grad(m, w, ds, rows, a).transpose();
  return D;
}

inline Matrix cross_derivative(const LossModel& m, const Vector& w, const Dataset& ds) {
  return cross_derivative(m, w, ds, ds.group_index);
}

inline void check_simplex(const Vector& lambda, Index S) {
  if (static_cast<Index>(lambda.size()) != S)
    throw Error("group weights have " + std::to_string(lambda.size()) + " entries, expected " +
                std::to_string(S));
  if (lambda.minCoeff() < -1e-9 || std::abs(lambda.sum() - 1.0) > 1e-9)
    throw Error("group weights are not on the probability simplex");
}

// D^T lambda, accumulated row by row in group order.
inline Vector weighted_rows(const Matrix& D, const Vector& lambda) {
  Vector out = Vector::Zero(D.cols());
  for (Eigen::Index a = 0; a < D.rows(); ++a) out += lambda[a] * D.row(a).transpose();
  return out;
}

// D v: the directional derivative of every group loss along v.
inline Vector rows_dot(const Matrix& D, const Vector& v) {
  Vector out(D.rows());
  for (Eigen::Index a = 0; a < D.rows(); ++a) out[a] = D.row(a).dot(v);
  return out;
}

inline double scalarized_loss(const LossModel& m, const Vector& w, const Dataset& ds, const GroupRows& rows,
                              const Vector& lambda) {
  check_simplex(lambda, rows.size());
  double sum = 0.0;
  for (Index a = 0; a < rows.size(); ++a)
    sum += lambda[static_cast<Eigen::Index>(a)] * group_loss(m, w, ds, rows, a);
  return sum;
}

inline double scalarized_loss(const LossModel& m, const Vector& w, const Dataset& ds, const Vector& lambda) {
  return scalarized_loss(m, w, ds, ds.group_index, lambda);
}

inline Vector scalarized_grad(const LossModel& m, const Vector& w, const Dataset& ds, const GroupRows& rows,
                              const Vector& lambda) {
  check_simplex(lambda, rows.size());
  return weighted_rows(cross_derivative(m, w, ds, rows), lambda);
}

inline Vector scalarized_grad(const LossModel& m, const Vector& w, const Dataset& ds, const Vector& lambda) {
  return scalarized_grad(m, w, ds, ds.group_index, lambda);
}

// (sum_a lambda_a Hess F_a(w)) v, matrix-free.
inline Vector scalarized_hvp(const LossModel& m, const Vector& w, const Dataset& ds, const GroupRows& rows,
                             const Vector& lambda, const Vector& v) {
  detail::check_dims(w, ds);
  if (v.size() != w.size()) throw Error("dimension mismatch between w and v");
  check_simplex(lambda, rows.size());
  Vector out = Vector::Zero(w.size());
  for (Index a = 0; a < rows.size(); ++a) {
    detail::check_group(rows, a);
    Vector acc = Vector::Zero(w.size());
    for (Index i : rows[a]) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto x = ds.X.row(r);
      acc += (detail::data_loss_curvature(m.kind, x.dot(w), ds.y[r]) * x.dot(v)) * x.transpose();
    }
    out += lambda[static_cast<Eigen::Index>(a)] * (acc / static_cast<double>(rows[a].size()) + m.reg * v);
  }
  return out;
}

inline Vector scalarized_hvp(const LossModel& m, const Vector& w, const Dataset& ds, const Vector& lambda,
                             const Vector& v) {
  return scalarized_hvp(m, w, ds, ds.group_index, lambda, v);
}

// Largest eigenvalue of the data part of group a's Hessian at w, by power
// iteration from the all-ones direction.
inline double group_curvature_estimate(const LossModel& m, const Vector& w, const Dataset& ds, Index a,
                                       int steps = 20) {
  const Index S = ds.num_groups();
  Vector vertex = Vector::Zero(static_cast<Eigen::Index>(S));
  vertex[static_cast<Eigen::Index>(a)] = 1.0;
  const LossModel data_only{m.kind, 0.0};
  Vector v = Vector::Ones(w.size()).normalized();
  double eig = 0.0;
  for (int k = 0; k < steps; ++k) {
    Vector hv = scalarized_hvp(data_only, w, ds, vertex, v);
    eig = v.dot(hv);
    const double nrm = hv.norm();
    if (nrm == 0.0) return 0.0;
    v = hv / nrm;
  }
  return eig;
}

// Smoothness estimate of the scalarized objective: worst group's curvature plus reg.
inline double smoothness_estimate(const LossModel& m, const Vector& w, const Dataset& ds) {
  double worst = 0.0;
  for (Index a = 0; a < ds.num_groups(); ++a) worst = std::max(worst, group_curvature_estimate(m, w, ds, a));
  return worst + m.reg;
}

}  // namespace badr
