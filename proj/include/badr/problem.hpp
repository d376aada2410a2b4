#pragma once

#include <memory>

#include "badr/metrics.hpp"

namespace badr {

// A fair-learning task: shared immutable data, the loss model and the metric
// to minimize over the Pareto front.
struct Problem {
  std::shared_ptr<const Dataset> data;
  LossModel model;
  FairnessMetric metric;
  // Curvature bound of the scalarized objective: largest group Hessian
  // eigenvalue at w = 0 (20 power iterations) plus reg. For all three losses the
  // data curvature is largest at w = 0, so this bounds it everywhere.
  double smoothness = 0.0;

  const Dataset& ds() const { return *data; }
  Index num_groups() const { return data->num_groups(); }
  Index dim() const { return data->d(); }
};

inline Problem make_problem(Dataset ds, LossModel model, FairnessMetric metric) {
  validate(ds);
  if (model.reg < 0.0) throw Error("loss regularization must be >= 0");
  if (model.kind != LossKind::ridge && ds.task != Task::classification)
    throw Error("loss '" + to_string(model.kind) + "' requires a classification task");
  if (!supports(metric.kind, ds.task))
    throw Error("metric '" + to_string(metric.kind) + "' does not support " + to_string(ds.task) + " tasks");
  metric.model = model;
  const double L = smoothness_estimate(model, Vector::Zero(static_cast<Eigen::Index>(ds.d())), ds);
  return Problem{std::make_shared<const Dataset>(std::move(ds)), model, metric, L};
}

// Same model and metric on another dataset (e.g. the test split).
inline Problem with_data(const Problem& p, Dataset ds) {
  return make_problem(std::move(ds), p.model, p.metric);
}

}  // namespace badr
