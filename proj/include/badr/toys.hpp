#pragma once

#include <cstdint>

#include "badr/problem.hpp"

namespace badr {

// The bundled 2-group biased problems: 140 + 60 rows, 5 standardized features
// plus intercept, reg = 1e-2.
inline Dataset biased_toy_data(Task task = Task::classification, std::uint64_t seed = 7, double shift = 1.0) {
  return standardize(synth_biased({140, 60}, 5, shift, seed, task));
}

inline Problem biased_toy(MetricKind metric = MetricKind::individual_fairness, LossKind loss = LossKind::logistic,
                          std::uint64_t seed = 7) {
  const Task task = loss == LossKind::ridge ? Task::regression : Task::classification;
  FairnessMetric fm;
  fm.kind = metric;
  return make_problem(biased_toy_data(task, seed), LossModel{loss, 1e-2}, fm);
}

}  // namespace badr
