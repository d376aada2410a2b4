#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "badr/check.hpp"

using namespace badr;

namespace {

FairnessMetric metric(MetricKind kind, Task task) {
  FairnessMetric fm;
  fm.kind = kind;
  fm.model = LossModel{task == Task::regression ? LossKind::ridge : LossKind::logistic, 1e-2};
  return fm;
}

Task task_for(MetricKind kind) {
  return supports(kind, Task::classification) ? Task::classification : Task::regression;
}

Dataset data(Task task, std::uint64_t seed = 5, std::vector<Index> sizes = {30, 20, 25}) {
  return standardize(synth_biased(sizes, 4, 1.0, seed, task));
}

// Same rows in a different order (group labels travel with their rows).
Dataset permuted(const Dataset& ds, std::uint64_t seed) {
  std::vector<Index> order(ds.n());
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  shuffle(order, rng);
  return subset_rows(ds, order);
}

// Groups renamed by `perm` (new label = perm[old label]).
Dataset relabeled(const Dataset& ds, const std::vector<int>& perm) {
  Dataset out = ds;
  for (auto& g : out.groups) g = perm[static_cast<std::size_t>(g)];
  out.group_index = index_groups(out.groups, ds.num_groups());
  return out;
}

Dataset single_group(Dataset ds) {
  ds.groups.assign(ds.n(), 0);
  ds.group_index = index_groups(ds.groups, 1);
  return ds;
}

// Two groups holding the same rows.
Dataset duplicated_groups(const Dataset& one) {
  Dataset out;
  out.task = one.task;
  out.X = Matrix(2 * one.X.rows(), one.X.cols());
  out.X << one.X, one.X;
  out.y = Vector(2 * one.y.size());
  out.y << one.y, one.y;
  for (int g = 0; g < 2; ++g)
    for (Index i = 0; i < one.n(); ++i) out.groups.push_back(g);
  out.group_index = index_groups(out.groups, 2);
  return out;
}

}  // namespace

TEST(Metrics, NamesRoundTripAndUnknownNameListsOptions) {
  for (const auto& [name, kind] : metric_names()) EXPECT_EQ(to_string(parse_metric(name)), name);
  try {
    parse_metric("parity");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gv, if, dp, dm, eop, eod, hsic"), std::string::npos);
  }
}

TEST(Metrics, TaskCompatibility) {
  const Dataset reg = data(Task::regression);
  const Dataset cls = data(Task::classification);
  const Vector w = Vector::Zero(static_cast<Eigen::Index>(reg.d()));
  EXPECT_THROW(metric_value(metric(MetricKind::equal_opportunity, Task::regression), w, reg), Error);
  EXPECT_THROW(metric_value(metric(MetricKind::disparate_mistreatment, Task::regression), w, reg), Error);
  EXPECT_THROW(metric_value(metric(MetricKind::hsic, Task::classification), w, cls), Error);
}

TEST(Metrics, GradientsMatchFiniteDifferences) {
  for (const auto& [name, kind] : metric_names()) {
    const Task task = task_for(kind);
    FairnessMetric fm = metric(kind, task);
    fm.if_pair_cap = 0;
    Rng rng(17);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Dataset ds = data(task, 40 + seed);
      const Vector w = detail::random_vector(rng, ds.d(), 0.5);
      const Vector fd = central_difference([&](const Vector& x) { return metric_value(fm, x, ds); }, w, 1e-6);
      EXPECT_LE(relative_error(metric_grad(fm, w, ds), fd), 1e-5) << name;
    }
  }
}

TEST(Metrics, TrivialZeros) {
  const Dataset cls = data(Task::classification);
  const Dataset reg = data(Task::regression);
  const Vector w0 = Vector::Zero(static_cast<Eigen::Index>(cls.d()));
  const Vector w = Vector::LinSpaced(static_cast<Eigen::Index>(cls.d()), -1.0, 1.0);
  EXPECT_EQ(metric_value(metric(MetricKind::group_variance, Task::classification), w, single_group(cls)), 0.0);
  EXPECT_EQ(metric_value(metric(MetricKind::disparate_mistreatment, Task::classification), w, single_group(cls)), 0.0);
  EXPECT_EQ(metric_grad(metric(MetricKind::disparate_mistreatment, Task::classification), w, single_group(cls)),
            Vector::Zero(w.size()));
  EXPECT_EQ(metric_value(metric(MetricKind::individual_fairness, Task::classification), w0, cls), 0.0);
  EXPECT_EQ(metric_value(metric(MetricKind::individual_fairness, Task::regression), w0, reg), 0.0);
  EXPECT_EQ(metric_value(metric(MetricKind::hsic, Task::regression), w0, reg), 0.0);
}

TEST(Metrics, DemographicParityOfIdenticalGroupsIsTheSoftMaxFloor) {
  // |p_a - pbar| = 0 for every group, so log-sum-exp leaves log(S) / rho.
  const Dataset ds = duplicated_groups(data(Task::classification, 9, {30}));
  const FairnessMetric fm = metric(MetricKind::demographic_parity, Task::classification);
  const Vector w = Vector::LinSpaced(static_cast<Eigen::Index>(ds.d()), -0.5, 0.5);
  EXPECT_NEAR(metric_value(fm, w, ds), std::log(2.0) / fm.smooth, 1e-12);
  EXPECT_LE(metric_grad(fm, w, ds).norm(), 1e-12);
}

TEST(Metrics, NonNegativity) {
  Rng rng(2);
  for (MetricKind kind : {MetricKind::group_variance, MetricKind::individual_fairness,
                          MetricKind::disparate_mistreatment, MetricKind::hsic}) {
    const Task task = task_for(kind);
    const FairnessMetric fm = metric(kind, task);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Dataset ds = data(task, seed);
      EXPECT_GE(metric_value(fm, detail::random_vector(rng, ds.d(), 1.0), ds), 0.0) << to_string(kind);
    }
  }
}

TEST(Metrics, EqualOpportunityBoundsEqualizedOdds) {
  Rng rng(6);
  const FairnessMetric eop = metric(MetricKind::equal_opportunity, Task::classification);
  const FairnessMetric eod = metric(MetricKind::equalized_odds, Task::classification);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset ds = data(Task::classification, 100 + seed, {80, 80, 80});
    const Vector w = detail::random_vector(rng, ds.d(), 0.7);
    EXPECT_LE(metric_value(eop, w, ds), metric_value(eod, w, ds));
  }
}

TEST(Metrics, EqualizedRatesNeedBothLabelsPerGroup) {
  Dataset ds = data(Task::classification);
  for (Index i : ds.group_index[1]) ds.y[static_cast<Eigen::Index>(i)] = 1.0;
  const Vector w = Vector::Zero(static_cast<Eigen::Index>(ds.d()));
  EXPECT_NO_THROW(metric_value(metric(MetricKind::equal_opportunity, Task::classification), w, ds));
  EXPECT_THROW(metric_value(metric(MetricKind::equalized_odds, Task::classification), w, ds), Error);
}

TEST(Metrics, RowOrderDoesNotChangeAnyBit) {
  Rng rng(12);
  for (const auto& [name, kind] : metric_names()) {
    const Task task = task_for(kind);
    FairnessMetric fm = metric(kind, task);
    fm.if_pair_cap = 0;
    const Dataset ds = data(task, 77);
    const Dataset shuffled = permuted(ds, 3);
    const Vector w = detail::random_vector(rng, ds.d(), 0.5);
    EXPECT_EQ(metric_value(fm, w, ds), metric_value(fm, w, shuffled)) << name;
    EXPECT_EQ(metric_grad(fm, w, ds), metric_grad(fm, w, shuffled)) << name;
  }
}

TEST(Metrics, RateMetricsIgnoreGroupNames) {
  Rng rng(13);
  const Dataset ds = data(Task::classification, 31);
  const Dataset renamed = relabeled(ds, {2, 0, 1});
  for (MetricKind kind :
       {MetricKind::demographic_parity, MetricKind::equal_opportunity, MetricKind::equalized_odds}) {
    const FairnessMetric fm = metric(kind, Task::classification);
    const Vector w = detail::random_vector(rng, ds.d(), 0.5);
    EXPECT_NEAR(metric_value(fm, w, ds), metric_value(fm, w, renamed), 1e-12) << to_string(kind);
    EXPECT_LE((metric_grad(fm, w, ds) - metric_grad(fm, w, renamed)).norm(), 1e-12) << to_string(kind);
  }
}

TEST(Metrics, GroupVarianceMatchesTheVarianceOfGroupLosses) {
  const Dataset ds = data(Task::classification);
  const FairnessMetric fm = metric(MetricKind::group_variance, Task::classification);
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(ds.d()), 0.3);
  std::vector<double> F;
  for (Index a = 0; a < ds.num_groups(); ++a) F.push_back(group_loss(fm.model, w, ds, a));
  const double mean = std::accumulate(F.begin(), F.end(), 0.0) / 3.0;
  double var = 0.0;
  for (double f : F) var += (f - mean) * (f - mean) / 3.0;
  EXPECT_NEAR(metric_value(fm, w, ds), var, 1e-14);
}

TEST(Metrics, IndividualFairnessClassificationMatchesPairSum) {
  const Dataset ds = data(Task::classification, 8, {7, 5, 6});
  const FairnessMetric fm = metric(MetricKind::individual_fairness, Task::classification);
  const Vector w = Vector::LinSpaced(static_cast<Eigen::Index>(ds.d()), 0.2, -0.4);
  double total = 0.0, pairs = 0.0;
  for (Index a = 0; a < 3; ++a)
    for (Index b = a + 1; b < 3; ++b)
      for (Index i : ds.group_index[a])
        for (Index j : ds.group_index[b]) {
          const auto ri = static_cast<Eigen::Index>(i), rj = static_cast<Eigen::Index>(j);
          const double diff = ds.X.row(ri).dot(w) - ds.X.row(rj).dot(w);
          total += std::exp(-std::abs(ds.y[ri] - ds.y[rj])) * diff * diff;
          pairs += 1.0;
        }
  EXPECT_NEAR(metric_value(fm, w, ds), total / pairs, 1e-12);
}

TEST(Metrics, IndividualFairnessPairCapIsSeededAndClose) {
  const Dataset ds = data(Task::regression, 4, {80, 60});
  FairnessMetric capped = metric(MetricKind::individual_fairness, Task::regression);
  FairnessMetric exact = capped;
  exact.if_pair_cap = 0;
  const Vector w = Vector::LinSpaced(static_cast<Eigen::Index>(ds.d()), -0.3, 0.6);
  const double v = metric_value(capped, w, ds);
  EXPECT_EQ(v, metric_value(capped, w, ds));
  EXPECT_NEAR(v, metric_value(exact, w, ds), 0.1 * metric_value(exact, w, ds));
}
