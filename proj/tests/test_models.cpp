#include <cmath>

#include <gtest/gtest.h>

#include "badr/check.hpp"

using namespace badr;

namespace {

Dataset classification_data(std::uint64_t seed = 3) { return standardize(synth_biased({25, 15}, 4, 1.0, seed)); }

Dataset regression_data(std::uint64_t seed = 3) {
  return standardize(synth_biased({25, 15}, 4, 1.0, seed, Task::regression));
}

Dataset data_for(LossKind kind) { return kind == LossKind::ridge ? regression_data() : classification_data(); }

const LossKind kAllLosses[] = {LossKind::ridge, LossKind::logistic, LossKind::svm2};

}  // namespace

TEST(SampleLoss, ValuesAtZero) {
  const Vector w = Vector::Zero(3);
  const Vector x = Vector::Ones(3);
  EXPECT_DOUBLE_EQ(sample_loss({LossKind::logistic, 0.0}, w, x, -1.0), std::log(2.0));
  EXPECT_DOUBLE_EQ(sample_loss({LossKind::svm2, 0.0}, w, x, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(sample_loss({LossKind::ridge, 0.0}, w, x, 2.0), 4.0);
}

TEST(SampleLoss, LogisticIsStableAtLargeMargins) {
  Vector w(1);
  w << 1000.0;
  Vector x(1);
  x << 1.0;
  EXPECT_NEAR(sample_loss({LossKind::logistic, 0.0}, w, x, -1.0), 1000.0, 1e-9);
  EXPECT_EQ(sample_loss({LossKind::logistic, 0.0}, w, x, 1.0), 0.0);
}

TEST(GroupLoss, SingleSampleGroupEqualsSampleLoss) {
  Dataset ds = classification_data();
  ds.groups.assign(ds.n(), 0);
  ds.groups[7] = 1;
  ds.group_index = index_groups(ds.groups, 2);
  const LossModel m{LossKind::logistic, 0.1};
  const Vector w = Vector::LinSpaced(static_cast<Eigen::Index>(ds.d()), -0.5, 0.5);
  EXPECT_DOUBLE_EQ(group_loss(m, w, ds, 1), sample_loss(m, w, ds.X.row(7).transpose(), ds.y[7]));
  EXPECT_THROW(group_loss(m, w, ds, 2), Error);
}

TEST(GroupGrad, MatchesFiniteDifferences) {
  for (LossKind kind : kAllLosses) {
    const Dataset ds = data_for(kind);
    const LossModel m{kind, 0.05};
    Rng rng(1);
    for (int rep = 0; rep < 5; ++rep) {
      const Vector w = detail::random_vector(rng, ds.d(), 0.5);
      for (Index a = 0; a < 2; ++a) {
        const Vector fd = central_difference([&](const Vector& x) { return group_loss(m, x, ds, a); }, w, 1e-6);
        EXPECT_LE(relative_error(group_grad(m, w, ds, a), fd, 1e-8), 1e-5) << to_string(kind);
      }
    }
  }
}

TEST(GroupGrad, RegularizerContributesNothingAtZero) {
  const Dataset ds = classification_data();
  const Vector w = Vector::Zero(static_cast<Eigen::Index>(ds.d()));
  EXPECT_EQ(group_grad({LossKind::logistic, 0.3}, w, ds, 0), group_grad({LossKind::logistic, 0.0}, w, ds, 0));
}

TEST(Scalarized, VertexEqualsGroupAndRejectsOffSimplex) {
  const Dataset ds = classification_data();
  const LossModel m{LossKind::svm2, 0.01};
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(ds.d()), 0.2);
  EXPECT_EQ(scalarized_loss(m, w, ds, simplex_vertex(1, 2)), group_loss(m, w, ds, 1));
  EXPECT_EQ(scalarized_grad(m, w, ds, simplex_vertex(1, 2)), group_grad(m, w, ds, 1));
  Vector bad(2);
  bad << 0.7, 0.4;
  EXPECT_THROW(scalarized_loss(m, w, ds, bad), Error);
}

TEST(Scalarized, IdenticalGroupsEqualOneGroup) {
  Dataset one = classification_data();
  Dataset twice;
  twice.task = one.task;
  twice.X = Matrix(2 * one.X.rows(), one.X.cols());
  twice.X << one.X, one.X;
  twice.y = Vector(2 * one.y.size());
  twice.y << one.y, one.y;
  for (int g = 0; g < 2; ++g)
    for (Index i = 0; i < one.n(); ++i) twice.groups.push_back(g);
  twice.group_index = index_groups(twice.groups, 2);
  const LossModel m{LossKind::logistic, 0.01};
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(one.d()), -0.3);
  one.groups.assign(one.n(), 0);
  one.group_index = index_groups(one.groups, 1);
  EXPECT_NEAR(scalarized_loss(m, w, twice, uniform_weights(2)), group_loss(m, w, one, 0), 1e-14);
}

TEST(Scalarized, GradientIsExactlyCrossDerivativeTransposeLambda) {
  for (LossKind kind : kAllLosses) {
    const Dataset ds = data_for(kind);
    const LossModel m{kind, 0.01};
    const Vector w = Vector::LinSpaced(static_cast<Eigen::Index>(ds.d()), -1.0, 1.0);
    Vector lambda(2);
    lambda << 0.3, 0.7;
    const Matrix D = cross_derivative(m, w, ds);
    EXPECT_EQ(scalarized_grad(m, w, ds, lambda), weighted_rows(D, lambda));
    for (Index a = 0; a < 2; ++a) EXPECT_EQ(Vector(D.row(static_cast<Eigen::Index>(a)).transpose()), group_grad(m, w, ds, a));
  }
}

TEST(CrossDerivative, MixedPartialMatchesFiniteDifferences) {
  // d/dlambda_a of the scalarized gradient along a simplex direction e_a - e_b
  // is row a minus row b of the cross derivative.
  const Dataset ds = classification_data();
  const LossModel m{LossKind::logistic, 0.01};
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(ds.d()), 0.1);
  Vector lambda(2), t(2);
  lambda << 0.4, 0.6;
  t << 1.0, -1.0;
  const double h = 1e-4;
  const Vector fd =
      (scalarized_grad(m, w, ds, Vector(lambda + h * t)) - scalarized_grad(m, w, ds, Vector(lambda - h * t))) / (2 * h);
  const Matrix D = cross_derivative(m, w, ds);
  EXPECT_LE(relative_error(Vector((D.row(0) - D.row(1)).transpose()), fd, 1e-8), 1e-4);
}

TEST(Hvp, MatchesFiniteDifferencesAndIsLinearSymmetric) {
  for (LossKind kind : kAllLosses) {
    const Dataset ds = data_for(kind);
    const LossModel m{kind, 0.02};
    Rng rng(4);
    const Vector w = detail::random_vector(rng, ds.d(), 0.4);
    Vector lambda(2);
    lambda << 0.35, 0.65;
    const Vector u = detail::random_vector(rng, ds.d(), 1.0);
    const Vector v = detail::random_vector(rng, ds.d(), 1.0);
    const double h = 1e-6;
    const Vector fd = (scalarized_grad(m, w + h * v, ds, lambda) - scalarized_grad(m, w - h * v, ds, lambda)) / (2 * h);
    const Vector hv = scalarized_hvp(m, w, ds, lambda, v);
    EXPECT_LE(relative_error(hv, fd, 1e-8), 1e-4) << to_string(kind);
    EXPECT_NEAR(u.dot(hv), v.dot(scalarized_hvp(m, w, ds, lambda, u)), 1e-10);
    EXPECT_LE((scalarized_hvp(m, w, ds, lambda, Vector(2.0 * u + v)) - 2.0 * scalarized_hvp(m, w, ds, lambda, u) - hv)
                  .norm(),
              1e-12);
    EXPECT_EQ(scalarized_hvp(m, w, ds, lambda, Vector::Zero(v.size())), Vector::Zero(v.size()));
  }
}

TEST(Hvp, RidgeRankOne) {
  Dataset ds;
  ds.X = Matrix::Zero(1, 3);
  ds.X(0, 0) = 1.0;
  ds.y = Vector::Ones(1);
  ds.groups = {0};
  ds.group_index = index_groups(ds.groups, 1);
  ds.task = Task::regression;
  Vector v(3);
  v << 1.5, -2.0, 4.0;
  const Vector hv = scalarized_hvp({LossKind::ridge, 0.0}, Vector::Zero(3), ds, Vector::Ones(1), v);
  EXPECT_EQ(hv, (Vector(3) << 3.0, 0.0, 0.0).finished());
}

TEST(StrongConvexity, HoldsOnRandomPairs) {
  for (LossKind kind : kAllLosses) {
    const Dataset ds = data_for(kind);
    const double mu = 0.05;
    const LossModel m{kind, mu};
    const Vector lambda = uniform_weights(2);
    Rng rng(8);
    for (int rep = 0; rep < 100; ++rep) {
      const Vector w1 = detail::random_vector(rng, ds.d(), 1.0);
      const Vector w2 = detail::random_vector(rng, ds.d(), 1.0);
      const double lhs = scalarized_loss(m, w2, ds, lambda);
      const double rhs = scalarized_loss(m, w1, ds, lambda) + scalarized_grad(m, w1, ds, lambda).dot(w2 - w1) +
                         0.5 * mu * (w2 - w1).squaredNorm();
      EXPECT_GE(lhs, rhs - 1e-10) << to_string(kind);
    }
  }
}

TEST(Smoothness, RidgeIdentityDesign) {
  const Index n = 4;
  Dataset ds;
  ds.X = Matrix::Identity(n, n);
  ds.y = Vector::Ones(n);
  ds.groups.assign(n, 0);
  ds.group_index = index_groups(ds.groups, 1);
  ds.task = Task::regression;
  const double L = smoothness_estimate({LossKind::ridge, 0.1}, Vector::Zero(n), ds);
  EXPECT_NEAR(L, 2.0 / static_cast<double>(n) + 0.1, 1e-6);
}
