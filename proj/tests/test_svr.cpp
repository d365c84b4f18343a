#include "support.hpp"

#include "xlemo/errors.hpp"
#include "xlemo/metrics.hpp"
#include "xlemo/svr.hpp"

#include <gtest/gtest.h>

using namespace xlemo;

namespace {

FeatureVector sparse(Eigen::Index dim, std::vector<std::pair<Eigen::Index, double>> entries) {
  FeatureVector x(dim);
  for (const auto& [i, v] : entries) x.insertBack(i) = v;
  return x;
}

/// Noiseless task with a sparse ground-truth w over 50 dims.
xlemo::testing::LinearTask sparse_task(std::uint64_t seed) {
  auto t = xlemo::testing::linear_task(50, 500, 200, seed);
  Rng rng(seed + 1);
  for (Eigen::Index k = 0; k < t.w.size(); ++k) {
    if (rng.uniform() < 0.6) t.w(k) = 0.0;
  }
  auto relabel = [&](const std::vector<FeatureVector>& X, std::vector<double>& y) {
    for (std::size_t i = 0; i < X.size(); ++i) y[i] = X[i].dot(t.w.sparseView()) + t.b;
  };
  relabel(t.X_train, t.y_train);
  relabel(t.X_test, t.y_test);
  return t;
}

}  // namespace

TEST(SvrTrain, SingleExampleInsideTube) {
  const std::vector<FeatureVector> X{sparse(1, {{0, 1.0}})};
  const std::vector<double> y{0.5};
  const auto m = svr::train(X, y, {});
  const double p = svr::predict(m, X[0]);
  EXPECT_GE(p, 0.4 - 1e-12);
  EXPECT_LE(p, 0.6 + 1e-12);
  EXPECT_TRUE(m.converged);
}

TEST(SvrTrain, ConstantTargetFitsWithinEpsilon) {
  Rng rng(9);
  std::vector<FeatureVector> X;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::pair<Eigen::Index, double>> e;
    for (Eigen::Index k = 0; k < 20; ++k) {
      if (rng.uniform() < 0.2) e.emplace_back(k, rng.normal());
    }
    X.push_back(sparse(20, e));
  }
  const std::vector<double> y(50, 0.7);
  svr::SvrConfig c;
  c.tolerance = 1e-8;
  const auto m = svr::train(X, y, c);
  for (const auto& x : X) EXPECT_NEAR(svr::predict(m, x), 0.7, 0.1 + 1e-6);
}

TEST(SvrTrain, RecoversNoiselessLinearTask) {
  const auto t = sparse_task(3);
  const auto m = svr::train(t.X_train, t.y_train, {});
  EXPECT_GE(pearson(svr::predict(m, t.X_test), t.y_test), 0.99);
}

TEST(SvrTrain, DualObjectiveNonIncreasing) {
  const auto t = xlemo::testing::linear_task(30, 200, 10, 12);
  svr::SvrConfig c;
  c.C = 1.0;
  const auto m = svr::train(t.X_train, t.y_train, c);
  ASSERT_GE(m.dual_objective.size(), 2u);
  for (std::size_t k = 1; k < m.dual_objective.size(); ++k) {
    EXPECT_LE(m.dual_objective[k], m.dual_objective[k - 1] + 1e-9) << "pass " << k;
  }
}

TEST(SvrTrain, BitwiseDeterministic) {
  const auto t = xlemo::testing::linear_task(20, 150, 10, 5);
  svr::SvrConfig c;
  c.seed = 77;
  const auto a = svr::train(t.X_train, t.y_train, c);
  const auto b = svr::train(t.X_train, t.y_train, c);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.dual_objective, b.dual_objective);
}

TEST(SvrTrain, DuplicatedExamplesGiveSamePredictor) {
  auto t = xlemo::testing::linear_task(10, 120, 40, 21);
  for (auto& v : t.y_train) v *= 0.05;  // keep |y| moderate
  svr::SvrConfig c;
  c.tolerance = 1e-7;
  c.max_iterations = 100000;
  const auto once = svr::train(t.X_train, t.y_train, c);
  auto X2 = t.X_train;
  auto y2 = t.y_train;
  X2.insert(X2.end(), t.X_train.begin(), t.X_train.end());
  y2.insert(y2.end(), t.y_train.begin(), t.y_train.end());
  const auto twice = svr::train(X2, y2, c);
  for (const auto& x : t.X_test) EXPECT_NEAR(svr::predict(once, x), svr::predict(twice, x), 1e-4);
}

TEST(SvrTrain, LargeEpsilonKeepsZeroPredictor) {
  Rng rng(1);
  std::vector<FeatureVector> X;
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    X.push_back(xlemo::testing::dense_row(xlemo::testing::gaussian(8, 1, rng).col(0)));
    y.push_back(rng.uniform());
  }
  svr::SvrConfig c;
  c.epsilon = 1.0;
  const auto m = svr::train(X, y, c);
  EXPECT_LE(m.weights.norm(), c.tolerance);
  EXPECT_LE(std::abs(m.bias), c.tolerance);
}

TEST(SvrTrain, InputErrors) {
  const std::vector<FeatureVector> X{sparse(2, {{0, 1.0}}), sparse(3, {{0, 1.0}})};
  EXPECT_THROW(svr::train(X, std::vector<double>{0.1, 0.2}, {}), ValidationError);
  const std::vector<FeatureVector> ok{sparse(2, {{0, 1.0}})};
  EXPECT_THROW(svr::train(ok, std::vector<double>{std::nan("")}, {}), ValidationError);
  EXPECT_THROW(svr::train(ok, std::vector<double>{0.1, 0.2}, {}), ValidationError);
  EXPECT_THROW(svr::train({}, {}, {}), ValidationError);
  svr::SvrConfig bad;
  bad.C = 0;
  EXPECT_THROW(svr::train(ok, std::vector<double>{0.1}, bad), ValidationError);
}

TEST(SvrPredict, DotProductAndBias) {
  svr::SvrModel m;
  m.training_dim = 3;
  m.weights = Eigen::VectorXd::Zero(3);
  m.bias = 0.3;
  EXPECT_DOUBLE_EQ(svr::predict(m, sparse(3, {{1, 5.0}})), 0.3);
  m.weights(0) = 2.0;
  m.bias = 0.0;
  EXPECT_DOUBLE_EQ(svr::predict(m, sparse(3, {{0, 0.25}})), 0.5);
  EXPECT_THROW(svr::predict(m, sparse(4, {})), ValidationError);
  EXPECT_EQ(svr::clip_unit(1.7), 1.0);
  EXPECT_EQ(svr::clip_unit(-0.2), 0.0);
  EXPECT_EQ(svr::clip_unit(0.25), 0.25);
}

TEST(SvrEvaluate, PerfectAndReflected) {
  const auto corpus = xlemo::testing::make_corpus({"a", "a b", "b b c", "c"}, {0, 0, 0, 0}, Emotion::anger, "e");
  FeatureConfig fc = FeatureConfig::bag_of_words();
  const auto v = fit(corpus, fc, nullptr, {});
  svr::SvrModel m;
  m.training_dim = v.total_dim();
  m.weights = Eigen::VectorXd::LinSpaced(v.total_dim(), 0.1, 0.5);
  Corpus gold = corpus;
  for (Item& it : gold.items) it.gold_score = svr::predict(m, v.transform(it));
  auto c = svr::evaluate(m, gold, v);
  EXPECT_NEAR(c.pearson, 1.0, 1e-12);
  EXPECT_NEAR(c.spearman, 1.0, 1e-12);
  for (Item& it : gold.items) it.gold_score = 1.0 - *it.gold_score;
  c = svr::evaluate(m, gold, v);
  EXPECT_NEAR(c.pearson, -1.0, 1e-12);
  EXPECT_NEAR(c.spearman, -1.0, 1e-12);
  gold.items[0].gold_score.reset();
  EXPECT_THROW(svr::evaluate(m, gold, v), ValidationError);
}

TEST(SvrModel, JsonRoundTrip) {
  const auto t = xlemo::testing::linear_task(12, 80, 5, 2);
  const auto m = svr::train(t.X_train, t.y_train, {});
  const auto back = svr::SvrModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.training_dim, m.training_dim);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.config.C, m.config.C);
  nlohmann::json broken = m.to_json();
  broken["version"] = 99;
  EXPECT_THROW(svr::SvrModel::from_json(broken), ValidationError);
}
