#include "support.hpp"

#include "xlemo/crosslingual.hpp"
#include "xlemo/errors.hpp"
#include "xlemo/features.hpp"
#include "xlemo/metrics.hpp"

#include <gtest/gtest.h>

using namespace xlemo;
using xlemo::testing::gaussian;
using xlemo::testing::random_orthogonal;

namespace {

struct Pair {
  EmbeddingTable src;
  EmbeddingTable tgt;
  BilingualDictionary dict;
};

Pair rotated(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Q, double noise = 0.0, std::uint64_t seed = 0) {
  Rng rng(seed);
  std::vector<std::string> sw, tw;
  BilingualDictionary dict;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    sw.push_back("en" + std::to_string(i));
    tw.push_back("es" + std::to_string(i));
    dict.pairs.emplace_back(sw.back(), tw.back());
  }
  Eigen::MatrixXd T = S * Q;
  if (noise > 0) T += noise * gaussian(T.rows(), T.cols(), rng);
  return {EmbeddingTable(sw, RowMatrixXd(S)), EmbeddingTable(tw, RowMatrixXd(T)), dict};
}

}  // namespace

TEST(Procrustes, RecoversRandomRotation) {
  Rng rng(50);
  const Eigen::MatrixXd Q = random_orthogonal(50, rng);
  const Eigen::MatrixXd X = gaussian(300, 50, rng);
  const Eigen::MatrixXd W = xling::orthogonal_procrustes(X, X * Q);
  EXPECT_LT((W - Q).norm(), 1e-6);
  EXPECT_LT(xling::orthogonality_error(W), 1e-6);

  const Pair p = rotated(X, Q);
  const auto map = xling::procrustes_align(p.src, p.tgt, p.dict);
  EXPECT_LT((map.W - Q).norm(), 1e-6);
  EXPECT_LT(xling::orthogonality_error(map.W), 1e-6);
  EXPECT_EQ(map.pairs_used, 300u);
}

TEST(Procrustes, IdenticalTablesGiveIdentity) {
  Rng rng(1);
  const Eigen::MatrixXd S = gaussian(40, 10, rng);
  const Pair p = rotated(S, Eigen::MatrixXd::Identity(10, 10));
  const auto map = xling::procrustes_align(p.src, p.tgt, p.dict);
  EXPECT_LT((map.W - Eigen::MatrixXd::Identity(10, 10)).norm(), 1e-6);
}

TEST(Procrustes, NoisyRotationMapsPairsClose) {
  Rng rng(77);
  const Eigen::MatrixXd Q = random_orthogonal(30, rng);
  const Pair p = rotated(gaussian(500, 30, rng), Q, 0.01, 78);
  const auto map = xling::procrustes_align(p.src, p.tgt, p.dict);
  EXPECT_LT(xling::orthogonality_error(map.W), 1e-6);
  const EmbeddingTable mapped = xling::map_embeddings(map, p.src);
  const EmbeddingTable target = xling::preprocess(p.tgt);
  double cos = 0;
  for (const auto& [s, t] : p.dict.pairs) {
    const Eigen::RowVectorXd a = mapped.row(*mapped.find(s));
    const Eigen::RowVectorXd b = target.row(*target.find(t));
    cos += a.dot(b) / (a.norm() * b.norm());
  }
  EXPECT_GT(cos / static_cast<double>(p.dict.size()), 0.95);
}

TEST(Procrustes, SmallInstanceOptimality) {
  Rng rng(4);
  for (int d : {2, 3, 4}) {
    const Eigen::MatrixXd X = gaussian(6, d, rng);
    const Eigen::MatrixXd Z = gaussian(6, d, rng);
    const Eigen::MatrixXd W = xling::orthogonal_procrustes(X, Z);
    const double best = (X * W - Z).norm();
    for (int k = 0; k < 10000; ++k) {
      const Eigen::MatrixXd R = random_orthogonal(d, rng);
      ASSERT_GE((X * R - Z).norm(), best - 1e-12) << "d=" << d << " sample " << k;
    }
  }
}

TEST(Procrustes, TooFewPairs) {
  Rng rng(3);
  Pair p = rotated(gaussian(20, 8, rng), Eigen::MatrixXd::Identity(8, 8));
  p.dict.pairs.resize(5);
  p.dict.pairs.emplace_back("missing", "es1");
  try {
    xling::procrustes_align(p.src, p.tgt, p.dict);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("only 5"), std::string::npos) << e.what();
  }
}

TEST(MapEmbeddings, IdentityRotationAndRoundTrip) {
  Rng rng(10);
  const Eigen::MatrixXd S = gaussian(25, 6, rng);
  const Pair p = rotated(S, Eigen::MatrixXd::Identity(6, 6));
  const EmbeddingTable pre = xling::preprocess(p.src);

  xling::AlignmentMap id;
  id.W = Eigen::MatrixXd::Identity(6, 6);
  EXPECT_LT((xling::map_embeddings(id, p.src).vectors() - pre.vectors()).norm(), 1e-15);

  xling::AlignmentMap rot;
  rot.W = random_orthogonal(6, rng);
  const EmbeddingTable mapped = xling::map_embeddings(rot, p.src);
  EXPECT_EQ(mapped.words(), p.src.words());
  EXPECT_LT((mapped.vectors() - pre.vectors() * rot.W).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((mapped.vectors() * rot.W.transpose() - pre.vectors()).cwiseAbs().maxCoeff(), 1e-8);

  xling::AlignmentMap wrong;
  wrong.W = Eigen::MatrixXd::Identity(5, 5);
  EXPECT_THROW(xling::map_embeddings(wrong, p.src), ValidationError);
}

TEST(MapEmbeddings, PreprocessingShape) {
  Rng rng(2);
  RowMatrixXd M = gaussian(30, 5, rng);
  xling::normalize_center_normalize(M);
  for (Eigen::Index i = 0; i < M.rows(); ++i) EXPECT_NEAR(M.row(i).norm(), 1.0, 1e-12);
}

TEST(AlignmentMap, JsonRoundTrip) {
  Rng rng(6);
  xling::AlignmentMap m;
  m.W = random_orthogonal(4, rng);
  m.pairs_used = 9;
  m.pairs_dropped = 2;
  const auto back = xling::AlignmentMap::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.W, m.W);
  EXPECT_EQ(back.pairs_dropped, 2u);
}

TEST(Blse, SyntheticRotatedTransfer) {
  const auto task = xlemo::testing::transfer_task(7);
  const auto model = xling::train_blse(task.train, task.source, task.target, task.dictionary, task.dev, {});
  EXPECT_EQ(model.history.size(), 100u);
  std::vector<double> p, g;
  for (const Item& it : task.test.items) {
    p.push_back(xling::predict_blse(model, it, task.target, xling::Side::target));
    g.push_back(*it.gold_score);
  }
  EXPECT_GE(pearson(p, g), 0.9);
  EXPECT_LT(model.history[static_cast<std::size_t>(model.best_epoch)].projection_loss, model.initial_projection_loss);

  // dev selection is the earliest argmax
  double best = -2;
  int arg = -1;
  for (std::size_t e = 0; e < model.history.size(); ++e) {
    if (model.history[e].dev_pearson > best) {
      best = model.history[e].dev_pearson;
      arg = static_cast<int>(e);
    }
  }
  EXPECT_EQ(model.best_epoch, arg);
}

TEST(Blse, DeterministicGivenSeed) {
  const auto task = xlemo::testing::transfer_task(3, 8, 60, 80, 30, 10, 4);
  xling::BlseConfig c;
  c.epochs = 10;
  c.seed = 5;
  const auto a = xling::train_blse(task.train, task.source, task.target, task.dictionary, task.dev, c);
  const auto b = xling::train_blse(task.train, task.source, task.target, task.dictionary, task.dev, c);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Blse, AlphaZeroIsSourceRegression) {
  const auto task = xlemo::testing::transfer_task(11, 10, 80, 150, 40, 10, 5);
  xling::BlseConfig c;
  c.alpha = 0.0;
  const auto model = xling::train_blse(task.train, task.source, task.target, task.dictionary, task.dev, c);
  EXPECT_LT(model.history.back().source_mse, model.initial_source_mse);
  EXPECT_EQ(model.target_projection, Eigen::MatrixXd::Identity(10, 10));
}

TEST(Blse, PredictionConventions) {
  const auto task = xlemo::testing::transfer_task(2, 4, 20, 20, 10, 5, 3);
  xling::BlseConfig c;
  c.epochs = 2;
  auto model = xling::train_blse(task.train, task.source, task.target, task.dictionary, task.dev, c);
  const Item& it = task.train.items[0];
  const Eigen::VectorXd avg = average_embedding(task.source, tokenize(it.text));
  EXPECT_NEAR(xling::predict_blse(model, it, task.source, xling::Side::source),
              model.head_weights.dot(model.source_projection * avg) + model.head_bias, 1e-12);

  Item empty = it;
  empty.text = "nothing known here";
  EXPECT_EQ(xling::predict_blse(model, empty, task.source, xling::Side::source), model.head_bias);

  model.head_weights.setZero();
  model.head_bias = 0.4;
  EXPECT_EQ(xling::predict_blse(model, it, task.target, xling::Side::target), 0.4);
}

TEST(Blse, Errors) {
  const auto task = xlemo::testing::transfer_task(2, 4, 20, 20, 10, 5, 3);
  BilingualDictionary none;
  none.pairs.emplace_back("zzz", "yyy");
  EXPECT_THROW(xling::train_blse(task.train, task.source, task.target, none, task.dev, {}), ValidationError);
  Corpus unlabeled = task.dev;
  unlabeled.items[0].gold_score.reset();
  EXPECT_THROW(xling::train_blse(task.train, task.source, task.target, task.dictionary, unlabeled, {}),
               ValidationError);
}

TEST(Blse, JsonRoundTrip) {
  const auto task = xlemo::testing::transfer_task(2, 4, 20, 20, 10, 5, 3);
  xling::BlseConfig c;
  c.epochs = 3;
  const auto m = xling::train_blse(task.train, task.source, task.target, task.dictionary, task.dev, c);
  const auto back = xling::BlseModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.source_projection, m.source_projection);
  EXPECT_EQ(back.head_weights, m.head_weights);
  EXPECT_EQ(back.history.size(), 3u);
  EXPECT_EQ(back.best_epoch, m.best_epoch);
}
