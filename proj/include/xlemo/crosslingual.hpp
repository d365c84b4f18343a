#pragma once

#include "xlemo/data_model.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>
#include <json.hpp>

#include <cstdint>
#include <vector>

namespace xlemo::xling {

// ---------------------------------------------------------------------------
// Dense building blocks. Embeddings are row vectors; a map W sends v to vW.

/// Unit-length rows. Zero rows are left untouched.
template <typename Derived>
void normalize_rows(Eigen::MatrixBase<Derived>& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto norm = rows.row(i).norm();
    if (norm > 0) rows.row(i) /= norm;
  }
}

/// Length-normalize, mean-center, length-normalize again.
template <typename Derived>
void normalize_center_normalize(Eigen::MatrixBase<Derived>& rows) {
  normalize_rows(rows);
  if (rows.rows() > 0) {
    const auto mean = rows.colwise().mean().eval();
    rows.rowwise() -= mean;
  }
  normalize_rows(rows);
}

/// Orthogonal W minimizing |XW - Z|_F: W = U V^T for X^T Z = U S V^T.
template <typename DerivedX, typename DerivedZ>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> orthogonal_procrustes(
    const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedZ>& Z) {
  using Matrix = Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix cross = X.transpose() * Z;
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

/// |W^T W - I|_F
template <typename Derived>
typename Derived::Scalar orthogonality_error(const Eigen::MatrixBase<Derived>& W) {
  using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return (W.transpose() * W - Matrix::Identity(W.cols(), W.cols())).norm();
}

// ---------------------------------------------------------------------------
// Supervised orthogonal alignment.

struct AlignmentMap {
  Eigen::MatrixXd W;  // d x d, source -> target
  std::size_t pairs_used = 0;
  std::size_t pairs_dropped = 0;

  Eigen::Index dim() const { return W.rows(); }
  nlohmann::json to_json() const;
  static AlignmentMap from_json(const nlohmann::json& doc);
};

/// Table with every vector preprocessed by normalize_center_normalize.
EmbeddingTable preprocess(const EmbeddingTable& table);

/// Dictionary pair vectors of the preprocessed tables stacked as rows;
/// pairs with an out-of-vocabulary side are dropped and counted.
struct PairMatrices {
  RowMatrixXd source;
  RowMatrixXd target;
  std::size_t dropped = 0;
};
PairMatrices dictionary_matrices(const EmbeddingTable& src, const EmbeddingTable& tgt,
                                 const BilingualDictionary& dict);

AlignmentMap procrustes_align(const EmbeddingTable& src, const EmbeddingTable& tgt,
                              const BilingualDictionary& dict);

/// Preprocessed table with every vector mapped through W.
EmbeddingTable map_embeddings(const AlignmentMap& map, const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Joint bilingual regression (BLSE adapted to mean-squared error).

struct BlseConfig {
  int epochs = 100;
  double learning_rate = 0.001;
  double alpha = 1.0;  // weight of the dictionary projection loss
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BlseEpoch {
  double source_mse = 0.0;
  double projection_loss = 0.0;
  double dev_pearson = 0.0;  // NaN when undefined (constant predictions)
};

struct BlseModel {
  Eigen::MatrixXd source_projection;  // d x d
  Eigen::MatrixXd target_projection;  // d x d
  Eigen::VectorXd head_weights;       // d
  double head_bias = 0.0;
  BlseConfig config;
  std::vector<BlseEpoch> history;     // one record per epoch run
  int best_epoch = -1;                // index into history of the kept snapshot
  double initial_source_mse = 0.0;
  double initial_projection_loss = 0.0;

  Eigen::Index dim() const { return head_weights.size(); }
  nlohmann::json to_json() const;
  static BlseModel from_json(const nlohmann::json& doc);
};

enum class Side { source, target };

/// Trains on `train` (source language) and keeps the epoch with the best
/// Pearson on `dev` (ties: earliest).
BlseModel train_blse(const Corpus& train, const EmbeddingTable& src_emb, const EmbeddingTable& tgt_emb,
                     const BilingualDictionary& dict, const Corpus& dev, const BlseConfig& config);

/// head(M_side * avg_emb(text)); texts without known tokens give head(0).
double predict_blse(const BlseModel& m, const Item& item, const EmbeddingTable& emb, Side side);
double predict_blse(const BlseModel& m, const Eigen::VectorXd& averaged, Side side);

/// Sum over dictionary pairs of |M_src s - M_tgt t|^2 (columns of S and T).
double projection_loss(const Eigen::MatrixXd& source_projection, const Eigen::MatrixXd& target_projection,
                       const Eigen::MatrixXd& S, const Eigen::MatrixXd& T);

nlohmann::json to_json(const BlseConfig& c);
BlseConfig blse_config_from_json(const nlohmann::json& j);

}  // namespace xlemo::xling
