#include "xlemo/crosslingual.hpp"

#include "xlemo/errors.hpp"
#include "xlemo/features.hpp"
#include "xlemo/metrics.hpp"
#include "xlemo/random.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace xlemo::xling {

using nlohmann::json;

namespace {

constexpr int kAlignmentVersion = 1;
constexpr int kBlseVersion = 1;

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ValidationError("matrix data does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

/// Averaged token embeddings as columns, one per item.
Eigen::MatrixXd averaged_columns(const Corpus& corpus, const EmbeddingTable& emb) {
  Eigen::MatrixXd out(emb.dim(), static_cast<Eigen::Index>(corpus.size()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = average_embedding(emb, tokenize(corpus.items[i].text));
  }
  return out;
}

Eigen::VectorXd gold_vector(const Corpus& corpus, std::string_view what) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(corpus.size()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& g = corpus.items[i].gold_score;
    if (!g) throw ValidationError(std::string(what) + " item '" + corpus.items[i].id + "' has no gold score");
    y(static_cast<Eigen::Index>(i)) = *g;
  }
  return y;
}

struct Adam {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;

  explicit Adam(Eigen::Index rows, Eigen::Index cols)
      : m(Eigen::MatrixXd::Zero(rows, cols)), v(Eigen::MatrixXd::Zero(rows, cols)) {}

  template <typename Param>
  void step(Param& param, const Eigen::MatrixXd& grad, const BlseConfig& c, int t) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    param.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.adam_epsilon);
  }
};

}  // namespace

json AlignmentMap::to_json() const {
  return json{{"format", "xlemo.alignment"},
              {"version", kAlignmentVersion},
              {"dim", dim()},
              {"preprocessing", "normalize,center,normalize"},
              {"pairs_used", pairs_used},
              {"pairs_dropped", pairs_dropped},
              {"W", matrix_json(W)}};
}

AlignmentMap AlignmentMap::from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "xlemo.alignment") throw ValidationError("not an alignment document");
    if (doc.at("version").get<int>() != kAlignmentVersion) throw ValidationError("unsupported alignment version");
    AlignmentMap map;
    map.W = matrix_from_json(doc.at("W"));
    if (map.W.rows() != map.W.cols()) throw ValidationError("alignment matrix must be square");
    map.pairs_used = doc.value("pairs_used", std::size_t{0});
    map.pairs_dropped = doc.value("pairs_dropped", std::size_t{0});
    return map;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed alignment document: ") + e.what());
  }
}

EmbeddingTable preprocess(const EmbeddingTable& table) {
  RowMatrixXd vectors = table.vectors();
  normalize_center_normalize(vectors);
  EmbeddingTable out(table.words(), std::move(vectors));
  out.duplicates_ignored = table.duplicates_ignored;
  return out;
}

PairMatrices dictionary_matrices(const EmbeddingTable& src, const EmbeddingTable& tgt,
                                 const BilingualDictionary& dict) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> usable;
  PairMatrices out;
  for (const auto& [s, t] : dict.pairs) {
    const auto si = src.find(s);
    const auto ti = tgt.find(t);
    if (si && ti) {
      usable.emplace_back(*si, *ti);
    } else {
      ++out.dropped;
    }
  }
  out.source.resize(static_cast<Eigen::Index>(usable.size()), src.dim());
  out.target.resize(static_cast<Eigen::Index>(usable.size()), tgt.dim());
  for (std::size_t k = 0; k < usable.size(); ++k) {
    out.source.row(static_cast<Eigen::Index>(k)) = src.row(usable[k].first);
    out.target.row(static_cast<Eigen::Index>(k)) = tgt.row(usable[k].second);
  }
  return out;
}

AlignmentMap procrustes_align(const EmbeddingTable& src, const EmbeddingTable& tgt,
                              const BilingualDictionary& dict) {
  if (src.dim() != tgt.dim()) {
    throw ValidationError("source and target embeddings differ in dimension (" + std::to_string(src.dim()) +
                          " vs " + std::to_string(tgt.dim()) + ")");
  }
  const PairMatrices pairs = dictionary_matrices(preprocess(src), preprocess(tgt), dict);
  const auto usable = static_cast<Eigen::Index>(pairs.source.rows());
  if (usable < src.dim()) {
    throw ValidationError("only " + std::to_string(usable) + " dictionary pairs resolvable in both tables; need at least " +
                          std::to_string(src.dim()));
  }
  AlignmentMap map;
  map.W = orthogonal_procrustes(pairs.source, pairs.target);
  map.pairs_used = static_cast<std::size_t>(usable);
  map.pairs_dropped = pairs.dropped;
  return map;
}

EmbeddingTable map_embeddings(const AlignmentMap& map, const EmbeddingTable& table) {
  if (table.dim() != map.dim()) {
    throw ValidationError("embedding dimension " + std::to_string(table.dim()) +
                          " does not match alignment dimension " + std::to_string(map.dim()));
  }
  RowMatrixXd vectors = table.vectors();
  normalize_center_normalize(vectors);
  RowMatrixXd mapped = vectors * map.W;
  EmbeddingTable out(table.words(), std::move(mapped));
  out.duplicates_ignored = table.duplicates_ignored;
  return out;
}

void BlseConfig::validate() const {
  if (epochs < 1) throw ValidationError("BLSE epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("BLSE learning rate must be positive");
  if (!(alpha >= 0.0)) throw ValidationError("BLSE alpha must be non-negative");
  if (batch_size < 1) throw ValidationError("BLSE batch size must be >= 1");
}

double projection_loss(const Eigen::MatrixXd& source_projection, const Eigen::MatrixXd& target_projection,
                       const Eigen::MatrixXd& S, const Eigen::MatrixXd& T) {
  return (source_projection * S - target_projection * T).squaredNorm();
}

BlseModel train_blse(const Corpus& train, const EmbeddingTable& src_emb, const EmbeddingTable& tgt_emb,
                     const BilingualDictionary& dict, const Corpus& dev, const BlseConfig& config) {
  config.validate();
  if (train.empty()) throw ValidationError("BLSE training corpus is empty");
  if (dev.size() < 2) throw ValidationError("BLSE dev corpus needs at least 2 items");
  if (src_emb.dim() != tgt_emb.dim()) throw ValidationError("BLSE needs source and target embeddings of equal dimension");
  const Eigen::VectorXd y = gold_vector(train, "training");
  const Eigen::VectorXd y_dev = gold_vector(dev, "dev");

  const PairMatrices pairs = dictionary_matrices(src_emb, tgt_emb, dict);
  if (pairs.source.rows() == 0) throw ValidationError("no dictionary pair is resolvable in both embedding tables");
  const Eigen::MatrixXd S = pairs.source.transpose();  // d x P
  const Eigen::MatrixXd T = pairs.target.transpose();

  const Eigen::Index d = src_emb.dim();
  const Eigen::MatrixXd X = averaged_columns(train, src_emb);  // d x n
  const Eigen::MatrixXd X_dev = averaged_columns(dev, src_emb);
  const Eigen::Index n = X.cols();

  BlseModel model;
  model.config = config;
  model.source_projection = Eigen::MatrixXd::Identity(d, d);
  model.target_projection = Eigen::MatrixXd::Identity(d, d);
  model.head_weights.resize(d);
  Rng rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index k = 0; k < d; ++k) model.head_weights(k) = rng.uniform(-bound, bound);
  model.head_bias = 0.0;

  auto source_mse = [&](const BlseModel& m) {
    const Eigen::VectorXd pred = ((m.source_projection * X).transpose() * m.head_weights).array() + m.head_bias;
    return (pred - y).squaredNorm() / static_cast<double>(n);
  };
  model.initial_source_mse = source_mse(model);
  model.initial_projection_loss = projection_loss(model.source_projection, model.target_projection, S, T);

  Adam adam_src(d, d), adam_tgt(d, d), adam_w(d, 1), adam_b(1, 1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  BlseModel best = model;
  double best_dev = -std::numeric_limits<double>::infinity();
  int step = 0;
  Eigen::MatrixXd head_grad(d, 1);
  Eigen::MatrixXd bias_grad(1, 1);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd Xb(d, size);
      Eigen::VectorXd yb(size);
      for (Eigen::Index k = 0; k < size; ++k) {
        Xb.col(k) = X.col(order[static_cast<std::size_t>(start + k)]);
        yb(k) = y(order[static_cast<std::size_t>(start + k)]);
      }
      const Eigen::MatrixXd Z = model.source_projection * Xb;  // d x b
      const Eigen::VectorXd residual = (Z.transpose() * model.head_weights).array() + model.head_bias - yb.array();
      const double scale = 2.0 / static_cast<double>(size);
      // d/dM_src MSE = w (scale * Xb r)^T ; projection term 2 alpha D S^T.
      const Eigen::MatrixXd D = model.source_projection * S - model.target_projection * T;
      const Eigen::MatrixXd grad_src =
          model.head_weights * (scale * (Xb * residual)).transpose() + 2.0 * config.alpha * D * S.transpose();
      const Eigen::MatrixXd grad_tgt = -2.0 * config.alpha * D * T.transpose();
      head_grad.col(0) = scale * (Z * residual);
      bias_grad(0, 0) = scale * residual.sum();

      ++step;
      adam_src.step(model.source_projection, grad_src, config, step);
      adam_tgt.step(model.target_projection, grad_tgt, config, step);
      adam_w.step(model.head_weights, head_grad, config, step);
      Eigen::Matrix<double, 1, 1> b;
      b(0, 0) = model.head_bias;
      adam_b.step(b, bias_grad, config, step);
      model.head_bias = b(0, 0);
    }

    BlseEpoch record;
    record.source_mse = source_mse(model);
    record.projection_loss = projection_loss(model.source_projection, model.target_projection, S, T);
    const Eigen::VectorXd dev_pred =
        ((model.source_projection * X_dev).transpose() * model.head_weights).array() + model.head_bias;
    try {
      record.dev_pearson = pearson(dev_pred, y_dev);
    } catch (const ValidationError&) {
      record.dev_pearson = std::numeric_limits<double>::quiet_NaN();
    }
    model.history.push_back(record);
    if (record.dev_pearson > best_dev || (epoch == 0 && std::isnan(record.dev_pearson))) {
      if (!std::isnan(record.dev_pearson)) best_dev = record.dev_pearson;
      best = model;
      best.best_epoch = epoch;
    }
  }

  best.history = model.history;
  return best;
}

double predict_blse(const BlseModel& m, const Eigen::VectorXd& averaged, Side side) {
  if (averaged.size() != m.dim()) throw ValidationError("BLSE input dimension mismatch");
  const Eigen::MatrixXd& proj = side == Side::source ? m.source_projection : m.target_projection;
  return m.head_weights.dot(proj * averaged) + m.head_bias;
}

double predict_blse(const BlseModel& m, const Item& item, const EmbeddingTable& emb, Side side) {
  if (emb.dim() != m.dim()) throw ValidationError("embedding table dimension does not match BLSE model");
  return predict_blse(m, average_embedding(emb, tokenize(item.text)), side);
}

json to_json(const BlseConfig& c) {
  return json{{"epochs", c.epochs},         {"learning_rate", c.learning_rate}, {"alpha", c.alpha},
              {"batch_size", c.batch_size}, {"beta1", c.beta1},                 {"beta2", c.beta2},
              {"adam_epsilon", c.adam_epsilon}, {"seed", c.seed}};
}

BlseConfig blse_config_from_json(const json& j) {
  try {
    BlseConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.alpha = j.value("alpha", c.alpha);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad BLSE config: ") + e.what());
  }
}

json BlseModel::to_json() const {
  json history_json = json::array();
  for (const auto& h : history) {
    history_json.push_back({{"source_mse", h.source_mse},
                            {"projection_loss", h.projection_loss},
                            {"dev_pearson", std::isnan(h.dev_pearson) ? json(nullptr) : json(h.dev_pearson)}});
  }
  return json{{"format", "xlemo.blse"},
              {"version", kBlseVersion},
              {"dim", dim()},
              {"source_projection", matrix_json(source_projection)},
              {"target_projection", matrix_json(target_projection)},
              {"head_weights", std::vector<double>(head_weights.data(), head_weights.data() + head_weights.size())},
              {"head_bias", head_bias},
              {"config", xling::to_json(config)},
              {"best_epoch", best_epoch},
              {"initial_source_mse", initial_source_mse},
              {"initial_projection_loss", initial_projection_loss},
              {"history", history_json}};
}

BlseModel BlseModel::from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "xlemo.blse") throw ValidationError("not a BLSE model document");
    if (doc.at("version").get<int>() != kBlseVersion) throw ValidationError("unsupported BLSE model version");
    BlseModel m;
    m.source_projection = matrix_from_json(doc.at("source_projection"));
    m.target_projection = matrix_from_json(doc.at("target_projection"));
    const auto w = doc.at("head_weights").get<std::vector<double>>();
    m.head_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::Index d = m.head_weights.size();
    if (m.source_projection.rows() != d || m.source_projection.cols() != d || m.target_projection.rows() != d ||
        m.target_projection.cols() != d) {
      throw ValidationError("BLSE model matrices do not match head dimension");
    }
    m.head_bias = doc.at("head_bias").get<double>();
    m.config = blse_config_from_json(doc.at("config"));
    m.best_epoch = doc.value("best_epoch", -1);
    m.initial_source_mse = doc.value("initial_source_mse", 0.0);
    m.initial_projection_loss = doc.value("initial_projection_loss", 0.0);
    for (const auto& h : doc.value("history", json::array())) {
      BlseEpoch e;
      e.source_mse = h.at("source_mse").get<double>();
      e.projection_loss = h.at("projection_loss").get<double>();
      e.dev_pearson = h.at("dev_pearson").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                    : h.at("dev_pearson").get<double>();
      m.history.push_back(e);
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed BLSE model document: ") + e.what());
  }
}

}  // namespace xlemo::xling
