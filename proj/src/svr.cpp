#include "xlemo/svr.hpp"

#include "xlemo/errors.hpp"
#include "xlemo/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xlemo::svr {

using nlohmann::json;

namespace {

constexpr int kModelVersion = 1;

double sparse_dot(const Eigen::VectorXd& w, const FeatureVector& x) {
  double s = 0.0;
  for (FeatureVector::InnerIterator it(x); it; ++it) s += w(it.index()) * it.value();
  return s;
}

void sparse_axpy(double a, const FeatureVector& x, Eigen::VectorXd& w) {
  for (FeatureVector::InnerIterator it(x); it; ++it) w(it.index()) += a * it.value();
}

Eigen::Index check_inputs(std::span<const FeatureVector> X, std::span<const double> y) {
  if (X.empty()) throw ValidationError("SVR training needs at least one example");
  if (X.size() != y.size()) {
    throw ValidationError("SVR training: " + std::to_string(X.size()) + " feature rows but " +
                          std::to_string(y.size()) + " targets");
  }
  const Eigen::Index dim = X.front().size();
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].size() != dim) {
      throw ValidationError("SVR training: row " + std::to_string(i) + " has dimension " +
                            std::to_string(X[i].size()) + ", expected " + std::to_string(dim));
    }
    if (!std::isfinite(y[i])) throw ValidationError("SVR training: non-finite target at row " + std::to_string(i));
    for (FeatureVector::InnerIterator it(X[i]); it; ++it) {
      if (!std::isfinite(it.value())) {
        throw ValidationError("SVR training: non-finite feature at row " + std::to_string(i));
      }
    }
  }
  return dim;
}

double objective_from_state(const Eigen::VectorXd& w, double b, const Eigen::VectorXd& beta,
                            std::span<const double> y, double epsilon) {
  double v = 0.5 * (w.squaredNorm() + b * b);
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    v += epsilon * std::abs(beta(i)) - y[static_cast<std::size_t>(i)] * beta(i);
  }
  return v;
}

}  // namespace

void SvrConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("SVR C must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("SVR epsilon must be non-negative");
  if (!(tolerance > 0.0)) throw ValidationError("SVR tolerance must be positive");
  if (max_iterations < 1) throw ValidationError("SVR max_iterations must be positive");
}

SvrModel train(std::span<const FeatureVector> X, std::span<const double> y, const SvrConfig& config) {
  config.validate();
  const Eigen::Index dim = check_inputs(X, y);
  const std::size_t n = X.size();

  SvrModel m;
  m.config = config;
  m.training_dim = dim;
  m.weights = Eigen::VectorXd::Zero(dim);
  double& b = m.bias;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = X[i].squaredNorm() + 1.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  const double C = config.C;
  const double eps = config.epsilon;

  while (m.passes < config.max_iterations) {
    rng.shuffle(order.begin(), order.end());
    double max_update = 0.0;
    for (const std::size_t i : order) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double G = sparse_dot(m.weights, X[i]) + b - y[i];
      const double H = diag[i];
      const double Gp = G + eps;
      const double Gn = G - eps;
      double d = 0.0;
      if (Gp < H * beta(ii)) {
        d = -Gp / H;
      } else if (Gn > H * beta(ii)) {
        d = -Gn / H;
      } else {
        d = -beta(ii);
      }
      const double updated = std::clamp(beta(ii) + d, -C, C);
      d = updated - beta(ii);
      if (d == 0.0) continue;
      beta(ii) = updated;
      sparse_axpy(d, X[i], m.weights);
      b += d;
      max_update = std::max(max_update, std::abs(d));
    }
    ++m.passes;
    m.dual_objective.push_back(objective_from_state(m.weights, b, beta, y, eps));
    if (max_update < config.tolerance) {
      m.converged = true;
      break;
    }
  }
  return m;
}

double predict(const SvrModel& m, const FeatureVector& x) {
  if (x.size() != m.training_dim) {
    throw ValidationError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                          std::to_string(m.training_dim));
  }
  return sparse_dot(m.weights, x) + m.bias;
}

std::vector<double> predict(const SvrModel& m, std::span<const FeatureVector> X) {
  std::vector<double> out;
  out.reserve(X.size());
  for (const auto& x : X) out.push_back(predict(m, x));
  return out;
}

Correlations evaluate(const SvrModel& m, const Corpus& gold, const FittedVectorizer& vectorizer) {
  std::vector<double> pred;
  std::vector<double> truth;
  for (const Item& item : gold.items) {
    if (!item.gold_score) throw ValidationError("evaluation item '" + item.id + "' has no gold score");
    pred.push_back(predict(m, vectorizer.transform(item)));
    truth.push_back(*item.gold_score);
  }
  return correlate(pred, truth);
}

double dual_objective(std::span<const FeatureVector> X, std::span<const double> y, double epsilon,
                      const Eigen::VectorXd& beta) {
  const Eigen::Index dim = check_inputs(X, y);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    sparse_axpy(beta(static_cast<Eigen::Index>(i)), X[i], w);
    b += beta(static_cast<Eigen::Index>(i));
  }
  return objective_from_state(w, b, beta, y, epsilon);
}

double primal_objective(const SvrModel& m, std::span<const FeatureVector> X, std::span<const double> y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    loss += std::max(0.0, std::abs(predict(m, X[i]) - y[i]) - m.config.epsilon);
  }
  return 0.5 * (m.weights.squaredNorm() + m.bias * m.bias) + m.config.C * loss;
}

json to_json(const SvrConfig& c) {
  return json{{"C", c.C},
              {"epsilon", c.epsilon},
              {"tolerance", c.tolerance},
              {"max_iterations", c.max_iterations},
              {"seed", c.seed}};
}

SvrConfig svr_config_from_json(const json& j) {
  try {
    SvrConfig c;
    c.C = j.value("C", c.C);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad SVR config: ") + e.what());
  }
}

json SvrModel::to_json() const {
  json weights_json = json::array();
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) != 0.0) weights_json.push_back(json::array({i, weights(i)}));
  }
  return json{{"format", "xlemo.svr"},
              {"version", kModelVersion},
              {"training_dim", training_dim},
              {"bias", bias},
              {"weights", weights_json},
              {"config", svr::to_json(config)},
              {"passes", passes},
              {"converged", converged}};
}

SvrModel SvrModel::from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "xlemo.svr") throw ValidationError("not an SVR model document");
    if (doc.at("version").get<int>() != kModelVersion) {
      throw ValidationError("unsupported SVR model version " + doc.at("version").dump());
    }
    SvrModel m;
    m.training_dim = doc.at("training_dim").get<Eigen::Index>();
    m.bias = doc.at("bias").get<double>();
    m.config = svr_config_from_json(doc.at("config"));
    m.passes = doc.value("passes", 0);
    m.converged = doc.value("converged", false);
    m.weights = Eigen::VectorXd::Zero(m.training_dim);
    for (const auto& pair : doc.at("weights")) {
      const auto idx = pair.at(0).get<Eigen::Index>();
      if (idx < 0 || idx >= m.training_dim) throw ValidationError("weight index out of range");
      m.weights(idx) = pair.at(1).get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed SVR model document: ") + e.what());
  }
}

}  // namespace xlemo::svr
