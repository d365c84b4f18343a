#pragma once

#include "xlemo/data_model.hpp"
#include "xlemo/features.hpp"
#include "xlemo/metrics.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace xlemo::svr {

struct SvrConfig {
  double C = 100.0;
  double epsilon = 0.1;
  double tolerance = 1e-4;
  int max_iterations = 10'000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear epsilon-insensitive regressor f(x) = w.x + b.
struct SvrModel {
  Eigen::VectorXd weights;  // length training_dim
  double bias = 0.0;
  SvrConfig config;
  Eigen::Index training_dim = 0;
  // Solver diagnostics.
  int passes = 0;
  bool converged = false;
  std::vector<double> dual_objective;  // after each pass

  nlohmann::json to_json() const;
  static SvrModel from_json(const nlohmann::json& doc);
};

/// Dual coordinate descent for the L1-loss epsilon-SVR.
///
/// Minimizes 0.5*|w|^2 + 0.5*b^2 + C * sum_i max(0, |w.x_i + b - y_i| - eps)
/// through its box-constrained dual, visiting examples in a seeded random
/// order each pass. The bias is learned as the weight of a constant feature
/// of value 1. Stops when the largest dual update in a pass falls below
/// `tolerance`, or after `max_iterations` passes.
SvrModel train(std::span<const FeatureVector> X, std::span<const double> y, const SvrConfig& config);

/// w.x + b, unclipped.
double predict(const SvrModel& m, const FeatureVector& x);
std::vector<double> predict(const SvrModel& m, std::span<const FeatureVector> X);

/// Optional presentation clip for exported scores.
inline double clip_unit(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

/// Pearson and Spearman between predictions and gold scores.
Correlations evaluate(const SvrModel& m, const Corpus& gold, const FittedVectorizer& vectorizer);

/// Dual objective 0.5*|w|^2 + eps*sum|beta| - sum y*beta for given beta;
/// exposed for solver tests.
double dual_objective(std::span<const FeatureVector> X, std::span<const double> y, double epsilon,
                      const Eigen::VectorXd& beta);

/// Primal objective including the regularized bias.
double primal_objective(const SvrModel& m, std::span<const FeatureVector> X, std::span<const double> y);

nlohmann::json to_json(const SvrConfig& c);
SvrConfig svr_config_from_json(const nlohmann::json& j);

}  // namespace xlemo::svr
