#pragma once

#include "xlemo/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace xlemo {

/// Sample Pearson product-moment correlation of two equally sized series.
///
/// Two-pass centered formulation. A series with zero variance has no defined
/// correlation and raises ValidationError instead of returning 0 or NaN.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::DenseBase<DerivedX>& x,
                                  const Eigen::DenseBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) throw ValidationError("pearson: series lengths differ");
  if (x.size() < 2) throw ValidationError("pearson: need at least 2 paired values");
  if (!x.derived().allFinite() || !y.derived().allFinite()) {
    throw ValidationError("pearson: non-finite value in series");
  }
  const auto xc = (x.derived().array() - x.derived().mean()).eval();
  const auto yc = (y.derived().array().template cast<Scalar>() -
                   static_cast<Scalar>(y.derived().mean())).eval();
  const Scalar sxx = xc.square().sum();
  const Scalar syy = yc.square().sum();
  if (sxx == Scalar(0) || syy == Scalar(0)) {
    throw ValidationError("pearson: constant series, correlation undefined");
  }
  const Scalar r = (xc * yc).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Ranks starting at 1; tied values share the mean of the ranks they span.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> average_ranks(
    const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return values.derived().coeff(a) < values.derived().coeff(b);
  });
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i + 1;
    const auto v = values.derived().coeff(order[static_cast<std::size_t>(i)]);
    while (j < n && values.derived().coeff(order[static_cast<std::size_t>(j)]) == v) ++j;
    const Scalar rank = Scalar(i + j + 1) / Scalar(2);  // mean of 1-based ranks i+1..j
    for (Eigen::Index k = i; k < j; ++k) ranks(order[static_cast<std::size_t>(k)]) = rank;
    i = j;
  }
  return ranks;
}

/// Spearman rank correlation: Pearson over average ranks.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar spearman(const Eigen::DenseBase<DerivedX>& x,
                                   const Eigen::DenseBase<DerivedY>& y) {
  if (x.size() != y.size()) throw ValidationError("spearman: series lengths differ");
  if (x.size() < 2) throw ValidationError("spearman: need at least 2 paired values");
  if (!x.derived().allFinite() || !y.derived().allFinite()) {
    throw ValidationError("spearman: non-finite value in series");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  if ((rx.array() == rx(0)).all() || (ry.array() == ry(0)).all()) {
    throw ValidationError("spearman: all values tied, correlation undefined");
  }
  return pearson(rx, ry);
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return pearson(Map(x.data(), static_cast<Eigen::Index>(x.size())),
                 Map(y.data(), static_cast<Eigen::Index>(y.size())));
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return spearman(Map(x.data(), static_cast<Eigen::Index>(x.size())),
                  Map(y.data(), static_cast<Eigen::Index>(y.size())));
}

struct Correlations {
  double pearson = 0.0;
  double spearman = 0.0;
};

inline Correlations correlate(std::span<const double> x, std::span<const double> y) {
  return {pearson(x, y), spearman(x, y)};
}

}  // namespace xlemo
