#pragma once

#include "ovpath/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

namespace ovpath {

/// Linear interpolation at rank p * (n - 1) of an ascending array.
template <typename Scalar>
Scalar sorted_quantile(const std::vector<Scalar>& sorted, double p) {
  const double rank = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const Scalar frac = static_cast<Scalar>(rank - static_cast<double>(lo));
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

template <typename Scalar>
struct SevenStats {
  Scalar mean{}, median{}, std{}, q1{}, q3{}, min{}, max{};

  std::array<Scalar, 7> as_array() const { return {mean, median, std, q1, q3, min, max}; }
};

inline constexpr std::array<std::string_view, 7> kSevenStatNames{"mean", "median", "std", "Q1",
                                                                 "Q3",   "min",    "max"};

/// Mean, median, population std, Q1, Q3, min, max.
template <typename Derived>
SevenStats<typename Derived::Scalar> seven_stats(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "seven_stats of an empty sample");
  std::vector<Scalar> sorted(values.derived().data(), values.derived().data() + n);
  std::sort(sorted.begin(), sorted.end());
  SevenStats<Scalar> s;
  Scalar sum{};
  for (Scalar v : sorted) sum += v;
  s.mean = sum / static_cast<Scalar>(n);
  Scalar ss{};
  for (Scalar v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<Scalar>(n));
  s.median = sorted_quantile(sorted, 0.5);
  s.q1 = sorted_quantile(sorted, 0.25);
  s.q3 = sorted_quantile(sorted, 0.75);
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

template <typename Scalar>
SevenStats<Scalar> seven_stats(const std::vector<Scalar>& values) {
  return seven_stats(Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(
      values.data(), static_cast<Eigen::Index>(values.size())));
}

}  // namespace ovpath
