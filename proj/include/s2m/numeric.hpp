// Copyright 2026 The s2m Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef S2M_NUMERIC_HPP_
#define S2M_NUMERIC_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Core>

namespace s2m {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// log(exp(a) + exp(b)) without overflow; handles -inf operands.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf || !std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& values) {
  const double hi = values.maxCoeff();
  if (hi == kNegInf || !std::isfinite(hi)) return hi;
  return hi + std::log((values.derived().array() - hi).exp().sum());
}

/// Column-wise log-sum-exp of a (terms x points) matrix.
inline Eigen::RowVectorXd log_sum_exp_columns(const Eigen::MatrixXd& terms) {
  Eigen::RowVectorXd out(terms.cols());
  for (Eigen::Index j = 0; j < terms.cols(); ++j) {
    out[j] = log_sum_exp(terms.col(j));
  }
  return out;
}

/// In-place softmax of each column of `logits`.
inline void softmax_columns(Eigen::MatrixXd& logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    const double hi = col.maxCoeff();
    col = (col.array() - hi).exp();
    col /= col.sum();
  }
}

/// Standard normal CDF.
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace s2m

#endif  // S2M_NUMERIC_HPP_
