// Copyright 2026 The deepgen authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DEEPGEN_NUMERICS_HPP
#define DEEPGEN_NUMERICS_HPP

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "deepgen/errors.hpp"

/// \file
/// \brief Overflow-safe scalar kernels and log-weight utilities.
///
/// Bernoulli log-likelihoods and importance weights live on log scale; the
/// kernels here are the only place the library exponentiates. Each one is
/// written so that no intermediate overflows for any finite input.

namespace deepgen {

/// Logistic function evaluated without overflow for large |x|.
inline double stable_sigmoid(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("sigmoid argument must be finite");
  }
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) evaluated without overflow for large x.
///
/// This is the log normalizer of a Bernoulli with logit x, so
/// log sigma(x) = x - log1p_exp(x) and log(1 - sigma(x)) = -log1p_exp(x).
inline double log1p_exp(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("log1p_exp argument must be finite");
  }
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

/// log sum_i exp(v_i) computed with the max-shift trick.
///
/// Entries may be -inf (zero mass); if all entries are -inf the result is
/// -inf. The input must be non-empty and contain no NaN or +inf.
inline double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) {
    throw DomainError("log_sum_exp requires a non-empty vector");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i]) || v[i] == std::numeric_limits<double>::infinity()) {
      throw DomainError("log_sum_exp entries must be finite or -inf");
    }
    m = std::max(m, v[i]);
  }
  if (m == -std::numeric_limits<double>::infinity()) {
    return m;
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s += std::exp(v[i] - m);
  }
  return m + std::log(s);
}

/// Converts log weights to normalized weights summing to one.
///
/// Weights equal to -inf normalize to exactly zero. Throws
/// DegenerateWeightsError when every weight is -inf, since no normalization
/// exists in that case.
inline Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_w) {
  const double lse = log_sum_exp(log_w);
  if (lse == -std::numeric_limits<double>::infinity()) {
    throw DegenerateWeightsError("all log weights are -inf");
  }
  Eigen::VectorXd w(log_w.size());
  for (Eigen::Index i = 0; i < log_w.size(); ++i) {
    w[i] = std::exp(log_w[i] - lse);
  }
  return w;
}

/// Effective sample size 1 / sum_i w_i^2 of normalized weights.
///
/// Equals the sample count for uniform weights and approaches one as a
/// single weight dominates.
inline double effective_sample_size(const Eigen::VectorXd& normalized) {
  if (normalized.size() == 0) {
    throw DomainError("effective_sample_size requires a non-empty vector");
  }
  return 1.0 / normalized.squaredNorm();
}

}  // namespace deepgen

#endif  // DEEPGEN_NUMERICS_HPP
