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

#ifndef DEEPGEN_PRIORS_HPP
#define DEEPGEN_PRIORS_HPP

#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "deepgen/errors.hpp"

/// \file
/// \brief Elementwise parameter priors and their score functions.
///
/// The prior factorizes over every scalar parameter. A heavy-tailed
/// Student-t keeps weights near zero without the harsh shrinkage a Gaussian
/// applies to occasional large weights; the Gaussian is kept as the
/// conventional alternative. Only the score (gradient of the log density)
/// enters the sampler updates; the log density itself is exposed so tests
/// can difference it.

namespace deepgen {

enum class PriorKind {
  kStudentT,
  kGaussian,
};

/// Location-scale prior applied independently to each parameter. nu is the
/// Student-t degrees of freedom and is ignored by the Gaussian.
struct PriorSpec {
  PriorKind kind = PriorKind::kStudentT;
  double mu = 0.0;
  double sigma = 0.09;
  double nu = 2.2;
};

inline void check_prior(const PriorSpec& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.mu)) {
    throw DomainError("prior scale must be positive and finite");
  }
  if (p.kind == PriorKind::kStudentT && (!(p.nu > 0.0) || !std::isfinite(p.nu))) {
    throw DomainError("student-t degrees of freedom must be positive");
  }
}

/// log p0(theta), the normalized log density summed over entries.
inline double log_prior(const PriorSpec& p, const Eigen::VectorXd& theta) {
  check_prior(p);
  if (!theta.allFinite()) {
    throw DomainError("prior evaluation requires finite parameters");
  }
  const Eigen::Index n = theta.size();
  double lp = 0.0;
  if (p.kind == PriorKind::kGaussian) {
    const double c = -0.5 * std::log(2.0 * std::numbers::pi * p.sigma * p.sigma);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = theta[i] - p.mu;
      lp += c - 0.5 * d * d / (p.sigma * p.sigma);
    }
    return lp;
  }
  const double c = std::lgamma(0.5 * (p.nu + 1.0)) - std::lgamma(0.5 * p.nu) -
                   0.5 * std::log(p.nu * std::numbers::pi * p.sigma * p.sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = theta[i] - p.mu;
    lp += c - 0.5 * (p.nu + 1.0) * std::log1p(d * d / (p.nu * p.sigma * p.sigma));
  }
  return lp;
}

/// Gradient of log p0(theta) with respect to theta.
///
/// Student-t entries: -(nu + 1)(theta - mu) / (nu sigma^2 + (theta - mu)^2).
/// Gaussian entries: -(theta - mu) / sigma^2.
inline Eigen::VectorXd log_prior_grad(const PriorSpec& p, const Eigen::VectorXd& theta) {
  check_prior(p);
  if (!theta.allFinite()) {
    throw DomainError("prior gradient requires finite parameters");
  }
  Eigen::VectorXd g(theta.size());
  if (p.kind == PriorKind::kGaussian) {
    g = (p.mu - theta.array()) / (p.sigma * p.sigma);
    return g;
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double d = theta[i] - p.mu;
    g[i] = -(p.nu + 1.0) * d / (p.nu * p.sigma * p.sigma + d * d);
  }
  return g;
}

}  // namespace deepgen

#endif  // DEEPGEN_PRIORS_HPP
