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

#ifndef DEEPGEN_ADAM_HPP
#define DEEPGEN_ADAM_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

#include "deepgen/errors.hpp"

/// \file
/// \brief Adam ascent updates for the recognition parameters.
///
/// The recognition objective is maximized, so the step moves along the
/// gradient, not against it. Bias-corrected first and second moments with
/// the usual epsilon-stabilized scaling.

namespace deepgen {

struct AdamState {
  Eigen::VectorXd m;  ///< First moment.
  Eigen::VectorXd v;  ///< Second moment.
  std::int64_t t = 0;
  double eta_prime = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-10;
};

inline AdamState adam_init(Eigen::Index dim, double eta_prime, double beta1, double beta2,
                           double epsilon) {
  if (dim < 1) {
    throw DomainError("adam state needs at least one coordinate");
  }
  if (!(eta_prime > 0.0) || !(epsilon > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("adam hyperparameters out of range");
  }
  AdamState st;
  st.m = Eigen::VectorXd::Zero(dim);
  st.v = Eigen::VectorXd::Zero(dim);
  st.t = 0;
  st.eta_prime = eta_prime;
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.epsilon = epsilon;
  return st;
}

/// One ascent step phi += eta' * m_hat / (sqrt(v_hat) + epsilon). Throws
/// DivergenceError on non-finite gradients before mutating any state.
inline void adam_step(AdamState& st, Eigen::VectorXd& phi, const Eigen::VectorXd& grad) {
  if (phi.size() != st.m.size() || grad.size() != st.m.size()) {
    throw ShapeError("adam state, phi and gradient widths must agree");
  }
  if (!grad.allFinite()) {
    throw DivergenceError("adam gradient has non-finite entries");
  }
  st.t += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v.array().matrix() + (1.0 - st.beta2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  phi.array() +=
      st.eta_prime * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.epsilon);
}

}  // namespace deepgen

#endif  // DEEPGEN_ADAM_HPP
