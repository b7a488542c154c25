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

#ifndef DEEPGEN_SGNHT_HPP
#define DEEPGEN_SGNHT_HPP

#include <Eigen/Core>
#include <cmath>

#include "deepgen/errors.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Stochastic gradient thermostat sampler over the posterior.
///
/// The sampler follows Hamiltonian-style dynamics on the potential
/// U(theta) = -log p(theta | data), using noisy minibatch gradients. Each
/// coordinate carries an increment u (a rescaled momentum) and a thermostat
/// variable alpha that adapts the friction so the stationary kinetic energy
/// stays at its target even though the gradient noise level is unknown.
/// The per-coordinate thermostat lets different parameters see different
/// noise scales, which is the regime neural models are in.

namespace deepgen {

/// Per-coordinate sampler state.
///
/// eta is the squared step size (the effective step length enters as
/// sqrt(eta)); a sets both the injected noise scale 2 a eta and the initial
/// friction. a = 0 disables noise injection, leaving deterministic descent
/// dynamics that tests exploit.
struct SgnhtState {
  Eigen::VectorXd u;      ///< Parameter increment per step.
  Eigen::VectorXd alpha;  ///< Thermostat friction.
  double eta = 0.0;
  double a = 0.0;
};

/// Initializes u ~ N(0, eta I) and alpha = a. eta must be positive, a
/// non-negative.
inline SgnhtState sgnht_init(Eigen::Index dim, double eta, double a, RandomStream& stream) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw DomainError("sgnht eta must be positive and finite");
  }
  if (!(a >= 0.0) || !std::isfinite(a)) {
    throw DomainError("sgnht a must be non-negative and finite");
  }
  if (dim < 1) {
    throw DomainError("sgnht state needs at least one coordinate");
  }
  SgnhtState st;
  st.eta = eta;
  st.a = a;
  st.u.resize(dim);
  const double sd = std::sqrt(eta);
  for (Eigen::Index i = 0; i < dim; ++i) {
    st.u[i] = stream.gaussian(0.0, sd);
  }
  st.alpha = Eigen::VectorXd::Constant(dim, a);
  return st;
}

/// One sampler step. grad_u is the stochastic gradient of the potential
/// evaluated at the current theta; the update order is
///   theta += u
///   u     += -alpha .* u - eta * grad_u + N(0, 2 a eta I)
///   alpha += u .* u - eta
/// where the alpha update reads the freshly updated u. Throws
/// DivergenceError if grad_u contains non-finite entries, before mutating
/// any state.
inline void sgnht_step(SgnhtState& st, Eigen::VectorXd& theta, const Eigen::VectorXd& grad_u,
                       RandomStream& stream) {
  const Eigen::Index n = st.u.size();
  if (theta.size() != n || grad_u.size() != n || st.alpha.size() != n) {
    throw ShapeError("sgnht state, theta and gradient widths must agree");
  }
  if (!grad_u.allFinite()) {
    throw DivergenceError("sgnht gradient has non-finite entries");
  }
  theta += st.u;
  const double noise_sd = std::sqrt(2.0 * st.a * st.eta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double injected = stream.gaussian(0.0, noise_sd);
    st.u[i] += -st.alpha[i] * st.u[i] - st.eta * grad_u[i] + injected;
  }
  st.alpha.array() += st.u.array().square() - st.eta;
}

}  // namespace deepgen

#endif  // DEEPGEN_SGNHT_HPP
