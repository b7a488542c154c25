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

#ifndef DEEPGEN_GIBBS_HPP
#define DEEPGEN_GIBBS_HPP

#include <Eigen/Core>

#include "deepgen/errors.hpp"
#include "deepgen/model.hpp"
#include "deepgen/numerics.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Systematic-scan Gibbs sampling of p(z | x, theta) for sigmoid
/// belief stacks.
///
/// For a stack of factorized Bernoulli layers the conditional of a single
/// hidden bit given everything else is again Bernoulli, with a logit made of
/// the unit's own prior activation plus the log-likelihood change it induces
/// in the layer below. A sweep resamples every hidden unit once, bottom
/// layer first, reusing the layer-below pre-activations incrementally so a
/// sweep costs the same as a few matrix products.

namespace deepgen {

/// True when every conditional layer is kSbn and the top is kTopBernoulli,
/// the only stack shape with closed-form single-site conditionals here.
inline bool is_sbn_stack(const GenerativeModel& g) {
  const int L = g.num_hidden_layers();
  if (L < 1 || g.layer(L).kind() != LayerKind::kTopBernoulli) {
    return false;
  }
  for (int l = 0; l < L; ++l) {
    if (g.layer(l).kind() != LayerKind::kSbn) {
      return false;
    }
  }
  return true;
}

namespace detail {

inline void require_sbn_stack(const GenerativeModel& g) {
  if (!is_sbn_stack(g)) {
    throw CapabilityError(
        "single-site conditionals require an all-sbn stack with a "
        "top_bernoulli prior");
  }
}

/// Log-likelihood change in the layer below when unit value z_i flips from 0
/// to 1, given pre-activations s0 computed with z_i = 0.
inline double below_delta(const Eigen::MatrixXd& w_below, const Eigen::VectorXd& s0,
                          const Eigen::VectorXd& y_below, Eigen::Index i) {
  double delta = 0.0;
  for (Eigen::Index r = 0; r < s0.size(); ++r) {
    const double w = w_below(r, i);
    delta += y_below[r] * w - (log1p_exp(s0[r] + w) - log1p_exp(s0[r]));
  }
  return delta;
}

}  // namespace detail

/// Logit of p(z^(l)_i = 1 | x, all other units) for an all-sbn stack.
/// l runs from 1 (adjacent to the data) to L (under the top prior).
inline double gibbs_conditional_logit(const GenerativeModel& g, const Eigen::VectorXd& x,
                                      const HiddenState& state, int l, Eigen::Index i) {
  detail::require_sbn_stack(g);
  const int L = g.num_hidden_layers();
  if (l < 1 || l > L) {
    throw DomainError("hidden layer index out of range");
  }
  const Eigen::VectorXd& z = state.z[l - 1];
  if (i < 0 || i >= z.size()) {
    throw DomainError("hidden unit index out of range");
  }
  double logit;
  if (l == L) {
    logit = g.layer(L).params().b[i];
  } else {
    logit = g.layer(l).params().W.row(i).dot(state.z[l]) + g.layer(l).params().b[i];
  }
  const Eigen::MatrixXd& w_below = g.layer(l - 1).params().W;
  const Eigen::VectorXd& y_below = l == 1 ? x : state.z[l - 2];
  Eigen::VectorXd s0 = w_below * z + g.layer(l - 1).params().b;
  if (z[i] != 0.0) {
    s0 -= w_below.col(i) * z[i];
  }
  return logit + detail::below_delta(w_below, s0, y_below, i);
}

/// One systematic sweep: resamples every hidden unit once, layer 1 upward,
/// units in index order, each from its exact single-site conditional.
inline HiddenState gibbs_sweep(const GenerativeModel& g, const Eigen::VectorXd& x,
                               HiddenState state, RandomStream& stream) {
  detail::require_sbn_stack(g);
  const int L = g.num_hidden_layers();
  if (static_cast<int>(state.z.size()) != L) {
    throw ShapeError("hidden state depth does not match the model");
  }
  if (x.size() != g.data_dim()) {
    throw ShapeError("data width does not match the model");
  }
  for (int l = 1; l <= L; ++l) {
    Eigen::VectorXd& z = state.z[l - 1];
    // Unit priors within layer l, fixed while this layer is swept.
    Eigen::VectorXd prior(z.size());
    if (l == L) {
      prior = g.layer(L).params().b;
    } else {
      prior = g.layer(l).params().W * state.z[l] + g.layer(l).params().b;
    }
    const Eigen::MatrixXd& w_below = g.layer(l - 1).params().W;
    const Eigen::VectorXd& y_below = l == 1 ? x : state.z[l - 2];
    Eigen::VectorXd s = w_below * z + g.layer(l - 1).params().b;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z[i] != 0.0) {
        s -= w_below.col(i);
      }
      const double logit = prior[i] + detail::below_delta(w_below, s, y_below, i);
      z[i] = stream.bernoulli(stable_sigmoid(logit)) ? 1.0 : 0.0;
      if (z[i] != 0.0) {
        s += w_below.col(i);
      }
    }
  }
  return state;
}

}  // namespace deepgen

#endif  // DEEPGEN_GIBBS_HPP
