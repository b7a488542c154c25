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

#ifndef DEEPGEN_TESTS_SUPPORT_ORACLES_HPP
#define DEEPGEN_TESTS_SUPPORT_ORACLES_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "deepgen/layers.hpp"
#include "deepgen/model.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Independent oracles the analytic code is tested against: central
/// finite differences over flat parameter vectors, and brute-force
/// enumeration of binary state spaces. Nothing here shares code with the
/// gradients or estimators under test.

namespace oracles {

/// Central finite differences of f at `at`, one coordinate at a time.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& at, double h = 1e-5) {
  Eigen::VectorXd grad(at.size());
  Eigen::VectorXd p = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    p[i] = at[i] + h;
    const double up = f(p);
    p[i] = at[i] - h;
    const double down = f(p);
    p[i] = at[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Worst-case elementwise error, scaled by max(1, |a|, |b|): relative for
/// large entries, absolute for small ones, so finite-difference roundoff
/// near zero cannot false-flag.
inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Calls fn with every bit vector of the given width, low bit first.
inline void enumerate_bits(Eigen::Index width,
                           const std::function<void(const Eigen::VectorXd&)>& fn) {
  const std::uint64_t total = 1ULL << width;
  Eigen::VectorXd v(width);
  for (std::uint64_t code = 0; code < total; ++code) {
    for (Eigen::Index i = 0; i < width; ++i) {
      v[i] = (code >> i) & 1ULL ? 1.0 : 0.0;
    }
    fn(v);
  }
}

/// Fills a parameter vector with uniform draws on [-scale, scale].
inline Eigen::VectorXd random_params(Eigen::Index n, deepgen::RandomStream& stream,
                                     double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = scale * (2.0 * stream.uniform() - 1.0);
  }
  return v;
}

/// The exact posterior over every hidden configuration of an all-binary
/// stack, by enumerating the product of the hidden layers' state spaces.
struct EnumeratedPosterior {
  std::vector<deepgen::HiddenState> states;
  Eigen::VectorXd joint_log;  ///< log p(x, z) per state.
  double log_marginal = 0.0;  ///< log p(x).
  Eigen::VectorXd posterior;  ///< p(z | x), normalized.
};

inline EnumeratedPosterior enumerate_posterior(const deepgen::GenerativeModel& g,
                                               const Eigen::VectorXd& x) {
  const auto dims = g.hidden_dims();
  Eigen::Index total_bits = 0;
  for (Eigen::Index d : dims) {
    total_bits += d;
  }
  EnumeratedPosterior out;
  const std::uint64_t total = 1ULL << total_bits;
  out.joint_log.resize(static_cast<Eigen::Index>(total));
  for (std::uint64_t code = 0; code < total; ++code) {
    deepgen::HiddenState state;
    std::uint64_t rest = code;
    for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(dims.size()); ++l) {
      Eigen::VectorXd z(dims[static_cast<std::size_t>(l)]);
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        z[i] = rest & 1ULL ? 1.0 : 0.0;
        rest >>= 1;
      }
      state.z.push_back(std::move(z));
    }
    state.eps.resize(state.z.size());
    out.joint_log[static_cast<Eigen::Index>(code)] = g.joint_log_prob(x, state);
    out.states.push_back(std::move(state));
  }
  out.log_marginal = deepgen::log_sum_exp(out.joint_log);
  out.posterior = (out.joint_log.array() - out.log_marginal).exp();
  return out;
}

/// Exact marginal gradient d log p(x) / d theta as the posterior-weighted
/// average of joint gradients, the identity the sampling estimators target.
inline Eigen::VectorXd exact_theta_grad(const deepgen::GenerativeModel& g,
                                        const Eigen::VectorXd& x) {
  const EnumeratedPosterior post = enumerate_posterior(g, x);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.param_count());
  for (std::size_t s = 0; s < post.states.size(); ++s) {
    grad += post.posterior[static_cast<Eigen::Index>(s)] * g.joint_grad_params(x, post.states[s]);
  }
  return grad;
}

/// Exact ascent direction for the recognition objective: the
/// posterior-weighted average of d log q(z | x) / d phi.
inline Eigen::VectorXd exact_phi_grad(const deepgen::GenerativeModel& g,
                                      const deepgen::RecognitionModel& r,
                                      const Eigen::VectorXd& x) {
  const EnumeratedPosterior post = enumerate_posterior(g, x);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(r.param_count());
  for (std::size_t s = 0; s < post.states.size(); ++s) {
    grad +=
        post.posterior[static_cast<Eigen::Index>(s)] * r.log_prob_grad_params(x, post.states[s]);
  }
  return grad;
}

}  // namespace oracles

#endif  // DEEPGEN_TESTS_SUPPORT_ORACLES_HPP
