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

#ifndef DEEPGEN_ESTIMATORS_HPP
#define DEEPGEN_ESTIMATORS_HPP

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "deepgen/errors.hpp"
#include "deepgen/gibbs.hpp"
#include "deepgen/model.hpp"
#include "deepgen/numerics.hpp"
#include "deepgen/priors.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Monte Carlo gradient and likelihood estimators.
///
/// The posterior expectation E_{p(z|x)}[d/dtheta log p(x, z)] that drives
/// parameter sampling is estimated two ways: self-normalized importance
/// sampling with the recognition network as proposal, and Gibbs chains over
/// the exact single-site conditionals. The recognition parameters follow
/// either the inclusive divergence (same weights, score of q) or an
/// importance-weighted pathwise objective for Gaussian stacks. Every
/// weighted estimate carries its effective sample size and largest
/// normalized weight so training can surface proposal collapse.

namespace deepgen {

/// A flat gradient with weight-quality diagnostics. For S weighted draws,
/// ess lies in (0, S] and max_weight in (0, 1]; unweighted estimators
/// report the uniform values S and 1/S.
struct GradEstimate {
  Eigen::VectorXd grad;
  double ess = 0.0;
  double max_weight = 0.0;
};

/// Draws S proposal samples z_s ~ q(. | x) and computes their normalized
/// importance weights. Draw s uses stream.child(s), so the set is
/// insensitive to evaluation order.
inline WeightedSampleSet draw_weighted_samples(const GenerativeModel& g,
                                               const RecognitionModel& r,
                                               const Eigen::VectorXd& x, int S,
                                               const RandomStream& stream) {
  if (S < 1) {
    throw DomainError("at least one proposal draw is required");
  }
  std::vector<HiddenState> samples;
  samples.reserve(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    RandomStream cs = stream.child(static_cast<std::uint64_t>(s));
    samples.push_back(r.sample(x, cs));
  }
  return compute_weights(g, r, x, std::move(samples));
}

/// Self-normalized estimate of d/dtheta log p(x | theta) from weighted
/// proposal draws: sum_s w_s d/dtheta log p(x, z_s | theta).
inline GradEstimate grad_theta_nais(const GenerativeModel& g, const Eigen::VectorXd& x,
                                    const WeightedSampleSet& set) {
  GradEstimate est;
  est.grad = Eigen::VectorXd::Zero(g.param_count());
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    const double w = set.normalized[static_cast<Eigen::Index>(s)];
    if (w != 0.0) {
      est.grad += w * g.joint_grad_params(x, set.samples[s]);
    }
  }
  est.ess = effective_sample_size(set.normalized);
  est.max_weight = set.normalized.maxCoeff();
  return est;
}

/// Convenience overload that draws its own S-sample set.
inline GradEstimate grad_theta_nais(const GenerativeModel& g, const RecognitionModel& r,
                                    const Eigen::VectorXd& x, int S, const RandomStream& stream) {
  return grad_theta_nais(g, x, draw_weighted_samples(g, r, x, S, stream));
}

/// Ascent direction on the recognition parameters that lowers the inclusive
/// divergence from the posterior to q: sum_s w_s d/dphi log q(z_s | x).
inline GradEstimate grad_phi_inclusive(const RecognitionModel& r, const Eigen::VectorXd& x,
                                       const WeightedSampleSet& set) {
  GradEstimate est;
  est.grad = Eigen::VectorXd::Zero(r.param_count());
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    const double w = set.normalized[static_cast<Eigen::Index>(s)];
    if (w != 0.0) {
      est.grad += w * r.log_prob_grad_params(x, set.samples[s]);
    }
  }
  est.ess = effective_sample_size(set.normalized);
  est.max_weight = set.normalized.maxCoeff();
  return est;
}

/// Convenience overload that draws its own S-sample set.
inline GradEstimate grad_phi_inclusive(const GenerativeModel& g, const RecognitionModel& r,
                                       const Eigen::VectorXd& x, int S,
                                       const RandomStream& stream) {
  return grad_phi_inclusive(r, x, draw_weighted_samples(g, r, x, S, stream));
}

/// Unweighted estimate of d/dtheta log p(x | theta) from a Gibbs chain:
/// runs sweeps_per_sample full sweeps before each of the S retained states
/// and averages the joint gradient over them. The chain continues across
/// retained states rather than restarting.
inline GradEstimate grad_theta_gibbs(const GenerativeModel& g, const Eigen::VectorXd& x, int S,
                                     int sweeps_per_sample, HiddenState state,
                                     RandomStream& stream) {
  if (S < 1) {
    throw DomainError("at least one retained Gibbs state is required");
  }
  if (sweeps_per_sample < 0) {
    throw DomainError("sweep count must be non-negative");
  }
  GradEstimate est;
  est.grad = Eigen::VectorXd::Zero(g.param_count());
  for (int s = 0; s < S; ++s) {
    for (int k = 0; k < sweeps_per_sample; ++k) {
      state = gibbs_sweep(g, x, std::move(state), stream);
    }
    est.grad += g.joint_grad_params(x, state);
  }
  est.grad /= static_cast<double>(S);
  est.ess = static_cast<double>(S);
  est.max_weight = 1.0 / static_cast<double>(S);
  return est;
}

/// Importance-weighted pathwise ascent direction on the recognition
/// parameters for fully Gaussian stacks:
/// sum_k w_k d/dphi log w(x, z(eps_k, phi)), differentiating through the
/// draws. Requires every recognition layer to be vae_real and every hidden
/// generative conditional to have a real-valued output.
inline GradEstimate grad_phi_iwae(const GenerativeModel& g, const RecognitionModel& r,
                                  const Eigen::VectorXd& x, int K, const RandomStream& stream) {
  check_compatible(g, r);
  const int L = g.num_hidden_layers();
  if (K < 1) {
    throw DomainError("at least one draw is required");
  }
  if (L < 1) {
    throw CapabilityError("pathwise gradients need at least one hidden layer");
  }
  for (int l = 1; l <= L; ++l) {
    if (!is_reparameterizable(r.layer(l).kind())) {
      throw CapabilityError("pathwise gradients require vae_real recognition layers");
    }
    const LayerKind gk = g.layer(l).kind();
    const bool ok = l == L ? gk == LayerKind::kTopGaussian : gk == LayerKind::kVaeReal;
    if (!ok) {
      throw CapabilityError("pathwise gradients require real-valued hidden conditionals");
    }
  }

  const Eigen::Index phi_dim = r.param_count();
  std::vector<Eigen::Index> seg_off(static_cast<std::size_t>(L) + 1, 0);
  for (int l = 1; l <= L; ++l) {
    seg_off[static_cast<std::size_t>(l)] =
        seg_off[static_cast<std::size_t>(l) - 1] + r.layer(l).param_count();
  }

  Eigen::VectorXd log_w(K);
  std::vector<Eigen::VectorXd> per_draw_grad(static_cast<std::size_t>(K));
  const Eigen::VectorXd empty;
  for (int k = 0; k < K; ++k) {
    RandomStream ck = stream.child(static_cast<std::uint64_t>(k));
    std::vector<ReparamTape> tapes(static_cast<std::size_t>(L));
    const Eigen::VectorXd* cur = &x;
    for (int l = 1; l <= L; ++l) {
      Eigen::VectorXd eps(r.layer(l).out_dim());
      for (Eigen::Index i = 0; i < eps.size(); ++i) {
        eps[i] = ck.gaussian(0.0, 1.0);
      }
      tapes[l - 1] = r.layer(l).reparam_sample(*cur, eps);
      cur = &tapes[l - 1].output;
    }
    auto z_of = [&tapes](int l) -> const Eigen::VectorXd& { return tapes[l - 1].output; };
    auto below_of = [&x, &z_of](int l) -> const Eigen::VectorXd& {
      return l == 1 ? x : z_of(l - 1);
    };

    double lw = g.layer(L).log_prob(empty, z_of(L));
    for (int l = L - 1; l >= 1; --l) {
      lw += g.layer(l).log_prob(z_of(l + 1), z_of(l));
    }
    lw += g.layer(0).log_prob(z_of(1), x);
    for (int l = 1; l <= L; ++l) {
      lw -= r.layer(l).log_prob(below_of(l), z_of(l));
    }
    log_w[k] = lw;

    // Adjoint sweep: total derivative of log w through the draw chain.
    Eigen::VectorXd phi_grad = Eigen::VectorXd::Zero(phi_dim);
    Eigen::VectorXd from_above;  // (dz_{l+1}/dz_l)^T x adjoint_{l+1}
    for (int l = L; l >= 1; --l) {
      Eigen::VectorXd adj = g.layer(l).grad_output(l == L ? empty : z_of(l + 1), z_of(l));
      adj += g.layer(l - 1).grad_params_and_input(z_of(l), l == 1 ? x : z_of(l - 1)).second;
      adj -= r.layer(l).grad_output(below_of(l), z_of(l));
      if (l < L) {
        adj -= r.layer(l + 1).grad_params_and_input(z_of(l), z_of(l + 1)).second;
        adj += from_above;
      }
      auto seg = [&](const LayerGrad& lg, double scale) {
        Eigen::VectorXd flat(r.layer(l).param_count());
        r.layer(l).pack_grad(lg, flat);
        phi_grad.segment(seg_off[static_cast<std::size_t>(l) - 1], flat.size()) += scale * flat;
      };
      seg(r.layer(l).grad_params(below_of(l), z_of(l)), -1.0);
      auto [stage_grads, dinput] = r.layer(l).reparam_backward(tapes[l - 1], adj);
      seg(stage_grads, 1.0);
      from_above = std::move(dinput);
    }
    per_draw_grad[static_cast<std::size_t>(k)] = std::move(phi_grad);
  }

  GradEstimate est;
  const Eigen::VectorXd w = normalize_log_weights(log_w);
  est.grad = Eigen::VectorXd::Zero(phi_dim);
  for (int k = 0; k < K; ++k) {
    if (w[k] != 0.0) {
      est.grad += w[k] * per_draw_grad[static_cast<std::size_t>(k)];
    }
  }
  est.ess = effective_sample_size(w);
  est.max_weight = w.maxCoeff();
  return est;
}

/// Stochastic gradient of the potential U(theta) = -log p(theta | data) from
/// a minibatch: -d/dtheta log p0(theta) scaled by nothing, minus the
/// minibatch likelihood gradients scaled up to the full dataset size.
inline Eigen::VectorXd potential_grad(const Eigen::VectorXd& theta, const PriorSpec& prior,
                                      std::size_t dataset_size,
                                      const std::vector<GradEstimate>& per_x) {
  if (per_x.empty()) {
    throw DomainError("a minibatch must contain at least one point");
  }
  if (dataset_size < per_x.size()) {
    throw DomainError("dataset size cannot be smaller than the minibatch");
  }
  Eigen::VectorXd g = -log_prior_grad(prior, theta);
  const double scale =
      static_cast<double>(dataset_size) / static_cast<double>(per_x.size());
  for (const auto& e : per_x) {
    if (e.grad.size() != theta.size()) {
      throw ShapeError("per-point gradient width does not match theta");
    }
    g -= scale * e.grad;
  }
  return g;
}

/// K-sample importance estimate of log p(x): log mean_k w_k. Biased low for
/// finite K and non-decreasing in K in expectation. Draw k uses
/// stream.child(k). Throws DegenerateWeightsError when every weight
/// underflows.
inline double estimate_loglik(const GenerativeModel& g, const RecognitionModel& r,
                              const Eigen::VectorXd& x, int K, const RandomStream& stream) {
  if (K < 1) {
    throw DomainError("at least one draw is required");
  }
  Eigen::VectorXd log_w(K);
  for (int k = 0; k < K; ++k) {
    RandomStream ck = stream.child(static_cast<std::uint64_t>(k));
    const HiddenState z = r.sample(x, ck);
    log_w[k] = g.joint_log_prob(x, z) - r.log_prob(x, z);
  }
  const double lse = log_sum_exp(log_w);
  if (std::isinf(lse)) {
    throw DegenerateWeightsError("all likelihood weights are zero");
  }
  return lse - std::log(static_cast<double>(K));
}

/// Average of collected parameter vectors.
inline Eigen::VectorXd posterior_mean(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) {
    throw DomainError("posterior mean needs at least one sample");
  }
  Eigen::VectorXd m = Eigen::VectorXd::Zero(samples.front().size());
  for (const auto& s : samples) {
    if (s.size() != m.size()) {
      throw ShapeError("parameter samples have mismatched widths");
    }
    m += s;
  }
  return m / static_cast<double>(samples.size());
}

}  // namespace deepgen

#endif  // DEEPGEN_ESTIMATORS_HPP
