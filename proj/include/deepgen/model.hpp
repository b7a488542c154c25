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

#ifndef DEEPGEN_MODEL_HPP
#define DEEPGEN_MODEL_HPP

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "deepgen/errors.hpp"
#include "deepgen/layers.hpp"
#include "deepgen/numerics.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Layered generative models and their recognition counterparts.
///
/// A generative model is a stack of conditional layers: the top layer is an
/// input-free prior over the deepest code z^(L), each middle layer emits
/// z^(l) given z^(l+1), and the bottom layer emits the observation x given
/// z^(1). A recognition model runs the opposite direction, x up to z^(L),
/// and factorizes the same way. Both expose their parameters as one flat
/// vector so samplers and optimizers can treat them as a point in R^d.

namespace deepgen {

/// Hidden activities z^(1)..z^(L), plus the reparameterization noise that
/// produced each one when the draw came from a differentiable layer.
struct HiddenState {
  std::vector<Eigen::VectorXd> z;    ///< z[l-1] holds z^(l).
  std::vector<Eigen::VectorXd> eps;  ///< eps[l-1] is empty for score-only draws.
};

namespace detail {

/// Shared flat-view plumbing over a vector of layers.
class LayerStack {
 public:
  explicit LayerStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
      throw ShapeError("a model needs at least one layer");
    }
  }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) {
      n += l.param_count();
    }
    return n;
  }

  Eigen::VectorXd get_params() const {
    Eigen::VectorXd v(param_count());
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
      l.pack_params(v.segment(off, l.param_count()));
      off += l.param_count();
    }
    return v;
  }

  void set_params(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() != param_count()) {
      throw ShapeError("flat parameter vector has the wrong length");
    }
    Eigen::Index off = 0;
    for (auto& l : layers_) {
      l.unpack_params(v.segment(off, l.param_count()));
      off += l.param_count();
    }
  }

  /// Packs per-layer gradients, ordered like the layers, into one vector.
  Eigen::VectorXd pack_grads(const std::vector<LayerGrad>& grads) const {
    if (grads.size() != layers_.size()) {
      throw ShapeError("one gradient per layer is required");
    }
    Eigen::VectorXd v(param_count());
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].pack_grad(grads[i], v.segment(off, layers_[i].param_count()));
      off += layers_[i].param_count();
    }
    return v;
  }

  void init_glorot(RandomStream& stream) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      RandomStream s = stream.child(i);
      layers_[i].init_glorot(s);
    }
  }

 protected:
  std::vector<Layer> layers_;
};

}  // namespace detail

/// Generative stack. layers[0] emits x, layers[L] is the input-free top.
class GenerativeModel : public detail::LayerStack {
 public:
  explicit GenerativeModel(std::vector<Layer> layers) : LayerStack(std::move(layers)) {
    const std::size_t top = layers_.size() - 1;
    if (!is_top(layers_[top].kind())) {
      throw ShapeError("the deepest generative layer must be an input-free kind");
    }
    for (std::size_t l = 0; l < top; ++l) {
      if (is_top(layers_[l].kind())) {
        throw ShapeError("only the deepest generative layer may be input-free");
      }
      if (layers_[l].in_dim() != layers_[l + 1].out_dim()) {
        throw ShapeError("adjacent generative layer widths do not chain");
      }
    }
  }

  /// Number of hidden layers L (the stack has L + 1 conditional layers).
  int num_hidden_layers() const { return static_cast<int>(layers_.size()) - 1; }

  Eigen::Index data_dim() const { return layers_[0].out_dim(); }

  /// Widths of z^(1)..z^(L), bottom up.
  std::vector<Eigen::Index> hidden_dims() const {
    std::vector<Eigen::Index> d;
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      d.push_back(layers_[l].out_dim());
    }
    return d;
  }

  /// layer(l) emits z^(l) for l >= 1 and x for l = 0.
  const Layer& layer(int l) const { return layers_.at(static_cast<std::size_t>(l)); }
  Layer& layer(int l) { return layers_.at(static_cast<std::size_t>(l)); }

  /// log p(x, z) summed over every conditional in the stack.
  double joint_log_prob(const Eigen::VectorXd& x, const HiddenState& state) const {
    const int L = num_hidden_layers();
    check_state(state);
    const Eigen::VectorXd empty;
    double lp = layers_[L].log_prob(empty, L > 0 ? state.z[L - 1] : x);
    if (L == 0) {
      return lp;
    }
    for (int l = L - 1; l >= 1; --l) {
      lp += layers_[l].log_prob(state.z[l], state.z[l - 1]);
    }
    lp += layers_[0].log_prob(state.z[0], x);
    return lp;
  }

  /// Draws (x, z) by sampling the stack top down.
  std::pair<Eigen::VectorXd, HiddenState> ancestral_sample(RandomStream& stream) const {
    const int L = num_hidden_layers();
    HiddenState state;
    state.z.resize(L);
    state.eps.resize(L);
    const Eigen::VectorXd empty;
    Eigen::VectorXd cur = layers_[L].sample(empty, stream);
    for (int l = L; l >= 1; --l) {
      state.z[l - 1] = cur;
      cur = layers_[l - 1].sample(cur, stream);
    }
    return {cur, state};
  }

  /// Gradient of log p(x, z) with respect to the flat parameters.
  Eigen::VectorXd joint_grad_params(const Eigen::VectorXd& x, const HiddenState& state) const {
    const int L = num_hidden_layers();
    check_state(state);
    std::vector<LayerGrad> grads;
    grads.reserve(layers_.size());
    const Eigen::VectorXd empty;
    grads.push_back(layers_[0].grad_params(L > 0 ? state.z[0] : empty, x));
    for (int l = 1; l <= L; ++l) {
      const Eigen::VectorXd& in = l < L ? state.z[l] : empty;
      grads.push_back(layers_[l].grad_params(in, state.z[l - 1]));
    }
    return pack_grads(grads);
  }

 private:
  void check_state(const HiddenState& state) const {
    if (static_cast<int>(state.z.size()) != num_hidden_layers()) {
      throw ShapeError("hidden state depth does not match the model");
    }
  }
};

/// Recognition stack. layers[l-1] emits z^(l); layers[0] consumes x.
class RecognitionModel : public detail::LayerStack {
 public:
  explicit RecognitionModel(std::vector<Layer> layers) : LayerStack(std::move(layers)) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (is_top(layers_[l].kind())) {
        throw ShapeError("recognition layers must be conditional kinds");
      }
      if (l > 0 && layers_[l].in_dim() != layers_[l - 1].out_dim()) {
        throw ShapeError("adjacent recognition layer widths do not chain");
      }
    }
  }

  int num_hidden_layers() const { return static_cast<int>(layers_.size()); }

  Eigen::Index data_dim() const { return layers_[0].in_dim(); }

  /// layer(l) emits z^(l), l in 1..L.
  const Layer& layer(int l) const { return layers_.at(static_cast<std::size_t>(l) - 1); }
  Layer& layer(int l) { return layers_.at(static_cast<std::size_t>(l) - 1); }

  /// Draws z ~ q(. | x) bottom up, recording reparameterization noise for
  /// differentiable layers.
  HiddenState sample(const Eigen::VectorXd& x, RandomStream& stream) const {
    HiddenState state;
    state.z.resize(layers_.size());
    state.eps.resize(layers_.size());
    const Eigen::VectorXd* cur = &x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& lay = layers_[l];
      if (is_reparameterizable(lay.kind())) {
        Eigen::VectorXd eps(lay.out_dim());
        for (Eigen::Index i = 0; i < eps.size(); ++i) {
          eps[i] = stream.gaussian(0.0, 1.0);
        }
        state.z[l] = lay.reparam_sample(*cur, eps).output;
        state.eps[l] = std::move(eps);
      } else {
        state.z[l] = lay.sample(*cur, stream);
      }
      cur = &state.z[l];
    }
    return state;
  }

  /// log q(z | x) summed over the recognition factorization.
  double log_prob(const Eigen::VectorXd& x, const HiddenState& state) const {
    check_state(state);
    double lp = 0.0;
    const Eigen::VectorXd* cur = &x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      lp += layers_[l].log_prob(*cur, state.z[l]);
      cur = &state.z[l];
    }
    return lp;
  }

  /// Gradient of log q(z | x) with respect to the flat parameters.
  Eigen::VectorXd log_prob_grad_params(const Eigen::VectorXd& x, const HiddenState& state) const {
    check_state(state);
    std::vector<LayerGrad> grads;
    grads.reserve(layers_.size());
    const Eigen::VectorXd* cur = &x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      grads.push_back(layers_[l].grad_params(*cur, state.z[l]));
      cur = &state.z[l];
    }
    return pack_grads(grads);
  }

 private:
  void check_state(const HiddenState& state) const {
    if (state.z.size() != layers_.size()) {
      throw ShapeError("hidden state depth does not match the model");
    }
  }
};

/// Throws unless the recognition stack mirrors the generative one.
inline void check_compatible(const GenerativeModel& g, const RecognitionModel& r) {
  if (r.num_hidden_layers() != g.num_hidden_layers()) {
    throw IncompatibilityError("generative and recognition depths differ");
  }
  if (r.data_dim() != g.data_dim()) {
    throw IncompatibilityError("generative and recognition data widths differ");
  }
  for (int l = 1; l <= g.num_hidden_layers(); ++l) {
    if (r.layer(l).out_dim() != g.layer(l).out_dim()) {
      throw IncompatibilityError("generative and recognition hidden widths differ");
    }
  }
}

/// Proposal draws with their importance weights against the joint.
struct WeightedSampleSet {
  std::vector<HiddenState> samples;
  Eigen::VectorXd log_weights;  ///< log p(x, z_s) - log q(z_s | x).
  Eigen::VectorXd normalized;   ///< Self-normalized weights, sum to one.
};

/// Computes log weights for given proposal draws and normalizes them.
/// Throws DegenerateWeightsError when every weight underflows to zero mass.
inline WeightedSampleSet compute_weights(const GenerativeModel& g, const RecognitionModel& r,
                                         const Eigen::VectorXd& x,
                                         std::vector<HiddenState> samples) {
  if (samples.empty()) {
    throw DomainError("at least one proposal draw is required");
  }
  WeightedSampleSet set;
  set.log_weights.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    set.log_weights[static_cast<Eigen::Index>(s)] =
        g.joint_log_prob(x, samples[s]) - r.log_prob(x, samples[s]);
  }
  set.samples = std::move(samples);
  set.normalized = normalize_log_weights(set.log_weights);
  return set;
}

}  // namespace deepgen

#endif  // DEEPGEN_MODEL_HPP
