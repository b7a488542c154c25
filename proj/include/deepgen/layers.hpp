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

#ifndef DEEPGEN_LAYERS_HPP
#define DEEPGEN_LAYERS_HPP

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepgen/errors.hpp"
#include "deepgen/numerics.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Conditional layer families for deep generative stacks.
///
/// A layer defines a conditional distribution p(output | input) where the
/// input is the activity of the layer above (empty for top layers). Every
/// family supports exact sampling, exact conditional log-probability, and
/// analytic gradients of that log-probability with respect to its own
/// parameters and, where meaningful, its input and output vectors. Gradients
/// are exact, not estimated; a finite-difference harness in the test suite
/// checks every family against them.
///
/// Parameters are exposed both as named Eigen blocks and as a packed flat
/// vector. The flat order is fixed (see pack_params) and only live entries
/// are packed: the strictly lower triangle of in-layer weight matrices and
/// all but the last column of autoregressive encoders, since the remaining
/// entries can never influence any probability.

namespace deepgen {

/// Conditional families. The four "top" kinds take no input.
enum class LayerKind {
  kSbn,           ///< Factorized Bernoulli with linear logits.
  kDarn,          ///< Autoregressive Bernoulli with linear in-layer logits.
  kNade,          ///< Autoregressive Bernoulli with a shared hidden code.
  kVaeBinary,     ///< Factorized Bernoulli with an MLP feature map.
  kVaeReal,       ///< Diagonal Gaussian with an MLP feature map.
  kTopBernoulli,  ///< Input-free factorized Bernoulli.
  kTopFvsbn,      ///< Input-free fully visible sigmoid belief network.
  kTopNade,       ///< Input-free autoregressive Bernoulli with hidden code.
  kTopGaussian,   ///< Input-free standard Gaussian.
};

/// True for kinds that take no input vector.
inline bool is_top(LayerKind k) {
  switch (k) {
    case LayerKind::kTopBernoulli:
    case LayerKind::kTopFvsbn:
    case LayerKind::kTopNade:
    case LayerKind::kTopGaussian:
      return true;
    default:
      return false;
  }
}

/// True for kinds whose output entries are bits in {0, 1}.
inline bool is_binary_output(LayerKind k) {
  return k != LayerKind::kVaeReal && k != LayerKind::kTopGaussian;
}

/// True for the one kind with a differentiable sampling path.
inline bool is_reparameterizable(LayerKind k) {
  return k == LayerKind::kVaeReal;
}

/// Manifest name of a kind.
inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kSbn:
      return "sbn";
    case LayerKind::kDarn:
      return "darn";
    case LayerKind::kNade:
      return "nade";
    case LayerKind::kVaeBinary:
      return "vae_binary";
    case LayerKind::kVaeReal:
      return "vae_real";
    case LayerKind::kTopBernoulli:
      return "top_bernoulli";
    case LayerKind::kTopFvsbn:
      return "top_fvsbn";
    case LayerKind::kTopNade:
      return "top_nade";
    case LayerKind::kTopGaussian:
      return "top_gaussian";
  }
  return "?";
}

/// Parses a manifest kind name. Throws ConfigError on unknown names.
inline LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "sbn") return LayerKind::kSbn;
  if (name == "darn") return LayerKind::kDarn;
  if (name == "nade") return LayerKind::kNade;
  if (name == "vae_binary") return LayerKind::kVaeBinary;
  if (name == "vae_real") return LayerKind::kVaeReal;
  if (name == "top_bernoulli") return LayerKind::kTopBernoulli;
  if (name == "top_fvsbn") return LayerKind::kTopFvsbn;
  if (name == "top_nade") return LayerKind::kTopNade;
  if (name == "top_gaussian") return LayerKind::kTopGaussian;
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

/// One dense tanh stage of a feature MLP.
struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

/// Named parameter blocks. Blocks unused by a kind have size zero.
///
/// Shapes, writing D for the output width, I for the input width and H for
/// the hidden width:
///   W        D x I   linear logits (kSbn) or readout from MLP features
///   U        D x I   linear logits (kDarn), or H x I input encoder (kNade)
///   V        D x H   hidden-to-logit readout (kNade, kTopNade)
///   R        D x I   direct input-to-logit skip (kNade)
///   in_w     D x D   strictly lower triangular in-layer weights
///   enc      H x D   output-to-hidden encoder; column j feeds units after j
///   a        H       hidden bias (kNade, kTopNade)
///   b        D       output bias (logit bias for Bernoulli kinds)
///   mlp              dense tanh stages (kVaeBinary, kVaeReal)
///   w_mu     D x F   mean head over F MLP features, with bias b_mu
///   w_sigma  D x F   log-variance head, with bias b_sigma
struct LayerParams {
  Eigen::MatrixXd W;
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  Eigen::MatrixXd R;
  Eigen::MatrixXd in_w;
  Eigen::MatrixXd enc;
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  std::vector<DenseLayer> mlp;
  Eigen::MatrixXd w_mu;
  Eigen::VectorXd b_mu;
  Eigen::MatrixXd w_sigma;
  Eigen::VectorXd b_sigma;
};

/// Gradients share the block layout of the parameters they differentiate.
using LayerGrad = LayerParams;

/// Intermediate values saved by a reparameterized draw for its backward pass.
struct ReparamTape {
  Eigen::VectorXd input;
  Eigen::VectorXd eps;
  std::vector<Eigen::VectorXd> acts;  ///< MLP activations; acts[0] is input.
  Eigen::VectorXd mu;
  Eigen::VectorXd log_var;
  Eigen::VectorXd output;
};

/// A conditional layer: kind, dimensions, and parameter storage.
class Layer {
 public:
  /// Constructs a layer with zero parameters of the right shapes.
  ///
  /// nade_hidden selects H for the kNade and kTopNade kinds; zero means
  /// "same as the output width". mlp_dims gives the widths of the dense
  /// tanh stages for the VAE kinds; empty means the identity feature map.
  Layer(LayerKind kind, Eigen::Index in_dim, Eigen::Index out_dim,
        Eigen::Index nade_hidden = 0, std::vector<Eigen::Index> mlp_dims = {})
      : kind_(kind), in_(in_dim), out_(out_dim), mlp_dims_(std::move(mlp_dims)) {
    if (out_ < 1) {
      throw ShapeError("layer output width must be at least 1");
    }
    if (is_top(kind_) ? in_ != 0 : in_ < 1) {
      throw ShapeError(is_top(kind_) ? "top layer kind takes no input"
                                     : "layer input width must be at least 1");
    }
    const bool uses_hidden = kind_ == LayerKind::kNade || kind_ == LayerKind::kTopNade;
    hidden_ = uses_hidden ? (nade_hidden > 0 ? nade_hidden : out_) : 0;
    if (!uses_hidden && nade_hidden > 0) {
      throw ShapeError("hidden width is only meaningful for nade kinds");
    }
    const bool uses_mlp = kind_ == LayerKind::kVaeBinary || kind_ == LayerKind::kVaeReal;
    if (!uses_mlp && !mlp_dims_.empty()) {
      throw ShapeError("mlp stages are only meaningful for vae kinds");
    }
    allocate();
  }

  LayerKind kind() const { return kind_; }
  Eigen::Index in_dim() const { return in_; }
  Eigen::Index out_dim() const { return out_; }
  Eigen::Index hidden_dim() const { return hidden_; }
  const std::vector<Eigen::Index>& mlp_dims() const { return mlp_dims_; }

  LayerParams& params() { return params_; }
  const LayerParams& params() const { return params_; }

  /// Width of the feature vector feeding the VAE readout heads.
  Eigen::Index feature_dim() const {
    return mlp_dims_.empty() ? in_ : mlp_dims_.back();
  }

  /// Draws output ~ p(. | input).
  Eigen::VectorXd sample(const Eigen::VectorXd& input, RandomStream& stream) const {
    check_input(input);
    switch (kind_) {
      case LayerKind::kSbn: {
        const Eigen::VectorXd s = params_.W * input + params_.b;
        return draw_bits(s, stream);
      }
      case LayerKind::kDarn: {
        const Eigen::VectorXd base = params_.U * input + params_.b;
        return draw_autoregressive(base, stream);
      }
      case LayerKind::kTopBernoulli:
        return draw_bits(params_.b, stream);
      case LayerKind::kTopFvsbn:
        return draw_autoregressive(params_.b, stream);
      case LayerKind::kNade:
      case LayerKind::kTopNade:
        return draw_nade(input, stream);
      case LayerKind::kVaeBinary: {
        const Eigen::VectorXd f = mlp_forward(input).back();
        const Eigen::VectorXd s = params_.W * f + params_.b;
        return draw_bits(s, stream);
      }
      case LayerKind::kVaeReal: {
        Eigen::VectorXd eps(out_);
        for (Eigen::Index i = 0; i < out_; ++i) {
          eps[i] = stream.gaussian(0.0, 1.0);
        }
        return reparam_sample(input, eps).output;
      }
      case LayerKind::kTopGaussian: {
        Eigen::VectorXd z(out_);
        for (Eigen::Index i = 0; i < out_; ++i) {
          z[i] = stream.gaussian(0.0, 1.0);
        }
        return z;
      }
    }
    throw CapabilityError("unhandled layer kind");
  }

  /// Exact log p(output | input).
  double log_prob(const Eigen::VectorXd& input, const Eigen::VectorXd& output) const {
    check_input(input);
    check_output(output);
    if (is_binary_output(kind_)) {
      const Eigen::VectorXd s = logits(input, output);
      double lp = 0.0;
      for (Eigen::Index i = 0; i < out_; ++i) {
        lp += output[i] * s[i] - log1p_exp(s[i]);
      }
      return lp;
    }
    if (kind_ == LayerKind::kTopGaussian) {
      return -0.5 * out_ * std::log(2.0 * std::numbers::pi) - 0.5 * output.squaredNorm();
    }
    // kVaeReal.
    Eigen::VectorXd mu, lv;
    gaussian_heads(mlp_forward(input).back(), mu, lv);
    double lp = 0.0;
    for (Eigen::Index i = 0; i < out_; ++i) {
      const double d = output[i] - mu[i];
      lp += -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * lv[i] -
            0.5 * d * d * std::exp(-lv[i]);
    }
    return lp;
  }

  /// Pre-activation logits for the Bernoulli kinds given the realized output
  /// prefix. Exposed so samplers over binary states can reuse them.
  Eigen::VectorXd logits(const Eigen::VectorXd& input, const Eigen::VectorXd& output) const {
    switch (kind_) {
      case LayerKind::kSbn:
        return params_.W * input + params_.b;
      case LayerKind::kVaeBinary:
        return params_.W * mlp_forward(input).back() + params_.b;
      case LayerKind::kTopBernoulli:
        return params_.b;
      case LayerKind::kDarn: {
        Eigen::VectorXd s = params_.U * input + params_.b;
        add_in_layer(s, output);
        return s;
      }
      case LayerKind::kTopFvsbn: {
        Eigen::VectorXd s = params_.b;
        add_in_layer(s, output);
        return s;
      }
      case LayerKind::kNade:
      case LayerKind::kTopNade: {
        Eigen::VectorXd c = nade_code_base(input);
        Eigen::VectorXd s(out_);
        for (Eigen::Index i = 0; i < out_; ++i) {
          const Eigen::VectorXd h = c.unaryExpr([](double v) { return stable_sigmoid(v); });
          s[i] = params_.V.row(i).dot(h) + params_.b[i];
          if (kind_ == LayerKind::kNade) {
            s[i] += params_.R.row(i).dot(input);
          }
          if (i + 1 < out_) {
            c += params_.enc.col(i) * output[i];
          }
        }
        return s;
      }
      default:
        throw CapabilityError("logits are only defined for Bernoulli kinds");
    }
  }

  /// Gradient of log p(output | input) with respect to the parameters.
  LayerGrad grad_params(const Eigen::VectorXd& input, const Eigen::VectorXd& output) const {
    return grad_params_impl(input, output, nullptr);
  }

  /// Same as grad_params but also returns d log p / d input.
  std::pair<LayerGrad, Eigen::VectorXd> grad_params_and_input(
      const Eigen::VectorXd& input, const Eigen::VectorXd& output) const {
    if (is_top(kind_)) {
      throw CapabilityError("top layer kinds have no input gradient");
    }
    Eigen::VectorXd din;
    LayerGrad g = grad_params_impl(input, output, &din);
    return {std::move(g), std::move(din)};
  }

  /// Gradient of log p(output | input) with respect to the output vector.
  /// Defined only for the real-valued output kinds.
  Eigen::VectorXd grad_output(const Eigen::VectorXd& input, const Eigen::VectorXd& output) const {
    check_input(input);
    check_output(output);
    if (kind_ == LayerKind::kTopGaussian) {
      return -output;
    }
    if (kind_ == LayerKind::kVaeReal) {
      Eigen::VectorXd mu, lv;
      gaussian_heads(mlp_forward(input).back(), mu, lv);
      return ((mu - output).array() * (-lv).array().exp()).matrix();
    }
    throw CapabilityError("output gradient requires a real-valued output kind");
  }

  /// Differentiable draw output = mu(input) + exp(log_var(input)/2) .* eps.
  /// Only the kVaeReal kind supports this path. The drawn vector is
  /// tape.output.
  ReparamTape reparam_sample(const Eigen::VectorXd& input, const Eigen::VectorXd& eps) const {
    if (kind_ != LayerKind::kVaeReal) {
      throw CapabilityError("reparameterized sampling requires a vae_real layer");
    }
    check_input(input);
    if (eps.size() != out_) {
      throw ShapeError("noise vector width must match the layer output width");
    }
    ReparamTape tape;
    tape.input = input;
    tape.eps = eps;
    tape.acts = mlp_forward(input);
    gaussian_heads(tape.acts.back(), tape.mu, tape.log_var);
    tape.output = tape.mu + ((tape.log_var * 0.5).array().exp() * eps.array()).matrix();
    return tape;
  }

  /// Pulls an upstream gradient d objective / d output through a
  /// reparameterized draw, yielding parameter gradients and
  /// d objective / d input.
  std::pair<LayerGrad, Eigen::VectorXd> reparam_backward(const ReparamTape& tape,
                                                         const Eigen::VectorXd& upstream) const {
    if (kind_ != LayerKind::kVaeReal) {
      throw CapabilityError("reparameterized backward requires a vae_real layer");
    }
    if (upstream.size() != out_) {
      throw ShapeError("upstream gradient width must match the layer output width");
    }
    LayerGrad g = zero_grad();
    const Eigen::VectorXd& dmu = upstream;
    const Eigen::VectorXd dlv =
        (0.5 * upstream.array() * (tape.log_var * 0.5).array().exp() * tape.eps.array()).matrix();
    const Eigen::VectorXd& f = tape.acts.back();
    g.w_mu = dmu * f.transpose();
    g.b_mu = dmu;
    g.w_sigma = dlv * f.transpose();
    g.b_sigma = dlv;
    Eigen::VectorXd df = params_.w_mu.transpose() * dmu + params_.w_sigma.transpose() * dlv;
    Eigen::VectorXd dinput = mlp_backward(tape.acts, df, g.mlp);
    return {std::move(g), std::move(dinput)};
  }

  /// Number of live scalar parameters.
  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    visit_shapes([&n](Eigen::Index count) { n += count; });
    return n;
  }

  /// Writes the live parameters into out, which must have param_count()
  /// entries. Matrices are packed column by column; in_w contributes only
  /// its strictly lower triangle and enc only its first D-1 columns.
  void pack_params(Eigen::Ref<Eigen::VectorXd> out) const { pack(params_, out); }

  /// Reads the live parameters from in. Entries outside the live sets keep
  /// their value (they are zero for a freshly constructed layer).
  void unpack_params(const Eigen::Ref<const Eigen::VectorXd>& in) { unpack(params_, in); }

  /// Packs a gradient produced by this layer using the parameter order.
  void pack_grad(const LayerGrad& g, Eigen::Ref<Eigen::VectorXd> out) const { pack(g, out); }

  /// A zero gradient with this layer's block shapes.
  LayerGrad zero_grad() const {
    Layer z(kind_, in_, out_, hidden_ > 0 ? hidden_ : 0, mlp_dims_);
    return z.params_;
  }

  /// Initializes weight matrices uniformly on +/- sqrt(6 / (fan_in +
  /// fan_out)) and all biases to zero. Draw order is the packing order.
  void init_glorot(RandomStream& stream) {
    auto fill = [&stream](Eigen::Ref<Eigen::MatrixXd> m, Eigen::Index fan_in,
                          Eigen::Index fan_out) {
      const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          m(i, j) = (2.0 * stream.uniform() - 1.0) * lim;
        }
      }
    };
    if (params_.W.size() > 0) fill(params_.W, params_.W.cols(), params_.W.rows());
    if (params_.U.size() > 0) fill(params_.U, params_.U.cols(), params_.U.rows());
    if (params_.V.size() > 0) fill(params_.V, params_.V.cols(), params_.V.rows());
    if (params_.R.size() > 0) fill(params_.R, params_.R.cols(), params_.R.rows());
    if (params_.in_w.size() > 0) {
      const double lim = std::sqrt(6.0 / static_cast<double>(2 * out_));
      for (Eigen::Index j = 0; j < out_; ++j) {
        for (Eigen::Index i = j + 1; i < out_; ++i) {
          params_.in_w(i, j) = (2.0 * stream.uniform() - 1.0) * lim;
        }
      }
    }
    if (params_.enc.size() > 0 && out_ > 1) {
      fill(params_.enc.leftCols(out_ - 1), out_, hidden_);
    }
    params_.a.setZero();
    params_.b.setZero();
    for (auto& stage : params_.mlp) {
      fill(stage.W, stage.W.cols(), stage.W.rows());
      stage.b.setZero();
    }
    if (params_.w_mu.size() > 0) fill(params_.w_mu, params_.w_mu.cols(), params_.w_mu.rows());
    params_.b_mu.setZero();
    if (params_.w_sigma.size() > 0) {
      fill(params_.w_sigma, params_.w_sigma.cols(), params_.w_sigma.rows());
    }
    params_.b_sigma.setZero();
  }

 private:
  void allocate() {
    LayerParams& p = params_;
    switch (kind_) {
      case LayerKind::kSbn:
        p.W.setZero(out_, in_);
        p.b.setZero(out_);
        break;
      case LayerKind::kDarn:
        p.U.setZero(out_, in_);
        p.in_w.setZero(out_, out_);
        p.b.setZero(out_);
        break;
      case LayerKind::kNade:
        p.U.setZero(hidden_, in_);
        p.enc.setZero(hidden_, out_);
        p.V.setZero(out_, hidden_);
        p.R.setZero(out_, in_);
        p.a.setZero(hidden_);
        p.b.setZero(out_);
        break;
      case LayerKind::kVaeBinary:
        p.mlp = make_mlp();
        p.W.setZero(out_, feature_dim());
        p.b.setZero(out_);
        break;
      case LayerKind::kVaeReal:
        p.mlp = make_mlp();
        p.w_mu.setZero(out_, feature_dim());
        p.b_mu.setZero(out_);
        p.w_sigma.setZero(out_, feature_dim());
        p.b_sigma.setZero(out_);
        break;
      case LayerKind::kTopBernoulli:
        p.b.setZero(out_);
        break;
      case LayerKind::kTopFvsbn:
        p.in_w.setZero(out_, out_);
        p.b.setZero(out_);
        break;
      case LayerKind::kTopNade:
        p.enc.setZero(hidden_, out_);
        p.V.setZero(out_, hidden_);
        p.a.setZero(hidden_);
        p.b.setZero(out_);
        break;
      case LayerKind::kTopGaussian:
        break;
    }
  }

  std::vector<DenseLayer> make_mlp() const {
    std::vector<DenseLayer> stages;
    Eigen::Index prev = in_;
    for (Eigen::Index w : mlp_dims_) {
      if (w < 1) {
        throw ShapeError("mlp stage width must be at least 1");
      }
      DenseLayer d;
      d.W.setZero(w, prev);
      d.b.setZero(w);
      stages.push_back(std::move(d));
      prev = w;
    }
    return stages;
  }

  void check_input(const Eigen::VectorXd& input) const {
    if (input.size() != in_) {
      throw ShapeError("layer input width mismatch");
    }
  }

  void check_output(const Eigen::VectorXd& output) const {
    if (output.size() != out_) {
      throw ShapeError("layer output width mismatch");
    }
    if (is_binary_output(kind_)) {
      for (Eigen::Index i = 0; i < out_; ++i) {
        if (output[i] != 0.0 && output[i] != 1.0) {
          throw DomainError("binary layer output entries must be 0 or 1");
        }
      }
    }
  }

  Eigen::VectorXd draw_bits(const Eigen::VectorXd& s, RandomStream& stream) const {
    Eigen::VectorXd z(out_);
    for (Eigen::Index i = 0; i < out_; ++i) {
      z[i] = stream.bernoulli(stable_sigmoid(s[i])) ? 1.0 : 0.0;
    }
    return z;
  }

  Eigen::VectorXd draw_autoregressive(const Eigen::VectorXd& base, RandomStream& stream) const {
    Eigen::VectorXd z(out_);
    for (Eigen::Index i = 0; i < out_; ++i) {
      double s = base[i];
      for (Eigen::Index j = 0; j < i; ++j) {
        s += params_.in_w(i, j) * z[j];
      }
      z[i] = stream.bernoulli(stable_sigmoid(s)) ? 1.0 : 0.0;
    }
    return z;
  }

  Eigen::VectorXd draw_nade(const Eigen::VectorXd& input, RandomStream& stream) const {
    Eigen::VectorXd c = nade_code_base(input);
    Eigen::VectorXd z(out_);
    for (Eigen::Index i = 0; i < out_; ++i) {
      const Eigen::VectorXd h = c.unaryExpr([](double v) { return stable_sigmoid(v); });
      double s = params_.V.row(i).dot(h) + params_.b[i];
      if (kind_ == LayerKind::kNade) {
        s += params_.R.row(i).dot(input);
      }
      z[i] = stream.bernoulli(stable_sigmoid(s)) ? 1.0 : 0.0;
      if (i + 1 < out_) {
        c += params_.enc.col(i) * z[i];
      }
    }
    return z;
  }

  /// Hidden pre-activation before any output bit has been absorbed.
  Eigen::VectorXd nade_code_base(const Eigen::VectorXd& input) const {
    if (kind_ == LayerKind::kNade) {
      return params_.a + params_.U * input;
    }
    return params_.a;
  }

  void add_in_layer(Eigen::VectorXd& s, const Eigen::VectorXd& output) const {
    for (Eigen::Index i = 1; i < out_; ++i) {
      s[i] += params_.in_w.row(i).head(i).dot(output.head(i));
    }
  }

  std::vector<Eigen::VectorXd> mlp_forward(const Eigen::VectorXd& input) const {
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(params_.mlp.size() + 1);
    acts.push_back(input);
    for (const auto& stage : params_.mlp) {
      acts.push_back((stage.W * acts.back() + stage.b).array().tanh().matrix());
    }
    return acts;
  }

  /// Backpropagates df through the MLP, filling stage gradients and
  /// returning d objective / d input.
  Eigen::VectorXd mlp_backward(const std::vector<Eigen::VectorXd>& acts, Eigen::VectorXd df,
                               std::vector<DenseLayer>& grad_stages) const {
    for (std::size_t k = params_.mlp.size(); k-- > 0;) {
      const Eigen::VectorXd& h = acts[k + 1];
      const Eigen::VectorXd dpre = (df.array() * (1.0 - h.array().square())).matrix();
      grad_stages[k].W = dpre * acts[k].transpose();
      grad_stages[k].b = dpre;
      df = params_.mlp[k].W.transpose() * dpre;
    }
    return df;
  }

  void gaussian_heads(const Eigen::VectorXd& f, Eigen::VectorXd& mu, Eigen::VectorXd& lv) const {
    mu = params_.w_mu * f + params_.b_mu;
    lv = params_.w_sigma * f + params_.b_sigma;
  }

  LayerGrad grad_params_impl(const Eigen::VectorXd& input, const Eigen::VectorXd& output,
                             Eigen::VectorXd* dinput) const {
    check_input(input);
    check_output(output);
    LayerGrad g = zero_grad();
    if (dinput != nullptr) {
      dinput->setZero(in_);
    }
    switch (kind_) {
      case LayerKind::kSbn: {
        const Eigen::VectorXd r = residual(params_.W * input + params_.b, output);
        g.W = r * input.transpose();
        g.b = r;
        if (dinput) *dinput = params_.W.transpose() * r;
        break;
      }
      case LayerKind::kDarn: {
        const Eigen::VectorXd r = residual(logits(input, output), output);
        g.U = r * input.transpose();
        g.b = r;
        fill_in_layer_grad(g.in_w, r, output);
        if (dinput) *dinput = params_.U.transpose() * r;
        break;
      }
      case LayerKind::kTopBernoulli: {
        g.b = residual(params_.b, output);
        break;
      }
      case LayerKind::kTopFvsbn: {
        const Eigen::VectorXd r = residual(logits(input, output), output);
        g.b = r;
        fill_in_layer_grad(g.in_w, r, output);
        break;
      }
      case LayerKind::kNade:
      case LayerKind::kTopNade: {
        nade_grad(input, output, g, dinput);
        break;
      }
      case LayerKind::kVaeBinary: {
        const auto acts = mlp_forward(input);
        const Eigen::VectorXd& f = acts.back();
        const Eigen::VectorXd r = residual(params_.W * f + params_.b, output);
        g.W = r * f.transpose();
        g.b = r;
        Eigen::VectorXd df = params_.W.transpose() * r;
        Eigen::VectorXd din = mlp_backward(acts, std::move(df), g.mlp);
        if (dinput) *dinput = std::move(din);
        break;
      }
      case LayerKind::kVaeReal: {
        const auto acts = mlp_forward(input);
        const Eigen::VectorXd& f = acts.back();
        Eigen::VectorXd mu, lv;
        gaussian_heads(f, mu, lv);
        const Eigen::ArrayXd prec = (-lv).array().exp();
        const Eigen::VectorXd dmu = ((output - mu).array() * prec).matrix();
        const Eigen::VectorXd dlv =
            (-0.5 + 0.5 * (output - mu).array().square() * prec).matrix();
        g.w_mu = dmu * f.transpose();
        g.b_mu = dmu;
        g.w_sigma = dlv * f.transpose();
        g.b_sigma = dlv;
        Eigen::VectorXd df = params_.w_mu.transpose() * dmu + params_.w_sigma.transpose() * dlv;
        Eigen::VectorXd din = mlp_backward(acts, std::move(df), g.mlp);
        if (dinput) *dinput = std::move(din);
        break;
      }
      case LayerKind::kTopGaussian:
        break;
    }
    return g;
  }

  /// output - sigma(logits), the score of a Bernoulli logit.
  static Eigen::VectorXd residual(const Eigen::VectorXd& s, const Eigen::VectorXd& output) {
    Eigen::VectorXd r(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      r[i] = output[i] - stable_sigmoid(s[i]);
    }
    return r;
  }

  static void fill_in_layer_grad(Eigen::MatrixXd& g, const Eigen::VectorXd& r,
                                 const Eigen::VectorXd& output) {
    for (Eigen::Index j = 0; j + 1 < g.cols(); ++j) {
      if (output[j] != 0.0) {
        for (Eigen::Index i = j + 1; i < g.rows(); ++i) {
          g(i, j) = r[i] * output[j];
        }
      }
    }
  }

  void nade_grad(const Eigen::VectorXd& input, const Eigen::VectorXd& output, LayerGrad& g,
                 Eigen::VectorXd* dinput) const {
    const Eigen::VectorXd s = logits(input, output);
    const Eigen::VectorXd r = residual(s, output);
    Eigen::VectorXd c = nade_code_base(input);
    Eigen::MatrixXd unit_codes(hidden_, out_);  // g_i per output unit
    Eigen::VectorXd g_total = Eigen::VectorXd::Zero(hidden_);
    for (Eigen::Index i = 0; i < out_; ++i) {
      const Eigen::ArrayXd h = c.array().unaryExpr([](double v) { return stable_sigmoid(v); });
      g.V.row(i) = r[i] * h.matrix().transpose();
      unit_codes.col(i) =
          (r[i] * params_.V.row(i).transpose().array() * h * (1.0 - h)).matrix();
      g_total += unit_codes.col(i);
      if (i + 1 < out_) {
        c += params_.enc.col(i) * output[i];
      }
    }
    g.a = g_total;
    Eigen::VectorXd suffix = Eigen::VectorXd::Zero(hidden_);
    for (Eigen::Index j = out_ - 1; j >= 0; --j) {
      g.enc.col(j) = output[j] * suffix;
      suffix += unit_codes.col(j);
    }
    g.b = r;
    if (kind_ == LayerKind::kNade) {
      g.U = g_total * input.transpose();
      g.R = r * input.transpose();
      if (dinput) {
        *dinput = params_.U.transpose() * g_total + params_.R.transpose() * r;
      }
    }
  }

  /// Invokes fn with the live entry count of each packed segment, in
  /// packing order.
  template <typename Fn>
  void visit_shapes(Fn&& fn) const {
    const LayerParams& p = params_;
    if (p.W.size() > 0) fn(p.W.size());
    if (p.U.size() > 0) fn(p.U.size());
    if (p.V.size() > 0) fn(p.V.size());
    if (p.R.size() > 0) fn(p.R.size());
    if (p.in_w.size() > 0) fn(out_ * (out_ - 1) / 2);
    if (p.enc.size() > 0) fn(hidden_ * (out_ - 1));
    if (p.a.size() > 0) fn(p.a.size());
    if (p.b.size() > 0) fn(p.b.size());
    for (const auto& stage : p.mlp) {
      fn(stage.W.size());
      fn(stage.b.size());
    }
    if (p.w_mu.size() > 0) fn(p.w_mu.size());
    if (p.b_mu.size() > 0) fn(p.b_mu.size());
    if (p.w_sigma.size() > 0) fn(p.w_sigma.size());
    if (p.b_sigma.size() > 0) fn(p.b_sigma.size());
  }

  void pack(const LayerParams& p, Eigen::Ref<Eigen::VectorXd> out) const {
    if (out.size() != param_count()) {
      throw ShapeError("packed parameter vector has the wrong length");
    }
    Eigen::Index k = 0;
    auto put_mat = [&out, &k](const Eigen::MatrixXd& m) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          out[k++] = m(i, j);
        }
      }
    };
    auto put_vec = [&out, &k](const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[k++] = v[i];
      }
    };
    if (p.W.size() > 0) put_mat(p.W);
    if (p.U.size() > 0) put_mat(p.U);
    if (p.V.size() > 0) put_mat(p.V);
    if (p.R.size() > 0) put_mat(p.R);
    if (p.in_w.size() > 0) {
      for (Eigen::Index j = 0; j < out_; ++j) {
        for (Eigen::Index i = j + 1; i < out_; ++i) {
          out[k++] = p.in_w(i, j);
        }
      }
    }
    if (p.enc.size() > 0) {
      for (Eigen::Index j = 0; j + 1 < out_; ++j) {
        for (Eigen::Index i = 0; i < hidden_; ++i) {
          out[k++] = p.enc(i, j);
        }
      }
    }
    if (p.a.size() > 0) put_vec(p.a);
    if (p.b.size() > 0) put_vec(p.b);
    for (const auto& stage : p.mlp) {
      put_mat(stage.W);
      put_vec(stage.b);
    }
    if (p.w_mu.size() > 0) put_mat(p.w_mu);
    if (p.b_mu.size() > 0) put_vec(p.b_mu);
    if (p.w_sigma.size() > 0) put_mat(p.w_sigma);
    if (p.b_sigma.size() > 0) put_vec(p.b_sigma);
  }

  void unpack(LayerParams& p, const Eigen::Ref<const Eigen::VectorXd>& in) const {
    if (in.size() != param_count()) {
      throw ShapeError("packed parameter vector has the wrong length");
    }
    Eigen::Index k = 0;
    auto get_mat = [&in, &k](Eigen::MatrixXd& m) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          m(i, j) = in[k++];
        }
      }
    };
    auto get_vec = [&in, &k](Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = in[k++];
      }
    };
    if (p.W.size() > 0) get_mat(p.W);
    if (p.U.size() > 0) get_mat(p.U);
    if (p.V.size() > 0) get_mat(p.V);
    if (p.R.size() > 0) get_mat(p.R);
    if (p.in_w.size() > 0) {
      for (Eigen::Index j = 0; j < out_; ++j) {
        for (Eigen::Index i = j + 1; i < out_; ++i) {
          p.in_w(i, j) = in[k++];
        }
      }
    }
    if (p.enc.size() > 0) {
      for (Eigen::Index j = 0; j + 1 < out_; ++j) {
        for (Eigen::Index i = 0; i < hidden_; ++i) {
          p.enc(i, j) = in[k++];
        }
      }
    }
    if (p.a.size() > 0) get_vec(p.a);
    if (p.b.size() > 0) get_vec(p.b);
    for (auto& stage : p.mlp) {
      get_mat(stage.W);
      get_vec(stage.b);
    }
    if (p.w_mu.size() > 0) get_mat(p.w_mu);
    if (p.b_mu.size() > 0) get_vec(p.b_mu);
    if (p.w_sigma.size() > 0) get_mat(p.w_sigma);
    if (p.b_sigma.size() > 0) get_vec(p.b_sigma);
  }

  LayerKind kind_;
  Eigen::Index in_ = 0;
  Eigen::Index out_ = 0;
  Eigen::Index hidden_ = 0;
  std::vector<Eigen::Index> mlp_dims_;
  LayerParams params_;
};

}  // namespace deepgen

#endif  // DEEPGEN_LAYERS_HPP
