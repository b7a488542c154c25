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

#ifndef DEEPGEN_TRAIN_HPP
#define DEEPGEN_TRAIN_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepgen/adam.hpp"
#include "deepgen/config.hpp"
#include "deepgen/data.hpp"
#include "deepgen/errors.hpp"
#include "deepgen/estimators.hpp"
#include "deepgen/metrics.hpp"
#include "deepgen/model.hpp"
#include "deepgen/parallel.hpp"
#include "deepgen/random.hpp"
#include "deepgen/sgnht.hpp"

/// \file
/// \brief The training orchestrator.
///
/// One epoch shuffles the data into minibatches; each batch runs n_theta
/// sampler updates on theta, each followed by n_phi Adam updates on phi.
/// After every epoch the validation likelihood is estimated; once it stops
/// improving for `patience` epochs the run switches to collection mode and
/// keeps one theta sample per epoch for M further epochs, whose average is
/// the returned posterior mean.
///
/// Every random draw comes from a stream addressed by
/// (seed, phase, epoch, batch, step, data index), so per-point work can run
/// on any thread schedule without changing results, and a resumed run
/// replays exactly the draws the unbroken run would have made.

namespace deepgen {

namespace stream_tag {
// Fixed phase tags under the root seed stream. data.hpp's minibatch
// shuffler owns tag 5.
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kSgnhtInit = 2;
inline constexpr std::uint64_t kTheta = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kPhi = 6;
inline constexpr std::uint64_t kVal = 7;
inline constexpr std::uint64_t kBinarize = 8;
inline constexpr std::uint64_t kEval = 10;
inline constexpr std::uint64_t kGenerate = 11;
inline constexpr std::uint64_t kImpute = 12;
}  // namespace stream_tag

/// Glorot-initializes both stacks: weights uniform on the fan-balanced
/// interval, biases zero.
inline void init_params(GenerativeModel& g, RecognitionModel& r, const RandomStream& stream) {
  RandomStream gs = stream.child(0);
  RandomStream rs = stream.child(1);
  g.init_glorot(gs);
  r.init_glorot(rs);
}

/// 64-bit FNV-1a hash; fingerprints config plus manifest text.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Full resumable training state as of the end of `epoch`.
struct Checkpoint {
  std::uint64_t digest = 0;  ///< Hash of config and manifest text.
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;  ///< Last completed epoch.
  Eigen::VectorXd theta;
  Eigen::VectorXd phi;
  SgnhtState sgnht;
  AdamState adam;
  double best_val_ll = -std::numeric_limits<double>::infinity();
  std::int32_t epochs_since_improve = 0;
  bool collecting = false;
  bool collection_forced = false;
  std::vector<Eigen::VectorXd> collected;
};

namespace detail {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw CorruptionError("state file truncated");
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  write_bytes(out, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  read_bytes(in, &v, sizeof(T));
  return v;
}

inline void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  if (v.size() > 0) {
    write_bytes(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
}

inline Eigen::VectorXd read_vec(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > (1ULL << 32)) {
    throw CorruptionError("state file declares an implausible vector length");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  if (n > 0) {
    read_bytes(in, v.data(), sizeof(double) * n);
  }
  return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'D', 'G', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr char kParamsMagic[8] = {'D', 'G', 'P', 'A', 'R', 'M', '0', '1'};

/// Serializes a checkpoint. The layout is fixed and fully determined by the
/// checkpoint contents, so saving a loaded checkpoint reproduces the file.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  detail::write_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(out, cp.digest);
  detail::write_pod(out, cp.seed);
  detail::write_pod(out, cp.epoch);
  detail::write_pod(out, cp.best_val_ll);
  detail::write_pod(out, cp.epochs_since_improve);
  detail::write_pod<std::uint8_t>(out, cp.collecting ? 1 : 0);
  detail::write_pod<std::uint8_t>(out, cp.collection_forced ? 1 : 0);
  detail::write_vec(out, cp.theta);
  detail::write_vec(out, cp.phi);
  detail::write_vec(out, cp.sgnht.u);
  detail::write_vec(out, cp.sgnht.alpha);
  detail::write_pod(out, cp.sgnht.eta);
  detail::write_pod(out, cp.sgnht.a);
  detail::write_vec(out, cp.adam.m);
  detail::write_vec(out, cp.adam.v);
  detail::write_pod(out, cp.adam.t);
  detail::write_pod(out, cp.adam.eta_prime);
  detail::write_pod(out, cp.adam.beta1);
  detail::write_pod(out, cp.adam.beta2);
  detail::write_pod(out, cp.adam.epsilon);
  detail::write_pod<std::uint64_t>(out, cp.collected.size());
  for (const auto& s : cp.collected) {
    detail::write_vec(out, s);
  }
  if (!out) {
    throw FormatError("failed writing " + path.string());
  }
}

/// Loads a checkpoint. Bad magic is a format error, truncation a corruption
/// error. Digest agreement is checked by the caller, which knows the
/// expected configuration.
inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open checkpoint file " + path.string());
  }
  char magic[8];
  detail::read_bytes(in, magic, sizeof(magic));
  if (std::string_view(magic, 8) != std::string_view(kCheckpointMagic, 8)) {
    throw FormatError("not a checkpoint file: " + path.string());
  }
  Checkpoint cp;
  cp.digest = detail::read_pod<std::uint64_t>(in);
  cp.seed = detail::read_pod<std::uint64_t>(in);
  cp.epoch = detail::read_pod<std::int64_t>(in);
  cp.best_val_ll = detail::read_pod<double>(in);
  cp.epochs_since_improve = detail::read_pod<std::int32_t>(in);
  cp.collecting = detail::read_pod<std::uint8_t>(in) != 0;
  cp.collection_forced = detail::read_pod<std::uint8_t>(in) != 0;
  cp.theta = detail::read_vec(in);
  cp.phi = detail::read_vec(in);
  cp.sgnht.u = detail::read_vec(in);
  cp.sgnht.alpha = detail::read_vec(in);
  cp.sgnht.eta = detail::read_pod<double>(in);
  cp.sgnht.a = detail::read_pod<double>(in);
  cp.adam.m = detail::read_vec(in);
  cp.adam.v = detail::read_vec(in);
  cp.adam.t = detail::read_pod<std::int64_t>(in);
  cp.adam.eta_prime = detail::read_pod<double>(in);
  cp.adam.beta1 = detail::read_pod<double>(in);
  cp.adam.beta2 = detail::read_pod<double>(in);
  cp.adam.epsilon = detail::read_pod<double>(in);
  const auto n = detail::read_pod<std::uint64_t>(in);
  if (n > (1ULL << 24)) {
    throw CorruptionError("checkpoint declares an implausible sample count");
  }
  cp.collected.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    cp.collected.push_back(detail::read_vec(in));
  }
  return cp;
}

/// Writes parameter vectors (posterior mean, sample archives, phi) as a
/// small binary container: magic, count, dim, then raw doubles.
inline void save_param_vectors(const std::filesystem::path& path,
                               const std::vector<Eigen::VectorXd>& vecs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  detail::write_bytes(out, kParamsMagic, sizeof(kParamsMagic));
  detail::write_pod<std::uint64_t>(out, vecs.size());
  const std::uint64_t dim = vecs.empty() ? 0 : static_cast<std::uint64_t>(vecs.front().size());
  detail::write_pod(out, dim);
  for (const auto& v : vecs) {
    if (static_cast<std::uint64_t>(v.size()) != dim) {
      throw ShapeError("parameter vectors in one archive must share a width");
    }
    if (dim > 0) {
      detail::write_bytes(out, v.data(), sizeof(double) * dim);
    }
  }
}

/// Reads a parameter-vector archive written by save_param_vectors.
inline std::vector<Eigen::VectorXd> load_param_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open parameter file " + path.string());
  }
  char magic[8];
  detail::read_bytes(in, magic, sizeof(magic));
  if (std::string_view(magic, 8) != std::string_view(kParamsMagic, 8)) {
    throw FormatError("not a parameter archive: " + path.string());
  }
  const auto count = detail::read_pod<std::uint64_t>(in);
  const auto dim = detail::read_pod<std::uint64_t>(in);
  if (count > (1ULL << 24) || dim > (1ULL << 32)) {
    throw CorruptionError("parameter archive declares implausible sizes");
  }
  std::vector<Eigen::VectorXd> vecs;
  vecs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    if (dim > 0) {
      detail::read_bytes(in, v.data(), sizeof(double) * dim);
    }
    vecs.push_back(std::move(v));
  }
  return vecs;
}

/// Optional training plumbing: on-disk checkpoints and resumption.
struct TrainOptions {
  std::filesystem::path checkpoint_path;  ///< Empty disables checkpointing.
  const Checkpoint* resume = nullptr;
  std::uint64_t digest = 0;  ///< Config+manifest fingerprint for checkpoints.
};

struct TrainResult {
  Eigen::VectorXd theta_mean;
  std::vector<Eigen::VectorXd> theta_samples;
  Eigen::VectorXd phi;
  std::int64_t epochs_run = 0;
  bool collection_forced = false;
  double best_val_ll = -std::numeric_limits<double>::infinity();
};

/// Trains the pair (g, r) on train_data, using val_data for the stopping
/// and collection schedule. The models must arrive initialized (or a resume
/// checkpoint supplied); their parameters are overwritten in place as
/// training progresses. Returns the posterior mean over collected samples.
///
/// A divergence error from any update aborts training immediately; the
/// checkpoint written at the previous epoch boundary is left on disk.
inline TrainResult train(GenerativeModel& g, RecognitionModel& r, const Dataset& train_data,
                         const Dataset& val_data, const TrainConfig& cfg, MetricsSink& sink,
                         const TrainOptions& opts = {}) {
  cfg.validate();
  check_compatible(g, r);
  if (train_data.dim() != g.data_dim() || val_data.dim() != g.data_dim()) {
    throw ShapeError("dataset width does not match the model");
  }
  if (train_data.size() < 1) {
    throw DomainError("training data must be non-empty");
  }
  const Eigen::Index N = train_data.size();
  const RandomStream root(cfg.seed);

  Eigen::VectorXd theta = g.get_params();
  Eigen::VectorXd phi = r.get_params();
  RandomStream sgnht_seed = root.child(stream_tag::kSgnhtInit);
  SgnhtState sgnht =
      sgnht_init(theta.size(), cfg.gamma / static_cast<double>(N), cfg.a, sgnht_seed);
  AdamState adam = adam_init(phi.size(), cfg.eta_prime, cfg.beta1, cfg.beta2, cfg.epsilon);

  double best_val_ll = -std::numeric_limits<double>::infinity();
  std::int32_t since_improve = 0;
  bool collecting = false;
  bool forced = false;
  std::vector<Eigen::VectorXd> collected;
  std::int64_t start_epoch = 1;

  if (opts.resume != nullptr) {
    const Checkpoint& cp = *opts.resume;
    if (opts.digest != 0 && cp.digest != 0 && cp.digest != opts.digest) {
      throw IncompatibilityError("checkpoint was produced under a different configuration");
    }
    if (cp.theta.size() != theta.size() || cp.phi.size() != phi.size()) {
      throw IncompatibilityError("checkpoint parameter widths do not match the model");
    }
    theta = cp.theta;
    phi = cp.phi;
    g.set_params(theta);
    r.set_params(phi);
    sgnht = cp.sgnht;
    adam = cp.adam;
    best_val_ll = cp.best_val_ll;
    since_improve = cp.epochs_since_improve;
    collecting = cp.collecting;
    forced = cp.collection_forced;
    collected = cp.collected;
    start_epoch = cp.epoch + 1;
  }

  // When the epoch budget cannot fit patience plus M collection epochs,
  // collection must start immediately to return any posterior sample at all.
  if (!collecting && cfg.max_epochs > 0 && cfg.max_epochs <= cfg.m && opts.resume == nullptr) {
    collecting = true;
    forced = true;
    sink.record({0, -1, -1, "warn", "forced_collection", 1.0});
  }

  const bool nais_theta = cfg.estimator == EstimatorKind::kNais;
  std::int64_t epochs_run = opts.resume != nullptr ? opts.resume->epoch : 0;

  auto save = [&](std::int64_t epoch) {
    if (opts.checkpoint_path.empty()) {
      return;
    }
    Checkpoint cp;
    cp.digest = opts.digest;
    cp.seed = cfg.seed;
    cp.epoch = epoch;
    cp.theta = theta;
    cp.phi = phi;
    cp.sgnht = sgnht;
    cp.adam = adam;
    cp.best_val_ll = best_val_ll;
    cp.epochs_since_improve = since_improve;
    cp.collecting = collecting;
    cp.collection_forced = forced;
    cp.collected = collected;
    save_checkpoint(opts.checkpoint_path, cp);
  };

  for (std::int64_t epoch = start_epoch; epoch <= cfg.max_epochs; ++epoch) {
    sgnht.eta = cfg.gamma / static_cast<double>(N) *
                std::pow(cfg.eta_decay, static_cast<double>(epoch - 1));
    const auto batches =
        minibatches(N, cfg.batch_size, static_cast<std::uint64_t>(epoch), cfg.seed);
    const RandomStream theta_epoch = root.child(stream_tag::kTheta).child(epoch);
    const RandomStream noise_epoch = root.child(stream_tag::kNoise).child(epoch);
    const RandomStream phi_epoch = root.child(stream_tag::kPhi).child(epoch);

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const std::vector<Eigen::Index>& batch = batches[b];
      const RandomStream theta_batch = theta_epoch.child(b);
      const RandomStream noise_batch = noise_epoch.child(b);
      const RandomStream phi_batch = phi_epoch.child(b);

      for (int t = 0; t < cfg.n_theta; ++t) {
        const RandomStream theta_step = theta_batch.child(static_cast<std::uint64_t>(t));
        std::vector<GradEstimate> per_x(batch.size());
        std::vector<WeightedSampleSet> kept_sets;
        const bool keep_sets = nais_theta && !cfg.resample_before_phi &&
                               cfg.phi_objective == PhiObjective::kInclusiveKl;
        if (keep_sets) {
          kept_sets.resize(batch.size());
        }
        parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
          const Eigen::Index n = batch[i];
          const Eigen::VectorXd x = train_data.row(n);
          RandomStream sx = theta_step.child(static_cast<std::uint64_t>(n));
          if (nais_theta) {
            WeightedSampleSet set = draw_weighted_samples(g, r, x, cfg.s, sx);
            per_x[i] = grad_theta_nais(g, x, set);
            if (keep_sets) {
              kept_sets[i] = std::move(set);
            }
          } else {
            HiddenState init = r.sample(x, sx);
            per_x[i] = grad_theta_gibbs(g, x, cfg.s, cfg.gibbs_sweeps, std::move(init), sx);
          }
        });
        const Eigen::VectorXd grad_u =
            potential_grad(theta, cfg.prior, static_cast<std::size_t>(N), per_x);
        double ess_sum = 0.0;
        double maxw_sum = 0.0;
        for (const auto& e : per_x) {
          ess_sum += e.ess;
          maxw_sum += e.max_weight;
        }
        const auto bi = static_cast<std::int64_t>(b);
        sink.record({epoch, bi, t, "theta", "grad_norm", grad_u.norm()});
        sink.record({epoch, bi, t, "theta", "ess_mean", ess_sum / per_x.size()});
        sink.record({epoch, bi, t, "theta", "max_weight_mean", maxw_sum / per_x.size()});
        RandomStream noise_step = noise_batch.child(static_cast<std::uint64_t>(t));
        sgnht_step(sgnht, theta, grad_u, noise_step);
        g.set_params(theta);

        const RandomStream phi_step = phi_batch.child(static_cast<std::uint64_t>(t));
        for (int j = 0; j < cfg.n_phi; ++j) {
          const RandomStream phi_sub = phi_step.child(static_cast<std::uint64_t>(j));
          std::vector<GradEstimate> phi_per_x(batch.size());
          parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
            const Eigen::Index n = batch[i];
            const Eigen::VectorXd x = train_data.row(n);
            const RandomStream sx = phi_sub.child(static_cast<std::uint64_t>(n));
            if (cfg.phi_objective == PhiObjective::kIwae) {
              phi_per_x[i] = grad_phi_iwae(g, r, x, cfg.s, sx);
            } else if (keep_sets) {
              phi_per_x[i] = grad_phi_inclusive(r, x, kept_sets[i]);
            } else {
              phi_per_x[i] = grad_phi_inclusive(g, r, x, cfg.s, sx);
            }
          });
          Eigen::VectorXd phi_grad = Eigen::VectorXd::Zero(phi.size());
          double phi_ess = 0.0;
          for (const auto& e : phi_per_x) {
            phi_grad += e.grad;
            phi_ess += e.ess;
          }
          phi_grad *= static_cast<double>(N) / static_cast<double>(batch.size());
          const std::int64_t step = static_cast<std::int64_t>(t) * cfg.n_phi + j;
          sink.record({epoch, bi, step, "phi", "grad_norm", phi_grad.norm()});
          sink.record({epoch, bi, step, "phi", "ess_mean", phi_ess / phi_per_x.size()});
          adam_step(adam, phi, phi_grad);
          r.set_params(phi);
        }
      }
    }

    // Epoch boundary: validation estimate, then the collection schedule.
    const RandomStream val_epoch = root.child(stream_tag::kVal).child(epoch);
    Eigen::Index val_count = val_data.size();
    if (cfg.val_max_samples > 0) {
      val_count = std::min<Eigen::Index>(val_count, cfg.val_max_samples);
    }
    double val_ll = 0.0;
    if (val_count > 0) {
      std::vector<double> slots(static_cast<std::size_t>(val_count));
      parallel_for(static_cast<std::size_t>(val_count), cfg.threads, [&](std::size_t i) {
        const RandomStream sx = val_epoch.child(static_cast<std::uint64_t>(i));
        slots[i] = estimate_loglik(g, r, val_data.row(static_cast<Eigen::Index>(i)), cfg.k_val,
                                   sx);
      });
      for (double v : slots) {
        val_ll += v;
      }
      val_ll /= static_cast<double>(val_count);
    }
    sink.record({epoch, -1, -1, "val", "est_ll", val_ll});
    epochs_run = epoch;

    if (collecting) {
      collected.push_back(theta);
      sink.record({epoch, -1, -1, "collect", "n_collected", static_cast<double>(collected.size())});
      if (static_cast<int>(collected.size()) >= cfg.m) {
        save(epoch);
        break;
      }
    } else {
      if (val_ll > best_val_ll) {
        best_val_ll = val_ll;
        since_improve = 0;
      } else {
        ++since_improve;
      }
      if (since_improve >= cfg.patience) {
        collecting = true;
      } else if (epoch >= cfg.max_epochs - cfg.m) {
        collecting = true;
        forced = true;
        sink.record({epoch, -1, -1, "warn", "forced_collection", 1.0});
      }
    }
    save(epoch);
  }

  TrainResult result;
  result.phi = phi;
  result.epochs_run = epochs_run;
  result.collection_forced = forced;
  result.best_val_ll = best_val_ll;
  result.theta_samples = collected.empty() ? std::vector<Eigen::VectorXd>{theta} : collected;
  result.theta_mean = posterior_mean(result.theta_samples);
  g.set_params(result.theta_mean);
  return result;
}

}  // namespace deepgen

#endif  // DEEPGEN_TRAIN_HPP
