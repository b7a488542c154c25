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

#ifndef DEEPGEN_CONFIG_HPP
#define DEEPGEN_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "deepgen/data.hpp"
#include "deepgen/errors.hpp"
#include "deepgen/priors.hpp"

/// \file
/// \brief Flat key=value training configuration.
///
/// The file format is one `key = value` assignment per line with '#'
/// comments. Unknown keys are rejected rather than ignored so a typo cannot
/// silently fall back to a default. Every key except max_epochs has a
/// default. Environment variables of the form DEEPGEN_<key> override file
/// values, which lets batch scripts vary one knob without editing files.

namespace deepgen {

enum class EstimatorKind { kNais, kGibbs };
enum class PhiObjective { kInclusiveKl, kIwae };
enum class InputBinarize { kNone, kThreshold, kStochastic };

/// All training hyperparameters. Field comments give the config key.
struct TrainConfig {
  int s = 5;                  ///< s: proposal draws per gradient estimate.
  int k_val = 500;            ///< k_val: draws per validation likelihood.
  int k_test = 100000;        ///< k_test: draws per final test likelihood.
  int m = 100;                ///< m: posterior samples to collect.
  int batch_size = 100;       ///< batch_size
  double gamma = 0.001;       ///< gamma: step scale; eta = gamma / n.
  double a = 0.01;            ///< a: thermostat noise and initial friction.
  double eta_prime = 3e-4;    ///< eta_prime: recognition step size.
  double beta1 = 0.9;         ///< beta1
  double beta2 = 0.999;       ///< beta2
  double epsilon = 1e-10;     ///< epsilon
  int n_theta = 10;           ///< n_theta: parameter steps per batch.
  int n_phi = 1;              ///< n_phi: recognition steps per parameter step.
  PriorSpec prior;            ///< prior_kind, prior_mu, prior_sigma, prior_nu
  std::uint64_t seed = 0;     ///< seed
  int patience = 10;          ///< patience: epochs without improvement.
  int max_epochs = -1;        ///< max_epochs: required, no default.
  EstimatorKind estimator = EstimatorKind::kNais;        ///< estimator
  PhiObjective phi_objective = PhiObjective::kInclusiveKl;  ///< phi_objective
  bool resample_before_phi = true;  ///< resample_before_phi: fresh proposal draws per phi step.
  int gibbs_sweeps = 5;       ///< gibbs_sweeps: sweeps between retained states.
  double eta_decay = 1.0;     ///< eta_decay: per-epoch multiplier on eta.
  int val_max_samples = 0;    ///< val_max_samples: 0 means the whole set.
  int threads = 1;            ///< threads
  InputBinarize input_binarize = InputBinarize::kThreshold;  ///< input_binarize

  /// Throws ConfigError when any value is out of range.
  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    if (s < 1) fail("s must be at least 1");
    if (k_val < 1) fail("k_val must be at least 1");
    if (k_test < 1) fail("k_test must be at least 1");
    if (m < 1) fail("m must be at least 1");
    if (batch_size < 1) fail("batch_size must be at least 1");
    if (!(gamma > 0.0)) fail("gamma must be positive");
    if (!(a >= 0.0)) fail("a must be non-negative");
    if (!(eta_prime > 0.0)) fail("eta_prime must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) fail("epsilon must be positive");
    if (n_theta < 1) fail("n_theta must be at least 1");
    if (n_phi < 1) fail("n_phi must be at least 1");
    if (patience < 1) fail("patience must be at least 1");
    if (max_epochs < 0) fail("max_epochs must be non-negative");
    if (gibbs_sweeps < 0) fail("gibbs_sweeps must be non-negative");
    if (!(eta_decay > 0.0 && eta_decay <= 1.0)) fail("eta_decay must lie in (0, 1]");
    if (val_max_samples < 0) fail("val_max_samples must be non-negative");
    if (threads < 1) fail("threads must be at least 1");
    try {
      check_prior(prior);
    } catch (const DomainError& e) {
      fail(e.what());
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return "";
  }
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has a malformed number '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* begin = v.data();
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("config key '" + key + "' has a malformed integer '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' must be true or false");
}

}  // namespace detail

/// The recognized config keys, in canonical serialization order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "s",          "k_val",       "k_test",     "m",             "batch_size",
      "gamma",      "a",           "eta_prime",  "beta1",         "beta2",
      "epsilon",    "n_theta",     "n_phi",      "prior_kind",    "prior_mu",
      "prior_sigma", "prior_nu",   "seed",       "patience",      "max_epochs",
      "estimator",  "phi_objective", "resample_before_phi", "gibbs_sweeps",
      "eta_decay",  "val_max_samples", "threads", "input_binarize"};
  return keys;
}

/// Applies one key=value assignment. Throws ConfigError on unknown keys or
/// malformed values. `saw_sigma` tracks whether the prior scale was given
/// explicitly, which the Gaussian prior requires.
inline void apply_config_entry(TrainConfig& c, const std::string& key, const std::string& value,
                               bool* saw_sigma = nullptr) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  if (key == "s") {
    c.s = static_cast<int>(parse_int(key, value));
  } else if (key == "k_val") {
    c.k_val = static_cast<int>(parse_int(key, value));
  } else if (key == "k_test") {
    c.k_test = static_cast<int>(parse_int(key, value));
  } else if (key == "m") {
    c.m = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    c.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "gamma") {
    c.gamma = parse_double(key, value);
  } else if (key == "a") {
    c.a = parse_double(key, value);
  } else if (key == "eta_prime") {
    c.eta_prime = parse_double(key, value);
  } else if (key == "beta1") {
    c.beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    c.beta2 = parse_double(key, value);
  } else if (key == "epsilon") {
    c.epsilon = parse_double(key, value);
  } else if (key == "n_theta") {
    c.n_theta = static_cast<int>(parse_int(key, value));
  } else if (key == "n_phi") {
    c.n_phi = static_cast<int>(parse_int(key, value));
  } else if (key == "prior_kind") {
    if (value == "student_t") {
      c.prior.kind = PriorKind::kStudentT;
    } else if (value == "gaussian") {
      c.prior.kind = PriorKind::kGaussian;
    } else {
      throw ConfigError("config key 'prior_kind' must be student_t or gaussian");
    }
  } else if (key == "prior_mu") {
    c.prior.mu = parse_double(key, value);
  } else if (key == "prior_sigma") {
    c.prior.sigma = parse_double(key, value);
    if (saw_sigma != nullptr) {
      *saw_sigma = true;
    }
  } else if (key == "prior_nu") {
    c.prior.nu = parse_double(key, value);
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "patience") {
    c.patience = static_cast<int>(parse_int(key, value));
  } else if (key == "max_epochs") {
    c.max_epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "estimator") {
    if (value == "nais") {
      c.estimator = EstimatorKind::kNais;
    } else if (value == "gibbs") {
      c.estimator = EstimatorKind::kGibbs;
    } else {
      throw ConfigError("config key 'estimator' must be nais or gibbs");
    }
  } else if (key == "phi_objective") {
    if (value == "inclusive_kl") {
      c.phi_objective = PhiObjective::kInclusiveKl;
    } else if (value == "iwae") {
      c.phi_objective = PhiObjective::kIwae;
    } else {
      throw ConfigError("config key 'phi_objective' must be inclusive_kl or iwae");
    }
  } else if (key == "resample_before_phi") {
    c.resample_before_phi = parse_bool(key, value);
  } else if (key == "gibbs_sweeps") {
    c.gibbs_sweeps = static_cast<int>(parse_int(key, value));
  } else if (key == "eta_decay") {
    c.eta_decay = parse_double(key, value);
  } else if (key == "val_max_samples") {
    c.val_max_samples = static_cast<int>(parse_int(key, value));
  } else if (key == "threads") {
    c.threads = static_cast<int>(parse_int(key, value));
  } else if (key == "input_binarize") {
    if (value == "none") {
      c.input_binarize = InputBinarize::kNone;
    } else if (value == "threshold") {
      c.input_binarize = InputBinarize::kThreshold;
    } else if (value == "stochastic") {
      c.input_binarize = InputBinarize::kStochastic;
    } else {
      throw ConfigError("config key 'input_binarize' must be none, threshold or stochastic");
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Parses config text. Missing required keys and range violations throw
/// ConfigError naming the key.
inline TrainConfig parse_config(const std::string& text) {
  TrainConfig c;
  bool saw_max_epochs = false;
  bool saw_sigma = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) {
      continue;
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not a key=value pair");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    }
    apply_config_entry(c, key, value, &saw_sigma);
    if (key == "max_epochs") {
      saw_max_epochs = true;
    }
  }
  if (!saw_max_epochs) {
    throw ConfigError("missing required config key 'max_epochs'");
  }
  if (c.prior.kind == PriorKind::kGaussian && !saw_sigma) {
    throw ConfigError("a gaussian prior requires an explicit 'prior_sigma'");
  }
  c.validate();
  return c;
}

/// Applies DEEPGEN_<key> environment overrides in canonical key order.
inline void apply_env_overrides(TrainConfig& c, bool* saw_sigma = nullptr) {
  for (const std::string& key : config_keys()) {
    const std::string env_name = "DEEPGEN_" + key;
    const char* v = std::getenv(env_name.c_str());
    if (v != nullptr) {
      apply_config_entry(c, key, v, saw_sigma);
    }
  }
}

/// Reads and parses a config file, then applies environment overrides.
inline TrainConfig load_config(const std::filesystem::path& path, bool apply_env = true) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  TrainConfig c = parse_config(buf.str());
  if (apply_env) {
    apply_env_overrides(c);
    c.validate();
  }
  return c;
}

/// Canonical text form: every key on its own line in fixed order. Equal
/// configs serialize identically, so this string feeds the checkpoint
/// digest.
inline std::string serialize_config(const TrainConfig& c) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "s = " << c.s << "\n";
  out << "k_val = " << c.k_val << "\n";
  out << "k_test = " << c.k_test << "\n";
  out << "m = " << c.m << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "gamma = " << num(c.gamma) << "\n";
  out << "a = " << num(c.a) << "\n";
  out << "eta_prime = " << num(c.eta_prime) << "\n";
  out << "beta1 = " << num(c.beta1) << "\n";
  out << "beta2 = " << num(c.beta2) << "\n";
  out << "epsilon = " << num(c.epsilon) << "\n";
  out << "n_theta = " << c.n_theta << "\n";
  out << "n_phi = " << c.n_phi << "\n";
  out << "prior_kind = " << (c.prior.kind == PriorKind::kStudentT ? "student_t" : "gaussian")
      << "\n";
  out << "prior_mu = " << num(c.prior.mu) << "\n";
  out << "prior_sigma = " << num(c.prior.sigma) << "\n";
  out << "prior_nu = " << num(c.prior.nu) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "patience = " << c.patience << "\n";
  out << "max_epochs = " << c.max_epochs << "\n";
  out << "estimator = " << (c.estimator == EstimatorKind::kNais ? "nais" : "gibbs") << "\n";
  out << "phi_objective = "
      << (c.phi_objective == PhiObjective::kInclusiveKl ? "inclusive_kl" : "iwae") << "\n";
  out << "resample_before_phi = " << (c.resample_before_phi ? "true" : "false") << "\n";
  out << "gibbs_sweeps = " << c.gibbs_sweeps << "\n";
  out << "eta_decay = " << num(c.eta_decay) << "\n";
  out << "val_max_samples = " << c.val_max_samples << "\n";
  out << "threads = " << c.threads << "\n";
  out << "input_binarize = "
      << (c.input_binarize == InputBinarize::kNone
              ? "none"
              : c.input_binarize == InputBinarize::kThreshold ? "threshold" : "stochastic")
      << "\n";
  return out.str();
}

}  // namespace deepgen

#endif  // DEEPGEN_CONFIG_HPP
