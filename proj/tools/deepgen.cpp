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

/// \file
/// \brief Batch command-line surface: train, eval, sample, impute,
/// export-features. Every command is deterministic given its inputs and
/// seed, writes only under its --out directory, and exits 0 on success,
/// 2 on usage or configuration problems, 3 on malformed data files, and
/// 4 on numerical divergence.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepgen/deepgen.hpp"

namespace fs = std::filesystem;

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const deepgen::ConfigError*>(&e) != nullptr) {
    return 2;
  }
  if (dynamic_cast<const deepgen::FormatError*>(&e) != nullptr ||
      dynamic_cast<const deepgen::CorruptionError*>(&e) != nullptr) {
    return 3;
  }
  if (dynamic_cast<const deepgen::DivergenceError*>(&e) != nullptr) {
    return 4;
  }
  return 1;
}

/// Loads either an IDX file or a text bitmatrix, sniffing the IDX magic.
deepgen::Dataset load_any_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw deepgen::FormatError("cannot open data file " + path.string());
  }
  unsigned char m[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(m), 4);
  const bool idx = in.gcount() == 4 && m[0] == 0 && m[1] == 0 && m[2] == 8 &&
                   (m[3] == 1 || m[3] == 3);
  in.close();
  return idx ? deepgen::load_idx(path) : deepgen::load_bitmatrix(path);
}

/// Applies the configured binarization when a binary-output model is fed
/// grayscale data. `slot` separates the train and validation streams.
deepgen::Dataset prepare_for_model(const deepgen::Dataset& ds, bool model_binary,
                                   deepgen::InputBinarize mode, std::uint64_t seed,
                                   std::uint64_t slot) {
  if (!model_binary || ds.binary || mode == deepgen::InputBinarize::kNone) {
    return ds;
  }
  if (mode == deepgen::InputBinarize::kThreshold) {
    return deepgen::binarize(ds, deepgen::BinarizeMode::kThresholdHalf);
  }
  const deepgen::RandomStream stream =
      deepgen::RandomStream(seed).child(deepgen::stream_tag::kBinarize).child(slot);
  return deepgen::binarize(ds, deepgen::BinarizeMode::kStochastic, &stream);
}

/// Loads a parameter archive and reduces it to one vector: the entry
/// itself when there is one, else the average (the posterior mean).
Eigen::VectorXd load_single_params(const fs::path& path) {
  const auto vecs = deepgen::load_param_vectors(path);
  if (vecs.empty()) {
    throw deepgen::CorruptionError("parameter archive " + path.string() + " is empty");
  }
  return vecs.size() == 1 ? vecs.front() : deepgen::posterior_mean(vecs);
}

/// Forwards every record to the CSV sink and echoes validation and
/// collection rows to stderr as progress.
class ProgressSink : public deepgen::MetricsSink {
 public:
  explicit ProgressSink(const fs::path& csv_path) : csv_(csv_path) {}

  void record(const deepgen::MetricsRecord& r) override {
    csv_.record(r);
    if (r.phase == "val" || r.phase == "collect" || r.phase == "warn") {
      std::fprintf(stderr, "epoch %lld %s %s %.6f\n", static_cast<long long>(r.epoch),
                   r.phase.c_str(), r.value_name.c_str(), r.value);
    }
  }

  void flush() { csv_.flush(); }

 private:
  deepgen::CsvMetricsSink csv_;
};

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string data;
  std::string val_data;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool resume = false;
};

int run_train(const TrainArgs& args, std::string& stage) {
  stage = "loading config";
  deepgen::TrainConfig cfg = deepgen::load_config(args.config);
  if (args.seed_set) {
    cfg.seed = args.seed;
  }
  cfg.validate();

  stage = "loading manifest";
  const deepgen::ModelSpec spec = deepgen::load_manifest(args.manifest);
  const std::uint64_t digest =
      deepgen::fnv1a64(deepgen::serialize_config(cfg) + spec.canonical());

  stage = "building model";
  deepgen::GenerativeModel g = spec.build_generative();
  deepgen::RecognitionModel r = spec.build_recognition();
  const bool model_binary = deepgen::is_binary_output(g.layer(0).kind());

  stage = "loading data";
  deepgen::Dataset train_ds = prepare_for_model(load_any_dataset(args.data), model_binary,
                                                cfg.input_binarize, cfg.seed, 0);
  deepgen::Dataset val_ds = prepare_for_model(load_any_dataset(args.val_data), model_binary,
                                              cfg.input_binarize, cfg.seed, 1);
  train_ds.split = deepgen::Split::kTrain;
  val_ds.split = deepgen::Split::kValidation;
  if (train_ds.size() == 0) {
    throw deepgen::CorruptionError("training data file holds no samples");
  }

  stage = "preparing output directory";
  fs::create_directories(args.out);
  const fs::path out(args.out);

  stage = "initializing parameters";
  deepgen::Checkpoint resume_cp;
  deepgen::TrainOptions opts;
  opts.checkpoint_path = out / "checkpoint.bin";
  opts.digest = digest;
  if (args.resume) {
    resume_cp = deepgen::load_checkpoint(opts.checkpoint_path);
    opts.resume = &resume_cp;
  } else {
    deepgen::RandomStream root(cfg.seed);
    deepgen::RandomStream init = root.child(deepgen::stream_tag::kInit);
    deepgen::init_params(g, r, init);
  }

  stage = "training";
  ProgressSink sink(out / "metrics.csv");
  const deepgen::TrainResult result =
      deepgen::train(g, r, train_ds, val_ds, cfg, sink, opts);
  sink.flush();

  stage = "writing artifacts";
  deepgen::save_param_vectors(out / "posterior_mean.params", {result.theta_mean});
  deepgen::save_param_vectors(out / "samples.params", result.theta_samples);
  deepgen::save_param_vectors(out / "recognition.params", {result.phi});
  std::printf("epochs=%lld collected=%zu best_val_est_ll=%.17g forced_collection=%d\n",
              static_cast<long long>(result.epochs_run), result.theta_samples.size(),
              result.best_val_ll, result.collection_forced ? 1 : 0);
  return 0;
}

struct EvalArgs {
  std::string manifest;
  std::string data;
  std::string samples;
  std::string phi;
  std::string out;
  std::vector<int> ks;
  std::vector<int> ms;
  std::uint64_t seed = 0;
  int limit = 0;
  int threads = 1;
};

int run_eval(const EvalArgs& args, std::string& stage) {
  stage = "loading manifest";
  const deepgen::ModelSpec spec = deepgen::load_manifest(args.manifest);

  stage = "building model";
  deepgen::GenerativeModel g = spec.build_generative();
  deepgen::RecognitionModel r = spec.build_recognition();

  stage = "loading parameters";
  const auto theta_samples = deepgen::load_param_vectors(args.samples);
  if (theta_samples.empty()) {
    throw deepgen::CorruptionError("parameter archive " + args.samples + " is empty");
  }
  r.set_params(load_single_params(args.phi));

  stage = "loading data";
  deepgen::Dataset ds =
      prepare_for_model(load_any_dataset(args.data),
                        deepgen::is_binary_output(g.layer(0).kind()),
                        deepgen::InputBinarize::kThreshold, args.seed, 0);
  Eigen::Index n = ds.size();
  if (args.limit > 0) {
    n = std::min<Eigen::Index>(n, args.limit);
  }
  if (n == 0) {
    throw deepgen::CorruptionError("evaluation data file holds no samples");
  }

  std::vector<int> ks = args.ks.empty() ? std::vector<int>{500} : args.ks;
  std::vector<int> ms = args.ms;
  if (ms.empty()) {
    ms.push_back(static_cast<int>(theta_samples.size()));
  }
  for (int m : ms) {
    if (m < 1 || m > static_cast<int>(theta_samples.size())) {
      throw deepgen::ConfigError("--M must lie in [1, " +
                                 std::to_string(theta_samples.size()) + "]");
    }
  }
  for (int k : ks) {
    if (k < 1) {
      throw deepgen::ConfigError("--K must be at least 1");
    }
  }

  stage = "evaluating";
  std::ofstream csv;
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    csv.open(fs::path(args.out) / "eval.csv");
    if (!csv) {
      throw deepgen::FormatError("cannot open eval.csv for writing");
    }
    csv << "K,M,est_ll\n";
  }
  const deepgen::RandomStream root(args.seed);
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    std::vector<Eigen::VectorXd> head(theta_samples.begin(),
                                      theta_samples.begin() + ms[mi]);
    g.set_params(deepgen::posterior_mean(head));
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      // The draw stream ignores M so sweeps over M share random numbers.
      const deepgen::RandomStream kstream =
          root.child(deepgen::stream_tag::kEval).child(ki);
      std::vector<double> slots(static_cast<std::size_t>(n));
      deepgen::parallel_for(static_cast<std::size_t>(n), args.threads, [&](std::size_t i) {
        const deepgen::RandomStream sx = kstream.child(i);
        slots[i] = deepgen::estimate_loglik(g, r, ds.row(static_cast<Eigen::Index>(i)),
                                            ks[ki], sx);
      });
      double mean = 0.0;
      for (double v : slots) {
        mean += v;
      }
      mean /= static_cast<double>(n);
      std::printf("K=%d M=%d est_ll=%.17g\n", ks[ki], ms[mi], mean);
      if (csv.is_open()) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", mean);
        csv << ks[ki] << ',' << ms[mi] << ',' << buf << '\n';
      }
    }
  }
  return 0;
}

struct SampleArgs {
  std::string manifest;
  std::string theta;
  std::string out;
  std::uint64_t seed = 0;
  int count = 16;
};

int run_sample(const SampleArgs& args, std::string& stage) {
  stage = "loading manifest";
  const deepgen::ModelSpec spec = deepgen::load_manifest(args.manifest);

  stage = "building model";
  deepgen::GenerativeModel g = spec.build_generative();

  stage = "loading parameters";
  g.set_params(load_single_params(args.theta));

  stage = "sampling";
  fs::create_directories(args.out);
  const fs::path out(args.out);
  deepgen::Dataset draws;
  draws.binary = true;
  draws.samples.resize(args.count, g.data_dim());
  const deepgen::RandomStream root(args.seed);
  std::vector<Eigen::VectorXd> raw(static_cast<std::size_t>(args.count));
  for (int i = 0; i < args.count; ++i) {
    deepgen::RandomStream s =
        root.child(deepgen::stream_tag::kGenerate).child(static_cast<std::uint64_t>(i));
    raw[static_cast<std::size_t>(i)] = g.ancestral_sample(s).first;
    for (Eigen::Index j = 0; j < g.data_dim(); ++j) {
      draws.samples(i, j) = raw[static_cast<std::size_t>(i)][j] >= 0.5 ? 1.0 : 0.0;
    }
  }
  deepgen::save_bitmatrix(out / "samples.txt", draws);

  stage = "rendering images";
  if (args.count > 0) {
    if (spec.image_rows < 1 || spec.image_cols < 1) {
      throw deepgen::CapabilityError(
          "manifest declares no image shape; samples.txt was still written");
    }
    if (spec.image_rows * spec.image_cols != g.data_dim()) {
      throw deepgen::ShapeError("manifest image shape does not match the data width");
    }
    for (int i = 0; i < args.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%04d.pgm", i);
      deepgen::write_pgm(out / name, spec.image_rows, spec.image_cols,
                         raw[static_cast<std::size_t>(i)]);
    }
  }
  std::printf("samples=%d\n", args.count);
  return 0;
}

struct ImputeArgs {
  std::string manifest;
  std::string theta;
  std::string phi;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  int iterations = 100;
  int count = 0;
};

int run_impute(const ImputeArgs& args, std::string& stage) {
  stage = "loading manifest";
  const deepgen::ModelSpec spec = deepgen::load_manifest(args.manifest);
  if (spec.image_rows < 1 || spec.image_cols < 1) {
    throw deepgen::CapabilityError("imputation needs an image shape in the manifest");
  }

  stage = "building model";
  deepgen::GenerativeModel g = spec.build_generative();
  deepgen::RecognitionModel r = spec.build_recognition();
  if (g.num_hidden_layers() < 1) {
    throw deepgen::CapabilityError("imputation needs at least one hidden layer");
  }

  stage = "loading parameters";
  g.set_params(load_single_params(args.theta));
  r.set_params(load_single_params(args.phi));

  stage = "loading data";
  deepgen::Dataset ds =
      prepare_for_model(load_any_dataset(args.data),
                        deepgen::is_binary_output(g.layer(0).kind()),
                        deepgen::InputBinarize::kThreshold, args.seed, 0);
  if (ds.dim() != g.data_dim()) {
    throw deepgen::ShapeError("data width does not match the model");
  }
  Eigen::Index n = ds.size();
  if (args.count > 0) {
    n = std::min<Eigen::Index>(n, args.count);
  }
  if (n == 0) {
    throw deepgen::CorruptionError("imputation data file holds no samples");
  }

  stage = "imputing";
  fs::create_directories(args.out);
  const fs::path out(args.out);
  const deepgen::RandomStream root(args.seed);
  double error_sum = 0.0;
  Eigen::Index masked_total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = ds.row(i);
    auto [mask, cur] = deepgen::hollow_lower_half(x, spec.image_rows, spec.image_cols);
    const deepgen::RandomStream img =
        root.child(deepgen::stream_tag::kImpute).child(static_cast<std::uint64_t>(i));
    for (int it = 0; it < args.iterations; ++it) {
      deepgen::RandomStream s = img.child(static_cast<std::uint64_t>(it));
      const deepgen::HiddenState h = r.sample(cur, s);
      const Eigen::VectorXd filled = g.layer(0).sample(h.z[0], s);
      for (Eigen::Index p = 0; p < cur.size(); ++p) {
        if (mask[p] == 0.0) {
          cur[p] = filled[p];
        }
      }
    }
    for (Eigen::Index p = 0; p < cur.size(); ++p) {
      if (mask[p] == 0.0) {
        error_sum += std::abs(cur[p] - x[p]);
        ++masked_total;
      }
    }
    char name[48];
    std::snprintf(name, sizeof(name), "impute_%04lld_original.pgm",
                  static_cast<long long>(i));
    deepgen::write_pgm(out / name, spec.image_rows, spec.image_cols, x);
    std::snprintf(name, sizeof(name), "impute_%04lld_hollowed.pgm",
                  static_cast<long long>(i));
    deepgen::write_pgm(out / name, spec.image_rows, spec.image_cols,
                       x.cwiseProduct(mask));
    std::snprintf(name, sizeof(name), "impute_%04lld_reconstructed.pgm",
                  static_cast<long long>(i));
    deepgen::write_pgm(out / name, spec.image_rows, spec.image_cols, cur);
  }
  std::printf("images=%lld masked_error=%.17g\n", static_cast<long long>(n),
              masked_total > 0 ? error_sum / static_cast<double>(masked_total) : 0.0);
  return 0;
}

struct ExportArgs {
  std::string manifest;
  std::string theta;
  std::string out;
  int layer = 0;
};

/// Picks the matrix whose columns map one above-layer unit to this layer's
/// outputs; that column is the unit's feature image.
const Eigen::MatrixXd& feature_matrix(const deepgen::Layer& lay) {
  switch (lay.kind()) {
    case deepgen::LayerKind::kSbn:
    case deepgen::LayerKind::kVaeBinary:
      return lay.params().W;
    case deepgen::LayerKind::kDarn:
      return lay.params().U;
    case deepgen::LayerKind::kNade:
      return lay.params().R;
    case deepgen::LayerKind::kVaeReal:
      return lay.params().w_mu;
    default:
      throw deepgen::CapabilityError("input-free layer kinds have no feature matrix");
  }
}

int run_export(const ExportArgs& args, std::string& stage) {
  stage = "loading manifest";
  const deepgen::ModelSpec spec = deepgen::load_manifest(args.manifest);

  stage = "building model";
  deepgen::GenerativeModel g = spec.build_generative();

  stage = "loading parameters";
  g.set_params(load_single_params(args.theta));

  stage = "exporting features";
  if (args.layer < 0 || args.layer > g.num_hidden_layers()) {
    throw deepgen::ConfigError("--layer must lie in [0, " +
                               std::to_string(g.num_hidden_layers()) + "]");
  }
  const deepgen::Layer& lay = g.layer(args.layer);
  const Eigen::MatrixXd& feat = feature_matrix(lay);
  if (spec.image_rows < 1 || spec.image_cols < 1 ||
      spec.image_rows * spec.image_cols != feat.rows()) {
    throw deepgen::ShapeError(
        "layer output width does not match the manifest image shape");
  }
  fs::create_directories(args.out);
  const fs::path out(args.out);
  std::ofstream csv(out / "feature_l1.csv");
  if (!csv) {
    throw deepgen::FormatError("cannot open feature_l1.csv for writing");
  }
  csv << "unit,l1\n";
  for (Eigen::Index u = 0; u < feat.cols(); ++u) {
    const Eigen::VectorXd col = feat.col(u);
    char name[40];
    std::snprintf(name, sizeof(name), "feature_%04lld.pgm", static_cast<long long>(u));
    deepgen::write_pgm(out / name, spec.image_rows, spec.image_cols,
                       deepgen::minmax_scale(col));
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", col.lpNorm<1>());
    csv << u << ',' << buf << '\n';
  }
  std::printf("units=%lld\n", static_cast<long long>(feat.cols()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep generative model trainer, evaluator and sampler"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model and collect posterior samples");
  train->add_option("--config", ta.config, "Training config file")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--manifest", ta.manifest, "Architecture manifest")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--data", ta.data, "Training data (IDX or bitmatrix)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--val-data", ta.val_data, "Validation data")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", ta.out, "Output directory")->required();
  auto* train_seed = train->add_option("--seed", ta.seed, "Overrides the config seed");
  train->add_flag("--resume", ta.resume, "Continue from <out>/checkpoint.bin");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Estimate held-out log-likelihood");
  eval->add_option("--manifest", ea.manifest, "Architecture manifest")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", ea.data, "Evaluation data")->required()->check(CLI::ExistingFile);
  eval->add_option("--samples", ea.samples, "Collected parameter archive")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--phi", ea.phi, "Recognition parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", ea.out, "Directory for the CSV sweep (optional)");
  eval->add_option("--K", ea.ks, "Importance draws per estimate (repeatable)");
  eval->add_option("--M", ea.ms, "Posterior samples to average (repeatable)");
  eval->add_option("--seed", ea.seed, "Random seed");
  eval->add_option("--limit", ea.limit, "Evaluate only the first N rows")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--threads", ea.threads, "Worker threads")->check(CLI::PositiveNumber);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Draw ancestral samples from a model");
  sample->add_option("--manifest", sa.manifest, "Architecture manifest")
      ->required()
      ->check(CLI::ExistingFile);
  sample->add_option("--theta", sa.theta, "Model parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  sample->add_option("--out", sa.out, "Output directory")->required();
  sample->add_option("--count", sa.count, "Number of samples")->check(CLI::NonNegativeNumber);
  sample->add_option("--seed", sa.seed, "Random seed");

  ImputeArgs ia;
  auto* impute = app.add_subcommand("impute", "Reconstruct hollowed lower image halves");
  impute->add_option("--manifest", ia.manifest, "Architecture manifest")
      ->required()
      ->check(CLI::ExistingFile);
  impute->add_option("--theta", ia.theta, "Model parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  impute->add_option("--phi", ia.phi, "Recognition parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  impute->add_option("--data", ia.data, "Images to impute")->required()->check(CLI::ExistingFile);
  impute->add_option("--out", ia.out, "Output directory")->required();
  impute->add_option("--iterations", ia.iterations, "Refinement iterations")
      ->check(CLI::NonNegativeNumber);
  impute->add_option("--count", ia.count, "Impute only the first N images")
      ->check(CLI::NonNegativeNumber);
  impute->add_option("--seed", ia.seed, "Random seed");

  ExportArgs xa;
  auto* exp = app.add_subcommand("export-features", "Write per-unit weight images");
  exp->add_option("--manifest", xa.manifest, "Architecture manifest")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--theta", xa.theta, "Model parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--out", xa.out, "Output directory")->required();
  exp->add_option("--layer", xa.layer, "Generative layer index; 0 emits the data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  ta.seed_set = train_seed->count() > 0;

  std::string stage = "startup";
  try {
    if (train->parsed()) {
      return run_train(ta, stage);
    }
    if (eval->parsed()) {
      return run_eval(ea, stage);
    }
    if (sample->parsed()) {
      return run_sample(sa, stage);
    }
    if (impute->parsed()) {
      return run_impute(ia, stage);
    }
    if (exp->parsed()) {
      return run_export(xa, stage);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "deepgen: error while %s: %s\n", stage.c_str(), e.what());
    return exit_code_for(e);
  }
  return 2;
}
