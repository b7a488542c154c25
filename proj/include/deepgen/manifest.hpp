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

#ifndef DEEPGEN_MANIFEST_HPP
#define DEEPGEN_MANIFEST_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "deepgen/config.hpp"
#include "deepgen/errors.hpp"
#include "deepgen/layers.hpp"
#include "deepgen/model.hpp"

/// \file
/// \brief Plain-text architecture manifests.
///
/// A manifest names every layer of the generative stack top-down and of the
/// recognition stack bottom-up:
///
///     generative
///     layer 2 top_bernoulli 8
///     layer 1 sbn 8
///     layer 0 sbn 16
///     recognition
///     layer 1 sbn 8
///     layer 2 sbn 8
///     image_shape 4 4
///
/// Layer index 0 is the data layer; hidden layers count upward. Optional
/// per-layer attributes: `hidden=<H>` sets the nade code width and
/// `mlp=<w1,w2,...>` the vae feature stages. The recognition section must
/// mirror the generative hidden widths. image_shape is optional and enables
/// image export.

namespace deepgen {

/// One parsed `layer` line.
struct LayerSpecLine {
  int index = 0;
  LayerKind kind = LayerKind::kSbn;
  Eigen::Index width = 0;
  Eigen::Index nade_hidden = 0;          ///< 0 means default (= width).
  std::vector<Eigen::Index> mlp;         ///< Empty means identity features.
};

/// A validated architecture description.
class ModelSpec {
 public:
  std::vector<LayerSpecLine> generative;   ///< Sorted top (index L) down to 0.
  std::vector<LayerSpecLine> recognition;  ///< Sorted 1 up to L.
  Eigen::Index image_rows = 0;
  Eigen::Index image_cols = 0;

  /// Width of z^(l); l = 0 gives the data width.
  Eigen::Index width(int l) const {
    for (const auto& line : generative) {
      if (line.index == l) {
        return line.width;
      }
    }
    throw ConfigError("manifest has no layer with index " + std::to_string(l));
  }

  int num_hidden_layers() const { return static_cast<int>(generative.size()) - 1; }

  /// Structural checks: contiguous indices, a single top kind, mirrored
  /// recognition widths, image shape consistent with the data width.
  void validate() const {
    if (generative.size() < 2) {
      throw ConfigError("manifest needs a top layer and a data layer");
    }
    const int L = num_hidden_layers();
    for (int l = 0; l <= L; ++l) {
      const auto& line = generative[static_cast<std::size_t>(L - l)];
      if (line.index != l) {
        throw ConfigError("generative layer indices must cover 0.." + std::to_string(L) +
                          " exactly once");
      }
      const bool top = l == L;
      if (top != is_top(line.kind)) {
        throw ConfigError(top ? "the deepest generative layer must be a top kind"
                              : "only the deepest generative layer may be a top kind");
      }
    }
    if (static_cast<int>(recognition.size()) != L) {
      throw ConfigError("recognition section must list layers 1.." + std::to_string(L));
    }
    for (int l = 1; l <= L; ++l) {
      const auto& line = recognition[static_cast<std::size_t>(l - 1)];
      if (line.index != l) {
        throw ConfigError("recognition layer indices must cover 1.." + std::to_string(L) +
                          " exactly once");
      }
      if (is_top(line.kind)) {
        throw ConfigError("recognition layers must be conditional kinds");
      }
      if (line.width != width(l)) {
        throw ConfigError("recognition layer " + std::to_string(l) +
                          " width must mirror the generative stack");
      }
    }
    if ((image_rows > 0) != (image_cols > 0)) {
      throw ConfigError("image_shape needs both rows and cols");
    }
    if (image_rows > 0 && image_rows * image_cols != width(0)) {
      throw ConfigError("image_shape does not match the data width");
    }
  }

  GenerativeModel build_generative() const {
    validate();
    const int L = num_hidden_layers();
    std::vector<Layer> layers;
    for (int l = 0; l <= L; ++l) {
      const auto& line = generative[static_cast<std::size_t>(L - l)];
      const Eigen::Index in = l == L ? 0 : width(l + 1);
      layers.emplace_back(line.kind, in, line.width, line.nade_hidden, line.mlp);
    }
    return GenerativeModel(std::move(layers));
  }

  RecognitionModel build_recognition() const {
    validate();
    const int L = num_hidden_layers();
    std::vector<Layer> layers;
    for (int l = 1; l <= L; ++l) {
      const auto& line = recognition[static_cast<std::size_t>(l - 1)];
      layers.emplace_back(line.kind, width(l - 1), line.width, line.nade_hidden, line.mlp);
    }
    return RecognitionModel(std::move(layers));
  }

  /// Fixed-form text equal for equal specs; feeds the checkpoint digest.
  std::string canonical() const {
    std::ostringstream out;
    auto emit = [&out](const LayerSpecLine& line) {
      out << "layer " << line.index << " " << to_string(line.kind) << " " << line.width;
      if (line.nade_hidden > 0) {
        out << " hidden=" << line.nade_hidden;
      }
      if (!line.mlp.empty()) {
        out << " mlp=";
        for (std::size_t i = 0; i < line.mlp.size(); ++i) {
          out << (i > 0 ? "," : "") << line.mlp[i];
        }
      }
      out << "\n";
    };
    out << "generative\n";
    for (const auto& line : generative) {
      emit(line);
    }
    out << "recognition\n";
    for (const auto& line : recognition) {
      emit(line);
    }
    if (image_rows > 0) {
      out << "image_shape " << image_rows << " " << image_cols << "\n";
    }
    return out.str();
  }
};

namespace detail {

inline LayerSpecLine parse_layer_line(std::istringstream& in, int lineno) {
  LayerSpecLine line;
  std::string kind_name;
  long long index = 0;
  long long width = 0;
  if (!(in >> index >> kind_name >> width) || index < 0 || width < 1) {
    throw ConfigError("manifest line " + std::to_string(lineno) +
                      ": expected 'layer <index> <kind> <width>'");
  }
  line.index = static_cast<int>(index);
  line.kind = layer_kind_from_string(kind_name);
  line.width = static_cast<Eigen::Index>(width);
  std::string attr;
  while (in >> attr) {
    const std::size_t eq = attr.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": bad attribute '" + attr +
                        "'");
    }
    const std::string key = attr.substr(0, eq);
    const std::string value = attr.substr(eq + 1);
    if (key == "hidden") {
      line.nade_hidden = static_cast<Eigen::Index>(parse_int("hidden", value));
      if (line.nade_hidden < 1) {
        throw ConfigError("manifest line " + std::to_string(lineno) +
                          ": hidden width must be at least 1");
      }
    } else if (key == "mlp") {
      std::istringstream widths(value);
      std::string tok;
      while (std::getline(widths, tok, ',')) {
        const auto w = static_cast<Eigen::Index>(parse_int("mlp", tok));
        if (w < 1) {
          throw ConfigError("manifest line " + std::to_string(lineno) +
                            ": mlp widths must be at least 1");
        }
        line.mlp.push_back(w);
      }
      if (line.mlp.empty()) {
        throw ConfigError("manifest line " + std::to_string(lineno) + ": empty mlp attribute");
      }
    } else {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": unknown attribute '" +
                        key + "'");
    }
  }
  return line;
}

}  // namespace detail

/// Parses manifest text and validates the result.
inline ModelSpec parse_manifest(const std::string& text) {
  ModelSpec spec;
  enum class Section { kNone, kGenerative, kRecognition };
  Section section = Section::kNone;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) {
      raw = raw.substr(0, hash);
    }
    std::istringstream words(raw);
    std::string head;
    if (!(words >> head)) {
      continue;
    }
    if (head == "generative") {
      section = Section::kGenerative;
    } else if (head == "recognition") {
      section = Section::kRecognition;
    } else if (head == "image_shape") {
      long long r = 0;
      long long c = 0;
      if (!(words >> r >> c) || r < 1 || c < 1) {
        throw ConfigError("manifest line " + std::to_string(lineno) +
                          ": expected 'image_shape <rows> <cols>'");
      }
      spec.image_rows = static_cast<Eigen::Index>(r);
      spec.image_cols = static_cast<Eigen::Index>(c);
    } else if (head == "layer") {
      LayerSpecLine line = detail::parse_layer_line(words, lineno);
      if (section == Section::kGenerative) {
        spec.generative.push_back(line);
      } else if (section == Section::kRecognition) {
        spec.recognition.push_back(line);
      } else {
        throw ConfigError("manifest line " + std::to_string(lineno) +
                          ": layer outside a generative/recognition section");
      }
    } else {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": unknown directive '" +
                        head + "'");
    }
  }
  std::sort(spec.generative.begin(), spec.generative.end(),
            [](const LayerSpecLine& a, const LayerSpecLine& b) { return a.index > b.index; });
  std::sort(spec.recognition.begin(), spec.recognition.end(),
            [](const LayerSpecLine& a, const LayerSpecLine& b) { return a.index < b.index; });
  spec.validate();
  return spec;
}

inline ModelSpec load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open manifest file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

}  // namespace deepgen

#endif  // DEEPGEN_MANIFEST_HPP
