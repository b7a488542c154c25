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

#ifndef DEEPGEN_PGM_HPP
#define DEEPGEN_PGM_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "deepgen/errors.hpp"

/// \file
/// \brief Binary PGM (P5) image output for samples, imputations and
/// feature visualizations.

namespace deepgen {

/// Writes `values` as an 8-bit grayscale PGM. Values are clamped to [0, 1]
/// and scaled to 0..255; the vector is row-major with `rows * cols`
/// entries.
inline void write_pgm(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols,
                      const Eigen::VectorXd& values) {
  if (rows < 1 || cols < 1) {
    throw ShapeError("image dimensions must be positive");
  }
  if (values.size() != rows * cols) {
    throw ShapeError("pixel count does not match the image dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  char header[64];
  const int len = std::snprintf(header, sizeof(header), "P5\n%lld %lld\n255\n",
                                static_cast<long long>(cols), static_cast<long long>(rows));
  out.write(header, len);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    double v = values(i);
    if (std::isnan(v)) {
      v = 0.0;
    }
    v = std::min(1.0, std::max(0.0, v));
    const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
    out.put(static_cast<char>(byte));
  }
  if (!out) {
    throw FormatError("failed writing " + path.string());
  }
}

/// Rescales a vector to [0, 1] per its own min and max; constant vectors
/// map to all-0.5. Used for feature visualizations.
inline Eigen::VectorXd minmax_scale(const Eigen::VectorXd& v) {
  if (v.size() == 0) {
    return v;
  }
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (!(hi > lo)) {
    return Eigen::VectorXd::Constant(v.size(), 0.5);
  }
  return (v.array() - lo) / (hi - lo);
}

}  // namespace deepgen

#endif  // DEEPGEN_PGM_HPP
