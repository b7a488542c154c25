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

#ifndef DEEPGEN_DATA_HPP
#define DEEPGEN_DATA_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "deepgen/errors.hpp"
#include "deepgen/random.hpp"

/// \file
/// \brief Dataset container, file loaders, batching and masking.
///
/// Two on-disk layouts are supported. The idx layout is the big-endian
/// byte-tensor format used by the classic digit corpora: a 4-byte magic,
/// big-endian 32-bit dimensions, then raw bytes scaled here to [0, 1].
/// The bitmatrix layout is plain text, one row of '0'/'1' characters per
/// data point, convenient for small fixtures and for emitting binary
/// samples. Minibatch index sets are a pure function of (seed, epoch) so
/// any run can reproduce any other run's batch order.

namespace deepgen {

/// Role a dataset plays in an experiment.
enum class Split { kTrain, kValidation, kTest };

/// In-memory dataset, one row per data point.
struct Dataset {
  Eigen::MatrixXd samples;  ///< n x d, values in [0, 1].
  bool binary = false;      ///< True when every entry is exactly 0 or 1.
  Split split = Split::kTrain;
  Eigen::Index image_rows = 0;  ///< 0 when no image shape is known.
  Eigen::Index image_cols = 0;

  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
  Eigen::VectorXd row(Eigen::Index i) const { return samples.row(i).transpose(); }
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw CorruptionError("idx file truncated in header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

inline void write_u32_be(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Loads an idx byte tensor. Image files (magic 0x00000803) become one row
/// per image with entries scaled by 1/255 and the image shape recorded.
/// Label files (magic 0x00000801) are validated and skipped, yielding an
/// empty dataset, since labels play no role in unsupervised training.
inline Dataset load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open idx file " + path.string());
  }
  const std::uint32_t magic = detail::read_u32_be(in);
  if (magic == 0x00000801u) {
    const std::uint32_t n = detail::read_u32_be(in);
    std::vector<char> buf(n);
    in.read(buf.data(), static_cast<std::streamsize>(n));
    if (!in && n > 0) {
      throw CorruptionError("idx label file truncated");
    }
    return Dataset{};
  }
  if (magic != 0x00000803u) {
    throw FormatError("unrecognized idx magic in " + path.string());
  }
  const std::uint32_t n = detail::read_u32_be(in);
  const std::uint32_t rows = detail::read_u32_be(in);
  const std::uint32_t cols = detail::read_u32_be(in);
  const std::size_t count = std::size_t{n} * rows * cols;
  std::vector<unsigned char> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw CorruptionError("idx image file truncated");
  }
  Dataset ds;
  ds.samples.resize(n, static_cast<Eigen::Index>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < rows * cols; ++j) {
      ds.samples(i, j) = static_cast<double>(buf[std::size_t{i} * rows * cols + j]) / 255.0;
    }
  }
  ds.image_rows = rows;
  ds.image_cols = cols;
  ds.binary = false;
  return ds;
}

/// Writes a dataset as an idx image tensor, quantizing entries to bytes.
/// Datasets without an image shape are written as 1 x d images.
inline void write_idx(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  const Eigen::Index rows = ds.image_rows > 0 ? ds.image_rows : 1;
  const Eigen::Index cols = ds.image_rows > 0 ? ds.image_cols : ds.dim();
  if (rows * cols != ds.dim()) {
    throw ShapeError("image shape does not match the data width");
  }
  detail::write_u32_be(out, 0x00000803u);
  detail::write_u32_be(out, static_cast<std::uint32_t>(ds.size()));
  detail::write_u32_be(out, static_cast<std::uint32_t>(rows));
  detail::write_u32_be(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      const double v = std::min(1.0, std::max(0.0, ds.samples(i, j)));
      const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
}

enum class BinarizeMode {
  kThresholdHalf,  ///< Entry becomes 1 when >= 0.5.
  kStochastic,     ///< Entry becomes 1 with probability equal to its value.
};

/// Maps grayscale values to bits. Stochastic mode needs a stream; entry
/// (i, j) draws from stream.child(i).child(j) so the result does not depend
/// on traversal order.
inline Dataset binarize(const Dataset& ds, BinarizeMode mode, const RandomStream* stream = nullptr) {
  if (mode == BinarizeMode::kStochastic && stream == nullptr) {
    throw DomainError("stochastic binarization needs a random stream");
  }
  Dataset out = ds;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    RandomStream row_stream = stream != nullptr
                                  ? stream->child(static_cast<std::uint64_t>(i))
                                  : RandomStream(0);
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      const double v = ds.samples(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DomainError("grayscale entries must lie in [0, 1]");
      }
      if (mode == BinarizeMode::kThresholdHalf) {
        out.samples(i, j) = v >= 0.5 ? 1.0 : 0.0;
      } else {
        RandomStream cell = row_stream.child(static_cast<std::uint64_t>(j));
        out.samples(i, j) = cell.bernoulli(v) ? 1.0 : 0.0;
      }
    }
  }
  out.binary = true;
  return out;
}

/// Loads a text bitmatrix: one data point per line as space-separated 0/1
/// tokens. Blank lines are skipped. Any other token, or ragged line
/// lengths, is a format error.
inline Dataset load_bitmatrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open bitmatrix file " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream tokens(line);
    std::vector<double> row;
    std::string tok;
    while (tokens >> tok) {
      if (tok == "0") {
        row.push_back(0.0);
      } else if (tok == "1") {
        row.push_back(1.0);
      } else {
        throw FormatError("bitmatrix token '" + tok + "' is not 0 or 1");
      }
    }
    if (row.empty()) {
      continue;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("bitmatrix rows have mismatched lengths");
    }
    rows.push_back(std::move(row));
  }
  Dataset ds;
  ds.binary = true;
  if (rows.empty()) {
    return ds;
  }
  ds.samples.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      ds.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return ds;
}

/// Writes a binary dataset as a text bitmatrix.
inline void save_bitmatrix(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      const double v = ds.samples(i, j);
      if (v != 0.0 && v != 1.0) {
        throw DomainError("bitmatrix entries must be exactly 0 or 1");
      }
      if (j > 0) {
        out.put(' ');
      }
      out.put(v == 1.0 ? '1' : '0');
    }
    out.put('\n');
  }
}

/// Minibatch index sets for one epoch: a seeded permutation of [0, n) cut
/// into ceil(n / batch_size) consecutive chunks. The final short chunk is
/// kept. The permutation depends only on (seed, epoch).
inline std::vector<std::vector<Eigen::Index>> minibatches(Eigen::Index n, Eigen::Index batch_size,
                                                          std::uint64_t epoch,
                                                          std::uint64_t seed) {
  if (batch_size < 1) {
    throw DomainError("batch size must be at least 1");
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    perm[static_cast<std::size_t>(i)] = i;
  }
  RandomStream stream = RandomStream(seed).child(0x5u).child(epoch);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(stream.next_u64() %
                                             static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<std::vector<Eigen::Index>> batches;
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index stop = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + stop);
  }
  return batches;
}

/// Zeroes the lower half of an image: rows at or below rows/2 (integer
/// division) become unobserved. Returns the observation mask (1 at observed
/// pixels) and the hollowed vector.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> hollow_lower_half(const Eigen::VectorXd& x,
                                                                     Eigen::Index rows,
                                                                     Eigen::Index cols) {
  if (rows < 1 || cols < 1 || rows * cols != x.size()) {
    throw ShapeError("image shape does not match the data width");
  }
  Eigen::VectorXd mask(x.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double observed = r < rows / 2 ? 1.0 : 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask[r * cols + c] = observed;
    }
  }
  return {mask, x.cwiseProduct(mask)};
}

}  // namespace deepgen

#endif  // DEEPGEN_DATA_HPP
