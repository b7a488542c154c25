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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "deepgen/data.hpp"

using Catch::Approx;
using namespace deepgen;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("idx image tensors load with scaled pixels and recorded shape") {
  const auto path = temp_file("deepgen_idx_small.idx");
  std::vector<unsigned char> bytes = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
  for (unsigned char k = 0; k < 8; ++k) {
    bytes.push_back(k);
  }
  write_bytes(path, bytes);
  const Dataset ds = load_idx(path);
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.dim() == 4);
  CHECK(ds.image_rows == 2);
  CHECK(ds.image_cols == 2);
  CHECK_FALSE(ds.binary);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(ds.samples(i, j) == static_cast<double>(4 * i + j) / 255.0);
    }
  }
}

TEST_CASE("idx label files yield an empty dataset") {
  const auto path = temp_file("deepgen_idx_labels.idx");
  write_bytes(path, {0, 0, 8, 1, 0, 0, 0, 3, 7, 7, 7});
  const Dataset ds = load_idx(path);
  CHECK(ds.size() == 0);
}

TEST_CASE("idx loading rejects malformed files") {
  const auto bad_magic = temp_file("deepgen_idx_badmagic.idx");
  write_bytes(bad_magic, {0, 0, 9, 9, 0, 0, 0, 1});
  CHECK_THROWS_AS(load_idx(bad_magic), FormatError);

  const auto short_header = temp_file("deepgen_idx_shorthdr.idx");
  write_bytes(short_header, {0, 0, 8, 3, 0, 0});
  CHECK_THROWS_AS(load_idx(short_header), CorruptionError);

  const auto short_body = temp_file("deepgen_idx_shortbody.idx");
  write_bytes(short_body, {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3});
  CHECK_THROWS_AS(load_idx(short_body), CorruptionError);

  const auto short_labels = temp_file("deepgen_idx_shortlabels.idx");
  write_bytes(short_labels, {0, 0, 8, 1, 0, 0, 0, 5, 1});
  CHECK_THROWS_AS(load_idx(short_labels), CorruptionError);

  CHECK_THROWS_AS(load_idx(temp_file("deepgen_idx_missing.idx")), FormatError);
}

TEST_CASE("idx files round-trip byte-quantized data") {
  Dataset ds;
  ds.samples.resize(3, 6);
  RandomStream s(1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) {
      ds.samples(i, j) = static_cast<double>(s.next_u64() % 256) / 255.0;
    }
  }
  ds.image_rows = 2;
  ds.image_cols = 3;
  const auto path = temp_file("deepgen_idx_roundtrip.idx");
  write_idx(path, ds);
  const Dataset back = load_idx(path);
  REQUIRE(back.size() == 3);
  REQUIRE(back.dim() == 6);
  CHECK(back.image_rows == 2);
  CHECK(back.image_cols == 3);
  CHECK((back.samples - ds.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("threshold binarization splits at one half") {
  Dataset ds;
  ds.samples.resize(1, 3);
  ds.samples << 0.2, 0.5, 0.9;
  const Dataset out = binarize(ds, BinarizeMode::kThresholdHalf);
  CHECK(out.samples(0, 0) == 0.0);
  CHECK(out.samples(0, 1) == 1.0);
  CHECK(out.samples(0, 2) == 1.0);
  CHECK(out.binary);
  const Dataset twice = binarize(out, BinarizeMode::kThresholdHalf);
  CHECK((twice.samples - out.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all-zero grayscale stays all-zero under both binarizations") {
  Dataset ds;
  ds.samples = Eigen::MatrixXd::Zero(2, 4);
  const RandomStream s(2);
  CHECK(binarize(ds, BinarizeMode::kThresholdHalf).samples.cwiseAbs().maxCoeff() == 0.0);
  CHECK(binarize(ds, BinarizeMode::kStochastic, &s).samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stochastic binarization matches the pixel intensity in frequency") {
  const Eigen::Index n = 100000;
  Dataset ds;
  ds.samples = Eigen::MatrixXd::Constant(n, 1, 0.3);
  const RandomStream s(3);
  const Dataset out = binarize(ds, BinarizeMode::kStochastic, &s);
  const double mean = out.samples.sum() / static_cast<double>(n);
  const double sigma = std::sqrt(0.3 * 0.7 / static_cast<double>(n));
  CHECK(std::abs(mean - 0.3) < 3.0 * sigma);
  const Dataset again = binarize(ds, BinarizeMode::kStochastic, &s);
  CHECK((again.samples - out.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("binarization validates its inputs") {
  Dataset ds;
  ds.samples.resize(1, 1);
  ds.samples << 1.5;
  CHECK_THROWS_AS(binarize(ds, BinarizeMode::kThresholdHalf), DomainError);
  ds.samples << 0.5;
  CHECK_THROWS_AS(binarize(ds, BinarizeMode::kStochastic), DomainError);
}

TEST_CASE("bitmatrix files load one sample per line") {
  const auto path = temp_file("deepgen_bits_ok.txt");
  write_text(path, "0 1 1 0\n\n1 0 0 1\n");
  const Dataset ds = load_bitmatrix(path);
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.dim() == 4);
  CHECK(ds.binary);
  CHECK(ds.samples(0, 1) == 1.0);
  CHECK(ds.samples(1, 0) == 1.0);
  CHECK(ds.samples(1, 1) == 0.0);
}

TEST_CASE("bitmatrix loading rejects malformed text") {
  const auto ragged = temp_file("deepgen_bits_ragged.txt");
  write_text(ragged, "0 1\n0 1 1\n");
  CHECK_THROWS_AS(load_bitmatrix(ragged), FormatError);

  const auto nonbit = temp_file("deepgen_bits_token.txt");
  write_text(nonbit, "0 2 1\n");
  CHECK_THROWS_AS(load_bitmatrix(nonbit), FormatError);

  CHECK_THROWS_AS(load_bitmatrix(temp_file("deepgen_bits_missing.txt")), FormatError);
}

TEST_CASE("bitmatrix files round-trip") {
  Dataset ds;
  ds.samples.resize(4, 5);
  RandomStream s(4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      ds.samples(i, j) = s.bernoulli(0.5) ? 1.0 : 0.0;
    }
  }
  ds.binary = true;
  const auto path = temp_file("deepgen_bits_roundtrip.txt");
  save_bitmatrix(path, ds);
  const Dataset back = load_bitmatrix(path);
  CHECK((back.samples - ds.samples).cwiseAbs().maxCoeff() == 0.0);

  Dataset gray;
  gray.samples = Eigen::MatrixXd::Constant(1, 1, 0.5);
  CHECK_THROWS_AS(save_bitmatrix(temp_file("deepgen_bits_bad.txt"), gray), DomainError);
}

TEST_CASE("minibatches cut a seeded permutation into consecutive chunks") {
  const auto batches = minibatches(5, 2, 1, 42);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 2);
  CHECK(batches[2].size() == 1);
  std::set<Eigen::Index> seen;
  for (const auto& b : batches) {
    seen.insert(b.begin(), b.end());
  }
  CHECK(seen == std::set<Eigen::Index>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(minibatches(5, 0, 1, 42), DomainError);
}

TEST_CASE("batch plans are a deterministic function of seed and epoch") {
  const auto a = minibatches(1000, 128, 7, 42);
  const auto b = minibatches(1000, 128, 7, 42);
  CHECK(a == b);

  std::set<std::vector<Eigen::Index>> firsts;
  for (std::uint64_t epoch = 0; epoch < 100; ++epoch) {
    firsts.insert(minibatches(1000, 128, epoch, 42).front());
  }
  CHECK(firsts.size() == 100);
}

TEST_CASE("every batch plan partitions the index range") {
  const auto batches = minibatches(1000, 128, 3, 9);
  std::set<Eigen::Index> seen;
  std::size_t total = 0;
  for (const auto& b : batches) {
    total += b.size();
    seen.insert(b.begin(), b.end());
  }
  CHECK(total == 1000);
  CHECK(seen.size() == 1000);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 999);
}

TEST_CASE("hollowing removes the lower image half") {
  Eigen::VectorXd x(4);
  x << 0.1, 0.2, 0.3, 0.4;
  const auto [mask, hollowed] = hollow_lower_half(x, 2, 2);
  CHECK(mask[0] == 1.0);
  CHECK(mask[1] == 1.0);
  CHECK(mask[2] == 0.0);
  CHECK(mask[3] == 0.0);
  CHECK(hollowed[0] == 0.1);
  CHECK(hollowed[1] == 0.2);
  CHECK(hollowed[2] == 0.0);
  CHECK(hollowed[3] == 0.0);
  const auto [mask2, twice] = hollow_lower_half(hollowed, 2, 2);
  CHECK((twice - hollowed).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the observed mask covers exactly the upper rows") {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(6 * 4);
  const auto [mask, hollowed] = hollow_lower_half(x, 6, 4);
  CHECK(mask.sum() == 12.0);

  Eigen::VectorXd odd = Eigen::VectorXd::Ones(3 * 2);
  const auto [omask, oh] = hollow_lower_half(odd, 3, 2);
  CHECK(omask.sum() == 2.0);

  CHECK_THROWS_AS(hollow_lower_half(x, 5, 4), ShapeError);
}
