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
#include <vector>

#include "deepgen/model.hpp"
#include "support/oracles.hpp"

using Catch::Approx;
using namespace deepgen;

namespace {

GenerativeModel zero_sbn(Eigen::Index d, Eigen::Index h) {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kSbn, h, d);
  layers.emplace_back(LayerKind::kTopBernoulli, 0, h);
  return GenerativeModel(std::move(layers));
}

RecognitionModel zero_sbn_recog(Eigen::Index d, Eigen::Index h) {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kSbn, d, h);
  return RecognitionModel(std::move(layers));
}

HiddenState single_state(Eigen::VectorXd z) {
  HiddenState s;
  s.z.push_back(std::move(z));
  s.eps.resize(1);
  return s;
}

Eigen::VectorXd bits_from_code(std::uint64_t code, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = (code >> i) & 1ULL ? 1.0 : 0.0;
  }
  return v;
}

}  // namespace

TEST_CASE("zero-parameter stack is uniform over all configurations") {
  GenerativeModel g = zero_sbn(6, 4);
  const double expected = -10.0 * std::log(2.0);
  RandomStream s(1);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd x(6), z(4);
    for (int i = 0; i < 6; ++i) x[i] = s.bernoulli(0.5) ? 1.0 : 0.0;
    for (int i = 0; i < 4; ++i) z[i] = s.bernoulli(0.5) ? 1.0 : 0.0;
    CHECK(g.joint_log_prob(x, single_state(z)) == Approx(expected).margin(1e-12));
  }
}

TEST_CASE("joint probability sums to one over the full configuration space") {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kSbn, 3, 4);
  layers.emplace_back(LayerKind::kTopFvsbn, 0, 3);
  GenerativeModel g(std::move(layers));
  RandomStream s(2);
  g.set_params(oracles::random_params(g.param_count(), s));
  double total = 0.0;
  oracles::enumerate_bits(4, [&](const Eigen::VectorXd& x) {
    oracles::enumerate_bits(3, [&](const Eigen::VectorXd& z) {
      total += std::exp(g.joint_log_prob(x, single_state(z)));
    });
  });
  CHECK(total == Approx(1.0).margin(1e-9));
}

TEST_CASE("appending a zero-parameter layer shifts the joint by its entropy") {
  GenerativeModel two = zero_sbn(6, 4);
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kSbn, 4, 6);
  layers.emplace_back(LayerKind::kSbn, 3, 4);
  layers.emplace_back(LayerKind::kTopBernoulli, 0, 3);
  GenerativeModel three(std::move(layers));
  const Eigen::VectorXd x = bits_from_code(0b100101, 6);
  HiddenState shallow = single_state(bits_from_code(0b1010, 4));
  HiddenState deep = shallow;
  deep.z.push_back(bits_from_code(0b011, 3));
  deep.eps.resize(2);
  CHECK(three.joint_log_prob(x, deep) - two.joint_log_prob(x, shallow) ==
        Approx(-3.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("ancestral sampling from the uniform stack draws fair bits") {
  GenerativeModel g = zero_sbn(5, 3);
  RandomStream s(3);
  const int n = 100000;
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(5);
  for (int i = 0; i < n; ++i) {
    freq += g.ancestral_sample(s).first;
  }
  freq /= n;
  const double band = 3.0 * std::sqrt(0.25 / n);
  for (int i = 0; i < 5; ++i) {
    CHECK(freq[i] == Approx(0.5).margin(band));
  }
}

TEST_CASE("gaussian top code has unit variance") {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kVaeReal, 3, 4);
  layers.emplace_back(LayerKind::kTopGaussian, 0, 3);
  GenerativeModel g(std::move(layers));
  RandomStream s(4);
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = g.ancestral_sample(s).second.z[0];
    sum += z;
    sq += z.cwiseProduct(z);
  }
  for (int i = 0; i < 3; ++i) {
    const double mean = sum[i] / n;
    CHECK(sq[i] / n - mean * mean == Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("sampling replays identically from equal streams") {
  GenerativeModel g = zero_sbn(6, 4);
  RandomStream s(5);
  g.set_params(oracles::random_params(g.param_count(), s));
  RandomStream a(77), b(77);
  for (int i = 0; i < 20; ++i) {
    const auto [xa, za] = g.ancestral_sample(a);
    const auto [xb, zb] = g.ancestral_sample(b);
    CHECK((xa - xb).norm() == 0.0);
    CHECK((za.z[0] - zb.z[0]).norm() == 0.0);
  }
}

TEST_CASE("zero-parameter recognition stack is uniform") {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kSbn, 5, 4);
  layers.emplace_back(LayerKind::kSbn, 4, 3);
  RecognitionModel r(std::move(layers));
  const Eigen::VectorXd x = bits_from_code(0b10110, 5);
  HiddenState state;
  state.z.push_back(bits_from_code(0b1001, 4));
  state.z.push_back(bits_from_code(0b010, 3));
  state.eps.resize(2);
  CHECK(r.log_prob(x, state) == Approx(-7.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("recognition distribution normalizes over hidden configurations") {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kDarn, 4, 3);
  layers.emplace_back(LayerKind::kNade, 3, 2);
  RecognitionModel r(std::move(layers));
  RandomStream s(6);
  r.set_params(oracles::random_params(r.param_count(), s));
  const Eigen::VectorXd x = bits_from_code(0b0110, 4);
  double total = 0.0;
  oracles::enumerate_bits(3, [&](const Eigen::VectorXd& z1) {
    oracles::enumerate_bits(2, [&](const Eigen::VectorXd& z2) {
      HiddenState state;
      state.z = {z1, z2};
      state.eps.resize(2);
      total += std::exp(r.log_prob(x, state));
    });
  });
  CHECK(total == Approx(1.0).margin(1e-9));
}

TEST_CASE("recognition sampling replays identically") {
  RecognitionModel r = zero_sbn_recog(5, 3);
  RandomStream s(7);
  r.set_params(oracles::random_params(r.param_count(), s));
  const Eigen::VectorXd x = bits_from_code(0b10011, 5);
  RandomStream a(9), b(9);
  for (int i = 0; i < 20; ++i) {
    CHECK((r.sample(x, a).z[0] - r.sample(x, b).z[0]).norm() == 0.0);
  }
}

TEST_CASE("recognition records noise only for reparameterized layers") {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kSbn, 5, 3);
  layers.emplace_back(LayerKind::kVaeReal, 3, 2);
  RecognitionModel r(std::move(layers));
  RandomStream s(8);
  r.set_params(oracles::random_params(r.param_count(), s));
  const Eigen::VectorXd x = bits_from_code(0b10011, 5);
  RandomStream draw(10);
  const HiddenState state = r.sample(x, draw);
  CHECK(state.eps[0].size() == 0);
  REQUIRE(state.eps[1].size() == 2);
  const ReparamTape tape = r.layer(2).reparam_sample(state.z[0], state.eps[1]);
  CHECK((tape.output - state.z[1]).norm() == 0.0);
}

TEST_CASE("stack gradients match finite differences across layer boundaries") {
  std::vector<Layer> glayers;
  glayers.emplace_back(LayerKind::kSbn, 2, 3);
  glayers.emplace_back(LayerKind::kDarn, 2, 2);
  glayers.emplace_back(LayerKind::kTopFvsbn, 0, 2);
  GenerativeModel g(std::move(glayers));
  RandomStream s(11);
  const Eigen::VectorXd theta = oracles::random_params(g.param_count(), s);
  g.set_params(theta);
  const Eigen::VectorXd x = bits_from_code(0b101, 3);
  HiddenState state;
  state.z = {bits_from_code(0b10, 2), bits_from_code(0b01, 2)};
  state.eps.resize(2);
  const Eigen::VectorXd analytic = g.joint_grad_params(x, state);
  const Eigen::VectorXd fd = oracles::finite_difference(
      [&](const Eigen::VectorXd& p) {
        GenerativeModel probe = g;
        probe.set_params(p);
        return probe.joint_log_prob(x, state);
      },
      theta);
  CHECK(oracles::max_rel_err(analytic, fd) < 1e-5);

  std::vector<Layer> rlayers;
  rlayers.emplace_back(LayerKind::kSbn, 3, 2);
  rlayers.emplace_back(LayerKind::kNade, 2, 2);
  RecognitionModel r(std::move(rlayers));
  const Eigen::VectorXd phi = oracles::random_params(r.param_count(), s);
  r.set_params(phi);
  const Eigen::VectorXd ra = r.log_prob_grad_params(x, state);
  const Eigen::VectorXd rfd = oracles::finite_difference(
      [&](const Eigen::VectorXd& p) {
        RecognitionModel probe = r;
        probe.set_params(p);
        return probe.log_prob(x, state);
      },
      phi);
  CHECK(oracles::max_rel_err(ra, rfd) < 1e-5);
}

TEST_CASE("a perturbation confined to one layer moves only that term") {
  GenerativeModel g = zero_sbn(4, 3);
  RandomStream s(12);
  g.set_params(oracles::random_params(g.param_count(), s));
  const Eigen::VectorXd x = bits_from_code(0b1010, 4);
  const HiddenState state = single_state(bits_from_code(0b110, 3));
  const double before_joint = g.joint_log_prob(x, state);
  const double before_top = g.layer(1).log_prob(Eigen::VectorXd(0), state.z[0]);
  GenerativeModel perturbed = g;
  perturbed.layer(1).params().b[1] += 0.37;
  const double after_joint = perturbed.joint_log_prob(x, state);
  const double after_top = perturbed.layer(1).log_prob(Eigen::VectorXd(0), state.z[0]);
  CHECK(after_joint - before_joint == Approx(after_top - before_top).margin(1e-12));
}

TEST_CASE("constant likelihood ratio gives exactly uniform weights") {
  // x is independent of z and q equals the generative prior, so every
  // weight is p(x) and normalization is uniform.
  GenerativeModel g = zero_sbn(6, 4);
  RecognitionModel r = zero_sbn_recog(6, 4);
  RandomStream s(13);
  const Eigen::VectorXd x = bits_from_code(0b110100, 6);
  std::vector<HiddenState> samples;
  for (int i = 0; i < 5; ++i) {
    samples.push_back(r.sample(x, s));
  }
  const WeightedSampleSet set = compute_weights(g, r, x, samples);
  for (int i = 0; i < 5; ++i) {
    CHECK(set.normalized[i] == Approx(0.2).margin(1e-14));
    CHECK(set.log_weights[i] == Approx(-6.0 * std::log(2.0)).margin(1e-12));
  }
}

TEST_CASE("single draw normalizes to one") {
  GenerativeModel g = zero_sbn(4, 2);
  RecognitionModel r = zero_sbn_recog(4, 2);
  RandomStream s(14);
  const Eigen::VectorXd x = bits_from_code(0b0101, 4);
  const WeightedSampleSet set = compute_weights(g, r, x, {r.sample(x, s)});
  CHECK(set.normalized.size() == 1);
  CHECK(set.normalized[0] == 1.0);
}

TEST_CASE("mean importance weight estimates the marginal likelihood") {
  GenerativeModel g = zero_sbn(3, 2);
  RecognitionModel r = zero_sbn_recog(3, 2);
  RandomStream s(15);
  g.set_params(oracles::random_params(g.param_count(), s));
  r.set_params(oracles::random_params(r.param_count(), s));
  const Eigen::VectorXd x = bits_from_code(0b011, 3);
  const double exact = oracles::enumerate_posterior(g, x).log_marginal;

  const int S = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < S; ++i) {
    const HiddenState z = r.sample(x, s);
    const double w = std::exp(g.joint_log_prob(x, z) - r.log_prob(x, z));
    sum += w;
    sq += w * w;
  }
  const double mean = sum / S;
  const double sd = std::sqrt((sq / S - mean * mean) / S);
  CHECK(std::abs(mean - std::exp(exact)) < 4.0 * sd);
}

TEST_CASE("incompatible stacks are rejected") {
  GenerativeModel g = zero_sbn(6, 4);
  CHECK_THROWS_AS(check_compatible(g, zero_sbn_recog(6, 3)), IncompatibilityError);
  CHECK_THROWS_AS(check_compatible(g, zero_sbn_recog(5, 4)), IncompatibilityError);
  std::vector<Layer> deep;
  deep.emplace_back(LayerKind::kSbn, 6, 4);
  deep.emplace_back(LayerKind::kSbn, 4, 2);
  CHECK_THROWS_AS(check_compatible(g, RecognitionModel(std::move(deep))),
                  IncompatibilityError);
  CHECK_NOTHROW(check_compatible(g, zero_sbn_recog(6, 4)));
}

TEST_CASE("stack construction validates chaining and top placement") {
  std::vector<Layer> bad_chain;
  bad_chain.emplace_back(LayerKind::kSbn, 3, 6);
  bad_chain.emplace_back(LayerKind::kTopBernoulli, 0, 4);
  CHECK_THROWS_AS(GenerativeModel(std::move(bad_chain)), ShapeError);

  std::vector<Layer> no_top;
  no_top.emplace_back(LayerKind::kSbn, 4, 6);
  no_top.emplace_back(LayerKind::kSbn, 2, 4);
  CHECK_THROWS_AS(GenerativeModel(std::move(no_top)), ShapeError);

  std::vector<Layer> top_in_recog;
  top_in_recog.emplace_back(LayerKind::kTopBernoulli, 0, 4);
  CHECK_THROWS_AS(RecognitionModel(std::move(top_in_recog)), ShapeError);
}

TEST_CASE("a stack of only a top layer works end to end") {
  std::vector<Layer> layers;
  layers.emplace_back(LayerKind::kTopBernoulli, 0, 5);
  GenerativeModel g(std::move(layers));
  CHECK(g.num_hidden_layers() == 0);
  CHECK(g.data_dim() == 5);
  HiddenState empty;
  const Eigen::VectorXd x = bits_from_code(0b10101, 5);
  CHECK(g.joint_log_prob(x, empty) == Approx(-5.0 * std::log(2.0)).margin(1e-12));
  RandomStream s(16);
  CHECK(g.ancestral_sample(s).first.size() == 5);
  CHECK(g.joint_grad_params(x, empty).size() == 5);
}

TEST_CASE("flat parameters round-trip through the stack") {
  GenerativeModel g = zero_sbn(6, 4);
  RandomStream s(17);
  const Eigen::VectorXd theta = oracles::random_params(g.param_count(), s);
  g.set_params(theta);
  CHECK((g.get_params() - theta).norm() == 0.0);
  CHECK_THROWS_AS(g.set_params(Eigen::VectorXd::Zero(g.param_count() + 1)), ShapeError);
}

TEST_CASE("initialization is deterministic in the stream") {
  GenerativeModel a = zero_sbn(6, 4);
  GenerativeModel b = zero_sbn(6, 4);
  RandomStream sa(21), sb(21);
  a.init_glorot(sa);
  b.init_glorot(sb);
  CHECK((a.get_params() - b.get_params()).norm() == 0.0);
  GenerativeModel c = zero_sbn(6, 4);
  RandomStream sc(22);
  c.init_glorot(sc);
  CHECK((a.get_params() - c.get_params()).norm() > 0.0);
}
