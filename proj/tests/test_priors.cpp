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
#include <limits>

#include "deepgen/priors.hpp"
#include "support/oracles.hpp"

using Catch::Approx;
using namespace deepgen;

namespace {

PriorSpec student_t() {
  PriorSpec p;
  p.kind = PriorKind::kStudentT;
  p.mu = 0.0;
  p.sigma = 0.09;
  p.nu = 2.2;
  return p;
}

PriorSpec gaussian(double mu, double sigma) {
  PriorSpec p;
  p.kind = PriorKind::kGaussian;
  p.mu = mu;
  p.sigma = sigma;
  return p;
}

double scalar_grad(const PriorSpec& p, double theta) {
  Eigen::VectorXd v(1);
  v << theta;
  return log_prior_grad(p, v)[0];
}

double scalar_log(const PriorSpec& p, double theta) {
  Eigen::VectorXd v(1);
  v << theta;
  return log_prior(p, v);
}

}  // namespace

TEST_CASE("gradient vanishes at the location parameter") {
  CHECK(scalar_grad(student_t(), 0.0) == 0.0);
  CHECK(scalar_grad(gaussian(1.5, 2.0), 1.5) == 0.0);
}

TEST_CASE("standard gaussian gradient anchor") {
  CHECK(scalar_grad(gaussian(0.0, 1.0), 2.0) == Approx(-2.0).margin(1e-15));
}

TEST_CASE("student-t gradient matches its closed form") {
  const PriorSpec p = student_t();
  for (double theta : {-0.5, -0.09, 0.01, 0.3, 2.0}) {
    const double expected =
        -(p.nu + 1.0) * theta / (p.nu * p.sigma * p.sigma + theta * theta);
    CHECK(scalar_grad(p, theta) == Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("gradients match finite differences of the log density") {
  RandomStream s(1);
  for (const PriorSpec& p : {student_t(), gaussian(0.0, 0.3)}) {
    for (int rep = 0; rep < 100; ++rep) {
      const double theta = 2.0 * (2.0 * s.uniform() - 1.0);
      Eigen::VectorXd at(1);
      at << theta;
      const Eigen::VectorXd fd = oracles::finite_difference(
          [&](const Eigen::VectorXd& v) { return log_prior(p, v); }, at, 1e-6);
      CHECK(scalar_grad(p, theta) == Approx(fd[0]).epsilon(1e-6).margin(1e-8));
    }
  }
}

TEST_CASE("gradient is odd about the location") {
  const PriorSpec t = student_t();
  const PriorSpec g = gaussian(0.7, 0.4);
  for (double d : {0.01, 0.09, 0.5, 3.0}) {
    CHECK(scalar_grad(t, d) == Approx(-scalar_grad(t, -d)).margin(1e-12));
    CHECK(scalar_grad(g, 0.7 + d) == Approx(-scalar_grad(g, 0.7 - d)).margin(1e-12));
  }
}

TEST_CASE("student-t gradient peaks at sigma root nu and decays like a power law") {
  const PriorSpec p = student_t();
  const double peak = p.sigma * std::sqrt(p.nu);
  const double at_peak = std::abs(scalar_grad(p, peak));
  for (double d : {0.25 * peak, 0.8 * peak, 1.3 * peak, 5.0 * peak}) {
    CHECK(std::abs(scalar_grad(p, d)) <= at_peak + 1e-12);
  }
  const double far = 1000.0 * p.sigma;
  CHECK(scalar_grad(p, far) == Approx(-(p.nu + 1.0) / far).epsilon(0.01));
}

TEST_CASE("log densities sum over coordinates") {
  const PriorSpec p = student_t();
  Eigen::VectorXd v(3);
  v << -0.2, 0.05, 1.0;
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    expected += scalar_log(p, v[i]);
  }
  CHECK(log_prior(p, v) == Approx(expected).margin(1e-12));
}

TEST_CASE("gaussian log density is exactly normal") {
  const PriorSpec p = gaussian(0.0, 1.0);
  CHECK(scalar_log(p, 0.0) == Approx(-0.5 * std::log(2.0 * M_PI)).margin(1e-14));
  CHECK(scalar_log(p, 2.0) ==
        Approx(-0.5 * std::log(2.0 * M_PI) - 2.0).margin(1e-13));
}

TEST_CASE("student-t density integrates to one") {
  // Trapezoid quadrature over a wide bracket; the nu=2.2 tails decay fast
  // enough that [-600, 600] sigma captures all but ~1e-4 of the mass.
  const PriorSpec p = student_t();
  const double lo = -600.0 * p.sigma;
  const double hi = 600.0 * p.sigma;
  const int n = 400000;
  const double step = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * step;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    total += w * std::exp(scalar_log(p, x));
  }
  total *= step;
  CHECK(total == Approx(1.0).margin(2e-3));
}

TEST_CASE("invalid prior settings are rejected") {
  PriorSpec bad = student_t();
  bad.sigma = 0.0;
  CHECK_THROWS_AS(check_prior(bad), DomainError);
  bad = student_t();
  bad.nu = -1.0;
  CHECK_THROWS_AS(check_prior(bad), DomainError);
  const PriorSpec p = student_t();
  Eigen::VectorXd v(2);
  v << 0.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(log_prior(p, v), DomainError);
  CHECK_THROWS_AS(log_prior_grad(p, v), DomainError);
}
