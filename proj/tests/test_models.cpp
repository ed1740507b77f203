// Copyright 2026 The dpsched Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpsched/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

namespace dpsched {
namespace {

Dataset make_dataset(std::initializer_list<std::initializer_list<double>> rows,
                     std::initializer_list<double> labels = {}) {
  Dataset data;
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.begin()->size());
  data.features.resize(n, d);
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (double value : row) data.features(r, c++) = value;
    ++r;
  }
  if (labels.size() != 0) {
    data.labels.resize(static_cast<Eigen::Index>(labels.size()));
    int i = 0;
    for (double y : labels) data.labels[i++] = y;
  }
  return data;
}

Dataset random_dataset(int n, int d, std::mt19937_64& rng,
                       bool with_labels = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.features.resize(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) data.features(r, c) = normal(rng);
  }
  if (with_labels) {
    data.labels.resize(n);
    for (int r = 0; r < n; ++r) data.labels[r] = (rng() % 2) ? 1.0 : -1.0;
  }
  return data;
}

Eigen::VectorXd random_vector(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

// Cyclic Jacobi eigensolver for small symmetric matrices; independent of the
// power iterations used by the library. Returns eigenvalues in descending
// order.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double sign = tau >= 0.0 ? 1.0 : -1.0;
        const double t = sign / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(n, n);
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
      }
    }
  }
  std::vector<double> values(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(values.rbegin(), values.rend());
  return values;
}

TEST_CASE("gradient clipping scales long vectors and is idempotent") {
  Eigen::VectorXd g(2);
  g << 4.8, 6.4;  // norm 8
  const Eigen::VectorXd clipped = clip(g, 4.0);
  CHECK(clipped[0] == doctest::Approx(2.4).epsilon(1e-12));
  CHECK(clipped[1] == doctest::Approx(3.2).epsilon(1e-12));
  CHECK(clipped.norm() <= 4.0);

  Eigen::VectorXd short_g(2);
  short_g << 1.0, 1.0;  // norm below the bound: returned unchanged
  const Eigen::VectorXd same = clip(short_g, 4.0);
  CHECK(same[0] == 1.0);
  CHECK(same[1] == 1.0);

  const Eigen::VectorXd zero = clip(Eigen::VectorXd::Zero(3), 1.0);
  CHECK(zero.norm() == 0.0);

  CHECK_THROWS_AS(clip(g, 0.0), std::domain_error);
  CHECK_THROWS_AS(clip(g, -1.0), std::domain_error);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> bound_dist(0.1, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd v = random_vector(1 + static_cast<int>(rng() % 8),
                                            rng) * 10.0;
    const double bound = bound_dist(rng);
    const Eigen::VectorXd once = clip(v, bound);
    const Eigen::VectorXd twice = clip(once, bound);
    CHECK((once - twice).norm() == 0.0);
    CHECK(once.squaredNorm() <= bound * bound);
  }
}

TEST_CASE("quadratic loss values and optimum match hand computation") {
  const LossModel unit(LossKind::kQuadratic, make_dataset({{1.0}}));
  Eigen::VectorXd theta(1);
  theta << 1.0;
  CHECK(unit.loss(theta) == doctest::Approx(0.0).epsilon(1e-15));
  theta << 0.0;
  CHECK(unit.loss(theta) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(unit.sample_loss(0, theta) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(unit.optimal_loss() == doctest::Approx(0.0).epsilon(1e-12));

  const LossModel pair(LossKind::kQuadratic, make_dataset({{1.0}, {2.0}}));
  theta << 0.6;
  CHECK(pair.loss(theta) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(pair.optimal_loss() == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("logistic loss at the origin is ln 2") {
  const LossModel model(
      LossKind::kLogistic,
      make_dataset({{1.0, 0.0}, {0.0, 1.0}}, {1.0, -1.0}));
  CHECK(model.loss(Eigen::VectorXd::Zero(2)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gradients match hand values and the per-sample mean") {
  const LossModel quad(LossKind::kQuadratic, make_dataset({{1.0}}));
  const Eigen::VectorXd gq = quad.mean_gradient(Eigen::VectorXd::Zero(1));
  CHECK(gq[0] == doctest::Approx(-1.0).epsilon(1e-15));

  const LossModel logi(LossKind::kLogistic, make_dataset({{1.0}}, {1.0}));
  const Eigen::VectorXd gl = logi.mean_gradient(Eigen::VectorXd::Zero(1));
  CHECK(gl[0] == doctest::Approx(-0.5).epsilon(1e-15));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const int d = 1 + static_cast<int>(rng() % 4);
    const LossModel model(
        trial % 2 ? LossKind::kLogistic : LossKind::kQuadratic,
        random_dataset(n, d, rng, /*with_labels=*/true));
    const Eigen::VectorXd theta = random_vector(d, rng);
    const Eigen::MatrixXd per_sample = model.per_sample_gradients(theta);
    const Eigen::VectorXd mean =
        per_sample.colwise().mean().transpose();
    CHECK((mean - model.mean_gradient(theta)).norm() <= 1e-14);
  }
}

TEST_CASE("gradients agree with central finite differences") {
  std::mt19937_64 rng(23);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const int d = 1 + static_cast<int>(rng() % 4);
    for (LossKind kind : {LossKind::kQuadratic, LossKind::kLogistic}) {
      const LossModel model(kind, random_dataset(n, d, rng,
                                                 /*with_labels=*/true));
      const Eigen::VectorXd theta = random_vector(d, rng);
      const Eigen::VectorXd grad = model.mean_gradient(theta);
      for (int i = 0; i < d; ++i) {
        Eigen::VectorXd lo = theta;
        Eigen::VectorXd hi = theta;
        lo[i] -= h;
        hi[i] += h;
        const double estimate = (model.loss(hi) - model.loss(lo)) / (2.0 * h);
        CHECK(std::fabs(estimate - grad[i]) <=
              1e-6 * (1.0 + std::fabs(grad[i])));
      }
    }
  }
}

TEST_CASE("removal sensitivity bound for the quadratic loss") {
  const LossModel unit(LossKind::kQuadratic, make_dataset({{1.0}}));
  Eigen::VectorXd theta(1);
  theta << 0.0;
  CHECK(unit.quadratic_sensitivity_bound(theta) ==
        doctest::Approx(1.0).epsilon(1e-15));
  theta << 1.0;
  CHECK(unit.quadratic_sensitivity_bound(theta) ==
        doctest::Approx(0.0).epsilon(1e-15));

  const LossModel half(LossKind::kQuadratic, make_dataset({{0.5}}));
  theta << 0.0;
  CHECK(half.quadratic_sensitivity_bound(theta) ==
        doctest::Approx(0.5).epsilon(1e-15));

  const LossModel logi(LossKind::kLogistic, make_dataset({{1.0}}, {1.0}));
  CHECK_THROWS_AS(logi.quadratic_sensitivity_bound(Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);
}

TEST_CASE("spectrum estimation matches closed forms and a dense oracle") {
  Dataset identity;
  identity.features = Eigen::MatrixXd::Identity(4, 4);
  const Spectrum iso =
      LossModel(LossKind::kQuadratic, identity).estimate_spectrum();
  CHECK(iso.m_max == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(iso.mu_min == doctest::Approx(0.25).epsilon(1e-8));

  const Spectrum one =
      LossModel(LossKind::kQuadratic, make_dataset({{1.0}}))
          .estimate_spectrum();
  CHECK(one.m_max == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(one.mu_min == doctest::Approx(1.0).epsilon(1e-10));

  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset data = random_dataset(5, 3, rng);
    const Eigen::MatrixXd hessian =
        data.features.transpose() * data.features / data.num_samples();
    const std::vector<double> oracle = jacobi_eigenvalues(hessian);
    const Spectrum spectrum =
        LossModel(LossKind::kQuadratic, data).estimate_spectrum();
    CHECK(spectrum.m_max ==
          doctest::Approx(oracle.front()).epsilon(1e-8));
    // Full-rank with probability one, so the smallest eigenvalue clears the
    // rank cutoff.
    CHECK(spectrum.mu_min ==
          doctest::Approx(oracle.back()).epsilon(1e-8));
    CHECK(spectrum.m_max >= spectrum.mu_min);
  }

  Dataset zeros;
  zeros.features = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(
      LossModel(LossKind::kQuadratic, zeros).estimate_spectrum(),
      std::domain_error);
  CHECK_THROWS_AS(
      LossModel(LossKind::kLogistic, make_dataset({{1.0}}, {1.0}))
          .estimate_spectrum(),
      std::invalid_argument);
}

TEST_CASE("per-sample gradient norm bounds") {
  const LossModel wide(LossKind::kLogistic,
                       make_dataset({{10.0}, {1.0}}, {1.0, -1.0}));
  CHECK(wide.lipschitz_bound() == doctest::Approx(10.0).epsilon(1e-15));

  const LossModel clipped(LossKind::kLogistic,
                          make_dataset({{10.0}, {1.0}}, {1.0, -1.0}), 4.0);
  CHECK(clipped.lipschitz_bound() == doctest::Approx(4.0).epsilon(1e-15));

  const LossModel unit(LossKind::kLogistic,
                       make_dataset({{1.0, 0.0}, {0.0, 1.0}}, {1.0, -1.0}));
  CHECK(unit.lipschitz_bound() == doctest::Approx(1.0).epsilon(1e-15));

  const LossModel quad(LossKind::kQuadratic, make_dataset({{1.0}}));
  CHECK_THROWS_AS(quad.lipschitz_bound(), std::invalid_argument);
  const LossModel quad_clipped(LossKind::kQuadratic, make_dataset({{1.0}}),
                               4.0);
  CHECK(quad_clipped.lipschitz_bound() == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("quadratic loss satisfies the gradient-dominance inequality") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(rng() % 3);
    const int n = d + 2 + static_cast<int>(rng() % 4);
    const LossModel model(LossKind::kQuadratic, random_dataset(n, d, rng));
    const Spectrum spectrum = model.estimate_spectrum();
    const double f_star = model.optimal_loss();
    for (int probe = 0; probe < 5; ++probe) {
      const Eigen::VectorXd theta = random_vector(d, rng) * 3.0;
      const double gap = model.loss(theta) - f_star;
      const double grad_sq = model.mean_gradient(theta).squaredNorm();
      CHECK(grad_sq >= 2.0 * spectrum.mu_min * gap * (1.0 - 1e-8) - 1e-12);
    }
  }
}

TEST_CASE("quadratic loss satisfies the smoothness upper bound") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(rng() % 3);
    const int n = d + 1 + static_cast<int>(rng() % 4);
    const LossModel model(LossKind::kQuadratic, random_dataset(n, d, rng));
    const double m_max = model.estimate_spectrum().m_max;
    const Eigen::VectorXd x = random_vector(d, rng);
    const Eigen::VectorXd y = random_vector(d, rng);
    const Eigen::VectorXd step = y - x;
    const double bound = model.loss(x) + model.mean_gradient(x).dot(step) +
                         0.5 * m_max * step.squaredNorm();
    CHECK(model.loss(y) <= bound * (1.0 + 1e-8) + 1e-12);
  }
}

TEST_CASE("clipped gradient statistics respect the clip norm") {
  std::mt19937_64 rng(61);
  const Dataset data = random_dataset(6, 3, rng, /*with_labels=*/true);
  const Eigen::VectorXd theta = random_vector(3, rng) * 2.0;

  const LossModel plain(LossKind::kLogistic, data);
  CHECK((plain.clipped_mean_gradient(theta) - plain.mean_gradient(theta))
            .norm() == 0.0);

  const double clip_norm = 0.2;
  const LossModel clipped(LossKind::kLogistic, data, clip_norm);
  CHECK(clipped.max_clipped_gradient_norm(theta) <=
        clip_norm * (1.0 + 1e-12));
  // Clipping every per-sample gradient by hand reproduces the mean.
  const Eigen::MatrixXd per_sample = plain.per_sample_gradients(theta);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (Eigen::Index r = 0; r < per_sample.rows(); ++r) {
    mean += clip(per_sample.row(r).transpose(), clip_norm);
  }
  mean /= static_cast<double>(per_sample.rows());
  CHECK((mean - clipped.clipped_mean_gradient(theta)).norm() <= 1e-12);
}

TEST_CASE("model construction validates its inputs") {
  CHECK_THROWS_AS(LossModel(LossKind::kQuadratic, Dataset{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LossModel(LossKind::kLogistic, make_dataset({{1.0}})),
                  std::invalid_argument);
  CHECK_THROWS_AS(LossModel(LossKind::kLogistic, make_dataset({{1.0}}, {2.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      LossModel(LossKind::kLogistic, make_dataset({{1.0}, {2.0}}, {1.0})),
      std::invalid_argument);
  CHECK_THROWS_AS(LossModel(LossKind::kQuadratic, make_dataset({{1.0}}), 0.0),
                  std::domain_error);

  const LossModel model(LossKind::kQuadratic, make_dataset({{1.0, 2.0}}));
  CHECK_THROWS_AS(model.loss(Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.sample_loss(5, Eigen::VectorXd::Zero(2)),
                  std::out_of_range);
  CHECK_THROWS_AS(
      LossModel(LossKind::kLogistic, make_dataset({{1.0}}, {1.0}))
          .optimal_loss(),
      std::invalid_argument);

  Dataset rows = make_dataset({{3.0, 4.0}, {1.0, 0.0}});
  CHECK(rows.max_norm() == doctest::Approx(5.0).epsilon(1e-15));
}

}  // namespace
}  // namespace dpsched
