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

#include "dpsched/optimizer.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "dpsched/models.hpp"
#include "dpsched/random.hpp"
#include "dpsched/schedules.hpp"

namespace dpsched {
namespace {

Dataset single_unit_sample() {
  Dataset data;
  data.features.resize(1, 1);
  data.features(0, 0) = 1.0;
  return data;
}

Dataset random_quadratic_data(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.features.resize(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) data.features(r, c) = normal(rng);
  }
  return data;
}

NoiseSchedule custom_schedule(std::vector<double> sigmas, double budget_r) {
  NoiseSchedule schedule;
  schedule.sigmas = std::move(sigmas);
  schedule.recipe = ScheduleRecipe::kCustom;
  schedule.budget_r = budget_r;
  return schedule;
}

TEST_CASE("privatized gradient adds scaled noise to the clipped mean") {
  const LossModel model(LossKind::kQuadratic, single_unit_sample(), 1.0);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);

  Eigen::VectorXd unit_noise(1);
  unit_noise << 1.0;
  // Clipped mean gradient is -1, scale G sigma / N = 1, so the sum cancels.
  const Eigen::VectorXd cancelled =
      privatize_gradient(model, theta, 1.0, unit_noise);
  CHECK(cancelled[0] == doctest::Approx(0.0).epsilon(1e-15));

  const Eigen::VectorXd noise_free =
      privatize_gradient(model, theta, 1.0, Eigen::VectorXd::Zero(1));
  CHECK(noise_free[0] == model.clipped_mean_gradient(theta)[0]);

  CHECK_THROWS_AS(privatize_gradient(model, theta, 0.0, unit_noise),
                  std::domain_error);
  CHECK_THROWS_AS(
      privatize_gradient(model, theta, 1.0, Eigen::VectorXd::Zero(2)),
      std::invalid_argument);
  const LossModel unclipped(LossKind::kQuadratic, single_unit_sample());
  CHECK_THROWS_AS(privatize_gradient(unclipped, theta, 1.0, unit_noise),
                  std::invalid_argument);
}

TEST_CASE("privatized gradient noise has the advertised variance") {
  const LossModel model(LossKind::kQuadratic, single_unit_sample(), 1.0);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  const double sigma = 2.0;  // noise scale G sigma / N = 2
  GaussianSampler sampler(101);
  const int draws = 100000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double value = privatize_gradient(model, theta, sigma, sampler)[0];
    sum += value;
    sum_sq += value * value;
  }
  const double mean = sum / draws;
  const double variance = sum_sq / draws - mean * mean;
  CHECK(std::fabs(mean - (-1.0)) <= 0.05);
  CHECK(std::fabs(variance - 4.0) <= 0.05 * 4.0);
}

TEST_CASE("momentum update matches hand values and removes the warmup bias") {
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(3, 0.625);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
  for (int t = 1; t <= 40; ++t) {
    auto [next, corrected] = momentum_update(v, g, 0.5, t);
    v = next;
    // Constant gradients leave nothing to correct: the de-biased average is
    // the gradient itself, exactly.
    for (int i = 0; i < 3; ++i) CHECK(corrected[i] == g[i]);
  }

  Eigen::VectorXd g1(1);
  Eigen::VectorXd g2(1);
  g1 << 1.0;
  g2 << 0.0;
  auto [v2, m2] = momentum_update(Eigen::VectorXd::Zero(1), g1, 0.5, 1);
  CHECK(v2[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m2[0] == doctest::Approx(1.0).epsilon(1e-15));
  auto [v3, m3] = momentum_update(v2, g2, 0.5, 2);
  CHECK(v3[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m3[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto [v_plain, m_plain] = momentum_update(v2, g1, 0.0, 5);
  CHECK(v_plain[0] == g1[0]);
  CHECK(m_plain[0] == g1[0]);

  CHECK_THROWS_AS(momentum_update(v2, g1, 1.0, 1), std::domain_error);
  CHECK_THROWS_AS(momentum_update(v2, g1, -0.1, 1), std::domain_error);
  CHECK_THROWS_AS(momentum_update(v2, g1, 0.5, 0), std::domain_error);
  CHECK_THROWS_AS(momentum_update(Eigen::VectorXd::Zero(2), g1, 0.5, 1),
                  std::invalid_argument);
}

TEST_CASE("training runs are deterministic per seed") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(8, 3, 77), 4.0);
  const NoiseSchedule schedule = gd_closed_form(0.5, 6, 2.0);
  RunOptions options;
  options.eta = {0.05};
  options.seed = 12345;
  const RunRecord a = run(model, schedule, options);
  const RunRecord b = run(model, schedule, options);
  REQUIRE(a.steps_taken == b.steps_taken);
  for (std::size_t i = 0; i < a.losses.size(); ++i) {
    CHECK(a.losses[i] == b.losses[i]);
  }
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.budget_spent == b.budget_spent);

  options.seed = 54321;
  const RunRecord c = run(model, schedule, options);
  CHECK(c.final_loss != a.final_loss);
}

TEST_CASE("budget gate stops exactly-saturating schedules one step early") {
  const LossModel model(LossKind::kQuadratic, single_unit_sample(), 1.0);
  RunOptions options;
  options.eta = {0.1};

  // sigma = 2 keeps every per-step cost exactly 1/4, so the saturation
  // arithmetic is free of round-off.
  const RunRecord four =
      run(model, custom_schedule({2.0, 2.0, 2.0, 2.0}, 1.0), options);
  CHECK(four.steps_taken == 3);
  CHECK(four.budget_spent == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(four.losses.size() == 3);

  const RunRecord one = run(model, uniform_schedule(1, 1.0), options);
  CHECK(one.steps_taken == 0);
  CHECK(one.budget_spent == 0.0);
  CHECK(one.final_loss == one.initial_loss);

  // A schedule that stays under budget runs to completion.
  const RunRecord slack =
      run(model, custom_schedule({2.0, 2.0}, 1.0), options);
  CHECK(slack.steps_taken == 2);
  CHECK(slack.budget_spent == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("infeasible schedules are refused before any step") {
  const LossModel model(LossKind::kQuadratic, single_unit_sample(), 1.0);
  RunOptions options;
  options.eta = {0.1};
  CHECK_THROWS_AS(run(model, custom_schedule({1.0}, 0.5), options),
                  std::invalid_argument);
  CHECK_THROWS_AS(run(model, custom_schedule({}, 1.0), options),
                  std::invalid_argument);
  RunOptions no_eta;
  CHECK_THROWS_AS(run(model, uniform_schedule(2, 1.0), no_eta),
                  std::invalid_argument);
  RunOptions bad_eta;
  bad_eta.eta = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(run(model, uniform_schedule(2, 1.0), bad_eta),
                  std::invalid_argument);
}

TEST_CASE("zero-momentum runs equal a hand-rolled descent loop") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(10, 4, 31), 2.0);
  const NoiseSchedule schedule =
      custom_schedule(std::vector<double>(8, 2.0), 2.5);
  RunOptions options;
  options.eta = {0.07};
  options.seed = 999;
  const RunRecord record = run(model, schedule, options);
  REQUIRE(record.steps_taken == 8);  // under budget: every step runs

  GaussianSampler sampler(999);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  for (int t = 1; t <= 8; ++t) {
    const Eigen::VectorXd gradient =
        privatize_gradient(model, theta, schedule.sigma(t), sampler);
    theta -= 0.07 * gradient;
    CHECK(model.loss(theta) == record.losses[static_cast<std::size_t>(t) - 1]);
  }
}

TEST_CASE("per-step learning rates are honored") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(6, 2, 19), 2.0);
  RunOptions options;
  options.eta = {0.1, 0.0};  // second step frozen
  options.noiseless = true;
  const RunRecord record =
      run(model, uniform_schedule(2, 1.0), options);
  REQUIRE(record.steps_taken == 2);  // noiseless mode skips the ledger
  CHECK(record.losses[1] == record.losses[0]);
  CHECK(record.budget_spent == 0.0);
}

TEST_CASE("noiseless descent on a quadratic decreases the loss monotonically") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(12, 4, 47));
  const Spectrum spectrum = model.estimate_spectrum();
  RunOptions options;
  options.eta = {1.0 / spectrum.m_max};
  options.noiseless = true;
  Eigen::VectorXd start(4);
  start << 1.0, -1.0, 0.5, 2.0;
  options.theta0 = start;
  const int steps = 30;
  const RunRecord record = run(model, uniform_schedule(steps, 1.0), options);
  REQUIRE(record.steps_taken == steps);
  double previous = record.initial_loss;
  for (double loss : record.losses) {
    CHECK(loss <= previous * (1.0 + 1e-12));
    previous = loss;
  }
  // Each step contracts the optimality gap by at least 1 - mu/M.
  const double f_star = model.optimal_loss();
  const double contraction = 1.0 - spectrum.mu_min / spectrum.m_max;
  CHECK(record.final_loss - f_star <=
        std::pow(contraction, steps) * (record.initial_loss - f_star) *
                (1.0 + 1e-8) +
            1e-14);
}

TEST_CASE("clip-norm audits pass on compliant runs") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(8, 3, 7), 0.5);
  RunOptions options;
  options.eta = {0.05};
  options.check_clip_norms = true;
  const RunRecord record =
      run(model, custom_schedule(std::vector<double>(5, 2.0), 1.5), options);
  CHECK(record.steps_taken == 5);
}

TEST_CASE("default minibatch size follows the square-root rule") {
  CHECK(default_psgd_batch(100, 0.04) == 20);
  CHECK(default_psgd_batch(10, 1e-4) == 1);    // rounds to zero, clamped up
  CHECK(default_psgd_batch(10, 100.0) == 10);  // clamped to the sample count
  CHECK(default_psgd_batch(1000, 0.3927) == 627);
  CHECK_THROWS_AS(default_psgd_batch(0, 0.1), std::domain_error);
  CHECK_THROWS_AS(default_psgd_batch(10, 0.0), std::domain_error);
}

TEST_CASE("subsampled runs charge the amplified cost to the true budget") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(10, 3, 71), 2.0);
  const double true_budget = 0.0625;
  const int batch = 5;  // sampling rate 1/2
  const double rate = 0.5;
  // The schedule is built against the amplified budget R / p^2; sigma = 4
  // keeps every subsampled step cost exactly p^2/16 = 0.015625.
  const NoiseSchedule schedule = custom_schedule(
      std::vector<double>(4, 4.0), true_budget / (rate * rate));
  RunOptions options;
  options.eta = {0.05};
  options.seed = 2024;
  const RunRecord record = run_psgd(model, schedule, batch, options);
  // Exact saturation loses the final step under the strict gate.
  CHECK(record.steps_taken == 3);
  CHECK(record.budget_spent == doctest::Approx(0.046875).epsilon(1e-12));
  CHECK(record.budget_spent <= true_budget);
  CHECK(record.sigma_g_hat >= 0.0);
  CHECK(std::isfinite(record.sigma_g_hat));

  const RunRecord again = run_psgd(model, schedule, batch, options);
  CHECK(again.final_loss == record.final_loss);

  CHECK_THROWS_AS(run_psgd(model, schedule, 0, options), std::domain_error);
  CHECK_THROWS_AS(run_psgd(model, schedule, 11, options), std::domain_error);
}

TEST_CASE("full-population subsampled runs match the ledger of plain runs") {
  const LossModel model(LossKind::kQuadratic,
                        random_quadratic_data(6, 2, 3), 1.0);
  const NoiseSchedule schedule =
      custom_schedule(std::vector<double>(3, 2.0), 0.75);
  RunOptions options;
  options.eta = {0.05};
  options.seed = 5;
  const RunRecord record = run_psgd(model, schedule, 6, options);
  CHECK(record.steps_taken == 2);
  CHECK(record.budget_spent == doctest::Approx(0.5).epsilon(1e-12));
}

}  // namespace
}  // namespace dpsched
