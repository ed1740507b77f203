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
//
// Per-step noise influence: analytic profiles for gradient descent and
// momentum, plus an empirical estimator that retrains with one step's noise
// scale varied and fits the final loss as a quadratic in that scale.

#ifndef DPSCHED_INFLUENCE_HPP_
#define DPSCHED_INFLUENCE_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpsched/models.hpp"
#include "dpsched/schedules.hpp"

namespace dpsched {

enum class InfluenceSource { kAnalyticGd, kAnalyticMomentum, kRetrained };

// One per-step fit of mean final loss = c2 sigma^2 + c0.
struct StepFit {
  double c0 = 0.0;
  double c2 = 0.0;
  double residual = 0.0;  // root-mean-square misfit
};

struct InfluenceProfile {
  std::vector<double> q;  // per-step weights, q[t-1] for step t
  InfluenceSource source = InfluenceSource::kAnalyticGd;
  std::vector<StepFit> fit_diagnostics;  // retrained profiles only
};

// Gradient descent: q_t = gamma^{T-t} alpha.
InfluenceProfile analytic_gd_influence(double gamma, double alpha, int steps);

// Momentum: the branch form of momentum_influence_weights; requires
// beta < gamma.
InfluenceProfile analytic_momentum_influence(double gamma, double beta,
                                             int steps);

struct FitPoint {
  double sigma = 0.0;
  double loss = 0.0;
};

// Least squares of loss = c2 sigma^2 + c0. Needs at least three points with
// at least two distinct sigmas.
StepFit quadratic_fit(std::span<const FitPoint> points);

// Final loss of one training run under the given schedule and seed.
using RunFinalLoss =
    std::function<double(const NoiseSchedule& schedule, std::uint64_t seed)>;

constexpr double kDefaultGridLo = 20.0;
constexpr double kDefaultGridHi = 200.0;
constexpr int kDefaultGridPoints = 7;
constexpr int kDefaultRetrainRepeats = 20;

std::vector<double> log_spaced_grid(double lo, double hi, int count);

// Influence of one step: rebuild the base schedule with sigma_step swept
// over the grid, rerun `repeats` times per grid point, and fit the mean
// final loss as a quadratic in sigma_step. Grid points that would overrun
// the budget are skipped with a warning; fewer than three surviving points
// is an error. Repeat seeds are shared across grid points and steps (common
// random numbers), so the other steps' noise cancels from the fit.
StepFit estimate_influence_step(const RunFinalLoss& run_final_loss,
                                const NoiseSchedule& base, int step,
                                std::span<const double> sigma_grid, int repeats,
                                std::uint64_t seed);

// Full retrained profile: estimate_influence_step for every step of the
// base schedule, with q_t taken from the fitted curvature c2.
InfluenceProfile estimate_influence_retraining(
    const RunFinalLoss& run_final_loss, const NoiseSchedule& base,
    std::span<const double> sigma_grid, int repeats, std::uint64_t seed);

// Adapter running the full-batch optimizer from a fixed start point.
RunFinalLoss make_model_runner(const LossModel& model, double eta, double beta,
                               Eigen::VectorXd theta0);

// Spread statistic T^2 Var(sqrt(q_t)): the gap between the uniform schedule
// and the influence-optimal one in the weighted-noise objective.
double dynamic_advantage(const InfluenceProfile& profile);

}  // namespace dpsched

#endif  // DPSCHED_INFLUENCE_HPP_
