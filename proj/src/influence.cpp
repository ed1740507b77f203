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

#include "dpsched/influence.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "dpsched/optimizer.hpp"
#include "dpsched/random.hpp"

namespace dpsched {

InfluenceProfile analytic_gd_influence(double gamma, double alpha, int steps) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in (0, 1)");
  }
  if (!(alpha > 0.0)) {
    throw std::domain_error("alpha must be positive");
  }
  if (steps < 1) {
    throw std::domain_error("profile needs at least one step");
  }
  InfluenceProfile profile;
  profile.source = InfluenceSource::kAnalyticGd;
  profile.q.resize(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    profile.q[static_cast<std::size_t>(t) - 1] =
        alpha * std::pow(gamma, static_cast<double>(steps - t));
  }
  return profile;
}

InfluenceProfile analytic_momentum_influence(double gamma, double beta,
                                             int steps) {
  if (!(beta < gamma)) {
    throw std::domain_error("momentum beta must be below gamma");
  }
  InfluenceProfile profile;
  profile.source = InfluenceSource::kAnalyticMomentum;
  profile.q = momentum_influence_weights(gamma, beta, steps);
  return profile;
}

StepFit quadratic_fit(std::span<const FitPoint> points) {
  if (points.size() < 3) {
    throw std::domain_error("quadratic fit needs at least three points");
  }
  // Least squares of y on u = sigma^2 with basis {1, u}.
  double mean_u = 0.0;
  double mean_y = 0.0;
  for (const FitPoint& p : points) {
    mean_u += p.sigma * p.sigma;
    mean_y += p.loss;
  }
  mean_u /= static_cast<double>(points.size());
  mean_y /= static_cast<double>(points.size());
  double suu = 0.0;
  double suy = 0.0;
  for (const FitPoint& p : points) {
    const double du = p.sigma * p.sigma - mean_u;
    suu += du * du;
    suy += du * (p.loss - mean_y);
  }
  if (!(suu > 0.0)) {
    throw std::domain_error("quadratic fit needs two distinct noise scales");
  }
  StepFit fit;
  fit.c2 = suy / suu;
  fit.c0 = mean_y - fit.c2 * mean_u;
  double rss = 0.0;
  for (const FitPoint& p : points) {
    const double miss = p.loss - (fit.c0 + fit.c2 * p.sigma * p.sigma);
    rss += miss * miss;
  }
  fit.residual = std::sqrt(rss / static_cast<double>(points.size()));
  return fit;
}

std::vector<double> log_spaced_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo)) {
    throw std::domain_error("grid bounds must satisfy 0 < lo < hi");
  }
  if (count < 2) {
    throw std::domain_error("grid needs at least two points");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
  }
  return grid;
}

StepFit estimate_influence_step(const RunFinalLoss& run_final_loss,
                                const NoiseSchedule& base, int step,
                                std::span<const double> sigma_grid, int repeats,
                                std::uint64_t seed) {
  if (step < 1 || step > base.length()) {
    throw std::domain_error("step index out of range");
  }
  if (repeats < 1) {
    throw std::domain_error("need at least one repeat");
  }
  std::vector<FitPoint> points;
  points.reserve(sigma_grid.size());
  for (double sigma : sigma_grid) {
    NoiseSchedule variant = base;
    variant.recipe = ScheduleRecipe::kCustom;
    variant.sigmas[static_cast<std::size_t>(step) - 1] = sigma;
    if (!validate(variant).feasible) {
      std::cerr << "influence grid point sigma=" << sigma << " at step " << step
                << " overruns the budget; skipped\n";
      continue;
    }
    double mean_loss = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      // Common random numbers: the repeat seed ignores (step, sigma).
      mean_loss += run_final_loss(
          variant, hash_combine(seed, static_cast<std::uint64_t>(rep)));
    }
    points.push_back(FitPoint{sigma, mean_loss / repeats});
  }
  if (points.size() < 3) {
    throw std::runtime_error(
        "influence estimation needs at least three feasible grid points");
  }
  return quadratic_fit(points);
}

InfluenceProfile estimate_influence_retraining(
    const RunFinalLoss& run_final_loss, const NoiseSchedule& base,
    std::span<const double> sigma_grid, int repeats, std::uint64_t seed) {
  InfluenceProfile profile;
  profile.source = InfluenceSource::kRetrained;
  profile.q.reserve(static_cast<std::size_t>(base.length()));
  profile.fit_diagnostics.reserve(static_cast<std::size_t>(base.length()));
  for (int step = 1; step <= base.length(); ++step) {
    const StepFit fit = estimate_influence_step(run_final_loss, base, step,
                                                sigma_grid, repeats, seed);
    profile.q.push_back(fit.c2);
    profile.fit_diagnostics.push_back(fit);
  }
  return profile;
}

RunFinalLoss make_model_runner(const LossModel& model, double eta, double beta,
                               Eigen::VectorXd theta0) {
  return [&model, eta, beta, theta0 = std::move(theta0)](
             const NoiseSchedule& schedule, std::uint64_t seed) {
    RunOptions options;
    options.eta = {eta};
    options.beta = beta;
    options.seed = seed;
    options.theta0 = theta0;
    return run(model, schedule, options).final_loss;
  };
}

double dynamic_advantage(const InfluenceProfile& profile) {
  if (profile.q.empty()) {
    throw std::domain_error("influence profile must be non-empty");
  }
  const double steps = static_cast<double>(profile.q.size());
  double mean_sqrt = 0.0;
  for (double q : profile.q) {
    if (!(q > 0.0)) {
      throw std::domain_error("influence weights must be positive");
    }
    mean_sqrt += std::sqrt(q);
  }
  mean_sqrt /= steps;
  double var = 0.0;
  for (double q : profile.q) {
    const double dev = std::sqrt(q) - mean_sqrt;
    var += dev * dev;
  }
  return steps * var;  // T^2 * (var/T)
}

}  // namespace dpsched
