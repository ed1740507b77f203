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

#include "dpsched/schedules.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "dpsched/analysis.hpp"

namespace dpsched {
namespace {

constexpr double kFeasibilitySlack = 1e-9;  // relative

void check_steps(int steps) {
  if (steps < 1) {
    throw std::domain_error("schedule needs at least one step");
  }
}

void check_budget(double budget_r) {
  if (!(budget_r > 0.0)) {
    throw std::domain_error("budget must be positive");
  }
}

}  // namespace

std::string_view recipe_name(ScheduleRecipe recipe) {
  switch (recipe) {
    case ScheduleRecipe::kUniform: return "uniform";
    case ScheduleRecipe::kDynamicInfluence: return "dynamic";
    case ScheduleRecipe::kGdClosedForm: return "gd";
    case ScheduleRecipe::kMomentumDynamic: return "momentum";
    case ScheduleRecipe::kExponential: return "exp-fit";
    case ScheduleRecipe::kCustom: return "custom";
  }
  return "custom";
}

std::string schedule_label(const NoiseSchedule& schedule) {
  char buffer[96];
  std::snprintf(buffer, sizeof(buffer), "%s(T=%d,R=%g)",
                std::string(recipe_name(schedule.recipe)).c_str(),
                schedule.length(), schedule.budget_r);
  return buffer;
}

ScheduleValidation validate(const NoiseSchedule& schedule) {
  ScheduleValidation out;
  if (!(schedule.budget_r > 0.0)) {
    out.consumed_fraction = std::numeric_limits<double>::infinity();
    return out;
  }
  double consumed = 0.0;
  for (double sigma : schedule.sigmas) {
    if (!(sigma > 0.0)) {
      out.consumed_fraction = std::numeric_limits<double>::infinity();
      return out;
    }
    consumed += 1.0 / (sigma * sigma);
  }
  out.consumed_fraction = consumed / schedule.budget_r;
  out.feasible = consumed <= schedule.budget_r * (1.0 + kFeasibilitySlack);
  return out;
}

NoiseSchedule uniform_schedule(int steps, double budget_r) {
  check_steps(steps);
  check_budget(budget_r);
  NoiseSchedule schedule;
  schedule.sigmas.assign(static_cast<std::size_t>(steps),
                         std::sqrt(static_cast<double>(steps) / budget_r));
  schedule.recipe = ScheduleRecipe::kUniform;
  schedule.budget_r = budget_r;
  return schedule;
}

NoiseSchedule dynamic_from_influence(std::span<const double> influence,
                                     double budget_r) {
  if (influence.empty()) {
    throw std::domain_error("influence sequence must be non-empty");
  }
  check_budget(budget_r);
  double sum_sqrt = 0.0;
  for (double q : influence) {
    if (!(q > 0.0)) {
      throw std::domain_error("influence weights must be positive");
    }
    sum_sqrt += std::sqrt(q);
  }
  NoiseSchedule schedule;
  schedule.sigmas.resize(influence.size());
  for (std::size_t t = 0; t < influence.size(); ++t) {
    schedule.sigmas[t] = std::sqrt(sum_sqrt / (budget_r * std::sqrt(influence[t])));
  }
  schedule.recipe = ScheduleRecipe::kDynamicInfluence;
  schedule.budget_r = budget_r;
  return schedule;
}

NoiseSchedule gd_closed_form(double gamma, int steps, double budget_r) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in (0, 1)");
  }
  check_steps(steps);
  check_budget(budget_r);
  const double log_gamma = std::log(gamma);
  // gamma^{-T/2} - 1 and 1 - sqrt(gamma) via expm1, which keeps the leading
  // factor accurate for gamma near 1.
  const double growth = std::expm1(-0.5 * steps * log_gamma);
  const double shrink = -std::expm1(0.5 * log_gamma);
  const double lead = growth / (budget_r * shrink);
  NoiseSchedule schedule;
  schedule.sigmas.resize(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    const double sigma_sq = lead * std::exp(0.5 * t * log_gamma);
    schedule.sigmas[static_cast<std::size_t>(t) - 1] = std::sqrt(sigma_sq);
  }
  schedule.recipe = ScheduleRecipe::kGdClosedForm;
  schedule.budget_r = budget_r;
  return schedule;
}

double momentum_c1(double gamma, double beta) {
  return 2.0 / (gamma * (gamma - beta * beta));
}

double momentum_c2(double gamma, double beta, int t_hat) {
  return std::pow(gamma, 2.0 * t_hat) / (gamma - beta * beta);
}

std::vector<double> momentum_influence_weights(double gamma, double beta,
                                               int steps) {
  const int t_hat = compute_T_hat(gamma, beta).value;
  return momentum_influence_weights(gamma, beta, steps,
                                    momentum_c1(gamma, beta),
                                    momentum_c2(gamma, beta, t_hat));
}

std::vector<double> momentum_influence_weights(double gamma, double beta,
                                               int steps, double c1, double c2) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in (0, 1)");
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::domain_error("beta must lie in [0, 1)");
  }
  check_steps(steps);
  const int t_hat = compute_T_hat(gamma, beta).value;
  std::vector<double> weights(static_cast<std::size_t>(steps));
  if (steps <= t_hat) {
    for (int t = 1; t <= steps; ++t) {
      weights[static_cast<std::size_t>(t) - 1] =
          c1 * std::pow(gamma, static_cast<double>(steps + t));
    }
  } else {
    const double lead = std::pow(gamma, static_cast<double>(t_hat - 1)) * c2;
    for (int t = 1; t <= steps; ++t) {
      weights[static_cast<std::size_t>(t) - 1] =
          lead * std::pow(gamma, static_cast<double>(steps - t));
    }
  }
  return weights;
}

NoiseSchedule momentum_dynamic(double gamma, double beta, int steps,
                               double budget_r) {
  if (!(beta < gamma)) {
    throw std::domain_error("momentum beta must be below gamma");
  }
  std::vector<double> weights = momentum_influence_weights(gamma, beta, steps);
  // Only ratios of the weights enter the schedule; normalizing by the largest
  // keeps very long horizons away from floating-point underflow.
  double top = 0.0;
  for (double w : weights) top = std::max(top, w);
  for (double& w : weights) w /= top;
  NoiseSchedule schedule = dynamic_from_influence(weights, budget_r);
  schedule.recipe = ScheduleRecipe::kMomentumDynamic;
  return schedule;
}

ExponentialFit fit_exponential(const NoiseSchedule& target) {
  const int steps = target.length();
  check_steps(steps);
  check_budget(target.budget_r);
  for (double sigma : target.sigmas) {
    if (!(sigma > 0.0)) {
      throw std::domain_error("noise scales must be positive");
    }
  }
  ExponentialFit fit;
  if (steps == 1) {
    fit.sigma0 = target.sigmas[0];
    fit.decay_k = 0.0;
  } else {
    // Ordinary least squares of ln sigma_t on t over t = 1..T.
    const double mean_t = 0.5 * (steps + 1);
    double mean_y = 0.0;
    for (int t = 1; t <= steps; ++t) mean_y += std::log(target.sigma(t));
    mean_y /= steps;
    double sxx = 0.0;
    double sxy = 0.0;
    for (int t = 1; t <= steps; ++t) {
      const double dt = t - mean_t;
      sxx += dt * dt;
      sxy += dt * (std::log(target.sigma(t)) - mean_y);
    }
    const double slope = sxy / sxx;
    fit.decay_k = -slope;
    fit.sigma0 = std::exp(mean_y - slope * mean_t);
  }
  NoiseSchedule& schedule = fit.schedule;
  schedule.sigmas.resize(static_cast<std::size_t>(steps));
  double consumed = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double sigma = fit.sigma0 * std::exp(-fit.decay_k * t);
    schedule.sigmas[static_cast<std::size_t>(t) - 1] = sigma;
    consumed += 1.0 / (sigma * sigma);
  }
  // One multiplicative rescale so the emitted schedule saturates the budget.
  const double factor = std::sqrt(consumed / target.budget_r);
  for (double& sigma : schedule.sigmas) sigma *= factor;
  schedule.recipe = ScheduleRecipe::kExponential;
  schedule.budget_r = target.budget_r;
  return fit;
}

}  // namespace dpsched
