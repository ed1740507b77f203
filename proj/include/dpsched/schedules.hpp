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
// Constructors for per-step Gaussian noise schedules: uniform splits, the
// influence-weighted optimum, its closed forms for plain and momentum
// gradient descent, and a two-parameter exponential approximation.

#ifndef DPSCHED_SCHEDULES_HPP_
#define DPSCHED_SCHEDULES_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpsched {

enum class ScheduleRecipe {
  kUniform,
  kDynamicInfluence,
  kGdClosedForm,
  kMomentumDynamic,
  kExponential,
  kCustom,
};

std::string_view recipe_name(ScheduleRecipe recipe);

// Per-step noise scales sigma_t together with the budget they were built
// against. A schedule is feasible when sum_t 1/sigma_t^2 <= budget_r, with a
// 1e-9 relative slack for round-off.
struct NoiseSchedule {
  std::vector<double> sigmas;
  ScheduleRecipe recipe = ScheduleRecipe::kCustom;
  double budget_r = 0.0;

  int length() const { return static_cast<int>(sigmas.size()); }
  // Steps are 1-based throughout the project.
  double sigma(int t) const { return sigmas[static_cast<std::size_t>(t) - 1]; }
};

std::string schedule_label(const NoiseSchedule& schedule);

struct ScheduleValidation {
  bool feasible = false;
  double consumed_fraction = 0.0;  // (sum_t 1/sigma_t^2) / budget_r
};

ScheduleValidation validate(const NoiseSchedule& schedule);

// Equal split: sigma_t^2 = steps / budget_r for every t. Such a schedule
// consumes the budget exactly, so whether the strict ledger gate grants the
// final step comes down to round-off in the sigma -> cost round trip; budget
// with slack when every step must run.
NoiseSchedule uniform_schedule(int steps, double budget_r);

// Minimizer of sum_t q_t sigma_t^2 subject to sum_t 1/sigma_t^2 = budget_r:
// sigma_t^2 = (1/R) sum_i sqrt(q_i / q_t). Scale-invariant in q.
NoiseSchedule dynamic_from_influence(std::span<const double> influence,
                                     double budget_r);

// Closed form of dynamic_from_influence for the gradient-descent influence
// q_t proportional to gamma^{steps - t}:
//   sigma_t^2 = (1/R) (gamma^{-steps/2} - 1) / (1 - sqrt(gamma)) gamma^{t/2}.
NoiseSchedule gd_closed_form(double gamma, int steps, double budget_r);

// Branch constants of the momentum influence profile. They cancel within a
// single branch (only ratios of q enter the schedule) and are exposed so the
// profile scale can be overridden.
double momentum_c1(double gamma, double beta);
double momentum_c2(double gamma, double beta, int t_hat);

// Influence weights behind the momentum schedule. The branch switches on the
// horizon: q_t = c1 gamma^{steps + t} while steps <= t_hat (t_hat included),
// and q_t = gamma^{t_hat - 1} c2 gamma^{steps - t} beyond it.
std::vector<double> momentum_influence_weights(double gamma, double beta,
                                               int steps);
std::vector<double> momentum_influence_weights(double gamma, double beta,
                                               int steps, double c1, double c2);

// Requires beta < gamma. Applies dynamic_from_influence to the momentum
// influence weights; increasing in t up to the branch horizon, decreasing
// beyond it.
NoiseSchedule momentum_dynamic(double gamma, double beta, int steps,
                               double budget_r);

struct ExponentialFit {
  double sigma0 = 0.0;
  double decay_k = 0.0;
  NoiseSchedule schedule;
};

// Log-linear least squares of sigma_t ~ sigma0 exp(-k t); the emitted
// schedule is rescaled by one multiplicative constant so that it saturates
// the target's budget. A length-1 target yields k = 0.
ExponentialFit fit_exponential(const NoiseSchedule& target);

}  // namespace dpsched

#endif  // DPSCHED_SCHEDULES_HPP_
