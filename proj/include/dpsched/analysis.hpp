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
// Utility upper bounds for privately trained smooth objectives: problem
// constants, the expected excess-risk bound for noisy gradient descent and
// its momentum variant, weighted-noise minimization, and horizon selectors.

#ifndef DPSCHED_ANALYSIS_HPP_
#define DPSCHED_ANALYSIS_HPP_

#include <span>

#include "dpsched/schedules.hpp"

namespace dpsched {

// Dimensionless constants of one training problem:
//   kappa = M / mu,   gamma = 1 - 1/kappa,
//   1/alpha = 2 R M N^2 init_gap / (D G^2).
struct ProblemConstants {
  double lipschitz_g = 0.0;   // per-sample gradient norm bound G
  double smoothness_m = 0.0;  // smoothness constant M
  double pl_mu = 0.0;         // curvature (PL) constant mu
  double dim_d = 0.0;         // parameter dimension D
  double samples_n = 0.0;     // sample count N
  double budget_r = 0.0;      // privacy budget in R-units
  double init_gap = 0.0;      // f(theta_1) - f(theta*)

  double alpha = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
};

ProblemConstants derive_constants(double lipschitz_g, double smoothness_m,
                                  double pl_mu, double dim_d, double samples_n,
                                  double budget_r, double init_gap);

enum class ScheduleKind { kUniform, kDynamic, kMomentumUniform, kMomentumDynamic };

struct BoundReport {
  double erub = 0.0;  // expected excess risk, relative to init_gap
  int steps = 0;
  ScheduleKind schedule_kind = ScheduleKind::kUniform;
};

// Excess-risk upper bound of noisy gradient descent after the schedule runs
// to completion: gamma^T + R sum_t gamma^{T-t} alpha sigma_t^2 (0^0 := 1).
double erub_gd(const ProblemConstants& constants, const NoiseSchedule& schedule);

struct WeightedNoiseMinimum {
  double minimum = 0.0;      // min over feasible schedules of R sum q_t sigma_t^2
  double uniform_gap = 0.0;  // uniform-schedule value minus the minimum
};

// For influence weights q > 0, the budget-constrained minimum of
// R sum_t q_t sigma_t^2 equals (sum_t sqrt(q_t))^2, and the uniform schedule
// exceeds it by T sum q_t - (sum sqrt(q_t))^2 = T^2 Var(sqrt(q_t)).
WeightedNoiseMinimum min_weighted_noise(std::span<const double> influence);

// Horizon minimizing the uniform-schedule bound:
// ceil((1/ln(1/gamma)) ln(1 + ln(1/gamma)/alpha)), clamped to >= 1.
int optimal_T_uniform(const ProblemConstants& constants);

// Horizon minimizing the dynamic-schedule bound:
// ceil(2 log_{1/gamma}((alpha + (1 - sqrt(gamma))^2) / alpha)), clamped >= 1.
int optimal_T_dynamic(const ProblemConstants& constants);

// Accumulated noise term of the momentum bound:
//   U3 = sum_t gamma^{T-t} (1-beta)^2/(1-beta^t)^2 sum_{i<=t} beta^{2(t-i)} sigma_i^2.
// At beta = 0 this collapses to the gradient-descent weighted sum.
double momentum_noise_term_u3(const ProblemConstants& constants, double beta,
                              const NoiseSchedule& schedule);

struct THatResult {
  int value = 0;
  bool capped = false;
};

// Largest t with gamma^{t-1} >= (1-beta)/(1-beta^t); the feasible set is a
// prefix since gamma^{t-1}(1-beta^t) is concave in t with value 1-beta at
// t = 1. Linear scan, capped (with a flag) at scan_cap.
THatResult compute_T_hat(double gamma, double beta, int scan_cap = 1000000);

// Damping margin of the momentum step-size analysis:
//   zeta = 1 - eta0/4 - beta gamma (gamma-beta)^{-2} (1-beta)^{-3} eta0^2.
double momentum_zeta(double eta0, double gamma, double beta);

// Positive root of momentum_zeta in eta0:
//   8 / (sqrt(1 + 64 beta gamma (gamma-beta)^{-2} (1-beta)^{-3}) + 1).
// Used as the default eta0 when none is supplied.
double momentum_eta0_bound(double gamma, double beta);

bool momentum_eta0_feasible(double eta0, double gamma, double beta);

}  // namespace dpsched

#endif  // DPSCHED_ANALYSIS_HPP_
