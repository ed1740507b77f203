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

#include "dpsched/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpsched {
namespace {

// Ceiling with a 1e-12 relative snap, so values that are integers up to
// round-off do not get bumped to the next horizon. Clamped to >= 1.
int ceil_horizon(double raw) {
  const double snapped = raw - 1e-12 * std::max(1.0, std::fabs(raw));
  const double up = std::ceil(snapped);
  if (!(up >= 1.0)) return 1;
  if (up >= static_cast<double>(std::numeric_limits<int>::max())) {
    return std::numeric_limits<int>::max();
  }
  return static_cast<int>(up);
}

void check_gamma_unit(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in [0, 1)");
  }
}

void check_beta_unit(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::domain_error("beta must lie in [0, 1)");
  }
}

}  // namespace

ProblemConstants derive_constants(double lipschitz_g, double smoothness_m,
                                  double pl_mu, double dim_d, double samples_n,
                                  double budget_r, double init_gap) {
  if (!(lipschitz_g > 0.0) || !(smoothness_m > 0.0) || !(pl_mu > 0.0) ||
      !(dim_d > 0.0) || !(samples_n > 0.0) || !(budget_r > 0.0) ||
      !(init_gap > 0.0)) {
    throw std::domain_error("problem constants must all be positive");
  }
  if (smoothness_m < pl_mu) {
    throw std::domain_error("smoothness must dominate the curvature constant");
  }
  ProblemConstants c;
  c.lipschitz_g = lipschitz_g;
  c.smoothness_m = smoothness_m;
  c.pl_mu = pl_mu;
  c.dim_d = dim_d;
  c.samples_n = samples_n;
  c.budget_r = budget_r;
  c.init_gap = init_gap;
  c.kappa = smoothness_m / pl_mu;
  c.gamma = 1.0 - 1.0 / c.kappa;
  c.alpha = (dim_d * lipschitz_g * lipschitz_g) /
            (2.0 * budget_r * smoothness_m * samples_n * samples_n * init_gap);
  return c;
}

double erub_gd(const ProblemConstants& constants, const NoiseSchedule& schedule) {
  const int steps = schedule.length();
  if (steps < 1) {
    throw std::domain_error("schedule needs at least one step");
  }
  check_gamma_unit(constants.gamma);
  // Accumulate the noise sum from the last step backwards, which realizes
  // the 0^0 := 1 convention at t = T even for gamma = 0.
  double weight = 1.0;
  double noise = 0.0;
  for (int t = steps; t >= 1; --t) {
    const double sigma = schedule.sigma(t);
    noise += weight * sigma * sigma;
    weight *= constants.gamma;
  }
  return std::pow(constants.gamma, static_cast<double>(steps)) +
         constants.budget_r * constants.alpha * noise;
}

WeightedNoiseMinimum min_weighted_noise(std::span<const double> influence) {
  if (influence.empty()) {
    throw std::domain_error("influence sequence must be non-empty");
  }
  double sum_q = 0.0;
  double sum_sqrt = 0.0;
  for (double q : influence) {
    if (!(q > 0.0)) {
      throw std::domain_error("influence weights must be positive");
    }
    sum_q += q;
    sum_sqrt += std::sqrt(q);
  }
  WeightedNoiseMinimum out;
  out.minimum = sum_sqrt * sum_sqrt;
  out.uniform_gap = static_cast<double>(influence.size()) * sum_q - out.minimum;
  return out;
}

int optimal_T_uniform(const ProblemConstants& constants) {
  check_gamma_unit(constants.gamma);
  if (!(constants.alpha > 0.0)) {
    throw std::domain_error("alpha must be positive");
  }
  if (constants.gamma == 0.0) return 1;
  const double log_inv_gamma = -std::log(constants.gamma);
  const double raw = std::log1p(log_inv_gamma / constants.alpha) / log_inv_gamma;
  return ceil_horizon(raw);
}

int optimal_T_dynamic(const ProblemConstants& constants) {
  check_gamma_unit(constants.gamma);
  if (!(constants.alpha > 0.0)) {
    throw std::domain_error("alpha must be positive");
  }
  if (constants.gamma == 0.0) return 1;
  const double log_gamma = std::log(constants.gamma);
  const double one_minus_sqrt = -std::expm1(0.5 * log_gamma);  // 1 - sqrt(gamma)
  const double shift = one_minus_sqrt * one_minus_sqrt;
  const double raw = 2.0 * std::log1p(shift / constants.alpha) / (-log_gamma);
  return ceil_horizon(raw);
}

double momentum_noise_term_u3(const ProblemConstants& constants, double beta,
                              const NoiseSchedule& schedule) {
  check_beta_unit(beta);
  // Unlike the horizon selectors, the accumulated sum stays finite at
  // gamma = 1 (every weight becomes 1), so that edge is admitted here.
  if (!(constants.gamma >= 0.0 && constants.gamma <= 1.0)) {
    throw std::domain_error("gamma must lie in [0, 1]");
  }
  const int steps = schedule.length();
  if (steps < 1) {
    throw std::domain_error("schedule needs at least one step");
  }
  // inner_t = sum_{i<=t} beta^{2(t-i)} sigma_i^2 via a forward recurrence.
  double total = 0.0;
  double inner = 0.0;
  double beta_pow = 1.0;  // beta^t after the update below
  const double beta_sq = beta * beta;
  for (int t = 1; t <= steps; ++t) {
    const double sigma = schedule.sigma(t);
    inner = beta_sq * inner + sigma * sigma;
    beta_pow *= beta;
    const double bias = (1.0 - beta) / (1.0 - beta_pow);
    total += std::pow(constants.gamma, static_cast<double>(steps - t)) * bias *
             bias * inner;
  }
  return total;
}

THatResult compute_T_hat(double gamma, double beta, int scan_cap) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in (0, 1)");
  }
  check_beta_unit(beta);
  if (scan_cap < 1) {
    throw std::domain_error("scan cap must be at least 1");
  }
  // The condition gamma^{t-1} >= (1-beta)/(1-beta^t) holds with equality at
  // t = 1; rewrite as gamma^{t-1}(1-beta^t) >= 1-beta to avoid the division.
  THatResult result{1, false};
  double gamma_pow = 1.0;  // gamma^{t-1}
  double beta_pow = beta;  // beta^t
  while (result.value < scan_cap) {
    gamma_pow *= gamma;
    beta_pow *= beta;
    if (gamma_pow * (1.0 - beta_pow) >= 1.0 - beta) {
      ++result.value;
    } else {
      return result;
    }
  }
  result.capped = true;
  return result;
}

double momentum_zeta(double eta0, double gamma, double beta) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in (0, 1)");
  }
  check_beta_unit(beta);
  if (beta == gamma) {
    throw std::domain_error("beta must differ from gamma");
  }
  const double diff = gamma - beta;
  const double one_minus_beta = 1.0 - beta;
  const double k = beta * gamma /
                   (diff * diff * one_minus_beta * one_minus_beta * one_minus_beta);
  return 1.0 - 0.25 * eta0 - k * eta0 * eta0;
}

double momentum_eta0_bound(double gamma, double beta) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("gamma must lie in (0, 1)");
  }
  check_beta_unit(beta);
  if (beta == gamma) {
    throw std::domain_error("beta must differ from gamma");
  }
  const double diff = gamma - beta;
  const double one_minus_beta = 1.0 - beta;
  const double k = beta * gamma /
                   (diff * diff * one_minus_beta * one_minus_beta * one_minus_beta);
  return 8.0 / (std::sqrt(1.0 + 64.0 * k) + 1.0);
}

bool momentum_eta0_feasible(double eta0, double gamma, double beta) {
  if (!(eta0 > 0.0)) return false;
  return eta0 <= momentum_eta0_bound(gamma, beta);
}

}  // namespace dpsched
