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

#include "dpsched/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpsched {

StepCost StepCost::from_sigma(double sigma) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("noise scale must be positive");
  }
  return StepCost{1.0 / (sigma * sigma), sigma};
}

double gaussian_step_cost(double sigma) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("noise scale must be positive");
  }
  return 1.0 / (2.0 * sigma * sigma);
}

double compose(std::span<const double> rho_costs) {
  double total = 0.0;
  for (double rho : rho_costs) {
    if (!(rho >= 0.0)) {
      throw std::domain_error("zCDP costs must be nonnegative");
    }
    total += rho;
  }
  return total;
}

double zcdp_to_dp(double rho, double delta) {
  if (!(rho >= 0.0)) {
    throw std::domain_error("rho must be nonnegative");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("delta must lie in (0, 1)");
  }
  const double l = std::log(1.0 / delta);
  return rho + 2.0 * std::sqrt(rho * l);
}

double dp_to_zcdp(double epsilon, double delta) {
  if (!(epsilon >= 0.0)) {
    throw std::domain_error("epsilon must be nonnegative");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("delta must lie in (0, 1)");
  }
  const double l = std::log(1.0 / delta);
  const double sqrt_rho = epsilon / (std::sqrt(l + epsilon) + std::sqrt(l));
  return sqrt_rho * sqrt_rho;
}

double subsampled_step_cost(double sigma, double sample_rate) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("noise scale must be positive");
  }
  if (!(sample_rate > 0.0 && sample_rate <= 1.0)) {
    throw std::domain_error("sample rate must lie in (0, 1]");
  }
  return (sample_rate * sample_rate) / (sigma * sigma);
}

PrivacyLedger::PrivacyLedger(double total_r) : total_r_(total_r) {
  if (!(total_r > 0.0)) {
    throw std::domain_error("budget must be positive");
  }
}

bool PrivacyLedger::request(const StepCost& cost) {
  if (!(cost.rho_r_units >= 0.0)) {
    throw std::domain_error("step cost must be nonnegative");
  }
  // Strict inequality: a step that would consume the budget exactly is
  // refused, so the residual never reaches zero through grants.
  if (!(cost.rho_r_units < residual_r())) {
    return false;
  }
  spent_total_ += cost.rho_r_units;
  spent_.push_back(cost);
  return true;
}

double PrivacyLedger::residual_r() const {
  return std::max(0.0, total_r_ - spent_total_);
}

}  // namespace dpsched
