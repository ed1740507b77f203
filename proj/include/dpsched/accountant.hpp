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
// Privacy accounting for per-step Gaussian noise under zero-concentrated
// differential privacy (zCDP), plus conversions to and from (epsilon, delta)
// guarantees.

#ifndef DPSCHED_ACCOUNTANT_HPP_
#define DPSCHED_ACCOUNTANT_HPP_

#include <span>
#include <vector>

namespace dpsched {

// One Gaussian-noised release. Budgets in this project are tracked in
// "R-units" of 1/sigma^2: the convention absorbs the 1/2 of the raw zCDP
// cost, so a run whose R-unit costs sum to at most R is (R/2)-zCDP.
struct StepCost {
  double rho_r_units = 0.0;  // 1/sigma^2 for a full-batch Gaussian step
  double sigma = 0.0;

  static StepCost from_sigma(double sigma);
};

struct DpPoint {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Raw zCDP cost of one Gaussian step at unit sensitivity: 1/(2 sigma^2).
double gaussian_step_cost(double sigma);

// Adds up zCDP costs of adaptively composed steps.
double compose(std::span<const double> rho_costs);

// rho-zCDP implies (rho + 2 sqrt(rho ln(1/delta)), delta)-DP.
double zcdp_to_dp(double rho, double delta);

// Exact inverse of zcdp_to_dp in rho, evaluated in the cancellation-free
// form rho = (epsilon / (sqrt(L + epsilon) + sqrt(L)))^2 with L = ln(1/delta).
double dp_to_zcdp(double epsilon, double delta);

// R-unit cost of one subsampled Gaussian step at sampling rate p: p^2/sigma^2.
double subsampled_step_cost(double sigma, double sample_rate);

// Budget ledger over R-units. A request is granted only while the step cost
// is strictly below the remaining budget; a denial leaves the ledger
// untouched and the caller must stop releasing.
class PrivacyLedger {
 public:
  explicit PrivacyLedger(double total_r);

  // Returns true and records the step when granted; false otherwise.
  bool request(const StepCost& cost);

  double total_r() const { return total_r_; }
  double residual_r() const;
  double spent_r_units() const { return spent_total_; }
  // Raw zCDP actually consumed so far: 1/2 of the R-unit total.
  double spent_zcdp() const { return 0.5 * spent_total_; }
  const std::vector<StepCost>& spent() const { return spent_; }

 private:
  double total_r_ = 0.0;
  double spent_total_ = 0.0;
  std::vector<StepCost> spent_;
};

}  // namespace dpsched

#endif  // DPSCHED_ACCOUNTANT_HPP_
