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
// Budget-gated noisy training loops: clipped mean gradients with Gaussian
// noise, optional bias-corrected momentum, and a subsampled variant.

#ifndef DPSCHED_OPTIMIZER_HPP_
#define DPSCHED_OPTIMIZER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dpsched/models.hpp"
#include "dpsched/random.hpp"
#include "dpsched/schedules.hpp"

namespace dpsched {

struct RunOptions {
  std::vector<double> eta;  // a single entry broadcasts to every step
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> theta0;  // zero vector by default
  // Debug mode: skip both the noise and the budget accounting so the
  // schedule only supplies the step count.
  bool noiseless = false;
  // Audit hook: verify per-sample clipped gradient norms at every step.
  bool check_clip_norms = false;
};

struct RunRecord {
  std::vector<double> losses;  // f(theta_{t+1}) after each granted step
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_taken = 0;
  double budget_spent = 0.0;  // R-units
  std::uint64_t seed = 0;
  std::string schedule_id;
  double sigma_g_hat = 0.0;  // subsampled runs: empirical batch-noise scale
};

// Clipped mean gradient plus (G sigma / N) times the injected noise vector.
Eigen::VectorXd privatize_gradient(const LossModel& model,
                                   const Eigen::VectorXd& theta, double sigma,
                                   const Eigen::VectorXd& noise);

// Same, drawing the noise vector from the sampler.
Eigen::VectorXd privatize_gradient(const LossModel& model,
                                   const Eigen::VectorXd& theta, double sigma,
                                   GaussianSampler& sampler);

// One bias-corrected momentum step (1-based t, v_1 = 0):
//   v_{t+1} = beta v_t + (1 - beta) g_t,   m_{t+1} = v_{t+1} / (1 - beta^t).
// Returns (v_{t+1}, m_{t+1}); beta = 0 reproduces plain gradient descent.
std::pair<Eigen::VectorXd, Eigen::VectorXd> momentum_update(
    const Eigen::VectorXd& velocity, const Eigen::VectorXd& gradient,
    double beta, int t);

// Full-batch noisy training gated by a strict budget ledger; stops at the
// first denied step. Deterministic per seed within one build.
RunRecord run(const LossModel& model, const NoiseSchedule& schedule,
              const RunOptions& options);

// Default minibatch size max{N sqrt(R), 1} (rounded, clamped to [1, N]) for
// a true budget of R R-units.
int default_psgd_batch(int num_samples, double budget_r);

// Subsampled variant: each step averages `batch_size` clipped per-sample
// gradients drawn uniformly with replacement and noises at sensitivity G/n.
// The schedule's budget field holds R' = R / p^2 with p = n/N; the ledger is
// charged p^2/sigma_t^2 against the true budget R = p^2 R'.
RunRecord run_psgd(const LossModel& model, const NoiseSchedule& schedule,
                   int batch_size, const RunOptions& options);

}  // namespace dpsched

#endif  // DPSCHED_OPTIMIZER_HPP_
