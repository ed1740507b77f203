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
#include <stdexcept>

#include "dpsched/accountant.hpp"

namespace dpsched {
namespace {

constexpr double kClipAuditSlack = 1e-12;  // relative

const double* eta_table(const RunOptions& options, int steps) {
  if (options.eta.empty()) {
    throw std::invalid_argument("a step size is required");
  }
  if (options.eta.size() != 1 &&
      static_cast<int>(options.eta.size()) != steps) {
    throw std::invalid_argument(
        "eta must be a scalar or match the schedule length");
  }
  return options.eta.data();
}

double eta_at(const RunOptions& options, const double* table, int t) {
  return options.eta.size() == 1 ? table[0] : table[t - 1];
}

Eigen::VectorXd initial_theta(const LossModel& model, const RunOptions& options) {
  if (options.theta0) {
    if (options.theta0->size() != model.dim()) {
      throw std::invalid_argument("theta0 dimension mismatch");
    }
    return *options.theta0;
  }
  return Eigen::VectorXd::Zero(model.dim());
}

void audit_clip_norms(const LossModel& model, const Eigen::VectorXd& theta) {
  if (!model.clip_norm()) return;
  const double worst = model.max_clipped_gradient_norm(theta);
  if (worst > *model.clip_norm() * (1.0 + kClipAuditSlack)) {
    throw std::logic_error("clipped gradient norm exceeded the clip threshold");
  }
}

}  // namespace

Eigen::VectorXd privatize_gradient(const LossModel& model,
                                   const Eigen::VectorXd& theta, double sigma,
                                   const Eigen::VectorXd& noise) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("noise scale must be positive");
  }
  if (noise.size() != model.dim()) {
    throw std::invalid_argument("noise dimension mismatch");
  }
  const double scale = model.lipschitz_bound() * sigma / model.num_samples();
  return model.clipped_mean_gradient(theta) + scale * noise;
}

Eigen::VectorXd privatize_gradient(const LossModel& model,
                                   const Eigen::VectorXd& theta, double sigma,
                                   GaussianSampler& sampler) {
  return privatize_gradient(model, theta, sigma,
                            sampler.standard_normal_vector(model.dim()));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> momentum_update(
    const Eigen::VectorXd& velocity, const Eigen::VectorXd& gradient,
    double beta, int t) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::domain_error("beta must lie in [0, 1)");
  }
  if (t < 1) {
    throw std::domain_error("step index starts at 1");
  }
  if (velocity.size() != gradient.size()) {
    throw std::invalid_argument("velocity dimension mismatch");
  }
  Eigen::VectorXd next = beta * velocity + (1.0 - beta) * gradient;
  const double bias = 1.0 - std::pow(beta, static_cast<double>(t));
  Eigen::VectorXd corrected = next / bias;
  return {std::move(next), std::move(corrected)};
}

RunRecord run(const LossModel& model, const NoiseSchedule& schedule,
              const RunOptions& options) {
  const int steps = schedule.length();
  if (steps < 1) {
    throw std::invalid_argument("schedule needs at least one step");
  }
  if (!options.noiseless && !validate(schedule).feasible) {
    throw std::invalid_argument("schedule exceeds its privacy budget");
  }
  const double* etas = eta_table(options, steps);
  Eigen::VectorXd theta = initial_theta(model, options);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.dim());
  GaussianSampler sampler(options.seed);
  std::optional<PrivacyLedger> ledger;
  if (!options.noiseless) ledger.emplace(schedule.budget_r);

  RunRecord record;
  record.seed = options.seed;
  record.schedule_id = schedule_label(schedule);
  record.initial_loss = model.loss(theta);
  record.losses.reserve(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    const double sigma = schedule.sigma(t);
    if (ledger && !ledger->request(StepCost::from_sigma(sigma))) break;
    if (options.check_clip_norms) audit_clip_norms(model, theta);
    const Eigen::VectorXd gradient =
        options.noiseless ? model.clipped_mean_gradient(theta)
                          : privatize_gradient(model, theta, sigma, sampler);
    auto [next_velocity, direction] =
        momentum_update(velocity, gradient, options.beta, t);
    velocity = std::move(next_velocity);
    theta -= eta_at(options, etas, t) * direction;
    record.losses.push_back(model.loss(theta));
  }
  record.steps_taken = static_cast<int>(record.losses.size());
  record.final_loss =
      record.losses.empty() ? record.initial_loss : record.losses.back();
  record.budget_spent = ledger ? ledger->spent_r_units() : 0.0;
  return record;
}

int default_psgd_batch(int num_samples, double budget_r) {
  if (num_samples < 1) {
    throw std::domain_error("need at least one sample");
  }
  if (!(budget_r > 0.0)) {
    throw std::domain_error("budget must be positive");
  }
  const double raw = num_samples * std::sqrt(budget_r);
  long long batch = std::llround(raw);
  if (batch < 1) batch = 1;
  if (batch > num_samples) batch = num_samples;
  return static_cast<int>(batch);
}

RunRecord run_psgd(const LossModel& model, const NoiseSchedule& schedule,
                   int batch_size, const RunOptions& options) {
  const int steps = schedule.length();
  if (steps < 1) {
    throw std::invalid_argument("schedule needs at least one step");
  }
  const int population = model.num_samples();
  if (batch_size < 1 || batch_size > population) {
    throw std::domain_error("batch size out of range");
  }
  if (!options.noiseless && !validate(schedule).feasible) {
    throw std::invalid_argument("schedule exceeds its privacy budget");
  }
  const double rate = static_cast<double>(batch_size) / population;
  const double* etas = eta_table(options, steps);
  const double noise_bound = options.noiseless ? 0.0 : model.lipschitz_bound();
  Eigen::VectorXd theta = initial_theta(model, options);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.dim());
  GaussianSampler sampler(options.seed);
  std::optional<PrivacyLedger> ledger;
  // The schedule is built against R' = R / p^2; the ledger tracks the true
  // budget R and is charged the subsampled step cost p^2/sigma^2.
  if (!options.noiseless) ledger.emplace(schedule.budget_r * rate * rate);

  RunRecord record;
  record.seed = options.seed;
  record.schedule_id = schedule_label(schedule);
  record.initial_loss = model.loss(theta);
  Dataset batch;
  batch.features.resize(batch_size, model.dim());
  if (model.data().has_labels()) batch.labels.resize(batch_size);
  double residual_sq_sum = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double sigma = schedule.sigma(t);
    if (ledger &&
        !ledger->request(StepCost{subsampled_step_cost(sigma, rate), sigma})) {
      break;
    }
    for (int i = 0; i < batch_size; ++i) {
      const auto pick = static_cast<Eigen::Index>(
          bounded_u64(sampler.next_u64(), static_cast<std::uint64_t>(population)));
      batch.features.row(i) = model.data().features.row(pick);
      if (batch.labels.size()) batch.labels[i] = model.data().labels[pick];
    }
    const LossModel batch_model(model.kind(), batch, model.clip_norm());
    if (options.check_clip_norms) audit_clip_norms(batch_model, theta);
    Eigen::VectorXd gradient = batch_model.clipped_mean_gradient(theta);
    residual_sq_sum +=
        (gradient - model.clipped_mean_gradient(theta)).squaredNorm();
    if (!options.noiseless) {
      gradient += (noise_bound * sigma / batch_size) *
                  sampler.standard_normal_vector(model.dim());
    }
    auto [next_velocity, direction] =
        momentum_update(velocity, gradient, options.beta, t);
    velocity = std::move(next_velocity);
    theta -= eta_at(options, etas, t) * direction;
    record.losses.push_back(model.loss(theta));
  }
  record.steps_taken = static_cast<int>(record.losses.size());
  record.final_loss =
      record.losses.empty() ? record.initial_loss : record.losses.back();
  record.budget_spent = ledger ? ledger->spent_r_units() : 0.0;
  if (record.steps_taken > 0) {
    // Model the batch gradient as the full gradient plus sigma_g xi / n with
    // E||xi||^2 = D, and report the empirical sigma_g.
    record.sigma_g_hat =
        batch_size * std::sqrt(residual_sq_sum /
                               (static_cast<double>(record.steps_taken) *
                                model.dim()));
  }
  return record;
}

}  // namespace dpsched
