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
// Experiment protocol: synthetic data, preprocessing, dataset CSV I/O, and
// the grid-search comparison of noise-schedule recipes.

#ifndef DPSCHED_HARNESS_HPP_
#define DPSCHED_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpsched/models.hpp"

namespace dpsched {

// Two Gaussian clusters with unit isotropic spread, centered at +-d/2 along
// a random unit direction, labeled +1 and -1 (N/2 each, N even).
Dataset gen_synthetic(int dim, int num_samples, double cluster_distance,
                      std::uint64_t seed);

// Centers every column to mean zero and unit standard deviation (columns
// with zero variance are left centered, with a warning), then scales all
// rows by one constant so the largest row norm equals target_max_norm.
Dataset preprocess(const Dataset& data, double target_max_norm);

// Dataset CSV: header "x1,...,xD[,label]", labels in {-1, +1}. Parse errors
// carry the offending line number.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path);

struct ExperimentConfig {
  LossKind model = LossKind::kQuadratic;
  std::string data = "synthetic";  // "synthetic" or a dataset CSV path
  int synthetic_dim = 100;
  int synthetic_samples = 1000;
  double synthetic_distance = 10.0;
  std::uint64_t synthetic_seed = 13;
  double data_scale = 10.0;  // target max row norm after preprocessing
  // Privacy budget in R-units; a non-positive or infinite value switches
  // the whole experiment into the noise-free debug mode.
  double budget_r = 0.3927;
  std::optional<double> clip = 4.0;
  double eta = 0.0;  // <= 0 selects 1/M from the spectrum (quadratic only)
  double beta = 0.5;
  std::vector<std::string> recipes{"uniform", "dynamic"};
  int t_min = 1;
  int t_max = 100;
  int repeats = 100;
  std::uint64_t base_seed = 1;
  // Contraction factor for schedule construction when it cannot be derived
  // from the data (the logistic loss has no closed-form spectrum).
  std::optional<double> gamma_override;
  double theta1_norm = 1.0;  // start-point norm; the direction is seeded
};

// Keys: model, data, data_scale, R, clip, eta, beta, recipes, T_min, T_max,
// repeats, base_seed; optional D, N, distance, data_seed, gamma, theta1_norm.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct RecipeResult {
  std::string recipe;
  bool failed = false;
  std::string failure;
  int best_t = 0;
  double mean_loss = 0.0;
  double std_loss = 0.0;
  double rel_loss = 0.0;            // (mean - uniform mean) / uniform mean
  double influence_variance = 0.0;  // dynamic_advantage at best_t
  double runtime_ms = 0.0;
  std::vector<double> best_losses;  // per-repeat final losses at best_t
  std::vector<double> mean_by_t;    // grid means, index T - t_min
};

struct ExperimentReport {
  double scale = 0.0;
  bool noiseless = false;
  double gamma = 0.0;
  double alpha = 0.0;
  double init_gap = 0.0;
  std::vector<RecipeResult> recipes;
};

// For every recipe and every horizon in [T_min, T_max], runs `repeats`
// seeded trainings and averages the final loss; the reported row is the
// horizon with the smallest mean (ties break toward the smaller horizon).
// Repeat seeds derive from hash_combine(base_seed, recipe index, T, i), so
// reports are deterministic up to runtimes.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::vector<ExperimentReport> scale_sweep(const ExperimentConfig& config,
                                          std::span<const double> scales);

// Columns: recipe, scale, best_T, mean_loss, std_loss, rel_loss,
// influence_variance, runtime_ms. Byte-identical across invocations when
// runtimes are excluded.
std::string report_csv(std::span<const ExperimentReport> reports,
                       bool include_runtime = true);

}  // namespace dpsched

#endif  // DPSCHED_HARNESS_HPP_
