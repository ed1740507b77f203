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

#include "dpsched/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpsched/analysis.hpp"
#include "dpsched/influence.hpp"
#include "dpsched/optimizer.hpp"
#include "dpsched/random.hpp"

namespace dpsched {
namespace {

// Tag mixed into base_seed for the shared start point, so that repeat seeds
// (base_seed, recipe, T, i) never collide with it.
constexpr std::uint64_t kStartPointTag = 0x7468657461ULL;

enum class RecipeId {
  kUniform,
  kDynamic,
  kGd,
  kExpFit,
  kMomentumUniform,
  kMomentumDynamic,
};

RecipeId resolve_recipe(const std::string& name) {
  if (name == "uniform") return RecipeId::kUniform;
  if (name == "dynamic") return RecipeId::kDynamic;
  if (name == "gd") return RecipeId::kGd;
  if (name == "exp-fit" || name == "exp") return RecipeId::kExpFit;
  if (name == "momentum-uniform") return RecipeId::kMomentumUniform;
  if (name == "momentum-dynamic" || name == "momentum") {
    return RecipeId::kMomentumDynamic;
  }
  throw std::invalid_argument("unknown schedule recipe: " + name);
}

bool recipe_needs_gamma(RecipeId id) {
  return id != RecipeId::kUniform && id != RecipeId::kMomentumUniform;
}

bool recipe_uses_momentum(RecipeId id) {
  return id == RecipeId::kMomentumUniform || id == RecipeId::kMomentumDynamic;
}

NoiseSchedule build_recipe_schedule(RecipeId id, int steps, double budget_r,
                                    double gamma, double beta) {
  switch (id) {
    case RecipeId::kUniform:
    case RecipeId::kMomentumUniform:
      return uniform_schedule(steps, budget_r);
    case RecipeId::kDynamic:
      return dynamic_from_influence(analytic_gd_influence(gamma, 1.0, steps).q,
                                    budget_r);
    case RecipeId::kGd:
      return gd_closed_form(gamma, steps, budget_r);
    case RecipeId::kExpFit:
      return fit_exponential(gd_closed_form(gamma, steps, budget_r)).schedule;
    case RecipeId::kMomentumDynamic:
      return momentum_dynamic(gamma, beta, steps, budget_r);
  }
  throw std::logic_error("unhandled recipe id");
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_std_of(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double sum_sq = 0.0;
  for (double v : values) sum_sq += (v - mean) * (v - mean);
  return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void validate_config(const ExperimentConfig& config) {
  if (config.repeats < 1) {
    throw std::invalid_argument("repeats must be at least 1");
  }
  if (config.t_min < 1 || config.t_max < config.t_min) {
    throw std::invalid_argument("horizon grid [T_min, T_max] is empty");
  }
  if (!(config.data_scale > 0.0)) {
    throw std::invalid_argument("data_scale must be positive");
  }
  if (!(config.beta >= 0.0 && config.beta < 1.0)) {
    throw std::invalid_argument("beta must lie in [0, 1)");
  }
  if (config.recipes.empty()) {
    throw std::invalid_argument("at least one recipe is required");
  }
  if (config.clip && !(*config.clip > 0.0)) {
    throw std::invalid_argument("clip norm must be positive");
  }
  if (!(config.theta1_norm >= 0.0)) {
    throw std::invalid_argument("theta1_norm must be nonnegative");
  }
  for (const std::string& name : config.recipes) resolve_recipe(name);
}

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& message) {
  std::ostringstream out;
  out << path << ":" << line << ": " << message;
  throw std::runtime_error(out.str());
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    std::string::size_type comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

Dataset gen_synthetic(int dim, int num_samples, double cluster_distance,
                      std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("dimension must be at least 1");
  if (num_samples < 2 || num_samples % 2 != 0) {
    throw std::invalid_argument("sample count must be even and at least 2");
  }
  if (!(cluster_distance >= 0.0)) {
    throw std::invalid_argument("cluster distance must be nonnegative");
  }
  GaussianSampler sampler(seed);
  Eigen::VectorXd direction = sampler.standard_normal_vector(dim);
  double norm = direction.norm();
  if (norm == 0.0) direction(0) = 1.0;  // unreachable in practice
  else direction /= norm;

  Dataset data;
  data.features.resize(num_samples, dim);
  data.labels.resize(num_samples);
  const int half = num_samples / 2;
  const Eigen::VectorXd offset = (cluster_distance / 2.0) * direction;
  for (int n = 0; n < num_samples; ++n) {
    const double sign = n < half ? 1.0 : -1.0;
    data.features.row(n) =
        (sign * offset + sampler.standard_normal_vector(dim)).transpose();
    data.labels(n) = sign;
  }
  return data;
}

Dataset preprocess(const Dataset& data, double target_max_norm) {
  if (!(target_max_norm > 0.0)) {
    throw std::invalid_argument("target max norm must be positive");
  }
  if (data.num_samples() < 1) {
    throw std::invalid_argument("cannot preprocess an empty dataset");
  }
  Dataset out = data;
  const int n = out.num_samples();
  for (int j = 0; j < out.dim(); ++j) {
    auto column = out.features.col(j);
    column.array() -= column.mean();
    const double stddev = std::sqrt(column.squaredNorm() / n);
    if (stddev > 0.0) {
      column /= stddev;
    } else {
      std::cerr << "warning: column " << j + 1
                << " has zero variance; left centered without scaling\n";
    }
  }
  const double max_norm = out.max_norm();
  if (!(max_norm > 0.0)) {
    throw std::invalid_argument(
        "all rows are zero after centering; cannot reach the target norm");
  }
  out.features *= target_max_norm / max_norm;
  return out;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_fields(line);
  bool has_labels = !header.empty() && header.back() == "label";
  const int dim = static_cast<int>(header.size()) - (has_labels ? 1 : 0);
  if (dim < 1) parse_fail(path, 1, "header has no feature columns");
  for (int j = 0; j < dim; ++j) {
    if (header[j] != "x" + std::to_string(j + 1)) {
      parse_fail(path, 1, "malformed header field '" + header[j] +
                              "' (expected x" + std::to_string(j + 1) + ")");
    }
  }

  std::vector<double> values;
  std::vector<double> labels;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (static_cast<int>(fields.size()) != static_cast<int>(header.size())) {
      parse_fail(path, line_number,
                 "expected " + std::to_string(header.size()) +
                     " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string& cell = fields[j];
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        parse_fail(path, line_number, "non-numeric cell '" + cell + "'");
      }
      if (has_labels && j + 1 == fields.size()) {
        if (value != 1.0 && value != -1.0) {
          parse_fail(path, line_number, "label must be +1 or -1");
        }
        labels.push_back(value);
      } else {
        values.push_back(value);
      }
    }
  }

  Dataset data;
  const int rows = static_cast<int>(values.size()) / dim;
  data.features.resize(rows, dim);
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < dim; ++j) {
      data.features(r, j) = values[static_cast<std::size_t>(r) * dim + j];
    }
  }
  if (has_labels) {
    data.labels = Eigen::Map<Eigen::VectorXd>(labels.data(),
                                              static_cast<Eigen::Index>(rows));
  }
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (int j = 0; j < data.dim(); ++j) {
    if (j > 0) out << ',';
    out << 'x' << j + 1;
  }
  if (data.has_labels()) out << ",label";
  out << '\n';
  for (int n = 0; n < data.num_samples(); ++n) {
    for (int j = 0; j < data.dim(); ++j) {
      if (j > 0) out << ',';
      out << format_double(data.features(n, j));
    }
    if (data.has_labels()) out << ',' << (data.labels(n) > 0 ? "1" : "-1");
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& error) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                error.what());
  }
  if (!parsed.is_object()) {
    throw std::invalid_argument("config root must be a JSON object");
  }

  ExperimentConfig config;
  for (const auto& [key, value] : parsed.items()) {
    if (key == "model") {
      const std::string name = value.get<std::string>();
      if (name == "quadratic") config.model = LossKind::kQuadratic;
      else if (name == "logistic") config.model = LossKind::kLogistic;
      else throw std::invalid_argument("unknown model kind: " + name);
    } else if (key == "data") {
      config.data = value.get<std::string>();
    } else if (key == "D") {
      config.synthetic_dim = value.get<int>();
    } else if (key == "N") {
      config.synthetic_samples = value.get<int>();
    } else if (key == "distance") {
      config.synthetic_distance = value.get<double>();
    } else if (key == "data_seed") {
      config.synthetic_seed = value.get<std::uint64_t>();
    } else if (key == "data_scale") {
      config.data_scale = value.get<double>();
    } else if (key == "R") {
      config.budget_r = value.is_string()
                            ? std::numeric_limits<double>::infinity()
                            : value.get<double>();
    } else if (key == "clip") {
      if (value.is_null()) config.clip.reset();
      else config.clip = value.get<double>();
    } else if (key == "eta") {
      config.eta = value.get<double>();
    } else if (key == "beta") {
      config.beta = value.get<double>();
    } else if (key == "recipes") {
      config.recipes = value.get<std::vector<std::string>>();
    } else if (key == "T_min") {
      config.t_min = value.get<int>();
    } else if (key == "T_max") {
      config.t_max = value.get<int>();
    } else if (key == "repeats") {
      config.repeats = value.get<int>();
    } else if (key == "base_seed") {
      config.base_seed = value.get<std::uint64_t>();
    } else if (key == "gamma") {
      config.gamma_override = value.get<double>();
    } else if (key == "theta1_norm") {
      config.theta1_norm = value.get<double>();
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  validate_config(config);
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  validate_config(config);

  const Dataset raw =
      config.data == "synthetic"
          ? gen_synthetic(config.synthetic_dim, config.synthetic_samples,
                          config.synthetic_distance, config.synthetic_seed)
          : load_csv(config.data);
  const Dataset prepared = preprocess(raw, config.data_scale);
  const LossModel model(config.model, prepared, config.clip);

  const bool noiseless =
      !(config.budget_r > 0.0) || !std::isfinite(config.budget_r);

  // One shared random start point keeps the recipe comparison fair.
  Eigen::VectorXd theta1 = Eigen::VectorXd::Zero(model.dim());
  if (config.theta1_norm > 0.0) {
    GaussianSampler direction_sampler(
        hash_combine(config.base_seed, kStartPointTag));
    theta1 = direction_sampler.standard_normal_vector(model.dim());
    theta1 *= config.theta1_norm / theta1.norm();
  }

  double gamma = std::numeric_limits<double>::quiet_NaN();
  double smoothness = 0.0;
  ExperimentReport report;
  report.scale = config.data_scale;
  report.noiseless = noiseless;
  if (config.model == LossKind::kQuadratic) {
    const Spectrum spectrum = model.estimate_spectrum();
    smoothness = spectrum.m_max;
    gamma = 1.0 - spectrum.mu_min / spectrum.m_max;
    report.init_gap = model.loss(theta1) - model.optimal_loss();
    if (!noiseless && report.init_gap > 0.0 && config.clip) {
      report.alpha =
          derive_constants(model.lipschitz_bound(), spectrum.m_max,
                           spectrum.mu_min, model.dim(), model.num_samples(),
                           config.budget_r, report.init_gap)
              .alpha;
    }
  }
  if (config.gamma_override) gamma = *config.gamma_override;
  report.gamma = std::isnan(gamma) ? 0.0 : gamma;

  if (config.eta <= 0.0 && config.model != LossKind::kQuadratic) {
    throw std::invalid_argument(
        "eta must be given explicitly for the logistic loss");
  }

  const int grid_size = config.t_max - config.t_min + 1;
  for (std::size_t r = 0; r < config.recipes.size(); ++r) {
    RecipeResult result;
    result.recipe = config.recipes[r];
    const RecipeId id = resolve_recipe(result.recipe);
    const double train_beta = recipe_uses_momentum(id) ? config.beta : 0.0;
    double eta = config.eta;
    if (eta <= 0.0) {
      eta = recipe_uses_momentum(id)
                ? momentum_eta0_bound(gamma, train_beta) / (2.0 * smoothness)
                : 1.0 / smoothness;
    }
    if (!noiseless && recipe_needs_gamma(id) && std::isnan(gamma)) {
      result.failed = true;
      result.failure = "recipe requires a contraction factor; supply gamma";
      report.recipes.push_back(std::move(result));
      continue;
    }

    const auto started = std::chrono::steady_clock::now();
    std::vector<std::vector<double>> losses_by_t;
    losses_by_t.reserve(static_cast<std::size_t>(grid_size));
    try {
      for (int steps = config.t_min; steps <= config.t_max; ++steps) {
        const NoiseSchedule schedule =
            noiseless
                ? uniform_schedule(steps, 1.0)  // only the step count is used
                : build_recipe_schedule(id, steps, config.budget_r, gamma,
                                        train_beta);
        if (!noiseless && !validate(schedule).feasible) {
          throw std::invalid_argument("schedule overruns the budget");
        }
        std::vector<double> finals;
        finals.reserve(static_cast<std::size_t>(config.repeats));
        for (int i = 0; i < config.repeats; ++i) {
          RunOptions options;
          options.eta = {eta};
          options.beta = train_beta;
          options.seed = hash_combine(
              hash_combine(
                  hash_combine(config.base_seed, static_cast<std::uint64_t>(r)),
                  static_cast<std::uint64_t>(steps)),
              static_cast<std::uint64_t>(i));
          options.theta0 = theta1;
          options.noiseless = noiseless;
          const RunRecord record = run(model, schedule, options);
          if (!noiseless && !(record.budget_spent <= config.budget_r)) {
            throw std::logic_error("budget audit failed: run overspent");
          }
          finals.push_back(record.final_loss);
        }
        losses_by_t.push_back(std::move(finals));
      }
    } catch (const std::exception& error) {
      result.failed = true;
      result.failure = error.what();
      report.recipes.push_back(std::move(result));
      continue;
    }

    result.mean_by_t.resize(losses_by_t.size());
    int best = 0;
    for (std::size_t g = 0; g < losses_by_t.size(); ++g) {
      result.mean_by_t[g] = mean_of(losses_by_t[g]);
      if (result.mean_by_t[g] < result.mean_by_t[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(g);
      }
    }
    for (double m : result.mean_by_t) {
      if (result.mean_by_t[static_cast<std::size_t>(best)] > m) {
        throw std::logic_error("grid search selected a dominated horizon");
      }
    }
    result.best_t = config.t_min + best;
    result.best_losses = losses_by_t[static_cast<std::size_t>(best)];
    result.mean_loss = result.mean_by_t[static_cast<std::size_t>(best)];
    result.std_loss = sample_std_of(result.best_losses, result.mean_loss);

    if (!std::isnan(gamma) && gamma > 0.0 && gamma < 1.0) {
      const double scale = report.alpha > 0.0 ? report.alpha : 1.0;
      try {
        const InfluenceProfile profile =
            recipe_uses_momentum(id)
                ? analytic_momentum_influence(gamma, train_beta, result.best_t)
                : analytic_gd_influence(gamma, scale, result.best_t);
        result.influence_variance = dynamic_advantage(profile);
      } catch (const std::exception&) {
        result.influence_variance = 0.0;
      }
    }

    const auto finished = std::chrono::steady_clock::now();
    result.runtime_ms =
        std::chrono::duration<double, std::milli>(finished - started).count();
    report.recipes.push_back(std::move(result));
  }

  // Relative losses against the uniform recipe (first recipe when uniform
  // was not requested); the baseline's own entry is exactly zero.
  int baseline = -1;
  for (std::size_t r = 0; r < report.recipes.size(); ++r) {
    if (report.recipes[r].recipe == "uniform" && !report.recipes[r].failed) {
      baseline = static_cast<int>(r);
      break;
    }
  }
  if (baseline < 0) {
    for (std::size_t r = 0; r < report.recipes.size(); ++r) {
      if (!report.recipes[r].failed) {
        baseline = static_cast<int>(r);
        break;
      }
    }
  }
  if (baseline >= 0) {
    const double base_loss =
        report.recipes[static_cast<std::size_t>(baseline)].mean_loss;
    for (std::size_t r = 0; r < report.recipes.size(); ++r) {
      RecipeResult& entry = report.recipes[r];
      if (entry.failed) continue;
      entry.rel_loss = static_cast<int>(r) == baseline || base_loss == 0.0
                           ? 0.0
                           : (entry.mean_loss - base_loss) / base_loss;
    }
  }
  return report;
}

std::vector<ExperimentReport> scale_sweep(const ExperimentConfig& config,
                                          std::span<const double> scales) {
  std::vector<ExperimentReport> reports;
  reports.reserve(scales.size());
  for (double scale : scales) {
    if (!(scale > 0.0)) {
      throw std::invalid_argument("data scales must be positive");
    }
    ExperimentConfig scaled = config;
    scaled.data_scale = scale;
    reports.push_back(run_experiment(scaled));
  }
  return reports;
}

std::string report_csv(std::span<const ExperimentReport> reports,
                       bool include_runtime) {
  std::ostringstream out;
  out << "recipe,scale,best_T,mean_loss,std_loss,rel_loss,influence_variance";
  if (include_runtime) out << ",runtime_ms";
  out << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const ExperimentReport& report : reports) {
    for (const RecipeResult& entry : report.recipes) {
      out << entry.recipe << ',' << format_double(report.scale) << ','
          << entry.best_t << ','
          << format_double(entry.failed ? nan : entry.mean_loss) << ','
          << format_double(entry.failed ? nan : entry.std_loss) << ','
          << format_double(entry.failed ? nan : entry.rel_loss) << ','
          << format_double(entry.failed ? nan : entry.influence_variance);
      if (include_runtime) {
        char buffer[64];
        std::snprintf(buffer, sizeof(buffer), "%.3f", entry.runtime_ms);
        out << ',' << buffer;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace dpsched
