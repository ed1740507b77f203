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
// dpsched command line: privacy accounting, bound analysis, schedule
// construction, noisy training, influence estimation, and experiments.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpsched/accountant.hpp"
#include "dpsched/analysis.hpp"
#include "dpsched/harness.hpp"
#include "dpsched/influence.hpp"
#include "dpsched/models.hpp"
#include "dpsched/optimizer.hpp"
#include "dpsched/schedules.hpp"

namespace {

using namespace dpsched;

std::string fmt(double value, const char* spec = "%.12g") {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), spec, value);
  return buffer;
}

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream buffer;
    buffer << std::cin.rdbuf();
    return buffer.str();
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);
  out << text;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  if (values.empty()) throw std::invalid_argument("empty list: " + text);
  return values;
}

// Accepts the output of the `schedule` subcommand (or any CSV with a header
// naming a `sigma` column) and returns the per-step noise scales.
std::vector<double> load_schedule_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ":1: missing header");
  }
  int sigma_column = -1;
  {
    std::stringstream header(line);
    std::string name;
    for (int j = 0; std::getline(header, name, ','); ++j) {
      if (name == "sigma") sigma_column = j;
    }
  }
  if (sigma_column < 0) {
    throw std::runtime_error(path + ":1: no `sigma` column in header");
  }
  std::vector<double> sigmas;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    for (int j = 0; j <= sigma_column; ++j) {
      if (!std::getline(row, cell, ',')) {
        throw std::runtime_error(path + ":" + std::to_string(line_number) +
                                 ": missing sigma field");
      }
    }
    sigmas.push_back(std::stod(cell));
  }
  if (sigmas.empty()) throw std::runtime_error(path + ": empty schedule");
  return sigmas;
}

LossKind parse_model_kind(const std::string& name) {
  if (name == "quadratic") return LossKind::kQuadratic;
  if (name == "logistic") return LossKind::kLogistic;
  throw std::invalid_argument("unknown model kind: " + name);
}

// Shared by train/influence: dataset from CSV with optional re-scaling.
Dataset load_dataset(const std::string& path, double scale) {
  Dataset data = load_csv(path);
  if (scale > 0.0) data = preprocess(data, scale);
  return data;
}

double resolve_eta(const LossModel& model, double eta_flag) {
  if (eta_flag > 0.0) return eta_flag;
  if (model.kind() != LossKind::kQuadratic) {
    throw std::invalid_argument("--eta is required for the logistic loss");
  }
  return 1.0 / model.estimate_spectrum().m_max;
}

void add_account(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "account", "Convert between zCDP, (eps, delta)-DP, and step costs");
  auto rho = std::make_shared<double>(0.0);
  auto eps = std::make_shared<double>(0.0);
  auto delta = std::make_shared<double>(0.0);
  auto sigma = std::make_shared<double>(0.0);
  auto rate = std::make_shared<double>(1.0);
  cmd->add_option("--rho", *rho, "zCDP parameter rho to convert to (eps, delta)");
  cmd->add_option("--eps", *eps, "DP epsilon to convert to zCDP");
  cmd->add_option("--delta", *delta, "DP delta for either conversion");
  cmd->add_option("--sigma", *sigma, "noise scale whose step cost to report");
  cmd->add_option("--rate", *rate, "subsampling rate for the step cost");
  cmd->callback([cmd, rho, eps, delta, sigma, rate] {
    std::ostringstream out;
    if (cmd->count("--sigma") > 0) {
      const double r_units = cmd->count("--rate") > 0
                                 ? subsampled_step_cost(*sigma, *rate)
                                 : 1.0 / (*sigma * *sigma);
      out << "sigma=" << fmt(*sigma) << " r_units=" << fmt(r_units)
          << " zcdp_rho=" << fmt(0.5 * r_units);
    } else if (cmd->count("--eps") > 0) {
      if (cmd->count("--delta") == 0) {
        throw CLI::ValidationError("--eps needs --delta");
      }
      out << "zcdp_rho=" << fmt(dp_to_zcdp(*eps, *delta))
          << " eps=" << fmt(*eps) << " delta=" << fmt(*delta);
    } else if (cmd->count("--rho") > 0) {
      if (cmd->count("--delta") == 0) {
        throw CLI::ValidationError("--rho needs --delta");
      }
      out << "eps=" << fmt(zcdp_to_dp(*rho, *delta)) << " rho=" << fmt(*rho)
          << " delta=" << fmt(*delta);
    } else {
      throw CLI::ValidationError("give --sigma, --eps, or --rho");
    }
    std::cout << out.str() << "\n";
  });
}

void add_analyze(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "analyze",
      "Derive problem constants, optimal horizons, and risk bounds");
  auto problem = std::make_shared<std::string>();
  cmd->add_option("--problem", *problem,
                  "JSON file (keys G, M, mu, D, N, R, init_gap, beta); - for "
                  "standard input")
      ->required();
  cmd->callback([problem] {
    const nlohmann::json spec = nlohmann::json::parse(read_text(*problem));
    const double beta = spec.value("beta", 0.0);
    const ProblemConstants constants = derive_constants(
        spec.at("G").get<double>(), spec.at("M").get<double>(),
        spec.at("mu").get<double>(), spec.at("D").get<double>(),
        spec.at("N").get<double>(), spec.at("R").get<double>(),
        spec.at("init_gap").get<double>());
    const int t_uniform = optimal_T_uniform(constants);
    const int t_dynamic = optimal_T_dynamic(constants);
    const THatResult t_hat = compute_T_hat(constants.gamma, beta);
    const double erub_uniform =
        erub_gd(constants, uniform_schedule(t_uniform, constants.budget_r));
    const double erub_dynamic = erub_gd(
        constants,
        gd_closed_form(constants.gamma, t_dynamic, constants.budget_r));
    std::cout << "alpha,kappa,gamma,T_uniform,T_dynamic,T_hat,erub_uniform,"
                 "erub_dynamic\n"
              << fmt(constants.alpha) << ',' << fmt(constants.kappa) << ','
              << fmt(constants.gamma) << ',' << t_uniform << ',' << t_dynamic
              << ',' << t_hat.value << ',' << fmt(erub_uniform) << ','
              << fmt(erub_dynamic) << "\n";
  });
}

void add_schedule(CLI::App& app) {
  auto* cmd = app.add_subcommand("schedule",
                                 "Emit a noise schedule as CSV on stdout");
  auto recipe = std::make_shared<std::string>();
  auto steps = std::make_shared<int>(0);
  auto budget = std::make_shared<double>(0.0);
  auto gamma = std::make_shared<double>(0.0);
  auto beta = std::make_shared<double>(0.0);
  cmd->add_option("--recipe", *recipe, "uniform, dynamic, gd, momentum, exp-fit")
      ->required();
  cmd->add_option("--T", *steps, "number of steps")->required();
  cmd->add_option("--R", *budget, "privacy budget in R-units")->required();
  cmd->add_option("--gamma", *gamma, "contraction factor in (0, 1)");
  cmd->add_option("--beta", *beta, "momentum parameter in [0, 1)");
  cmd->callback([recipe, steps, budget, gamma, beta] {
    NoiseSchedule schedule;
    if (*recipe == "uniform") {
      schedule = uniform_schedule(*steps, *budget);
    } else if (*recipe == "dynamic") {
      schedule = dynamic_from_influence(
          analytic_gd_influence(*gamma, 1.0, *steps).q, *budget);
    } else if (*recipe == "gd") {
      schedule = gd_closed_form(*gamma, *steps, *budget);
    } else if (*recipe == "momentum") {
      schedule = momentum_dynamic(*gamma, *beta, *steps, *budget);
    } else if (*recipe == "exp-fit") {
      schedule = fit_exponential(gd_closed_form(*gamma, *steps, *budget)).schedule;
    } else {
      throw CLI::ValidationError("unknown recipe: " + *recipe);
    }
    std::cout << "t,sigma,sigma_sq,r_unit_cost\n";
    for (int t = 1; t <= schedule.length(); ++t) {
      const double sigma = schedule.sigma(t);
      std::cout << t << ',' << fmt(sigma, "%.17g") << ','
                << fmt(sigma * sigma, "%.17g") << ','
                << fmt(1.0 / (sigma * sigma), "%.17g") << "\n";
    }
  });
}

void add_train(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "train", "Run budget-gated noisy training and emit the loss trace");
  auto model_name = std::make_shared<std::string>("quadratic");
  auto data_path = std::make_shared<std::string>();
  auto schedule_path = std::make_shared<std::string>();
  auto eta = std::make_shared<double>(0.0);
  auto beta = std::make_shared<double>(0.0);
  auto clip = std::make_shared<double>(0.0);
  auto seed = std::make_shared<std::uint64_t>(1);
  auto batch = std::make_shared<int>(0);
  auto budget = std::make_shared<double>(0.0);
  auto scale = std::make_shared<double>(0.0);
  cmd->add_option("--model", *model_name, "quadratic or logistic");
  cmd->add_option("--data", *data_path, "dataset CSV")->required();
  cmd->add_option("--schedule", *schedule_path,
                  "schedule CSV (needs a sigma column)")
      ->required();
  cmd->add_option("--eta", *eta, "step size; 0 selects 1/M (quadratic only)");
  cmd->add_option("--beta", *beta, "momentum parameter in [0, 1)");
  cmd->add_option("--clip", *clip, "per-sample clip norm; 0 disables");
  cmd->add_option("--seed", *seed, "noise seed");
  cmd->add_option("--batch", *batch,
                  "minibatch size: 0 full batch, -1 the N*sqrt(R) rule");
  cmd->add_option("--R", *budget,
                  "ledger budget in R-units; 0 takes the schedule's total");
  cmd->add_option("--scale", *scale,
                  "preprocess the data to this max row norm first");
  cmd->callback([model_name, data_path, schedule_path, eta, beta, clip, seed,
                 batch, budget, scale] {
    const Dataset data = load_dataset(*data_path, *scale);
    const LossModel model(parse_model_kind(*model_name), data,
                          *clip > 0.0 ? std::optional<double>(*clip)
                                      : std::nullopt);
    const std::vector<double> sigmas = load_schedule_csv(*schedule_path);

    NoiseSchedule schedule;
    schedule.sigmas = sigmas;
    schedule.recipe = ScheduleRecipe::kCustom;

    int batch_size = *batch;
    double rate = 1.0;
    double total_r = *budget;
    if (batch_size != 0) {
      double probe_total = 0.0;  // provisional budget for the batch rule
      for (double s : sigmas) probe_total += 1.0 / (s * s);
      if (batch_size < 0) {
        batch_size = default_psgd_batch(
            model.num_samples(), total_r > 0.0 ? total_r : probe_total);
      }
      rate = static_cast<double>(batch_size) / model.num_samples();
    }
    if (total_r <= 0.0) {
      total_r = 0.0;
      for (double s : sigmas) total_r += rate * rate / (s * s);
    }
    schedule.budget_r = total_r / (rate * rate);

    RunOptions options;
    options.eta = {resolve_eta(model, *eta)};
    options.beta = *beta;
    options.seed = *seed;
    const RunRecord record =
        batch_size == 0 ? run(model, schedule, options)
                        : run_psgd(model, schedule, batch_size, options);

    std::cout << "t,loss,sigma,cumulative_cost\n";
    double cumulative = 0.0;
    for (int t = 1; t <= record.steps_taken; ++t) {
      const double sigma = schedule.sigma(t);
      cumulative += rate * rate / (sigma * sigma);
      std::cout << t << ',' << fmt(record.losses[t - 1], "%.17g") << ','
                << fmt(sigma, "%.17g") << ',' << fmt(cumulative, "%.17g")
                << "\n";
    }
    std::cerr << "steps=" << record.steps_taken
              << " final_loss=" << fmt(record.final_loss)
              << " budget_spent=" << fmt(record.budget_spent) << "\n";
  });
}

void add_influence(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "influence",
      "Estimate per-step noise influence by retraining with varied sigma");
  auto data_path = std::make_shared<std::string>();
  auto model_name = std::make_shared<std::string>("quadratic");
  auto steps = std::make_shared<int>(0);
  auto budget = std::make_shared<double>(0.0);
  auto grid_text = std::make_shared<std::string>("20:200:7");
  auto repeats = std::make_shared<int>(kDefaultRetrainRepeats);
  auto seed = std::make_shared<std::uint64_t>(1);
  auto eta = std::make_shared<double>(0.0);
  auto clip = std::make_shared<double>(4.0);
  auto scale = std::make_shared<double>(0.0);
  auto theta_norm = std::make_shared<double>(0.0);
  cmd->add_option("--data", *data_path, "dataset CSV")->required();
  cmd->add_option("--model", *model_name, "quadratic or logistic");
  cmd->add_option("--T", *steps, "schedule length")->required();
  cmd->add_option("--R", *budget, "privacy budget in R-units")->required();
  cmd->add_option("--grid", *grid_text, "sigma grid as lo:hi:n (log-spaced)");
  cmd->add_option("--repeats", *repeats, "runs per grid point");
  cmd->add_option("--seed", *seed, "base seed");
  cmd->add_option("--eta", *eta, "step size; 0 selects 1/M (quadratic only)");
  cmd->add_option("--clip", *clip, "per-sample clip norm; 0 disables");
  cmd->add_option("--scale", *scale,
                  "preprocess the data to this max row norm first");
  cmd->add_option("--theta-norm", *theta_norm,
                  "norm of the random start point; 0 starts at the origin");
  cmd->callback([data_path, model_name, steps, budget, grid_text, repeats,
                 seed, eta, clip, scale, theta_norm] {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    if (std::sscanf(grid_text->c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3) {
      throw CLI::ValidationError("--grid expects lo:hi:n");
    }
    const Dataset data = load_dataset(*data_path, *scale);
    const LossModel model(parse_model_kind(*model_name), data,
                          *clip > 0.0 ? std::optional<double>(*clip)
                                      : std::nullopt);
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(model.dim());
    if (*theta_norm > 0.0) {
      GaussianSampler sampler(hash_combine(*seed, 0x7468657461ULL));
      theta0 = sampler.standard_normal_vector(model.dim());
      theta0 *= *theta_norm / theta0.norm();
    }
    const RunFinalLoss runner =
        make_model_runner(model, resolve_eta(model, *eta), 0.0, theta0);
    const NoiseSchedule base = uniform_schedule(*steps, *budget);
    const std::vector<double> grid = log_spaced_grid(lo, hi, count);
    const InfluenceProfile profile =
        estimate_influence_retraining(runner, base, grid, *repeats, *seed);
    std::cout << "t,q_hat,c0,residual\n";
    for (std::size_t t = 0; t < profile.q.size(); ++t) {
      const StepFit& fit = profile.fit_diagnostics[t];
      std::cout << t + 1 << ',' << fmt(profile.q[t], "%.17g") << ','
                << fmt(fit.c0, "%.17g") << ',' << fmt(fit.residual, "%.17g")
                << "\n";
    }
  });
}

void add_gen_data(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "gen-data", "Generate a two-cluster synthetic dataset CSV");
  auto dim = std::make_shared<int>(100);
  auto samples = std::make_shared<int>(1000);
  auto distance = std::make_shared<double>(10.0);
  auto seed = std::make_shared<std::uint64_t>(13);
  auto out = std::make_shared<std::string>();
  auto scale = std::make_shared<double>(0.0);
  cmd->add_option("--D", *dim, "feature dimension");
  cmd->add_option("--N", *samples, "sample count (even)");
  cmd->add_option("--distance", *distance, "Euclidean distance of the clusters");
  cmd->add_option("--seed", *seed, "generator seed");
  cmd->add_option("--out", *out, "output CSV path")->required();
  cmd->add_option("--scale", *scale,
                  "also preprocess to this max row norm; 0 keeps raw samples");
  cmd->callback([dim, samples, distance, seed, out, scale] {
    Dataset data = gen_synthetic(*dim, *samples, *distance, *seed);
    if (*scale > 0.0) data = preprocess(data, *scale);
    save_csv(data, *out);
    std::cerr << "wrote " << data.num_samples() << " samples of dimension "
              << data.dim() << " to " << *out << "\n";
  });
}

void add_experiment(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "experiment", "Grid-search schedule comparison from a JSON config");
  auto config_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "experiment config JSON")
      ->required();
  cmd->add_option("--out", *out, "output CSV path (default stdout)");
  cmd->callback([config_path, out] {
    const ExperimentConfig config = load_experiment_config(*config_path);
    const std::vector<ExperimentReport> reports{run_experiment(config)};
    write_output(report_csv(reports), *out);
  });
}

void add_sweep(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "sweep", "Run the experiment across a list of data scales");
  auto config_path = std::make_shared<std::string>();
  auto scales_text = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "experiment config JSON")
      ->required();
  cmd->add_option("--scales", *scales_text, "comma-separated data scales")
      ->required();
  cmd->add_option("--out", *out, "output CSV path (default stdout)");
  cmd->callback([config_path, scales_text, out] {
    const ExperimentConfig config = load_experiment_config(*config_path);
    const std::vector<double> scales = parse_double_list(*scales_text);
    const std::vector<ExperimentReport> reports = scale_sweep(config, scales);
    write_output(report_csv(reports), *out);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private training with scheduled noise"};
  app.require_subcommand(1);
  add_account(app);
  add_analyze(app);
  add_schedule(app);
  add_train(app);
  add_influence(app);
  add_gen_data(app);
  add_experiment(app);
  add_sweep(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    return app.exit(error);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
