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

#include "dpsched/models.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dpsched/random.hpp"

namespace dpsched {
namespace {

constexpr double kPowerIterRelTol = 1e-10;
constexpr int kPowerIterCap = 10000;
constexpr double kRankCutoffRel = 1e-8;

// Overflow-safe ln(1 + exp(z)).
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

// sigmoid(-z) = 1 / (1 + exp(z)), stable for large |z|.
double sigmoid_neg(double z) {
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

// Largest eigenvalue of a symmetric PSD matrix restricted to the orthogonal
// complement of `deflated`, together with the corresponding unit vector.
struct PowerResult {
  double value = 0.0;
  Eigen::VectorXd vector;
};

void project_out(const std::vector<Eigen::VectorXd>& deflated,
                 Eigen::VectorXd& v) {
  for (const Eigen::VectorXd& b : deflated) v -= b.dot(v) * b;
}

PowerResult power_iteration(const Eigen::MatrixXd& matrix,
                            const std::vector<Eigen::VectorXd>& deflated) {
  const Eigen::Index dim = matrix.rows();
  GaussianSampler sampler(0x5eedf00dULL + 997ULL * deflated.size());
  Eigen::VectorXd v = sampler.standard_normal_vector(dim);
  project_out(deflated, v);
  double norm = v.norm();
  for (int attempt = 0; attempt < 16 && !(norm > 0.0); ++attempt) {
    v = sampler.standard_normal_vector(dim);
    project_out(deflated, v);
    norm = v.norm();
  }
  if (!(norm > 0.0)) {
    throw std::runtime_error("power iteration could not find a start vector");
  }
  v /= norm;
  double rayleigh = 0.0;
  for (int iter = 0; iter < kPowerIterCap; ++iter) {
    Eigen::VectorXd w = matrix * v;
    project_out(deflated, w);
    const double next = v.dot(w);
    const double w_norm = w.norm();
    if (!(w_norm > 0.0)) {
      return {0.0, v};  // v is (numerically) in the kernel
    }
    const bool settled =
        std::fabs(next - rayleigh) <= kPowerIterRelTol * std::max(std::fabs(next), 1e-300);
    rayleigh = next;
    v = w / w_norm;
    if (settled && iter > 0) break;
  }
  return {rayleigh, v};
}

}  // namespace

double Dataset::max_norm() const {
  double top = 0.0;
  for (Eigen::Index n = 0; n < features.rows(); ++n) {
    top = std::max(top, features.row(n).norm());
  }
  return top;
}

Eigen::VectorXd clip(const Eigen::VectorXd& gradient, double max_norm) {
  if (!(max_norm > 0.0)) {
    throw std::domain_error("clip norm must be positive");
  }
  const double norm_sq = gradient.squaredNorm();
  const double bound_sq = max_norm * max_norm;
  if (norm_sq <= bound_sq) return gradient;
  double factor = max_norm / std::sqrt(norm_sq);
  Eigen::VectorXd out = gradient * factor;
  // Tighten against round-off so the output re-clips to itself exactly.
  while (out.squaredNorm() > bound_sq) {
    factor = std::nextafter(factor, 0.0);
    out = gradient * factor;
  }
  return out;
}

LossModel::LossModel(LossKind kind, Dataset data, std::optional<double> clip_norm)
    : kind_(kind), data_(std::move(data)), clip_norm_(clip_norm) {
  if (data_.num_samples() < 1 || data_.dim() < 1) {
    throw std::invalid_argument("dataset must be non-empty");
  }
  if (clip_norm_ && !(*clip_norm_ > 0.0)) {
    throw std::domain_error("clip norm must be positive");
  }
  if (kind_ == LossKind::kLogistic) {
    if (!data_.has_labels()) {
      throw std::invalid_argument("logistic loss requires labels");
    }
    for (Eigen::Index n = 0; n < data_.labels.size(); ++n) {
      const double y = data_.labels[n];
      if (y != 1.0 && y != -1.0) {
        throw std::invalid_argument("labels must be +1 or -1");
      }
    }
  }
  if (data_.has_labels() && data_.labels.size() != data_.num_samples()) {
    throw std::invalid_argument("label count must match the sample count");
  }
  row_norms_.resize(data_.num_samples());
  for (Eigen::Index n = 0; n < data_.features.rows(); ++n) {
    row_norms_[n] = data_.features.row(n).norm();
  }
  max_row_norm_ = row_norms_.size() ? row_norms_.maxCoeff() : 0.0;
}

double LossModel::loss(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim()) {
    throw std::invalid_argument("parameter dimension mismatch");
  }
  const Eigen::VectorXd margins = data_.features * theta;
  if (kind_ == LossKind::kQuadratic) {
    return (margins.array() - 1.0).square().sum() / (2.0 * num_samples());
  }
  double total = 0.0;
  for (Eigen::Index n = 0; n < margins.size(); ++n) {
    total += softplus(-data_.labels[n] * margins[n]);
  }
  return total / num_samples();
}

double LossModel::sample_loss(int sample, const Eigen::VectorXd& theta) const {
  if (sample < 0 || sample >= num_samples()) {
    throw std::out_of_range("sample index out of range");
  }
  const double margin = data_.features.row(sample).dot(theta);
  if (kind_ == LossKind::kQuadratic) {
    const double residual = margin - 1.0;
    return 0.5 * residual * residual;
  }
  return softplus(-data_.labels[sample] * margin);
}

Eigen::VectorXd LossModel::gradient_coefficients(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim()) {
    throw std::invalid_argument("parameter dimension mismatch");
  }
  Eigen::VectorXd coeffs = data_.features * theta;
  if (kind_ == LossKind::kQuadratic) {
    coeffs.array() -= 1.0;
    return coeffs;
  }
  for (Eigen::Index n = 0; n < coeffs.size(); ++n) {
    const double y = data_.labels[n];
    coeffs[n] = -y * sigmoid_neg(y * coeffs[n]);
  }
  return coeffs;
}

Eigen::MatrixXd LossModel::per_sample_gradients(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd coeffs = gradient_coefficients(theta);
  return coeffs.asDiagonal() * data_.features;
}

Eigen::VectorXd LossModel::mean_gradient(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd coeffs = gradient_coefficients(theta);
  return data_.features.transpose() * (coeffs / num_samples());
}

Eigen::VectorXd LossModel::clipped_mean_gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd coeffs = gradient_coefficients(theta);
  if (clip_norm_) {
    // ||c_n x_n|| = |c_n| ||x_n||, so clipping scales the coefficient.
    for (Eigen::Index n = 0; n < coeffs.size(); ++n) {
      const double norm = std::fabs(coeffs[n]) * row_norms_[n];
      if (norm > *clip_norm_) coeffs[n] *= *clip_norm_ / norm;
    }
  }
  return data_.features.transpose() * (coeffs / num_samples());
}

double LossModel::max_clipped_gradient_norm(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd coeffs = gradient_coefficients(theta);
  double worst = 0.0;
  for (Eigen::Index n = 0; n < coeffs.size(); ++n) {
    double norm = std::fabs(coeffs[n]) * row_norms_[n];
    if (clip_norm_ && norm > *clip_norm_) norm = *clip_norm_;
    worst = std::max(worst, norm);
  }
  return worst;
}

double LossModel::quadratic_sensitivity_bound(const Eigen::VectorXd& theta) const {
  if (kind_ != LossKind::kQuadratic) {
    throw std::invalid_argument("sensitivity bound applies to the quadratic loss");
  }
  const Eigen::VectorXd margins = data_.features * theta;
  double worst = 0.0;
  for (Eigen::Index n = 0; n < margins.size(); ++n) {
    worst = std::max(worst, std::fabs(margins[n] - 1.0) * row_norms_[n]);
  }
  return worst / num_samples();
}

Spectrum LossModel::estimate_spectrum() const {
  if (kind_ != LossKind::kQuadratic) {
    throw std::invalid_argument("spectrum estimation applies to the quadratic loss");
  }
  const Eigen::MatrixXd hessian =
      (data_.features.transpose() * data_.features) / num_samples();
  std::vector<Eigen::VectorXd> deflated;
  PowerResult top = power_iteration(hessian, deflated);
  if (!(top.value > 0.0)) {
    throw std::domain_error("data has numerical rank zero");
  }
  Spectrum spectrum;
  spectrum.m_max = top.value;
  spectrum.tolerance = kPowerIterRelTol;
  const double cutoff = kRankCutoffRel * spectrum.m_max;
  // Walk the spectrum of H from below via m_max I - H, deflating directions
  // under the rank cutoff until one clears it. The top eigenvector of H
  // clears the cutoff, so the walk terminates.
  const Eigen::MatrixXd complement =
      spectrum.m_max * Eigen::MatrixXd::Identity(dim(), dim()) - hessian;
  spectrum.mu_min = spectrum.m_max;
  for (int round = 0; round < dim(); ++round) {
    PowerResult low = power_iteration(complement, deflated);
    const double candidate = spectrum.m_max - low.value;
    if (candidate > cutoff) {
      spectrum.mu_min = candidate;
      break;
    }
    deflated.push_back(low.vector);
  }
  return spectrum;
}

double LossModel::lipschitz_bound() const {
  if (kind_ == LossKind::kQuadratic) {
    if (!clip_norm_) {
      throw std::invalid_argument(
          "quadratic loss has no global gradient bound without clipping");
    }
    return *clip_norm_;
  }
  double bound = max_row_norm_;
  if (clip_norm_) bound = std::min(bound, *clip_norm_);
  return bound;
}

double LossModel::optimal_loss() const {
  if (kind_ != LossKind::kQuadratic) {
    throw std::invalid_argument("closed-form optimum applies to the quadratic loss");
  }
  const Eigen::VectorXd target = Eigen::VectorXd::Ones(num_samples());
  const Eigen::VectorXd theta_star =
      data_.features.colPivHouseholderQr().solve(target);
  return loss(theta_star);
}

}  // namespace dpsched
