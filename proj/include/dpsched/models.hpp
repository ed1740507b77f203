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
// Training objectives: a quadratic regression loss against a constant unit
// target and a binary logistic loss, with per-sample gradients, clipping,
// sensitivity bounds, and power-iteration curvature estimates.

#ifndef DPSCHED_MODELS_HPP_
#define DPSCHED_MODELS_HPP_

#include <optional>

#include <Eigen/Core>

namespace dpsched {

struct Dataset {
  Eigen::MatrixXd features;  // one sample per row, N x D
  Eigen::VectorXd labels;    // entries in {-1, +1}; empty when unlabeled

  int num_samples() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool has_labels() const { return labels.size() != 0; }
  double max_norm() const;  // largest row 2-norm
};

enum class LossKind { kQuadratic, kLogistic };

struct Spectrum {
  double m_max = 0.0;      // largest Hessian eigenvalue
  double mu_min = 0.0;     // smallest eigenvalue above the rank cutoff
  double tolerance = 0.0;  // relative tolerance of the power iterations
};

// Projects a gradient into the centered ball of the given radius; inputs
// already inside come back unchanged, so clipping is idempotent.
Eigen::VectorXd clip(const Eigen::VectorXd& gradient, double max_norm);

// Immutable view of one dataset under one loss:
//   quadratic:  f(theta) = (1/2N) sum_n (x_n' theta - 1)^2
//   logistic:   f(theta) = (1/N) sum_n ln(1 + exp(-y_n x_n' theta))
class LossModel {
 public:
  LossModel(LossKind kind, Dataset data,
            std::optional<double> clip_norm = std::nullopt);

  LossKind kind() const { return kind_; }
  const Dataset& data() const { return data_; }
  std::optional<double> clip_norm() const { return clip_norm_; }
  int num_samples() const { return data_.num_samples(); }
  int dim() const { return data_.dim(); }
  double max_row_norm() const { return max_row_norm_; }

  double loss(const Eigen::VectorXd& theta) const;
  double sample_loss(int sample, const Eigen::VectorXd& theta) const;

  // One gradient per row; unclipped.
  Eigen::MatrixXd per_sample_gradients(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd mean_gradient(const Eigen::VectorXd& theta) const;
  // Mean of the per-sample gradients after clipping each to the clip norm;
  // identical to mean_gradient when no clip norm is set.
  Eigen::VectorXd clipped_mean_gradient(const Eigen::VectorXd& theta) const;
  // Largest per-sample gradient norm after clipping; cheap audit hook.
  double max_clipped_gradient_norm(const Eigen::VectorXd& theta) const;

  // Quadratic loss only: the removal sensitivity bound
  // max_n (1/N) sqrt(2 f(theta; x_n)) ||x_n||.
  double quadratic_sensitivity_bound(const Eigen::VectorXd& theta) const;

  // Quadratic loss only: extreme Hessian eigenvalues via power iteration
  // (relative tolerance 1e-10, at most 1e4 iterations per eigenvalue). The
  // lower end is the smallest eigenvalue above 1e-8 * m_max, found by
  // deflated power iteration on m_max I - H.
  Spectrum estimate_spectrum() const;

  // Per-sample gradient norm bound G: the largest feature norm for the
  // logistic loss, further reduced to min(G, clip norm) when clipping is
  // active. The unclipped quadratic loss has no global bound.
  double lipschitz_bound() const;

  // Quadratic loss only: minimum of the loss, via dense least squares.
  double optimal_loss() const;

 private:
  // Scalar c_n with per-sample gradient c_n x_n (before clipping).
  Eigen::VectorXd gradient_coefficients(const Eigen::VectorXd& theta) const;

  LossKind kind_;
  Dataset data_;
  std::optional<double> clip_norm_;
  Eigen::VectorXd row_norms_;
  double max_row_norm_ = 0.0;
};

}  // namespace dpsched

#endif  // DPSCHED_MODELS_HPP_
