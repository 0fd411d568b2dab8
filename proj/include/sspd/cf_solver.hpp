// Copyright 2026 The sspd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "sspd/autodiff.hpp"
#include "sspd/descriptor_net.hpp"
#include "sspd/geometry.hpp"

namespace sspd {

/// Gaussian descriptor affinities w(i, j) = exp(-||f_p(i) - f_q(j)||^2 / alpha).
struct PairWeights {
  MatrixXd matrix;  // k_p x k_q
  double alpha = 1.0;
};

PairWeights pair_weights(const MatrixXd& desc_p, const MatrixXd& desc_q, double alpha);
PairWeights pair_weights(const DescriptorSet& desc_p, const DescriptorSet& desc_q, double alpha);

template <typename Scalar>
struct CfSolution {
  RigidTransform<Scalar> transform;
  Matrix3<Scalar> cross_covariance = Matrix3<Scalar>::Zero();
  Scalar weight_total = 0;
};

/// Below this sigma_2 / sigma_1 ratio the cross-covariance is treated as rank
/// deficient.
inline constexpr double kDegenerateSigmaRatio = 1e-9;

/// True when H is numerically rank < 2: sigma_2 / sigma_1 is tiny, or sigma_1
/// itself is round-off compared with the weighted spreads of the two point
/// sets (uniform weights over a full pair grid give H = 0 exactly).
template <typename Scalar>
bool covariance_rank_deficient(const Vector3<Scalar>& sigma, Scalar spread_p, Scalar spread_q) {
  const Scalar floor = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::sqrt(spread_p * spread_q);
  return !(sigma(0) > floor) || sigma(1) / sigma(0) < Scalar(kDegenerateSigmaRatio);
}

/// Weighted least-squares rigid fit of pts_q ~ R * pts_p + t over paired rows
/// with nonnegative weights. Throws DegenerateConfiguration when fewer than
/// three pairs carry weight or the weighted cross-covariance has rank < 2.
template <typename Scalar>
CfSolution<Scalar> weighted_kabsch(const Points3<Scalar>& pts_p, const Points3<Scalar>& pts_q,
                                   const VectorX<Scalar>& w) {
  if (pts_p.rows() != pts_q.rows() || pts_p.rows() != w.size())
    throw ShapeMismatch("weighted_kabsch: pair lists and weights differ in length");
  if ((w.array() < Scalar(0)).any() || !w.allFinite())
    throw std::invalid_argument("weighted_kabsch: weights must be finite and nonnegative");
  if ((w.array() > Scalar(0)).count() < 3) throw DegenerateConfiguration("fewer than 3 weighted pairs");

  CfSolution<Scalar> sol;
  sol.weight_total = w.sum();
  const Vector3<Scalar> mu_p = (pts_p.transpose() * w) / sol.weight_total;
  const Vector3<Scalar> mu_q = (pts_q.transpose() * w) / sol.weight_total;
  const Points3<Scalar> cp = pts_p.rowwise() - mu_p.transpose();
  const Points3<Scalar> cq = pts_q.rowwise() - mu_q.transpose();
  sol.cross_covariance = cp.transpose() * w.asDiagonal() * cq;

  const Eigen::JacobiSVD<Matrix3<Scalar>> svd(sol.cross_covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector3<Scalar> sigma = svd.singularValues();
  const Scalar spread_p = (cp.rowwise().squaredNorm().transpose() * w).value();
  const Scalar spread_q = (cq.rowwise().squaredNorm().transpose() * w).value();
  if (covariance_rank_deficient<Scalar>(sigma, spread_p, spread_q))
    throw DegenerateConfiguration("weighted cross-covariance has rank < 2");

  const Matrix3<Scalar>& u = svd.matrixU();
  const Matrix3<Scalar>& v = svd.matrixV();
  Matrix3<Scalar> d = Matrix3<Scalar>::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < Scalar(0) ? Scalar(-1) : Scalar(1);
  sol.transform.rotation = v * d * u.transpose();
  sol.transform.translation = mu_q - sol.transform.rotation * mu_p;
  return sol;
}

/// Unit-weight fit on paired rows.
template <typename Scalar>
CfSolution<Scalar> kabsch(const Points3<Scalar>& pts_p, const Points3<Scalar>& pts_q) {
  return weighted_kabsch<Scalar>(pts_p, pts_q, VectorX<Scalar>::Ones(pts_p.rows()));
}

/// Row (i * k_q + j) pairs p_i with q_j.
struct PairExpansion {
  Points3d pts_p;
  Points3d pts_q;
};
PairExpansion expand_pairs(const Points3d& pts_p, const Points3d& pts_q);

/// Correspondence-free registration over the full k_p x k_q pair graph,
/// weighted by descriptor affinity.
CfSolution<double> cf_register(const Points3d& pts_p, const MatrixXd& desc_p, const Points3d& pts_q,
                               const MatrixXd& desc_q, double alpha);
CfSolution<double> cf_register(const DescriptorSet& desc_p, const DescriptorSet& desc_q, double alpha);

/// Differentiable variant used in training. Gradients flow into both
/// descriptor nodes through the weights; points are constants.
struct CfGraphResult {
  ad::Var weights;     // k_p x k_q
  ad::Var covariance;  // 3 x 3, cross-covariance divided by the weight total
  ad::Var rotation;    // 3 x 3
  RigidTransformd transform;
  double weight_total = 0.0;
};

CfGraphResult cf_register(ad::Var desc_p, const Points3d& pts_p, ad::Var desc_q, const Points3d& pts_q,
                          double alpha);

/// Normalized weighted cross-covariance sum_ij w_ij (p_i - mu_p)(q_j - mu_q)^T / sum w
/// over the implicit pair grid, differentiable in w.
ad::Var pair_grid_covariance(ad::Var weights, const Points3d& pts_p, const Points3d& pts_q);

/// Value of sum_i w_i ||R p_i + t - q_i||^2 over paired rows.
double pair_objective(const Points3d& pts_p, const Points3d& pts_q, const VectorXd& w, const RigidTransformd& tf);

}  // namespace sspd
