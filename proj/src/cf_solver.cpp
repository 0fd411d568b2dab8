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

#include "sspd/cf_solver.hpp"

namespace sspd {

PairWeights pair_weights(const MatrixXd& desc_p, const MatrixXd& desc_q, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("pair_weights: alpha must be positive");
  if (desc_p.cols() != desc_q.cols()) throw ShapeMismatch("pair_weights: descriptor widths differ");
  ad::Graph g;
  const ad::Var d2 = ad::pairwise_sq_dist(g.constant(desc_p), g.constant(desc_q));
  return {ad::exp(ad::scale(d2, -1.0 / alpha)).value(), alpha};
}

PairWeights pair_weights(const DescriptorSet& desc_p, const DescriptorSet& desc_q, double alpha) {
  return pair_weights(desc_p.vectors, desc_q.vectors, alpha);
}

PairExpansion expand_pairs(const Points3d& pts_p, const Points3d& pts_q) {
  const Index kp = pts_p.rows(), kq = pts_q.rows();
  PairExpansion out;
  out.pts_p.resize(kp * kq, 3);
  out.pts_q.resize(kp * kq, 3);
  for (Index i = 0; i < kp; ++i) {
    out.pts_p.middleRows(i * kq, kq).rowwise() = pts_p.row(i);
    out.pts_q.middleRows(i * kq, kq) = pts_q;
  }
  return out;
}

CfSolution<double> cf_register(const Points3d& pts_p, const MatrixXd& desc_p, const Points3d& pts_q,
                               const MatrixXd& desc_q, double alpha) {
  if (pts_p.rows() != desc_p.rows() || pts_q.rows() != desc_q.rows())
    throw ShapeMismatch("cf_register: points and descriptors differ in count");
  if (pts_p.rows() < 3 || pts_q.rows() < 3) throw DegenerateConfiguration("cf_register needs at least 3 points per side");
  const PairWeights w = pair_weights(desc_p, desc_q, alpha);
  const PairExpansion pairs = expand_pairs(pts_p, pts_q);
  // Row-major flattening of the weight grid matches the expansion order.
  const VectorXd flat = Eigen::Map<const VectorXd>(w.matrix.data(), w.matrix.size());
  return weighted_kabsch<double>(pairs.pts_p, pairs.pts_q, flat);
}

CfSolution<double> cf_register(const DescriptorSet& desc_p, const DescriptorSet& desc_q, double alpha) {
  return cf_register(desc_p.keypoints, desc_p.vectors, desc_q.keypoints, desc_q.vectors, alpha);
}

ad::Var pair_grid_covariance(ad::Var weights, const Points3d& pts_p, const Points3d& pts_q) {
  const MatrixXd& w = weights.value();
  if (w.rows() != pts_p.rows() || w.cols() != pts_q.rows())
    throw ShapeMismatch("pair_grid_covariance: weight grid does not match point counts");
  const double total = w.sum();
  if (!(total > 0.0)) throw DegenerateConfiguration("pair weights sum to zero");
  const Vector3d mu_p = pts_p.transpose() * w.rowwise().sum() / total;
  const Vector3d mu_q = pts_q.transpose() * w.colwise().sum().transpose() / total;
  Points3d cp = pts_p.rowwise() - mu_p.transpose();
  Points3d cq = pts_q.rowwise() - mu_q.transpose();
  const Matrix3d cov = cp.transpose() * w * cq / total;
  // d cov / d w_ij = ((p_i - mu_p)(q_j - mu_q)^T - cov) / total; the centroid
  // terms vanish because the weighted residuals sum to zero.
  return weights.graph().push(MatrixXd(cov), {weights},
                              [weights, cp = std::move(cp), cq = std::move(cq), total](
                                  ad::Graph& g, const ad::Matrix& out, const ad::Matrix& go) {
                                const double inner = out.cwiseProduct(go).sum();
                                MatrixXd gw = (cp * go * cq.transpose()).array() - inner;
                                g.accumulate(weights, gw / total);
                              });
}

CfGraphResult cf_register(ad::Var desc_p, const Points3d& pts_p, ad::Var desc_q, const Points3d& pts_q,
                          double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("cf_register: alpha must be positive");
  if (desc_p.rows() != pts_p.rows() || desc_q.rows() != pts_q.rows())
    throw ShapeMismatch("cf_register: points and descriptors differ in count");
  if (pts_p.rows() < 3 || pts_q.rows() < 3) throw DegenerateConfiguration("cf_register needs at least 3 points per side");

  CfGraphResult out;
  out.weights = ad::exp(ad::scale(ad::pairwise_sq_dist(desc_p, desc_q), -1.0 / alpha));
  out.covariance = pair_grid_covariance(out.weights, pts_p, pts_q);

  const MatrixXd& w = out.weights.value();
  out.weight_total = w.sum();
  const VectorXd wp = w.rowwise().sum(), wq = w.colwise().sum().transpose();
  const Vector3d mu_p = pts_p.transpose() * wp / out.weight_total;
  const Vector3d mu_q = pts_q.transpose() * wq / out.weight_total;

  const Matrix3d cov = out.covariance.value();
  const Eigen::JacobiSVD<Matrix3d> svd(cov);
  const double spread_p = ((pts_p.rowwise() - mu_p.transpose()).rowwise().squaredNorm().transpose() * wp).value();
  const double spread_q = ((pts_q.rowwise() - mu_q.transpose()).rowwise().squaredNorm().transpose() * wq).value();
  if (covariance_rank_deficient<double>(svd.singularValues(), spread_p / out.weight_total,
                                        spread_q / out.weight_total))
    throw DegenerateConfiguration("weighted cross-covariance has rank < 2");

  out.rotation = ad::svd_rotation(ad::transpose(out.covariance));

  out.transform.rotation = out.rotation.value();
  out.transform.translation = mu_q - out.transform.rotation * mu_p;
  return out;
}

double pair_objective(const Points3d& pts_p, const Points3d& pts_q, const VectorXd& w, const RigidTransformd& tf) {
  const Points3d moved = (pts_p * tf.rotation.transpose()).rowwise() + tf.translation.transpose();
  return w.dot((moved - pts_q).rowwise().squaredNorm());
}

}  // namespace sspd
