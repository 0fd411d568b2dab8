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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sspd/autodiff.hpp"
#include "sspd/sampling.hpp"

namespace sspd {

/// One unit-norm descriptor per keypoint.
struct DescriptorSet {
  MatrixXd vectors;  // k x descriptor_dim
  Points3d keypoints;

  Index size() const { return vectors.rows(); }
};

/// Layer widths of the two sub-networks. Per-point layers are shared across
/// all points of all clusters and followed by ReLU; a max-pool over each
/// cluster feeds the dense head, whose last layer is linear.
struct NetworkShape {
  std::vector<Index> orientation_point{3, 32, 64};
  std::vector<Index> orientation_head{64, 32, 2};
  std::vector<Index> feature_point{3, 64, 128, 256};
  std::vector<Index> feature_head{256, 128, 32};

  Index descriptor_dim() const { return feature_head.back(); }
};

/// Named weights of the orientation and feature sub-networks, stored in a
/// fixed order: every layer contributes "<prefix>.W" then "<prefix>.b".
class DescriptorParams {
 public:
  DescriptorParams() = default;
  /// Glorot-uniform weights, zero biases.
  DescriptorParams(const NetworkShape& shape, Rng& rng);

  const NetworkShape& shape() const { return shape_; }
  Index descriptor_dim() const { return shape_.descriptor_dim(); }

  std::vector<ad::Tensor>& tensors() { return tensors_; }
  const std::vector<ad::Tensor>& tensors() const { return tensors_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t parameter_count() const;

  void zero_grad();

  /// Rebuilds from named tensors (checkpoint loading). Throws ShapeError if
  /// names or shapes do not chain into a valid network.
  static DescriptorParams from_tensors(std::vector<std::string> names, std::vector<ad::Tensor> tensors);

  friend bool operator==(const DescriptorParams& a, const DescriptorParams& b);

 private:
  NetworkShape shape_;
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
};

/// Parameters bound into a graph, in DescriptorParams order.
struct BoundParams {
  std::vector<ad::Var> vars;
};
BoundParams bind(ad::Graph& graph, DescriptorParams& params);
/// Binds as constants; no gradients are tracked.
BoundParams bind_detached(ad::Graph& graph, const DescriptorParams& params);
/// Binds as independent variables; read gradients back with graph.grad().
BoundParams bind_variables(ad::Graph& graph, const DescriptorParams& params);

struct OrientationOutput {
  ad::Var unit_sincos;  // k x 2 rows (sin theta, cos theta) on the unit circle
  std::vector<bool> degenerate_head;
};

/// Per-cluster yaw from the orientation sub-network. Head outputs with norm
/// below 1e-12 are replaced by theta = 0 and flagged.
OrientationOutput orientation_forward(ad::Graph& graph, ad::Var cluster_points, Index cluster_size,
                                      const DescriptorParams& params, const BoundParams& bound);

/// Rotates the points of cluster i by Rz(-theta_i), given rows (sin, cos) of
/// theta_i. Differentiable in both inputs.
ad::Var rotate_clusters_z(ad::Var cluster_points, ad::Var unit_sincos, Index cluster_size);

struct DescriptorForward {
  ad::Var descriptors;  // k x descriptor_dim, unit rows
  OrientationOutput orientation;
};

struct ForwardOptions {
  /// Stop gradients from the feature branch into the orientation branch
  /// through the cluster rotation.
  bool detach_orientation = false;
};

DescriptorForward descriptor_forward(ad::Graph& graph, const ClusterSet& clusters, const DescriptorParams& params,
                                     const BoundParams& bound, const ForwardOptions& options = {});

/// Value-only convenience wrappers.
VectorXd orientation_angles(const ClusterSet& clusters, const DescriptorParams& params);
ClusterSet rotate_clusters_z(const ClusterSet& clusters, const VectorXd& angles);
DescriptorSet describe(const ClusterSet& clusters, const DescriptorParams& params);

/// Binary checkpoint: "SSPD", u32 version, u32 descriptor_dim, u32 tensor
/// count, then per tensor u32 name length, UTF-8 name, u32 rank, u64 dims,
/// row-major little-endian f64 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const DescriptorParams& params, const std::filesystem::path& path);
/// Throws IoError, FormatError (magic/version/truncation) or ShapeError.
DescriptorParams load_checkpoint(const std::filesystem::path& path);
/// As above and also checks the descriptor dimension.
DescriptorParams load_checkpoint(const std::filesystem::path& path, Index expected_descriptor_dim);

}  // namespace sspd
