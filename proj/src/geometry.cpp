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

#include "sspd/geometry.hpp"

#include <array>
#include <map>
#include <string>

namespace sspd {

RigidTransformd random_z_rotation(double sigma_r, Rng& rng) {
  RigidTransformd tf;
  tf.rotation = rotation_z(rng.normal(0.0, sigma_r));
  return tf;
}

PointCloud jitter(const PointCloud& cloud, double sigma_p, Rng& rng) {
  PointCloud out = cloud;
  if (sigma_p == 0.0) return out;
  for (Index i = 0; i < out.points.rows(); ++i)
    for (Index d = 0; d < 3; ++d) out.points(i, d) += rng.normal(0.0, sigma_p);
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double grid) {
  if (!(grid > 0.0)) throw std::invalid_argument("voxel_downsample: grid must be positive");
  struct Acc {
    Vector3d sum = Vector3d::Zero();
    double intensity = 0.0;
    Index count = 0;
  };
  // Key is (z, y, x) so map order is z-major.
  std::map<std::array<long long, 3>, Acc> voxels;
  for (Index i = 0; i < cloud.size(); ++i) {
    const Vector3d p = cloud.point(i);
    const std::array<long long, 3> key{static_cast<long long>(std::floor(p.z() / grid)),
                                       static_cast<long long>(std::floor(p.y() / grid)),
                                       static_cast<long long>(std::floor(p.x() / grid))};
    Acc& acc = voxels[key];
    acc.sum += p;
    if (cloud.intensity) acc.intensity += (*cloud.intensity)(i);
    ++acc.count;
  }
  PointCloud out;
  out.points.resize(static_cast<Index>(voxels.size()), 3);
  if (cloud.intensity) out.intensity = VectorXd(static_cast<Index>(voxels.size()));
  Index row = 0;
  for (const auto& [key, acc] : voxels) {
    out.points.row(row) = (acc.sum / static_cast<double>(acc.count)).transpose();
    if (out.intensity) (*out.intensity)(row) = acc.intensity / static_cast<double>(acc.count);
    ++row;
  }
  return out;
}

void require_valid(const PointCloud& cloud, const char* what) {
  if (cloud.empty()) throw EmptyCloud(what);
  if (!cloud.all_finite()) throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
}

}  // namespace sspd
