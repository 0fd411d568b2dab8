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

#include <array>
#include <span>
#include <unordered_map>
#include <vector>

#include "sspd/geometry.hpp"

namespace sspd {

/// Uniform hash grid for fixed-radius neighbor queries. Results are sorted by
/// point index so downstream sampling is independent of bucket layout.
class RadiusIndex {
 public:
  RadiusIndex(const Points3d& points, double cell);

  /// Indices of points with ||p - center|| <= radius, ascending.
  std::vector<Index> query(const Vector3d& center, double radius) const;

  const Points3d& points() const { return *points_; }

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<long long, 3>& k) const noexcept;
  };
  std::array<long long, 3> key_of(const Vector3d& p) const;

  const Points3d* points_;
  double cell_;
  std::unordered_map<std::array<long long, 3>, std::vector<Index>, KeyHash> buckets_;
};

/// k fixed-size neighborhoods stored as one stacked block: rows
/// [i*c, (i+1)*c) belong to cluster i and are relative to centers.row(i).
struct ClusterSet {
  Points3d centers;
  Points3d points;
  std::vector<Index> source_indices;
  Index cluster_size = 0;

  Index count() const { return centers.rows(); }
  auto cluster(Index i) const { return points.middleRows(i * cluster_size, cluster_size); }
};

/// Greedy farthest point sampling; the first pick is uniform from rng and
/// ties go to the lowest index. Returns min(k, n) indices.
std::vector<Index> farthest_point_sample(const PointCloud& cloud, Index k, Rng& rng);

struct Cluster {
  Points3d points;  // c x 3, center-subtracted
  std::vector<Index> indices;
};

/// Samples c points within radius r of center. Balls with at least c members
/// are sampled without replacement; smaller balls keep every member once and
/// pad with draws taken with replacement. Throws EmptyBall if nothing is in range.
Cluster ball_query(const PointCloud& cloud, const Vector3d& center, double radius, Index c, Rng& rng);
Cluster ball_query(const RadiusIndex& index, const Vector3d& center, double radius, Index c, Rng& rng);

/// Clusters around the given center indices of cloud.
ClusterSet clusters_at(const PointCloud& cloud, std::span<const Index> center_indices, double radius,
                       Index c, Rng& rng);

/// farthest_point_sample followed by ball_query at each center.
ClusterSet extract_clusters(const PointCloud& cloud, Index k, double radius, Index c, Rng& rng);

}  // namespace sspd
