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

#include "sspd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sspd {

std::size_t RadiusIndex::KeyHash::operator()(const std::array<long long, 3>& k) const noexcept {
  std::size_t h = static_cast<std::size_t>(k[0]) * 73856093u;
  h ^= static_cast<std::size_t>(k[1]) * 19349663u;
  h ^= static_cast<std::size_t>(k[2]) * 83492791u;
  return h;
}

RadiusIndex::RadiusIndex(const Points3d& points, double cell) : points_(&points), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("RadiusIndex: cell must be positive");
  for (Index i = 0; i < points.rows(); ++i) buckets_[key_of(points.row(i).transpose())].push_back(i);
}

std::array<long long, 3> RadiusIndex::key_of(const Vector3d& p) const {
  return {static_cast<long long>(std::floor(p.x() / cell_)), static_cast<long long>(std::floor(p.y() / cell_)),
          static_cast<long long>(std::floor(p.z() / cell_))};
}

std::vector<Index> RadiusIndex::query(const Vector3d& center, double radius) const {
  const auto lo = key_of(center - Vector3d::Constant(radius));
  const auto hi = key_of(center + Vector3d::Constant(radius));
  const double r2 = radius * radius;
  std::vector<Index> out;
  for (long long x = lo[0]; x <= hi[0]; ++x)
    for (long long y = lo[1]; y <= hi[1]; ++y)
      for (long long z = lo[2]; z <= hi[2]; ++z) {
        const auto it = buckets_.find({x, y, z});
        if (it == buckets_.end()) continue;
        for (Index i : it->second)
          if ((points_->row(i).transpose() - center).squaredNorm() <= r2) out.push_back(i);
      }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Index> farthest_point_sample(const PointCloud& cloud, Index k, Rng& rng) {
  require_valid(cloud, "farthest_point_sample");
  if (k < 1) throw std::invalid_argument("farthest_point_sample: k must be >= 1");
  const Index n = cloud.size();
  const Index m = std::min(k, n);
  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(m));
  VectorXd min_d2 = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  Index next = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  while (true) {
    picked.push_back(next);
    taken[static_cast<std::size_t>(next)] = true;
    if (static_cast<Index>(picked.size()) == m) break;
    const Eigen::RowVector3d p = cloud.points.row(next);
    min_d2 = min_d2.cwiseMin((cloud.points.rowwise() - p).rowwise().squaredNorm());
    Index best = -1;
    double best_d2 = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (!taken[static_cast<std::size_t>(i)] && min_d2(i) > best_d2) {
        best_d2 = min_d2(i);
        best = i;
      }
    }
    next = best;
  }
  return picked;
}

namespace {

Cluster sample_ball(const Points3d& points, std::vector<Index> members, const Vector3d& center, Index c,
                    Rng& rng) {
  if (c < 1) throw std::invalid_argument("ball_query: c must be >= 1");
  if (members.empty()) throw EmptyBall("no points within radius");
  const auto size = static_cast<Index>(members.size());
  Cluster out;
  if (size >= c) {
    for (Index i = 0; i < c; ++i) {
      const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(size - i)));
      std::swap(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>(j)]);
    }
    members.resize(static_cast<std::size_t>(c));
    out.indices = std::move(members);
  } else {
    out.indices = members;
    while (static_cast<Index>(out.indices.size()) < c)
      out.indices.push_back(members[rng.below(members.size())]);
  }
  out.points.resize(c, 3);
  for (Index i = 0; i < c; ++i)
    out.points.row(i) = points.row(out.indices[static_cast<std::size_t>(i)]) - center.transpose();
  return out;
}

}  // namespace

Cluster ball_query(const PointCloud& cloud, const Vector3d& center, double radius, Index c, Rng& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be positive");
  const double r2 = radius * radius;
  std::vector<Index> members;
  for (Index i = 0; i < cloud.size(); ++i)
    if ((cloud.point(i) - center).squaredNorm() <= r2) members.push_back(i);
  return sample_ball(cloud.points, std::move(members), center, c, rng);
}

Cluster ball_query(const RadiusIndex& index, const Vector3d& center, double radius, Index c, Rng& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be positive");
  return sample_ball(index.points(), index.query(center, radius), center, c, rng);
}

ClusterSet clusters_at(const PointCloud& cloud, std::span<const Index> center_indices, double radius,
                       Index c, Rng& rng) {
  require_valid(cloud, "clusters_at");
  const auto k = static_cast<Index>(center_indices.size());
  const RadiusIndex index(cloud.points, radius);
  ClusterSet out;
  out.cluster_size = c;
  out.centers.resize(k, 3);
  out.points.resize(k * c, 3);
  out.source_indices.reserve(static_cast<std::size_t>(k * c));
  for (Index i = 0; i < k; ++i) {
    const Index ci = center_indices[static_cast<std::size_t>(i)];
    const Vector3d center = cloud.point(ci);
    Cluster cl = ball_query(index, center, radius, c, rng);
    out.centers.row(i) = center.transpose();
    out.points.middleRows(i * c, c) = cl.points;
    out.source_indices.insert(out.source_indices.end(), cl.indices.begin(), cl.indices.end());
  }
  return out;
}

ClusterSet extract_clusters(const PointCloud& cloud, Index k, double radius, Index c, Rng& rng) {
  const auto centers = farthest_point_sample(cloud, k, rng);
  return clusters_at(cloud, centers, radius, c, rng);
}

}  // namespace sspd
