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

#include "sspd/synth.hpp"

#include <cmath>
#include <vector>

namespace sspd {

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "corner_room") return SceneKind::corner_room;
  if (name == "cube_field") return SceneKind::cube_field;
  if (name == "random_blobs") return SceneKind::random_blobs;
  throw ConfigError("unknown scene kind '" + name + "'");
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::corner_room: return "corner_room";
    case SceneKind::cube_field: return "cube_field";
    case SceneKind::random_blobs: return "random_blobs";
  }
  return "?";
}

namespace {

// Parallelogram origin + u*a + v*b, u, v in [0, 1].
struct Patch {
  Vector3d origin, a, b;
  double area() const { return a.cross(b).norm(); }
};

struct Box {
  Vector3d center;  // base center, z = 0
  double half;
  double yaw;

  bool covers(double x, double y) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = x - center.x(), dy = y - center.y();
    return std::abs(c * dx + s * dy) <= half && std::abs(-s * dx + c * dy) <= half;
  }
};

std::size_t pick_patch(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  std::size_t i = 0;
  while (i + 1 < cumulative.size() && u >= cumulative[i]) ++i;
  return i;
}

Vector3d sample_patch(const Patch& p, Rng& rng) {
  const double u = rng.uniform(), v = rng.uniform();
  return p.origin + u * p.a + v * p.b;
}

std::vector<Box> place_boxes(const SceneOptions& opts, double extent, Rng& rng) {
  std::vector<Box> boxes;
  const double margin = 0.1 * extent;
  for (Index attempt = 0; attempt < 1000 && static_cast<Index>(boxes.size()) < opts.n_cubes; ++attempt) {
    Box b;
    b.half = 0.5 * rng.uniform(opts.cube_min, opts.cube_max);
    b.center = Vector3d(rng.uniform(-extent / 2 + margin, extent / 2 - margin),
                        rng.uniform(-extent / 2 + margin, extent / 2 - margin), 0.0);
    b.yaw = rng.uniform(0.0, EIGEN_PI / 2);
    bool clear = true;
    for (const auto& o : boxes)
      if ((o.center - b.center).norm() < std::sqrt(2.0) * (o.half + b.half) + 1.0) clear = false;
    if (clear) boxes.push_back(b);
  }
  return boxes;
}

std::vector<Patch> box_faces(const Box& b) {
  const double edge = 2 * b.half;
  const Matrix3d rz = rotation_z(b.yaw);
  const Vector3d ex = rz.col(0) * edge, ey = rz.col(1) * edge, ez(0, 0, edge);
  const Vector3d corner = b.center - rz.col(0) * b.half - rz.col(1) * b.half;
  return {
      {corner + ez, ex, ey},       // top
      {corner, ex, ez},            // front
      {corner + ey, ex, ez},       // back
      {corner, ey, ez},            // left
      {corner + ex, ey, ez},       // right
  };
}

PointCloud sample_surfaces(const std::vector<Patch>& patches, Index n, Rng& rng,
                           const std::vector<Box>& ground_holes = {}) {
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& p : patches) cumulative.push_back(total += p.area());
  PointCloud cloud;
  cloud.points.resize(n, 3);
  for (Index i = 0; i < n; ++i) {
    Vector3d x;
    for (;;) {
      const std::size_t k = pick_patch(cumulative, rng);
      x = sample_patch(patches[k], rng);
      // Patch 0 is the ground when holes are given.
      bool hidden = false;
      if (k == 0)
        for (const auto& b : ground_holes) hidden = hidden || b.covers(x.x(), x.y());
      if (!hidden) break;
    }
    cloud.points.row(i) = x.transpose();
  }
  return cloud;
}

}  // namespace

PointCloud synth_scene(SceneKind kind, Index n_points, double extent, Rng& rng, const SceneOptions& opts) {
  if (n_points < 1) throw std::invalid_argument("synth_scene: n_points must be >= 1");
  if (!(extent > 0.0)) throw std::invalid_argument("synth_scene: extent must be positive");
  const double h = extent / 2;
  const Patch ground{Vector3d(-h, -h, 0), Vector3d(extent, 0, 0), Vector3d(0, extent, 0)};

  switch (kind) {
    case SceneKind::corner_room: {
      const std::vector<Patch> planes{
          ground,
          {Vector3d(-h, -h, 0), Vector3d(0, extent, 0), Vector3d(0, 0, h)},
          {Vector3d(-h, -h, 0), Vector3d(extent, 0, 0), Vector3d(0, 0, h)},
      };
      return sample_surfaces(planes, n_points, rng);
    }
    case SceneKind::cube_field: {
      const auto boxes = place_boxes(opts, extent, rng);
      std::vector<Patch> patches{ground};
      for (const auto& b : boxes)
        for (const auto& f : box_faces(b)) patches.push_back(f);
      return sample_surfaces(patches, n_points, rng, boxes);
    }
    case SceneKind::random_blobs: {
      if (opts.n_blobs < 1) throw std::invalid_argument("synth_scene: n_blobs must be >= 1");
      struct Blob {
        Vector3d mean;
        Matrix3d scale;
      };
      std::vector<Blob> blobs;
      for (Index i = 0; i < opts.n_blobs; ++i) {
        const Vector3d axes(rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.3, 1.5));
        Blob b;
        b.mean = Vector3d(rng.uniform(-0.4 * extent, 0.4 * extent), rng.uniform(-0.4 * extent, 0.4 * extent),
                          rng.uniform(1.0, 0.1 * extent));
        b.scale = rotation_z(rng.uniform(0.0, 2 * EIGEN_PI)) * axes.asDiagonal();
        blobs.push_back(b);
      }
      const Index n_ground = n_points / 3;
      PointCloud cloud = sample_surfaces({ground}, n_ground, rng);
      cloud.points.conservativeResize(n_points, 3);
      for (Index i = n_ground; i < n_points; ++i) {
        const Blob& b = blobs[static_cast<std::size_t>(rng.below(blobs.size()))];
        const Vector3d z(rng.normal(), rng.normal(), rng.normal());
        cloud.points.row(i) = (b.mean + b.scale * z).transpose();
      }
      return cloud;
    }
  }
  throw std::invalid_argument("synth_scene: bad kind");
}

}  // namespace sspd
