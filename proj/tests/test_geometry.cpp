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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sspd/geometry.hpp"

using namespace sspd;

namespace {

PointCloud cloud_of(std::initializer_list<Vector3d> pts) {
  PointCloud c;
  c.points.resize(static_cast<Index>(pts.size()), 3);
  Index i = 0;
  for (const auto& p : pts) c.points.row(i++) = p.transpose();
  return c;
}

PointCloud random_cloud(Index n, Rng& rng, double spread = 10.0) {
  PointCloud c;
  c.points.resize(n, 3);
  for (Index i = 0; i < c.points.size(); ++i) c.points.data()[i] = rng.uniform(-spread, spread);
  return c;
}

}  // namespace

TEST_CASE("apply_transform") {
  Rng rng(1);
  const PointCloud cloud = random_cloud(50, rng);

  SUBCASE("identity leaves the cloud unchanged") {
    CHECK(apply_transform(cloud, RigidTransformd::identity()).points == cloud.points);
  }
  SUBCASE("quarter turn about z plus a lift") {
    RigidTransformd tf;
    tf.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    tf.translation = Vector3d(0, 0, 1);
    const PointCloud out = apply_transform(cloud_of({Vector3d(1, 0, 0)}), tf);
    CHECK((out.point(0) - Vector3d(0, 1, 1)).norm() < 1e-15);
    CHECK((rotation_z(std::numbers::pi / 2) - tf.rotation).norm() < 1e-15);
  }
  SUBCASE("transform then inverse round-trips") {
    RigidTransformd tf;
    tf.rotation = rotation_z(0.7) * Eigen::AngleAxisd(0.3, Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    tf.translation = Vector3d(4, -5, 6);
    const PointCloud back = apply_transform(apply_transform(cloud, tf), tf.inverse());
    CHECK((back.points - cloud.points).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("composition applies the right factor first") {
    RigidTransformd a, b;
    a.rotation = rotation_z(0.4);
    a.translation = Vector3d(1, 0, 0);
    b.rotation = rotation_z(-1.1);
    b.translation = Vector3d(0, 2, 3);
    const Vector3d x(0.3, -0.2, 5.0);
    CHECK(((a * b)(x) - a(b(x))).norm() < 1e-14);
  }
  SUBCASE("intensity travels with the points") {
    PointCloud c = cloud_of({Vector3d(1, 2, 3)});
    c.intensity = VectorXd::Constant(1, 0.5);
    const PointCloud out = apply_transform(c, RigidTransformd::identity());
    REQUIRE(out.intensity);
    CHECK((*out.intensity)(0) == 0.5);
  }
}

TEST_CASE("RigidTransform validity") {
  RigidTransformd tf;
  CHECK(tf.is_valid());
  tf.rotation(0, 0) = -1.0;  // reflection
  CHECK_FALSE(tf.is_valid());
  tf = RigidTransformd::identity();
  tf.translation(1) = std::nan("");
  CHECK_FALSE(tf.is_valid());
  tf = RigidTransformd::identity();
  tf.rotation *= 1.01;
  CHECK_FALSE(tf.is_valid());
}

TEST_CASE("rotation_loss") {
  const Matrix3d eye = Matrix3d::Identity();
  CHECK(rotation_loss(rotation_z(0.8), rotation_z(0.8)) < 1e-15);
  CHECK(rotation_loss(rotation_z(std::numbers::pi), eye) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rotation_loss(rotation_z(std::numbers::pi / 2), eye) == doctest::Approx(2.0).epsilon(1e-12));
  // Frobenius distance of rotations by angle theta about one axis is 2 sqrt(2) sin(theta / 2).
  for (double theta : {0.1, 0.5, 1.3, 2.9})
    CHECK(rotation_loss(rotation_z(theta), eye) ==
          doctest::Approx(2.0 * std::sqrt(2.0) * std::sin(theta / 2)).epsilon(1e-12));
}

TEST_CASE("registration_error") {
  RigidTransformd gt;
  gt.rotation = rotation_z(0.3);
  gt.translation = Vector3d(1, 2, 3);

  auto err = registration_error(gt, gt);
  CHECK(err.rte == 0.0);
  CHECK(err.rre < 1e-6);

  RigidTransformd est = gt;
  est.rotation = rotation_z(5.0 * std::numbers::pi / 180.0) * gt.rotation;
  err = registration_error(est, gt);
  CHECK(err.rre == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(err.rte == 0.0);

  est = gt;
  est.translation += Vector3d(2, 0, 0);
  err = registration_error(est, gt);
  CHECK(err.rte == doctest::Approx(2.0));
  CHECK(err.rre < 1e-6);

  // acos argument is clamped, so near-identical rotations never produce NaN.
  est = gt;
  est.rotation *= 1.0 + 1e-15;
  CHECK(std::isfinite(registration_error(est, gt).rre));
}

TEST_CASE("random_z_rotation") {
  Rng rng(7);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const RigidTransformd tf = random_z_rotation(0.6, rng);
    CHECK(tf.translation == Vector3d::Zero());
    REQUIRE(tf.is_valid(1e-12));
    REQUIRE(std::abs(tf.rotation(2, 2) - 1.0) < 1e-15);
    const double phi = std::atan2(tf.rotation(1, 0), tf.rotation(0, 0));
    sum += phi;
    sum2 += phi * phi;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(sd >= 0.57);
  CHECK(sd <= 0.63);

  const RigidTransformd tiny = random_z_rotation(1e-12, rng);
  CHECK((tiny.rotation - Matrix3d::Identity()).norm() < 1e-10);
}

TEST_CASE("jitter") {
  Rng rng(3);
  PointCloud cloud;
  cloud.points = Points3d::Zero(10000, 3);
  CHECK(jitter(cloud, 0.0, rng).points == cloud.points);

  const PointCloud moved = jitter(cloud, 0.01, rng);
  const double mean_norm = moved.points.rowwise().norm().mean();
  // Mean of a chi distribution with 3 degrees of freedom, scaled by sigma.
  const double expected = 0.01 * std::sqrt(8.0 / std::numbers::pi);
  CHECK(std::abs(mean_norm - expected) < 0.05 * expected);
}

TEST_CASE("voxel_downsample") {
  SUBCASE("two points in one voxel merge at their midpoint") {
    const PointCloud c = cloud_of({Vector3d(0.01, 0.02, 0.03), Vector3d(0.11, 0.12, 0.13)});
    const PointCloud out = voxel_downsample(c, 0.2);
    REQUIRE(out.size() == 1);
    CHECK((out.point(0) - Vector3d(0.06, 0.07, 0.08)).norm() < 1e-15);
  }
  SUBCASE("well separated points survive unchanged") {
    Rng rng(11);
    PointCloud c;
    c.points.resize(20, 3);
    // Distinct voxel centers on a coarse lattice.
    for (Index i = 0; i < 20; ++i)
      c.points.row(i) = Vector3d(0.05 + 0.4 * static_cast<double>(i % 5), 0.05 + 0.4 * static_cast<double>(i / 5),
                                 0.05 + 0.4 * static_cast<double>(rng.below(3)))
                            .transpose();
    const PointCloud out = voxel_downsample(c, 0.2);
    REQUIRE(out.size() == 20);
    // Brute-force: every input appears exactly once in the output.
    for (Index i = 0; i < 20; ++i) {
      int hits = 0;
      for (Index j = 0; j < 20; ++j) hits += (out.point(j) - c.point(i)).norm() < 1e-12;
      CHECK(hits == 1);
    }
  }
  SUBCASE("output is ordered z-major") {
    const PointCloud c = cloud_of({Vector3d(0, 0, 1.1), Vector3d(1.1, 0, 0), Vector3d(0, 1.1, 0)});
    const PointCloud out = voxel_downsample(c, 1.0);
    CHECK(out.point(0).x() == doctest::Approx(1.1));
    CHECK(out.point(1).y() == doctest::Approx(1.1));
    CHECK(out.point(2).z() == doctest::Approx(1.1));
  }
  CHECK_THROWS_AS(voxel_downsample(cloud_of({Vector3d::Zero()}), 0.0), std::invalid_argument);
}

TEST_CASE("require_valid") {
  CHECK_THROWS_AS(require_valid(PointCloud{}, "x"), EmptyCloud);
  PointCloud c = cloud_of({Vector3d(1, 2, 3)});
  CHECK_NOTHROW(require_valid(c, "x"));
  c.points(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_valid(c, "x"), std::invalid_argument);
}

TEST_CASE("templated on scalar") {
  BasicPointCloud<float> c;
  c.points = Points3<float>::Ones(2, 3);
  RigidTransform<float> tf;
  tf.rotation = rotation_z(0.5f);
  const auto out = apply_transform(c, tf.inverse());
  CHECK((apply_transform(out, tf).points - c.points).cwiseAbs().maxCoeff() < 1e-6f);
}
