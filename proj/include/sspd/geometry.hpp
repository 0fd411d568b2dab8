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

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sspd/errors.hpp"
#include "sspd/rng.hpp"
#include "sspd/types.hpp"

namespace sspd {

/// Ordered 3D points (meters) with optional per-point intensity.
template <typename Scalar>
struct BasicPointCloud {
  Points3<Scalar> points;
  std::optional<VectorX<Scalar>> intensity;

  BasicPointCloud() = default;
  explicit BasicPointCloud(Points3<Scalar> pts, std::optional<VectorX<Scalar>> inten = std::nullopt)
      : points(std::move(pts)), intensity(std::move(inten)) {}

  Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }
  auto point(Index i) const { return points.row(i).transpose(); }

  bool all_finite() const {
    return points.allFinite() && (!intensity || intensity->allFinite());
  }
};

using PointCloud = BasicPointCloud<double>;

/// Rotation plus translation; maps x to rotation * x + translation.
template <typename Scalar>
struct RigidTransform {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  static RigidTransform identity() { return {}; }

  Vector3<Scalar> operator()(const Vector3<Scalar>& x) const { return rotation * x + translation; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// (a * b)(x) = a(b(x)).
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
  }

  bool is_valid(Scalar tol = Scalar(1e-9)) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Matrix3<Scalar> gram = rotation.transpose() * rotation;
    if ((gram - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }
};

using RigidTransformd = RigidTransform<double>;

template <typename Scalar>
Matrix3<Scalar> rotation_z(Scalar angle) {
  const Scalar c = std::cos(angle), s = std::sin(angle);
  Matrix3<Scalar> r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

template <typename Scalar>
BasicPointCloud<Scalar> apply_transform(const BasicPointCloud<Scalar>& cloud,
                                        const RigidTransform<Scalar>& tf) {
  BasicPointCloud<Scalar> out;
  out.points = (cloud.points * tf.rotation.transpose()).rowwise() + tf.translation.transpose();
  out.intensity = cloud.intensity;
  return out;
}

/// ||I - r * r_gt^T||_F, in [0, 2 sqrt 2] for rotations.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rotation_loss(const Eigen::MatrixBase<DerivedA>& r,
                                        const Eigen::MatrixBase<DerivedB>& r_gt) {
  using Scalar = typename DerivedA::Scalar;
  return (Matrix3<Scalar>::Identity() - r * r_gt.transpose()).norm();
}

/// Angle in degrees of the relative rotation a^T * b.
template <typename Scalar>
Scalar rotation_angle_deg(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  const Scalar cos_angle = ((a.transpose() * b).trace() - Scalar(1)) / Scalar(2);
  return std::acos(std::clamp(cos_angle, Scalar(-1), Scalar(1))) * Scalar(180) / Scalar(EIGEN_PI);
}

template <typename Scalar>
struct RegistrationError {
  Scalar rte;  // meters
  Scalar rre;  // degrees
};

/// Both transforms map source to target.
template <typename Scalar>
RegistrationError<Scalar> registration_error(const RigidTransform<Scalar>& est,
                                             const RigidTransform<Scalar>& gt) {
  return {(est.translation - gt.translation).norm(), rotation_angle_deg(est.rotation, gt.rotation)};
}

/// Rz(phi), phi ~ N(0, sigma_r^2), zero translation.
RigidTransformd random_z_rotation(double sigma_r, Rng& rng);

/// Adds isotropic N(0, sigma_p^2) noise per axis to every point.
PointCloud jitter(const PointCloud& cloud, double sigma_p, Rng& rng);

/// Voxel-grid centroids, ordered by voxel index (z-major, then y, then x).
PointCloud voxel_downsample(const PointCloud& cloud, double grid);

/// Throws EmptyCloud, or std::invalid_argument on non-finite coordinates.
void require_valid(const PointCloud& cloud, const char* what);

}  // namespace sspd
