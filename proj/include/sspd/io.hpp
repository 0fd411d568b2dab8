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

#include <filesystem>
#include <string>
#include <vector>

#include "sspd/geometry.hpp"

namespace sspd {

enum class CloudFileFormat {
  ascii_xyz,  // "x y z[ intensity]" per line, '#' starts a comment
  kitti_bin,  // little-endian f32 records (x, y, z, intensity)
};

/// .bin is kitti_bin, anything else ascii_xyz.
CloudFileFormat format_for(const std::filesystem::path& path);

/// Throws IoError, ParseError (with line or byte offset) or EmptyCloud.
PointCloud read_cloud(const std::filesystem::path& path, CloudFileFormat format);
PointCloud read_cloud(const std::filesystem::path& path);

/// 17 significant digits, so read_cloud reproduces every double exactly.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFileFormat format);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// Twelve whitespace-separated numbers, row-major [R | t].
RigidTransformd read_transform(const std::filesystem::path& path);
void write_transform(const RigidTransformd& tf, const std::filesystem::path& path);
/// R row-major (9 values) then t (3 values), space separated.
std::string format_transform(const RigidTransformd& tf);

struct ManifestRow {
  std::filesystem::path cloud_a;
  std::filesystem::path cloud_b;
  std::filesystem::path gt_file;
};

/// Rows "cloud_a,cloud_b,gt_file"; an identical header line is skipped and
/// relative paths resolve against the manifest's directory.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace sspd
