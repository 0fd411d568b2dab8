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

#include <string>

#include "sspd/geometry.hpp"

namespace sspd {

enum class SceneKind { corner_room, cube_field, random_blobs };

SceneKind parse_scene_kind(const std::string& name);
std::string to_string(SceneKind kind);

struct SceneOptions {
  Index n_cubes = 6;
  double cube_min = 4.0;  // edge length, meters
  double cube_max = 8.0;
  Index n_blobs = 12;
};

/// Points sampled uniformly (by area) on structured surfaces spanning
/// [-extent/2, extent/2] in x and y with the ground at z = 0.
///  corner_room: floor plus the walls x = -extent/2 and y = -extent/2, height extent/2.
///  cube_field: ground plus yawed boxes resting on it (top and four sides).
///  random_blobs: anisotropic Gaussian blobs above the ground.
PointCloud synth_scene(SceneKind kind, Index n_points, double extent, Rng& rng, const SceneOptions& opts = {});

}  // namespace sspd
