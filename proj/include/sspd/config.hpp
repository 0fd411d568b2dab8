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

#include "sspd/registration_eval.hpp"
#include "sspd/trainer.hpp"

namespace sspd {

/// Flat key=value run configuration. Training keys use the TrainConfig field
/// names; evaluation keys are prefixed "ransac.", "iss." or "eval.".
/// Evaluation reuses r_cluster and c from the training section.
struct RunConfig {
  TrainConfig train;
  EvalConfig eval;
};

/// Blank lines and '#' comments are ignored. Unknown or repeated keys and
/// malformed values throw ConfigError naming the line.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Every key with its current value, one per line; parses back to the same config.
std::string format_run_config(const RunConfig& cfg);

}  // namespace sspd
