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
#include <string>
#include <vector>

namespace sspd {

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckCase> cases;
  double seconds = 0.0;

  bool passed() const;
};

/// Central-difference checks of every autodiff op, the closed-form
/// registration layer and the full descriptor-to-loss chain (k = 5, c = 4)
/// on seeded inputs.
GradCheckSuiteResult run_gradcheck_suite(double tolerance = 1e-4, std::uint64_t seed = 0);

}  // namespace sspd
