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

#include <stdexcept>
#include <string>

namespace sspd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SSPD_DECLARE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    explicit Name(const std::string& what)  \
        : Error(#Name ": " + what) {}       \
  }

SSPD_DECLARE_ERROR(ShapeMismatch);
SSPD_DECLARE_ERROR(NonScalarLoss);
SSPD_DECLARE_ERROR(SvdDegenerate);
SSPD_DECLARE_ERROR(EmptyBall);
SSPD_DECLARE_ERROR(EmptyCloud);
SSPD_DECLARE_ERROR(DegenerateConfiguration);
SSPD_DECLARE_ERROR(InsufficientCorrespondences);
SSPD_DECLARE_ERROR(NoConsensus);
SSPD_DECLARE_ERROR(IoError);
SSPD_DECLARE_ERROR(ParseError);
SSPD_DECLARE_ERROR(FormatError);
SSPD_DECLARE_ERROR(ShapeError);
SSPD_DECLARE_ERROR(ConfigError);
SSPD_DECLARE_ERROR(TrainingFailed);

#undef SSPD_DECLARE_ERROR

}  // namespace sspd
