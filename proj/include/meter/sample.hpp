// Copyright 2026 The meter-rt Authors. All Rights Reserved.
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

#include <cstddef>
#include <string>

#include "meter/tensor.hpp"

namespace meter {

/// Depth convention of a dataset: the indoor set is measured in centimetre steps,
/// the outdoor one in decimetre steps.
enum class SceneUnit { IndoorCm, OutdoorDm };

inline std::string to_string(SceneUnit u) { return u == SceneUnit::IndoorCm ? "indoor_cm" : "outdoor_dm"; }

/// Largest |D shift| allowed for a unit, in metres.
inline double max_depth_shift(SceneUnit u) { return u == SceneUnit::IndoorCm ? 0.10 : 1.0; }

/// Paired RGB image in [0, 1] and metric depth (0 marks a missing measurement).
struct DepthSample {
  Tensor rgb;    // (1, 3, H, W)
  Tensor depth;  // (1, 1, H, W), metres
  SceneUnit unit = SceneUnit::IndoorCm;
  float max_depth = 10.0f;
};

}  // namespace meter
