// Copyright 2026 The firm-planar Authors
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

#ifndef FIRM_ASSETS_HPP_
#define FIRM_ASSETS_HPP_

#include <string>

#include "firm/robot_model.hpp"

namespace firm::assets {

// Default planar sagittal humanoid: torso base, one merged arm pair
// (upper arm + forearm), and two legs (thigh + shank each). Total mass 35 kg.
// The same text ships as assets/planar_g1.model.
inline const char* planar_g1_text() {
  return R"(firm-model v1
name planar_g1
mass_scale 1.0
standing_height 0.72
link torso mass 17.0 inertia 0.30 length 0.45 com 0.0 0.20 points -0.07 0.0 0.07 0.0 -0.07 0.45 0.07 0.45
link upper_arm mass 2.5 inertia 0.015 length 0.25 com 0.0 -0.125 points 0.0 -0.25 0.0 -0.125
link forearm mass 1.5 inertia 0.007 length 0.22 com 0.0 -0.11 points 0.0 -0.22 0.0 -0.11
link front_thigh mass 4.0 inertia 0.045 length 0.36 com 0.0 -0.18 points 0.0 -0.36
link front_shank mass 3.0 inertia 0.040 length 0.36 com 0.0 -0.15 points -0.08 -0.36 0.14 -0.36
link rear_thigh mass 4.0 inertia 0.045 length 0.36 com 0.0 -0.18 points 0.0 -0.36
link rear_shank mass 3.0 inertia 0.040 length 0.36 com 0.0 -0.15 points -0.08 -0.36 0.14 -0.36
joint shoulder parent torso child upper_arm anchor 0.0 0.40 limits -2.8 2.8 vel_limit 20.0 torque_limit 60.0 kp 60.0 kd 2.0 q_default 0.0
joint elbow parent upper_arm child forearm anchor 0.0 -0.25 limits 0.0 2.7 vel_limit 20.0 torque_limit 40.0 kp 40.0 kd 1.5 q_default 0.2
joint front_hip parent torso child front_thigh anchor 0.0 0.0 limits -1.0 2.5 vel_limit 20.0 torque_limit 120.0 kp 120.0 kd 4.0 q_default 0.0
joint front_knee parent front_thigh child front_shank anchor 0.0 -0.36 limits -2.6 0.05 vel_limit 20.0 torque_limit 120.0 kp 120.0 kd 4.0 q_default 0.0
joint rear_hip parent torso child rear_thigh anchor 0.0 0.0 limits -1.0 2.5 vel_limit 20.0 torque_limit 120.0 kp 120.0 kd 4.0 q_default 0.0
joint rear_knee parent rear_thigh child rear_shank anchor 0.0 -0.36 limits -2.6 0.05 vel_limit 20.0 torque_limit 120.0 kp 120.0 kd 4.0 q_default 0.0
)";
}

inline RobotModel planar_g1() { return parse_model(planar_g1_text()); }

// Resolves "builtin:planar_g1" or a filesystem path.
inline RobotModel resolve_model(const std::string& ref) {
  if (ref == "builtin:planar_g1") return planar_g1();
  return load_model(ref);
}

}  // namespace firm::assets

#endif  // FIRM_ASSETS_HPP_
