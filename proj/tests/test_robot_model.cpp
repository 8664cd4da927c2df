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

#include <catch2/catch_amalgamated.hpp>
#include <fstream>
#include <sstream>

#include "firm/assets.hpp"
#include "firm/robot_model.hpp"

using namespace firm;

namespace {

// Minimal two-link chain: unit-length links hanging along -z.
std::string two_link_text() {
  return "firm-model v1\n"
         "name chain2\n"
         "standing_height 2.0\n"
         "link a mass 1.0 inertia 0.1 length 1.0 com 0.0 -0.5 points 0.0 -1.0\n"
         "link b mass 1.0 inertia 0.1 length 1.0 com 0.0 -0.5 points 0.0 -1.0\n"
         "joint j parent a child b anchor 0.0 -1.0 limits -3.0 3.0 vel_limit 10.0 "
         "torque_limit 10.0 kp 1.0 kd 0.1 q_default 0.0\n";
}

}  // namespace

TEST_CASE("bundled planar model loads with 7 links and 6 joints", "[robot_model]") {
  RobotModel m = assets::planar_g1();
  REQUIRE(m.link_count() == 7);
  REQUIRE(m.joint_count() == 6);
  REQUIRE(m.name == "planar_g1");
  REQUIRE(m.links[static_cast<size_t>(m.base_link)].name == "torso");
  REQUIRE(m.total_mass() == Catch::Approx(35.0));
  REQUIRE(m.nominal_standing_root_height == Catch::Approx(0.72));
}

TEST_CASE("embedded model matches the shipped asset file", "[robot_model]") {
  std::ifstream in(std::string(FIRM_SOURCE_DIR) + "/assets/planar_g1.model");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  REQUIRE(ss.str() == std::string(assets::planar_g1_text()));
}

TEST_CASE("malformed model corpus is rejected", "[robot_model]") {
  auto expect_parse_error = [](const std::string& text, const std::string& what) {
    REQUIRE_THROWS_MATCHES(parse_model(text), ParseError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring(what)));
  };

  // joint child is its own ancestor -> cycle
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link b mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link c mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "joint j1 parent c child b anchor 0 0 limits -1 1 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n"
      "joint j2 parent b child c anchor 0 0 limits -1 1 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n",
      "cycle");

  // same link as the child of two joints
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link b mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link c mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "joint j1 parent a child b anchor 0 0 limits -1 1 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n"
      "joint j2 parent c child b anchor 0 0 limits -1 1 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n",
      "child of two joints");

  // zero mass names the link
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link heavy mass 0.0 inertia 0.1 length 1 com 0 0 points 0 0\n",
      "heavy");

  // duplicate link names
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "joint j parent a child a anchor 0 0 limits -1 1 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n",
      "duplicate link name");

  // joint count != link count - 1
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link b mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n",
      "joint count");

  // inverted limits
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link b mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "joint j parent a child b anchor 0 0 limits 2 -2 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n",
      "lo < hi");

  // unknown parent link
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "link b mass 1 inertia 0.1 length 1 com 0 0 points 0 0\n"
      "joint j parent nosuch child b anchor 0 0 limits -1 1 vel_limit 1 torque_limit 1 kp 1 kd 0 q_default 0\n",
      "unknown parent link");

  // missing collision points
  expect_parse_error(
      "firm-model v1\nname bad\nstanding_height 1.0\n"
      "link a mass 1 inertia 0.1 length 1 com 0 0 points\n",
      "collision point");

  // missing header
  REQUIRE_THROWS_AS(parse_model("name x\n"), ParseError);
}

TEST_CASE("fk at identity reproduces rest offsets", "[robot_model]") {
  RobotModel m = parse_model(two_link_text());
  std::vector<double> q{0.0};
  auto frames = forward_kinematics(m, {0.0, 0.0, 0.0}, q);
  REQUIRE(frames[0].pose.x == 0.0);
  REQUIRE(frames[0].pose.z == 0.0);
  REQUIRE(frames[0].pose.theta == 0.0);
  // child origin at parent anchor (0, -1), same orientation
  REQUIRE(frames[1].pose.x == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(frames[1].pose.z == Catch::Approx(-1.0));
  REQUIRE(frames[1].pose.theta == 0.0);
  REQUIRE(frames[1].com.z == Catch::Approx(-1.5));
}

TEST_CASE("fk single hinge rotated by pi/2 moves child tip as drawn",
          "[robot_model]") {
  RobotModel m = parse_model(two_link_text());
  // Hand-drawn oracle: with the chain hanging along -z, rotating the hinge by
  // +pi/2 (counterclockwise) swings the child tip from (0,-2) to (+1,-1).
  auto frames = forward_kinematics(m, {0.0, 0.0, 0.0}, {M_PI / 2.0});
  Vec2 tip = transform_point(frames[1].pose, {0.0, -1.0});
  REQUIRE(tip.x == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(tip.z == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("fk is exactly translation equivariant", "[robot_model]") {
  RobotModel m = assets::planar_g1();
  Rng rng(5);
  std::vector<double> q(static_cast<size_t>(m.joint_count()));
  for (auto& v : q) v = rng.uniform(-1.0, 1.0);
  auto base = forward_kinematics(m, {0.3, 0.9, 0.4}, q);
  auto moved = forward_kinematics(m, {0.3 + 5.0, 0.9, 0.4}, q);
  for (size_t i = 0; i < base.size(); ++i) {
    REQUIRE(moved[i].pose.x == base[i].pose.x + 5.0);
    REQUIRE(moved[i].pose.z == base[i].pose.z);
    REQUIRE(moved[i].pose.theta == base[i].pose.theta);
  }
}

TEST_CASE("fk rotation equivariance about the root origin", "[robot_model]") {
  RobotModel m = assets::planar_g1();
  Rng rng(6);
  std::vector<double> q(static_cast<size_t>(m.joint_count()));
  for (auto& v : q) v = rng.uniform(-0.8, 0.8);
  double phi = 0.7;
  auto base = forward_kinematics(m, {0.0, 0.0, 0.1}, q);
  auto rot = forward_kinematics(m, {0.0, 0.0, 0.1 + phi}, q);
  for (size_t i = 0; i < base.size(); ++i) {
    Vec2 expect = rotate(phi, {base[i].pose.x, base[i].pose.z});
    REQUIRE(rot[i].pose.x == Catch::Approx(expect.x).margin(1e-12));
    REQUIRE(rot[i].pose.z == Catch::Approx(expect.z).margin(1e-12));
    REQUIRE(rot[i].pose.theta == Catch::Approx(base[i].pose.theta + phi));
  }
}

TEST_CASE("fk rejects wrong q length", "[robot_model]") {
  RobotModel m = assets::planar_g1();
  REQUIRE_THROWS_AS(forward_kinematics(m, {}, std::vector<double>(3, 0.0)),
                    DimensionError);
}

TEST_CASE("lowest_body_z at upright rest finds the foot points", "[robot_model]") {
  RobotModel m = assets::planar_g1();
  std::vector<double> q(static_cast<size_t>(m.joint_count()), 0.0);
  PlanarPose root{0.0, m.nominal_standing_root_height, 0.0};
  double low = lowest_body_z(m, root, q);
  // FK oracle: shank tip points sit at root height - 0.36 - 0.36.
  REQUIRE(low == Catch::Approx(m.nominal_standing_root_height - 0.72).margin(1e-12));
}

TEST_CASE("lowest_body_z shifts exactly with a rigid raise", "[robot_model]") {
  RobotModel m = assets::planar_g1();
  Rng rng(7);
  std::vector<double> q(static_cast<size_t>(m.joint_count()));
  for (auto& v : q) v = rng.uniform(-0.5, 0.5);
  double a = lowest_body_z(m, {0.1, 0.6, 0.3}, q);
  double b = lowest_body_z(m, {0.1, 0.9, 0.3}, q);
  REQUIRE(b - a == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("lowest_body_z handles ties by value", "[robot_model]") {
  // both feet at the same height: the tie is irrelevant to the value
  RobotModel m = assets::planar_g1();
  std::vector<double> q(static_cast<size_t>(m.joint_count()), 0.0);
  double low = lowest_body_z(m, {0.0, 0.72, 0.0}, q);
  REQUIRE(low == Catch::Approx(0.0).margin(1e-12));
}
