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

#include "firm/assets.hpp"
#include "firm/sim_core.hpp"

using namespace firm;

namespace {

RobotModel box_model() {
  return parse_model(
      "firm-model v1\nname box\nstanding_height 0.5\n"
      "link box mass 2.0 inertia 0.02 length 0.2 com 0.0 0.0 points -0.1 -0.05 0.1 -0.05\n");
}

RobotModel stack_model() {
  return parse_model(
      "firm-model v1\nname stack\nstanding_height 0.3\n"
      "link bottom mass 5.0 inertia 0.05 length 0.2 com 0.0 0.1 points -0.1 0.0 0.1 0.0\n"
      "link top mass 3.0 inertia 0.03 length 0.2 com 0.0 0.1 points -0.05 0.2 0.05 0.2\n"
      "joint mid parent bottom child top anchor 0.0 0.2 limits -1.0 1.0 vel_limit 10.0 "
      "torque_limit 50.0 kp 50.0 kd 2.0 q_default 0.0\n");
}

std::vector<double> zero_action(const RobotModel& m) {
  return std::vector<double>(static_cast<size_t>(m.joint_count()), 0.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// terrain
// ---------------------------------------------------------------------------

TEST_CASE("flat terrain is zero everywhere", "[sim_core][terrain]") {
  Terrain t = generate_terrain(TerrainKind::kFlat, 3);
  for (double x : {-19.0, -3.3, 0.0, 7.7, 19.0}) REQUIRE(t.height(x) == 0.0);
}

TEST_CASE("terrain generation is bit-deterministic per seed", "[sim_core][terrain]") {
  Terrain a = generate_terrain(TerrainKind::kUneven, 42);
  Terrain b = generate_terrain(TerrainKind::kUneven, 42);
  REQUIRE(a.heights == b.heights);
  Terrain c = generate_terrain(TerrainKind::kUneven, 43);
  REQUIRE(a.heights != c.heights);
}

TEST_CASE("uneven terrain respects the amplitude bound", "[sim_core][terrain]") {
  TerrainParams p;
  p.amplitude = 0.04;
  Terrain t = generate_terrain(TerrainKind::kUneven, 7, p);
  double peak = 0.0;
  for (double h : t.heights) peak = std::max(peak, std::abs(h));
  REQUIRE(peak <= 0.04 + 1e-9);
  REQUIRE(peak > 0.01);  // noise is not degenerate
}

TEST_CASE("wave and slope terrains follow their closed forms", "[sim_core][terrain]") {
  TerrainParams p;
  Terrain w = generate_terrain(TerrainKind::kWave, 1, p);
  REQUIRE(w.height(0.25) == Catch::Approx(0.06).margin(1e-4));
  Terrain s = generate_terrain(TerrainKind::kSlope, 1, p);
  REQUIRE(s.height(1.0) - s.height(0.0) ==
          Catch::Approx(std::tan(10.0 * M_PI / 180.0)).margin(1e-6));
}

TEST_CASE("negative amplitude is rejected", "[sim_core][terrain]") {
  TerrainParams p;
  p.amplitude = -0.01;
  REQUIRE_THROWS_AS(generate_terrain(TerrainKind::kUneven, 1, p), ConfigError);
}

// ---------------------------------------------------------------------------
// stepping
// ---------------------------------------------------------------------------

TEST_CASE("zero gravity equilibrium leaves the state unchanged", "[sim_core]") {
  SimParams params;
  params.gravity = 0.0;
  Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kFlat, 1), params);
  // hover above the ground so no contact forms
  auto q = sim.model().default_pose();
  std::vector<double> qd(q.size(), 0.0);
  sim.set_state(0.0, {0.0, 2.0, 0.0}, {}, q, qd);
  SimState before = sim.state();
  for (int i = 0; i < 50; ++i) sim.step(zero_action(sim.model()));
  SimState after = sim.state();
  REQUIRE(std::abs(after.root_pose.x - before.root_pose.x) < 1e-12);
  REQUIRE(std::abs(after.root_pose.z - before.root_pose.z) < 1e-12);
  REQUIRE(std::abs(after.root_pose.theta - before.root_pose.theta) < 1e-12);
  for (size_t j = 0; j < after.q.size(); ++j)
    REQUIRE(std::abs(after.q[j] - before.q[j]) < 1e-12);
}

TEST_CASE("ballistic flight conserves horizontal momentum", "[sim_core]") {
  Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kFlat, 1));
  sim.set_actuators_enabled(false);
  auto q = sim.model().default_pose();
  std::vector<double> qd(q.size());
  Rng rng(3);
  for (auto& v : qd) v = rng.uniform(-2.0, 2.0);
  sim.set_state(0.0, {0.0, 25.0, 0.2}, {0.7, 1.0, 0.5}, q, qd);

  auto momentum = [&] {
    SimState s = sim.state();
    double px = 0.0, pz = 0.0;
    for (size_t i = 0; i < s.bodies.size(); ++i) {
      px += sim.model().links[i].mass * s.bodies[i].twist.vx;
      pz += sim.model().links[i].mass * s.bodies[i].twist.vz;
    }
    return std::pair<double, double>(px, pz);
  };
  auto [px0, pz0] = momentum();
  double total_mass = sim.model().total_mass();
  int steps = 100;  // 2 s at 50 Hz
  for (int i = 0; i < steps; ++i) {
    auto rep = sim.step(zero_action(sim.model()));
    REQUIRE(rep.contacts.empty());
  }
  auto [px1, pz1] = momentum();
  REQUIRE(std::abs(px1 - px0) / std::max(1.0, std::abs(px0)) < 1e-9);
  // vertical momentum obeys gravity exactly
  double expect_pz = pz0 - total_mass * 9.81 * 2.0;
  REQUIRE(pz1 == Catch::Approx(expect_pz).epsilon(1e-9));
}

TEST_CASE("free fall gains g*dt of vertical velocity per step", "[sim_core]") {
  Simulator sim(box_model(), generate_terrain(TerrainKind::kFlat, 1));
  sim.set_actuators_enabled(false);
  sim.set_state(0.0, {0.0, 30.0, 0.0}, {}, {}, {});
  auto rep = sim.step({});
  double cdt = sim.control_dt();
  REQUIRE(rep.state.root_twist.vz == Catch::Approx(-9.81 * cdt).epsilon(1e-12));
  // per-body CoM acceleration is exactly gravity: momentum-change oracle
  REQUIRE(rep.body_accel[0].z == Catch::Approx(-9.81).epsilon(1e-12));
  REQUIRE(rep.body_accel[0].x == 0.0);
}

TEST_CASE("drop impulse matches the impulse-momentum theorem", "[sim_core]") {
  RobotModel box = box_model();
  Simulator sim(box, generate_terrain(TerrainKind::kFlat, 1));
  sim.set_actuators_enabled(false);
  // collision points sit 0.05 below the CoM: start them 0.5 m up
  sim.set_state(0.0, {0.0, 0.55, 0.0}, {}, {}, {});
  double m = box.links[0].mass;
  double g = 9.81;
  double expect = m * std::sqrt(2.0 * g * 0.5);

  double impulse = 0.0;
  double contact_time = 0.0;
  bool touched = false;
  for (int i = 0; i < 300; ++i) {
    auto rep = sim.step({});
    double jn = 0.0;
    for (const auto& c : rep.contacts) jn += c.normal_impulse;
    if (jn > 0.0) touched = true;
    if (touched) {
      impulse += jn;
      contact_time += sim.control_dt();
    }
    if (touched && std::abs(rep.state.root_twist.vz) < 1e-4 && i > 10) break;
  }
  REQUIRE(touched);
  // subtract the quasi-static weight support accumulated while in contact
  double net = impulse - m * g * contact_time;
  REQUIRE(net == Catch::Approx(expect).epsilon(0.05));
}

TEST_CASE("disabled actuators produce zero torques, re-enable restores PD",
          "[sim_core]") {
  Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kFlat, 1));
  sim.set_actuators_enabled(false);
  std::vector<double> action(static_cast<size_t>(sim.model().joint_count()), 0.5);
  auto rep = sim.step(action);
  for (double t : rep.state.last_applied_torques) REQUIRE(t == 0.0);
  sim.set_actuators_enabled(true);
  rep = sim.step(action);
  double mag = 0.0;
  for (double t : rep.state.last_applied_torques) mag += std::abs(t);
  REQUIRE(mag > 1e-3);
}

TEST_CASE("passive collapse from upright never raises the root before new contact",
          "[sim_core]") {
  Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kFlat, 1));
  // settle into standing contact first, then cut power
  for (int i = 0; i < 50; ++i) sim.step(zero_action(sim.model()));
  sim.set_actuators_enabled(false);
  // squat impulse buckles the knees without pivoting over a foot edge
  sim.apply_root_velocity_impulse(0.0, -0.3);

  double prev_z = sim.state().root_pose.z;
  int shank_front = sim.model().link_index("front_shank");
  int shank_rear = sim.model().link_index("rear_shank");
  for (int i = 0; i < 150; ++i) {
    auto rep = sim.step(zero_action(sim.model()));
    bool nonfoot_contact = false;
    for (const auto& c : rep.contacts)
      if (c.body != shank_front && c.body != shank_rear) nonfoot_contact = true;
    if (nonfoot_contact) break;
    REQUIRE(rep.state.root_pose.z <= prev_z + 1e-3);
    prev_z = rep.state.root_pose.z;
  }
}

TEST_CASE("impacts never increase mechanical energy", "[sim_core]") {
  Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kFlat, 1));
  sim.set_actuators_enabled(false);
  auto q = sim.model().default_pose();
  std::vector<double> qd(q.size(), 0.0);
  sim.set_state(0.0, {0.0, 1.2, 0.35}, {0.4, 0.0, 0.3}, q, qd);

  double m_total = sim.model().total_mass();
  double impulse_floor = 2.0 * m_total * 9.81 * sim.control_dt();
  double prev_jn = 0.0;
  int impacts = 0;
  for (int i = 0; i < 150; ++i) {
    double e_before = sim.mechanical_energy();
    auto rep = sim.step(zero_action(sim.model()));
    double e_after = sim.mechanical_energy();
    double jn = 0.0;
    for (const auto& c : rep.contacts) jn += c.normal_impulse;
    bool impact = prev_jn == 0.0 && jn > impulse_floor;
    if (impact) {
      ++impacts;
      REQUIRE(e_after <= e_before + 1e-6);
    }
    prev_jn = jn;
  }
  REQUIRE(impacts >= 1);
}

TEST_CASE("every contact event respects the Coulomb cone", "[sim_core]") {
  Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kUneven, 9));
  auto q = sim.model().default_pose();
  std::vector<double> qd(q.size(), 0.0);
  sim.set_state(0.0, {0.0, 0.9, 0.3}, {0.5, 0.0, 0.0}, q, qd);
  Rng rng(11);
  std::vector<double> action(q.size());
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    for (auto& a : action) a = rng.uniform(-0.6, 0.6);
    auto rep = sim.step(action);
    for (const auto& c : rep.contacts) {
      REQUIRE(c.normal_impulse >= 0.0);
      REQUIRE(std::abs(c.tangential_impulse) <=
              sim.friction() * c.normal_impulse + 1e-9);
      ++checked;
    }
  }
  REQUIRE(checked > 100);
}

TEST_CASE("identical inputs give bit-identical trajectories", "[sim_core]") {
  auto run = [] {
    Simulator sim(assets::planar_g1(), generate_terrain(TerrainKind::kUneven, 5));
    auto q = sim.model().default_pose();
    std::vector<double> qd(q.size(), 0.0);
    sim.set_state(0.0, {0.0, 0.9, 0.2}, {0.3, 0.0, 0.1}, q, qd);
    Rng rng(17);
    std::vector<double> action(q.size());
    std::vector<double> trace;
    for (int i = 0; i < 100; ++i) {
      for (auto& a : action) a = rng.uniform(-0.5, 0.5);
      auto rep = sim.step(action);
      trace.push_back(rep.state.root_pose.x);
      trace.push_back(rep.state.root_pose.z);
      trace.push_back(rep.state.root_pose.theta);
      for (double v : rep.state.q) trace.push_back(v);
    }
    return trace;
  };
  REQUIRE(run() == run());
}

TEST_CASE("static two-link stack reports the supported weight", "[sim_core]") {
  RobotModel stack = stack_model();
  Simulator sim(stack, generate_terrain(TerrainKind::kFlat, 1));
  sim.set_state(0.0, {0.0, 0.001, 0.0}, {}, {0.0}, {0.0});
  // settle
  for (int i = 0; i < 100; ++i) sim.step({0.0});
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 25; ++i) {
    auto rep = sim.step({0.0});
    sum += rep.joint_forces[0];
    ++n;
  }
  double supported = stack.links[1].mass * 9.81;
  REQUIRE(sum / n == Catch::Approx(supported).epsilon(0.02));
}

TEST_CASE("divergence raises an error carrying the last valid time", "[sim_core]") {
  Simulator sim(box_model(), generate_terrain(TerrainKind::kFlat, 1));
  sim.set_state(0.0, {0.0, 5.0, 0.0}, {}, {}, {});
  sim.step({});
  sim.apply_root_velocity_impulse(1e7, 0.0);
  try {
    sim.step({});
    FAIL("expected DivergedError");
  } catch (const DivergedError& e) {
    REQUIRE(e.last_valid_time == Catch::Approx(sim.control_dt()));
  }
}
