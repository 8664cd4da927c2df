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
#include <cstdio>
#include <filesystem>

#include "firm/assets.hpp"
#include "firm/keyframes.hpp"

using namespace firm;

namespace {

RobotModel g_model = assets::planar_g1();

SparseTrajectory toy_sparse() {
  // two keyframes 1 s apart with scalar joint ramp 0 -> 1, stand at 3 s
  SparseTrajectory t;
  t.model_name = "toy";
  Keyframe a;
  a.timestamp = 1.0;
  a.q = {0.0};
  a.qd = {0.0};
  a.root_pose = {0.0, 0.5, 0.0};
  a.body_poses_local = {{0, 0, 0}};
  a.body_twists_local = {{0, 0, 0}};
  Keyframe b = a;
  b.timestamp = 2.0;
  b.q = {1.0};
  Keyframe stand = a;
  stand.timestamp = 3.0;
  stand.q = {0.25};
  t.keyframes = {a, b};
  t.stand_frame = stand;
  t.total_duration = 3.0;
  return t;
}

}  // namespace

TEST_CASE("forward demo dips below 0.3 and returns above 95% standing",
          "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kForward, 1);
  double hs = g_model.height_scale();
  double lowest = 1e9, final_z = traj.frames.back().root_pose.z;
  for (const auto& kf : traj.frames) lowest = std::min(lowest, kf.root_pose.z);
  REQUIRE(lowest < 0.3 * hs);
  REQUIRE(final_z > 0.95 * g_model.nominal_standing_root_height);
  REQUIRE(traj.frames.size() == 150);
  REQUIRE(traj.fps == 30.0);
}

TEST_CASE("backward demo shares the same profile shape", "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kBackward, 2);
  double lowest = 1e9;
  for (const auto& kf : traj.frames) lowest = std::min(lowest, kf.root_pose.z);
  REQUIRE(lowest < 0.3 * g_model.height_scale());
  REQUIRE(traj.frames.back().root_pose.z >
          0.95 * g_model.nominal_standing_root_height);
  // backward falls pitch the torso the other way
  double max_pitch = -1e9;
  for (const auto& kf : traj.frames) max_pitch = std::max(max_pitch, kf.root_pose.theta);
  REQUIRE(max_pitch > 0.3);
}

TEST_CASE("all demo frames satisfy joint position limits", "[keyframes]") {
  for (uint64_t seed : {1ULL, 7ULL, 23ULL}) {
    for (FallDirection d : {FallDirection::kForward, FallDirection::kBackward}) {
      DenseTrajectory traj = generate_demo(g_model, d, seed);
      for (const auto& kf : traj.frames)
        for (size_t j = 0; j < kf.q.size(); ++j) {
          REQUIRE(kf.q[j] >= g_model.joints[j].limit_lo - 1e-12);
          REQUIRE(kf.q[j] <= g_model.joints[j].limit_hi + 1e-12);
        }
    }
  }
}

TEST_CASE("demo velocities are the forward finite differences", "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kForward, 3);
  double f = traj.fps;
  for (size_t k = 0; k + 1 < traj.frames.size(); ++k)
    for (size_t j = 0; j < traj.frames[k].q.size(); ++j) {
      double expect = (traj.frames[k + 1].q[j] - traj.frames[k].q[j]) * f;
      REQUIRE(std::abs(traj.frames[k].qd[j] - expect) < 1e-9);
    }
}

TEST_CASE("demo generation is deterministic per style seed", "[keyframes]") {
  DenseTrajectory a = generate_demo(g_model, FallDirection::kForward, 11);
  DenseTrajectory b = generate_demo(g_model, FallDirection::kForward, 11);
  DenseTrajectory c = generate_demo(g_model, FallDirection::kForward, 12);
  REQUIRE(a.frames.size() == b.frames.size());
  bool same = true, differs = false;
  for (size_t k = 0; k < a.frames.size(); ++k) {
    same = same && a.frames[k].q == b.frames[k].q;
    differs = differs || a.frames[k].q != c.frames[k].q;
  }
  REQUIRE(same);
  REQUIRE(differs);
}

TEST_CASE("preprocess_heights shifts the root by the stated rule", "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kForward, 4);
  // force a frame whose lowest point sits at -0.02
  Keyframe& f0 = traj.frames[0];
  double low0 = lowest_body_z(g_model, f0.root_pose, f0.q);
  f0.root_pose.z += -0.02 - low0;
  double z_before = f0.root_pose.z;

  DenseTrajectory shifted = preprocess_heights(g_model, traj);
  REQUIRE(shifted.frames[0].root_pose.z == Catch::Approx(z_before + 0.07).margin(1e-12));
  for (const auto& kf : shifted.frames) {
    double low = lowest_body_z(g_model, kf.root_pose, kf.q);
    REQUIRE(low == Catch::Approx(0.05).margin(1e-9));
  }
}

TEST_CASE("preprocess_heights is idempotent and fixes points at clearance",
          "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kBackward, 5);
  DenseTrajectory once = preprocess_heights(g_model, traj);
  DenseTrajectory twice = preprocess_heights(g_model, once);
  for (size_t k = 0; k < once.frames.size(); ++k)
    REQUIRE(twice.frames[k].root_pose.z ==
            Catch::Approx(once.frames[k].root_pose.z).margin(1e-12));
}

TEST_CASE("sparsify keeps endpoints and uniform spacing", "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kForward, 6);
  REQUIRE(traj.frames.size() == 150);

  SECTION("n = frame count keeps every frame") {
    SparseTrajectory s = sparsify(g_model, traj, 150);
    REQUIRE(s.keyframes.size() == 150);
    for (size_t k = 0; k < 150; ++k)
      REQUIRE(s.keyframes[k].timestamp == traj.frames[k].timestamp);
  }

  SECTION("n = 25 gives ~0.2 s spacing (5 Hz)") {
    SparseTrajectory s = sparsify(g_model, traj, 25);
    REQUIRE(s.keyframes.size() == 25);
    double frame_dt = 1.0 / traj.fps;
    for (size_t k = 0; k + 1 < s.keyframes.size(); ++k) {
      double gap = s.keyframes[k + 1].timestamp - s.keyframes[k].timestamp;
      REQUIRE(gap >= 0.2 - frame_dt - 1e-9);
      REQUIRE(gap <= 0.2 + frame_dt + 1e-9);
    }
  }

  SECTION("n = 2 keeps exactly the first and last frames") {
    SparseTrajectory s = sparsify(g_model, traj, 2);
    REQUIRE(s.keyframes.size() == 2);
    REQUIRE(s.keyframes[0].timestamp == traj.frames.front().timestamp);
    REQUIRE(s.keyframes[1].timestamp == traj.frames.back().timestamp);
  }

  SECTION("out-of-range counts are rejected") {
    REQUIRE_THROWS_AS(sparsify(g_model, traj, 1), ConfigError);
    REQUIRE_THROWS_AS(sparsify(g_model, traj, 151), ConfigError);
  }

  SECTION("keyframes are a subset of the dense frames") {
    SparseTrajectory s = sparsify(g_model, traj, 37);
    for (const auto& kf : s.keyframes) {
      bool found = false;
      for (const auto& df : traj.frames)
        if (df.timestamp == kf.timestamp && df.q == kf.q) found = true;
      REQUIRE(found);
    }
  }

  SECTION("stand frame uses the default pose at the scaled stand height") {
    SparseTrajectory s = sparsify(g_model, traj, 25);
    REQUIRE(s.stand_frame.q == g_model.default_pose());
    REQUIRE(s.stand_frame.root_pose.z ==
            Catch::Approx(0.8 * g_model.height_scale()));
    REQUIRE(s.stand_frame.root_pose.x ==
            Catch::Approx(s.keyframes.back().root_pose.x));
    REQUIRE(s.total_duration == Catch::Approx(s.stand_frame.timestamp));
  }
}

TEST_CASE("interpolate hits keyframes exactly and lerps between", "[keyframes]") {
  SparseTrajectory t = toy_sparse();
  REQUIRE(interpolate(t, 1.0).q[0] == 0.0);
  REQUIRE(interpolate(t, 2.0).q[0] == 1.0);
  REQUIRE(interpolate(t, 1.5).q[0] == Catch::Approx(0.5));
  // before the first keyframe the first is held
  REQUIRE(interpolate(t, 0.0).q[0] == 0.0);
}

TEST_CASE("interpolate holds the stand frame after the end", "[keyframes]") {
  SparseTrajectory t = toy_sparse();
  REQUIRE(interpolate(t, 10.0 * t.total_duration).q[0] == Catch::Approx(0.25));
  // between last keyframe and stand it blends toward the stand pose
  REQUIRE(interpolate(t, 2.5).q[0] == Catch::Approx(0.625));
}

TEST_CASE("interpolate is continuous at keyframe boundaries", "[keyframes]") {
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kForward, 8);
  SparseTrajectory s = sparsify(g_model, traj, 25);
  for (double anchor : {s.keyframes[5].timestamp, s.keyframes[17].timestamp,
                        s.keyframes.back().timestamp, s.stand_frame.timestamp}) {
    Keyframe at = interpolate(s, anchor);
    for (double eps : {1e-3, 1e-5, 1e-7}) {
      Keyframe lo = interpolate(s, anchor - eps);
      Keyframe hi = interpolate(s, anchor + eps);
      for (size_t j = 0; j < at.q.size(); ++j) {
        REQUIRE(std::abs(lo.q[j] - at.q[j]) < 10.0 * eps + 1e-12);
        REQUIRE(std::abs(hi.q[j] - at.q[j]) < 10.0 * eps + 1e-12);
      }
    }
  }
}

TEST_CASE("next_keyframe returns the first strictly later frame", "[keyframes]") {
  SparseTrajectory t = toy_sparse();
  REQUIRE(next_keyframe(t, 0.5).timestamp == 1.0);
  REQUIRE(next_keyframe(t, 1.0).timestamp == 2.0);
  REQUIRE(next_keyframe(t, 2.5).timestamp == 3.0);  // stand frame
  REQUIRE(next_keyframe_index(t, 2.5) == 2);
}

TEST_CASE("trajectory files round-trip", "[keyframes]") {
  namespace fs = std::filesystem;
  DenseTrajectory traj = generate_demo(g_model, FallDirection::kBackward, 9);
  std::string dense_path = (fs::temp_directory_path() / "firm_traj_d.bin").string();
  save_dense_trajectory(traj, dense_path);
  DenseTrajectory loaded = load_dense_trajectory(dense_path);
  REQUIRE(loaded.model_name == traj.model_name);
  REQUIRE(loaded.label == traj.label);
  REQUIRE(loaded.fps == traj.fps);
  REQUIRE(loaded.frames.size() == traj.frames.size());
  for (size_t k = 0; k < traj.frames.size(); ++k) {
    REQUIRE(loaded.frames[k].q == traj.frames[k].q);
    REQUIRE(loaded.frames[k].qd == traj.frames[k].qd);
    REQUIRE(loaded.frames[k].timestamp == traj.frames[k].timestamp);
  }

  SparseTrajectory s = sparsify(g_model, traj, 25);
  std::string sparse_path = (fs::temp_directory_path() / "firm_traj_s.bin").string();
  save_sparse_trajectory(s, sparse_path);
  SparseTrajectory sl = load_sparse_trajectory(sparse_path);
  REQUIRE(sl.keyframes.size() == s.keyframes.size());
  REQUIRE(sl.total_duration == s.total_duration);
  REQUIRE(sl.stand_frame.q == s.stand_frame.q);
  for (size_t k = 0; k < s.keyframes.size(); ++k)
    REQUIRE(sl.keyframes[k].q == s.keyframes[k].q);
  std::remove(dense_path.c_str());
  std::remove(sparse_path.c_str());
}
