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
#include <fstream>

#include "firm/assets.hpp"
#include "firm/data_pipeline.hpp"

using namespace firm;

namespace {

struct PipelineFixture {
  RobotModel model = assets::planar_g1();
  DenseTrajectory dense;
  SparseTrajectory sparse;
  std::shared_ptr<GaussianActorCritic> net;

  PipelineFixture() {
    dense = preprocess_heights(model, generate_demo(model, FallDirection::kForward, 1));
    sparse = sparsify(model, dense, 25);
    Rng rng(4);
    net = std::make_shared<GaussianActorCritic>(2 + 4 * 6, 4 + 4 * 6, 6,
                                                std::vector<int>{16}, -1.0, rng);
  }

  FallRecoverEnv make_env(uint64_t seed, bool lenient = false) const {
    EnvConfig cfg;
    cfg.dr.enabled = false;
    cfg.episode.horizon = 10.0;
    if (lenient) {
      // timeline-property tests need episodes that outlive the trajectory
      cfg.episode.vel_limit_scale = 50.0;
      cfg.episode.root_speed_limit = 100.0;
    }
    return FallRecoverEnv(model, sparse, dense, cfg, seed);
  }
};

PipelineFixture& fx() {
  static PipelineFixture f;
  return f;
}

// Synthetic sparse trajectory with chosen keyframe heights, 0.25 s apart.
SparseTrajectory heights_trajectory(const std::vector<double>& heights,
                                    double stand_gap = 1.0) {
  SparseTrajectory t;
  t.model_name = "synthetic";
  for (size_t k = 0; k < heights.size(); ++k) {
    Keyframe kf;
    kf.timestamp = 0.25 * static_cast<double>(k);
    kf.q = {0.0};
    kf.qd = {0.0};
    kf.root_pose = {0.0, heights[k], 0.0};
    kf.body_poses_local = {{0, 0, 0}};
    kf.body_twists_local = {{0, 0, 0}};
    t.keyframes.push_back(kf);
  }
  t.stand_frame = t.keyframes.back();
  t.stand_frame.timestamp += stand_gap;
  t.total_duration = t.stand_frame.timestamp;
  return t;
}

RecordedHeights flat_heights(double value, double T) {
  RecordedHeights h;
  h.t0 = 0.0;
  h.dt = 0.05;
  for (double t = 0.0; t <= T; t += h.dt) h.heights.push_back(value);
  return h;
}

}  // namespace

TEST_CASE("stitch plan picks the closest second-half height", "[data_pipeline]") {
  // second-half candidate heights 0.30 / 0.42 / 0.55, recorded height 0.41
  std::vector<double> hs = {0.7, 0.6, 0.5, 0.45, 0.40, 0.35, 0.30, 0.42, 0.55};
  SparseTrajectory traj = heights_trajectory(hs);
  RecordedHeights rec = flat_heights(0.41, traj.total_duration);
  Rng rng(1);
  auto plan = make_stitch_plan(traj, rec, rng);
  REQUIRE(plan.has_value());
  REQUIRE(traj.keyframes[static_cast<size_t>(plan->target_keyframe)].root_pose.z ==
          Catch::Approx(0.42));
}

TEST_CASE("stitch plan returns no-plan when all candidates violate clearance",
          "[data_pipeline]") {
  std::vector<double> hs = {0.7, 0.6, 0.5, 0.45, 0.40, 0.35, 0.90, 0.95, 1.00};
  SparseTrajectory traj = heights_trajectory(hs);
  RecordedHeights rec = flat_heights(0.40, traj.total_duration);
  Rng rng(2);
  REQUIRE(!make_stitch_plan(traj, rec, rng).has_value());
}

TEST_CASE("stitch plan needs at least four keyframes", "[data_pipeline]") {
  SparseTrajectory traj = heights_trajectory({0.7, 0.5, 0.3});
  RecordedHeights rec = flat_heights(0.4, traj.total_duration);
  Rng rng(3);
  REQUIRE_THROWS_AS(make_stitch_plan(traj, rec, rng), ConfigError);
}

TEST_CASE("1e4 random plans match the brute-force oracle", "[data_pipeline]") {
  Rng rng(77);
  int no_plan = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    int n = static_cast<int>(rng.uniform_int(6, 24));
    std::vector<double> hs(static_cast<size_t>(n));
    for (auto& h : hs) h = rng.uniform(0.1, 0.9);
    SparseTrajectory traj = heights_trajectory(hs);
    RecordedHeights rec;
    rec.t0 = 0.0;
    rec.dt = 0.05;
    for (double t = 0.0; t <= traj.total_duration; t += rec.dt)
      rec.heights.push_back(rng.uniform(0.1, 0.9));

    Rng plan_rng_a(1000 + static_cast<uint64_t>(trial));
    Rng plan_rng_b(1000 + static_cast<uint64_t>(trial));
    auto plan = make_stitch_plan(traj, rec, plan_rng_a);

    // oracle: replicate the draw, then scan candidates independently
    double T = traj.total_duration;
    double t_cut = plan_rng_b.uniform(0.0, T / 3.0);
    REQUIRE(t_cut < T / 3.0);
    double h_t = rec.at(t_cut);
    int best = -1;
    double best_diff = 1e18;
    for (size_t k = 0; k < traj.keyframes.size(); ++k) {
      if (traj.keyframes[k].timestamp <= T / 2.0) continue;
      double d = std::abs(traj.keyframes[k].root_pose.z - h_t);
      if (d <= 0.05 && d < best_diff) {
        best_diff = d;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) {
      REQUIRE(!plan.has_value());
      ++no_plan;
    } else {
      REQUIRE(plan.has_value());
      REQUIRE(plan->target_keyframe == best);
      REQUIRE(plan->cut_time == t_cut);
      REQUIRE(plan->cut_time < T / 3.0);
      REQUIRE(traj.keyframes[static_cast<size_t>(plan->target_keyframe)].timestamp >
              T / 2.0);
    }
  }
  // both outcomes must actually occur in the sweep
  REQUIRE(no_plan > 100);
  REQUIRE(no_plan < 9900);
}

TEST_CASE("tie between equal heights breaks toward the earliest keyframe",
          "[data_pipeline]") {
  std::vector<double> hs = {0.7, 0.6, 0.5, 0.45, 0.40, 0.35, 0.42, 0.42, 0.42};
  SparseTrajectory traj = heights_trajectory(hs);
  RecordedHeights rec = flat_heights(0.42, traj.total_duration);
  Rng rng(5);
  auto plan = make_stitch_plan(traj, rec, rng);
  REQUIRE(plan.has_value());
  // keyframe 6 sits exactly at T/2 and is excluded; 7 is the earliest tie
  REQUIRE(plan->target_keyframe == 7);
}

TEST_CASE("collected episodes stay within the tuple bound", "[data_pipeline]") {
  FallRecoverEnv env = fx().make_env(10);
  CollectConfig cfg;
  cfg.episodes = 10;
  cfg.stitch_fraction = 0.0;
  Rng rng(11);
  DatasetShard shard = collect_rollouts(env, *fx().net, 0.5, cfg, rng);
  REQUIRE(!shard.episodes.empty());
  for (const auto& e : shard.episodes)
    REQUIRE(e.steps.size() <= 500);  // 10 s at 50 Hz
  REQUIRE(shard.tuple_count() <= 5000);
}

TEST_CASE("collection is deterministic byte-for-byte", "[data_pipeline]") {
  namespace fs = std::filesystem;
  auto collect_to = [&](const std::string& name) {
    FallRecoverEnv env = fx().make_env(21);
    CollectConfig cfg;
    cfg.episodes = 6;
    cfg.stitch_fraction = 0.5;
    Rng rng(13);
    DatasetShard shard = collect_rollouts(env, *fx().net, 0.5, cfg, rng);
    Dataset ds = merge_shards({shard});
    std::string path = (fs::temp_directory_path() / name).string();
    save_dataset(ds, path);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::remove(path.c_str());
    return bytes;
  };
  REQUIRE(collect_to("shard_a.bin") == collect_to("shard_b.bin"));
}

TEST_CASE("every goal in a shard is a keyframe of the source trajectory",
          "[data_pipeline]") {
  FallRecoverEnv env = fx().make_env(31);
  CollectConfig cfg;
  cfg.episodes = 8;
  cfg.stitch_fraction = 0.5;
  Rng rng(17);
  DatasetShard shard = collect_rollouts(env, *fx().net, 0.5, cfg, rng);
  const SparseTrajectory& traj = fx().sparse;
  for (const auto& e : shard.episodes)
    for (const auto& t : e.steps) {
      bool match = t.goal_q == traj.stand_frame.q;
      for (const auto& kf : traj.keyframes) match = match || t.goal_q == kf.q;
      REQUIRE(match);
    }
}

TEST_CASE("stitched episodes skip exactly the cut interval and shorten the "
          "timeline",
          "[data_pipeline]") {
  FallRecoverEnv env = fx().make_env(41, /*lenient=*/true);
  const SparseTrajectory& traj = fx().sparse;
  double T = traj.total_duration;
  CollectConfig cfg;
  cfg.episodes = 30;
  cfg.stitch_fraction = 1.0;
  Rng rng(19);
  DatasetShard shard = collect_rollouts(env, *fx().net, 0.5, cfg, rng);

  int stitched_seen = 0;
  for (const auto& e : shard.episodes) {
    if (!e.stitched) continue;
    ++stitched_seen;
    REQUIRE(e.effective_duration < T);
    // goal indices monotone, with one jump allowed
    int jumps = 0;
    for (size_t i = 1; i < e.steps.size(); ++i) {
      REQUIRE(e.steps[i].goal_index >= e.steps[i - 1].goal_index);
      if (e.steps[i].goal_index > e.steps[i - 1].goal_index + 1) ++jumps;
    }
    REQUIRE(jumps <= 1);
    // phase is measured against the shortened timeline
    for (const auto& t : e.steps) {
      REQUIRE(t.phase >= 0.0);
      REQUIRE(t.phase <= 1.0);
    }
  }
  REQUIRE(stitched_seen >= 10);
}

TEST_CASE("stitched episodes reach the stand goal in fewer steps on average",
          "[data_pipeline]") {
  const SparseTrajectory& traj = fx().sparse;
  int stand_index = static_cast<int>(traj.keyframes.size());
  auto mean_steps_to_stand = [&](double stitch_fraction, uint64_t seed) {
    FallRecoverEnv env = fx().make_env(seed, /*lenient=*/true);
    CollectConfig cfg;
    cfg.episodes = 60;
    cfg.stitch_fraction = stitch_fraction;
    Rng rng(seed + 1);
    DatasetShard shard = collect_rollouts(env, *fx().net, 0.5, cfg, rng);
    double total = 0.0;
    int count = 0;
    for (const auto& e : shard.episodes) {
      for (size_t i = 0; i < e.steps.size(); ++i)
        if (e.steps[i].goal_index == stand_index) {
          total += static_cast<double>(i);
          ++count;
          break;
        }
    }
    REQUIRE(count >= 50);
    return total / count;
  };
  double plain = mean_steps_to_stand(0.0, 100);
  double stitched = mean_steps_to_stand(1.0, 100);
  REQUIRE(stitched < plain);
}

TEST_CASE("merge concatenates tuples and recomputes exact statistics",
          "[data_pipeline]") {
  FallRecoverEnv env = fx().make_env(51);
  CollectConfig cfg;
  cfg.episodes = 3;
  cfg.stitch_fraction = 0.0;
  Rng rng(23);
  DatasetShard a = collect_rollouts(env, *fx().net, 0.5, cfg, rng);
  DatasetShard b = collect_rollouts(env, *fx().net, 0.5, cfg, rng);
  Dataset merged = merge_shards({a, b});
  REQUIRE(merged.data.tuple_count() == a.tuple_count() + b.tuple_count());

  // recompute the mean independently
  size_t od = static_cast<size_t>(merged.data.obs_dim);
  std::vector<double> mean(od, 0.0);
  int64_t n = 0;
  for (const auto& e : merged.data.episodes)
    for (const auto& t : e.steps) {
      for (size_t i = 0; i < od; ++i) mean[i] += t.obs[i];
      ++n;
    }
  for (size_t i = 0; i < od; ++i) {
    mean[i] /= static_cast<double>(n);
    REQUIRE(merged.norm.obs_mean[i] == Catch::Approx(mean[i]).margin(1e-12));
  }

  SECTION("empty merge and signature mismatch are rejected") {
    REQUIRE_THROWS_AS(merge_shards({}), ConfigError);
    DatasetShard alien = a;
    alien.model_signature = "other:6";
    REQUIRE_THROWS_AS(merge_shards({a, alien}), ConfigError);
  }
}

TEST_CASE("dataset file round-trips exactly", "[data_pipeline]") {
  namespace fs = std::filesystem;
  FallRecoverEnv env = fx().make_env(61);
  CollectConfig cfg;
  cfg.episodes = 4;
  cfg.stitch_fraction = 0.5;
  Rng rng(29);
  Dataset ds = merge_shards({collect_rollouts(env, *fx().net, 0.5, cfg, rng)});
  std::string path = (fs::temp_directory_path() / "firm_ds_rt.bin").string();
  save_dataset(ds, path);
  Dataset loaded = load_dataset(path);
  REQUIRE(loaded.data.model_signature == ds.data.model_signature);
  REQUIRE(loaded.data.episodes.size() == ds.data.episodes.size());
  REQUIRE(loaded.norm.obs_mean == ds.norm.obs_mean);
  REQUIRE(loaded.norm.act_std == ds.norm.act_std);
  for (size_t e = 0; e < ds.data.episodes.size(); ++e) {
    REQUIRE(loaded.data.episodes[e].steps.size() == ds.data.episodes[e].steps.size());
    REQUIRE(loaded.data.episodes[e].stitched == ds.data.episodes[e].stitched);
    for (size_t i = 0; i < ds.data.episodes[e].steps.size(); ++i) {
      REQUIRE(loaded.data.episodes[e].steps[i].obs == ds.data.episodes[e].steps[i].obs);
      REQUIRE(loaded.data.episodes[e].steps[i].action ==
              ds.data.episodes[e].steps[i].action);
      REQUIRE(loaded.data.episodes[e].steps[i].goal_q ==
              ds.data.episodes[e].steps[i].goal_q);
    }
  }
  std::remove(path.c_str());
}
