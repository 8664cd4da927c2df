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

#ifndef FIRM_DATA_PIPELINE_HPP_
#define FIRM_DATA_PIPELINE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "firm/ppo.hpp"

namespace firm {

// One (o, g, a) record plus bookkeeping used for stitched-phase recompute
// and window slicing.
struct TransitionTuple {
  std::vector<double> obs;     // (omega_root, q, qd, a_prev)
  std::vector<double> goal_q;  // raw joint positions of the target keyframe
  std::vector<double> action;  // executed joint offsets
  int goal_index = 0;
  double phase = 0.0;
};

struct EpisodeRecord {
  std::vector<TransitionTuple> steps;
  uint32_t terrain_kind = 0;
  uint64_t episode_seed = 0;
  bool stitched = false;
  bool success = false;       // stood upright by the episode end
  uint32_t trajectory_id = 0;
  double effective_duration = 0.0;  // T used for the phase
};

struct DatasetShard {
  std::string model_signature;  // model name : joint count
  int obs_dim = 0, act_dim = 0;
  std::vector<EpisodeRecord> episodes;

  int64_t tuple_count() const {
    int64_t n = 0;
    for (const auto& e : episodes) n += static_cast<int64_t>(e.steps.size());
    return n;
  }
};

// Per-channel normalization of observations and actions.
struct NormStats {
  std::vector<double> obs_mean, obs_std;
  std::vector<double> act_mean, act_std;
};

struct Dataset {
  DatasetShard data;  // merged episodes
  NormStats norm;
};

// ---------------------------------------------------------------------------
// Stitch planning
// ---------------------------------------------------------------------------

struct StitchPlan {
  uint32_t trajectory_id = 0;
  double cut_time = 0.0;      // t, strictly before one third of the duration
  int target_keyframe = 0;    // index into the sparse keyframes
  double target_time = 0.0;   // t'
};

// Root height the plan matches against: recorded rollout heights when
// available, with the demo interpolation as the height source otherwise.
struct RecordedHeights {
  double t0 = 0.0;
  double dt = 0.02;
  std::vector<double> heights;

  double at(double t) const {
    if (heights.empty()) throw ConfigError("stitch: no recorded heights");
    double u = (t - t0) / dt;
    if (u <= 0.0) return heights.front();
    if (u >= static_cast<double>(heights.size() - 1)) return heights.back();
    auto i = static_cast<size_t>(u);
    double frac = u - static_cast<double>(i);
    return heights[i] * (1.0 - frac) + heights[i + 1] * frac;
  }
};

inline constexpr double kStitchHeightThreshold = 0.05;  // m

// Picks t ~ U[0, T/3) and the second-half keyframe whose root height is
// closest to the recorded height at t, subject to the 0.05 m threshold.
// Ties break toward the earliest candidate. Returns nothing when every
// candidate violates the threshold.
inline std::optional<StitchPlan> make_stitch_plan(const SparseTrajectory& traj,
                                                  const RecordedHeights& states,
                                                  Rng& rng,
                                                  uint32_t trajectory_id = 0) {
  if (traj.keyframes.size() < 4)
    throw ConfigError("make_stitch_plan: need at least 4 keyframes");
  double T = traj.total_duration;
  double t = rng.uniform(0.0, T / 3.0);
  double h_t = states.at(t);

  int best = -1;
  double best_diff = 0.0;
  for (size_t k = 0; k < traj.keyframes.size(); ++k) {
    const Keyframe& kf = traj.keyframes[k];
    if (kf.timestamp <= T / 2.0) continue;
    double diff = std::abs(kf.root_pose.z - h_t);
    if (diff > kStitchHeightThreshold) continue;
    if (best < 0 || diff < best_diff) {
      best = static_cast<int>(k);
      best_diff = diff;
    }
  }
  if (best < 0) return std::nullopt;
  StitchPlan plan;
  plan.trajectory_id = trajectory_id;
  plan.cut_time = t;
  plan.target_keyframe = best;
  plan.target_time = traj.keyframes[static_cast<size_t>(best)].timestamp;
  return plan;
}

// ---------------------------------------------------------------------------
// Rollout collection
// ---------------------------------------------------------------------------

struct CollectConfig {
  int episodes = 64;
  double stitch_fraction = 0.3;  // share of episodes re-executed with a plan
  double success_height_frac = 0.7 / kReferenceStandingHeight;  // of stature
  double success_pitch = 0.3;
  double success_hold = 1.0;  // s
};

// Deterministic policy rollout (mean action) through one episode; records the
// (o, g, a) stream the policy actually produced.
inline EpisodeRecord run_policy_episode(FallRecoverEnv& env,
                                        const GaussianActorCritic& net,
                                        double action_scale,
                                        const std::optional<StitchPlan>& plan) {
  EpisodeRecord ep;
  if (plan) {
    env.set_stitch(plan->cut_time, plan->target_time);
    env.set_init_window(0.0, std::max(0.03, plan->cut_time - 0.1));
    ep.stitched = true;
  } else {
    env.set_stitch(-1.0, -1.0);
    env.set_init_window(0.0, 0.0);
  }
  EnvStepResult r = env.reset();
  ep.terrain_kind = static_cast<uint32_t>(env.config().terrain);
  ep.episode_seed = env.episodes_started();

  const RobotModel& model = env.robot();
  double thr_height = 0.7 * model.height_scale();
  int hold_steps = 0;
  int hold_needed =
      static_cast<int>(std::lround(1.0 / env.control_dt()));

  Tensor obs_row({1, env.actor_obs_dim()});
  while (!r.done) {
    std::copy(r.actor_obs.begin(), r.actor_obs.end(), obs_row.data.begin());
    Tensor mean = net.actor_mean(obs_row);
    std::vector<double> action(mean.data);
    for (double& v : action) v *= action_scale;

    TransitionTuple tt;
    tt.obs = r.diffusion_obs;
    tt.goal_q = r.goal_q;
    tt.goal_index = r.goal_index;
    tt.phase = r.phase;
    tt.action = action;
    ep.steps.push_back(std::move(tt));

    r = env.step(action);
    const SimState& s = r.report.state;
    bool upright = s.root_pose.z > thr_height && std::abs(s.root_pose.theta) < 0.3;
    hold_steps = upright ? hold_steps + 1 : 0;
    if (hold_steps >= hold_needed) ep.success = true;
  }
  ep.effective_duration = env.effective_total();
  return ep;
}

// Expert rollouts with the post-stitching scheme mixed in: the first
// (1 - fraction) of episodes follow the plain trajectory, the remainder
// re-execute toward height-matched later keyframes.
inline DatasetShard collect_rollouts(FallRecoverEnv& env,
                                     const GaussianActorCritic& net,
                                     double action_scale, const CollectConfig& cfg,
                                     Rng& rng, uint32_t trajectory_id = 0) {
  DatasetShard shard;
  shard.model_signature =
      env.robot().name + ":" + std::to_string(env.robot().joint_count());
  shard.obs_dim = env.diffusion_obs_dim();
  shard.act_dim = env.action_dim();

  const SparseTrajectory& traj = env.trajectory();
  int n_stitched = static_cast<int>(std::lround(cfg.episodes * cfg.stitch_fraction));
  int n_plain = cfg.episodes - n_stitched;

  // heights along the demo timeline seed the first stitch plans
  RecordedHeights heights;
  heights.t0 = 0.0;
  heights.dt = 0.05;
  for (double t = 0.0; t <= traj.total_duration + 1e-9; t += heights.dt)
    heights.heights.push_back(interpolate(traj, t).root_pose.z);

  for (int e = 0; e < cfg.episodes; ++e) {
    std::optional<StitchPlan> plan;
    if (e >= n_plain) {
      Rng plan_rng = rng.substream("stitch_plan", static_cast<uint64_t>(e));
      // a draw with no feasible shortcut falls back to a plain rollout
      plan = make_stitch_plan(traj, heights, plan_rng, trajectory_id);
    }
    EpisodeRecord ep = run_policy_episode(env, net, action_scale, plan);
    ep.trajectory_id = trajectory_id;
    if (!ep.steps.empty()) shard.episodes.push_back(std::move(ep));
  }
  return shard;
}

// ---------------------------------------------------------------------------
// Merge + normalization
// ---------------------------------------------------------------------------

inline Dataset merge_shards(const std::vector<DatasetShard>& shards) {
  if (shards.empty()) throw ConfigError("merge_shards: no shards");
  Dataset out;
  out.data.model_signature = shards[0].model_signature;
  out.data.obs_dim = shards[0].obs_dim;
  out.data.act_dim = shards[0].act_dim;
  for (const auto& s : shards) {
    if (s.model_signature != out.data.model_signature ||
        s.obs_dim != out.data.obs_dim || s.act_dim != out.data.act_dim)
      throw ConfigError("merge_shards: shard signature mismatch (" +
                        s.model_signature + " vs " + out.data.model_signature + ")");
    for (const auto& e : s.episodes) out.data.episodes.push_back(e);
  }
  int64_t n = out.data.tuple_count();
  if (n == 0) throw ConfigError("merge_shards: empty dataset");

  size_t od = static_cast<size_t>(out.data.obs_dim);
  size_t ad = static_cast<size_t>(out.data.act_dim);
  out.norm.obs_mean.assign(od, 0.0);
  out.norm.obs_std.assign(od, 0.0);
  out.norm.act_mean.assign(ad, 0.0);
  out.norm.act_std.assign(ad, 0.0);
  for (const auto& e : out.data.episodes)
    for (const auto& t : e.steps) {
      for (size_t i = 0; i < od; ++i) out.norm.obs_mean[i] += t.obs[i];
      for (size_t i = 0; i < ad; ++i) out.norm.act_mean[i] += t.action[i];
    }
  for (size_t i = 0; i < od; ++i) out.norm.obs_mean[i] /= static_cast<double>(n);
  for (size_t i = 0; i < ad; ++i) out.norm.act_mean[i] /= static_cast<double>(n);
  for (const auto& e : out.data.episodes)
    for (const auto& t : e.steps) {
      for (size_t i = 0; i < od; ++i) {
        double d = t.obs[i] - out.norm.obs_mean[i];
        out.norm.obs_std[i] += d * d;
      }
      for (size_t i = 0; i < ad; ++i) {
        double d = t.action[i] - out.norm.act_mean[i];
        out.norm.act_std[i] += d * d;
      }
    }
  for (size_t i = 0; i < od; ++i)
    out.norm.obs_std[i] = std::max(std::sqrt(out.norm.obs_std[i] / static_cast<double>(n)), 1e-6);
  for (size_t i = 0; i < ad; ++i)
    out.norm.act_std[i] = std::max(std::sqrt(out.norm.act_std[i] / static_cast<double>(n)), 1e-6);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset file
//
// Text header lines, then little-endian binary records:
//   firm-dataset v1
//   signature <model:joints>
//   dims <obs_dim> <act_dim>
//   episodes <n>
//   norm <0|1>
//   data
// Binary: optional normalization block (4 f64 arrays), then per episode a
// fixed header (u32 steps, u32 terrain, u64 seed, u8 stitched, u8 success,
// u32 trajectory, f64 duration) and steps of (obs, goal_q, action, u32 goal
// index, f64 phase).
// ---------------------------------------------------------------------------

inline void save_dataset(const Dataset& ds, const std::string& path) {
  BinaryWriter w;
  std::string header = "firm-dataset v1\n";
  header += "signature " + ds.data.model_signature + "\n";
  header += "dims " + std::to_string(ds.data.obs_dim) + " " +
            std::to_string(ds.data.act_dim) + "\n";
  header += "episodes " + std::to_string(ds.data.episodes.size()) + "\n";
  header += "norm 1\n";
  header += "data\n";
  w.raw(header);
  w.f64s(ds.norm.obs_mean);
  w.f64s(ds.norm.obs_std);
  w.f64s(ds.norm.act_mean);
  w.f64s(ds.norm.act_std);
  for (const auto& e : ds.data.episodes) {
    w.u32(static_cast<uint32_t>(e.steps.size()));
    w.u32(e.terrain_kind);
    w.u64(e.episode_seed);
    w.u8(e.stitched ? 1 : 0);
    w.u8(e.success ? 1 : 0);
    w.u32(e.trajectory_id);
    w.f64(e.effective_duration);
    for (const auto& t : e.steps) {
      w.f64s(t.obs);
      w.f64s(t.goal_q);
      w.f64s(t.action);
      w.u32(static_cast<uint32_t>(t.goal_index));
      w.f64(t.phase);
    }
  }
  w.save(path);
}

inline Dataset load_dataset(const std::string& path) {
  BinaryReader r = BinaryReader::load(path);
  auto read_line = [&r]() {
    std::string line;
    while (r.pos < r.buf.size() && r.buf[r.pos] != '\n')
      line.push_back(r.buf[r.pos++]);
    if (r.pos < r.buf.size()) ++r.pos;
    return line;
  };
  if (read_line() != "firm-dataset v1")
    throw IoError("not a dataset file: " + path);
  Dataset ds;
  size_t n_episodes = 0;
  bool has_norm = false;
  for (;;) {
    std::string line = read_line();
    if (line == "data") break;
    if (line.empty()) throw IoError("dataset header truncated");
    auto sp = line.find(' ');
    std::string key = line.substr(0, sp);
    std::string val = line.substr(sp + 1);
    if (key == "signature") {
      ds.data.model_signature = val;
    } else if (key == "dims") {
      std::istringstream is(val);
      is >> ds.data.obs_dim >> ds.data.act_dim;
    } else if (key == "episodes") {
      n_episodes = static_cast<size_t>(std::stoul(val));
    } else if (key == "norm") {
      has_norm = val == "1";
    } else {
      throw IoError("unknown dataset header key: " + key);
    }
  }
  size_t od = static_cast<size_t>(ds.data.obs_dim);
  size_t ad = static_cast<size_t>(ds.data.act_dim);
  if (has_norm) {
    r.f64s(ds.norm.obs_mean, od);
    r.f64s(ds.norm.obs_std, od);
    r.f64s(ds.norm.act_mean, ad);
    r.f64s(ds.norm.act_std, ad);
  }
  for (size_t e = 0; e < n_episodes; ++e) {
    EpisodeRecord ep;
    uint32_t steps = r.u32();
    ep.terrain_kind = r.u32();
    ep.episode_seed = r.u64();
    ep.stitched = r.u8() != 0;
    ep.success = r.u8() != 0;
    ep.trajectory_id = r.u32();
    ep.effective_duration = r.f64();
    ep.steps.resize(steps);
    for (auto& t : ep.steps) {
      r.f64s(t.obs, od);
      r.f64s(t.goal_q, ad);
      r.f64s(t.action, ad);
      t.goal_index = static_cast<int>(r.u32());
      t.phase = r.f64();
    }
    ds.data.episodes.push_back(std::move(ep));
  }
  return ds;
}

}  // namespace firm

#endif  // FIRM_DATA_PIPELINE_HPP_
