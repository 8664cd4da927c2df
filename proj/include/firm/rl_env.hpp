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

#ifndef FIRM_RL_ENV_HPP_
#define FIRM_RL_ENV_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "firm/rewards.hpp"
#include "firm/sim_core.hpp"

namespace firm {

struct DomainRandomizationConfig {
  bool enabled = true;
  double friction_lo = 0.25, friction_hi = 1.75;
  double payload_lo = -1.0, payload_hi = 1.0;  // kg on the base link
  double kp_lo = 0.9, kp_hi = 1.1;
  double kd_lo = 0.9, kd_hi = 1.1;
  bool pushes = true;
  double push_interval_lo = 2.0, push_interval_hi = 6.0;  // s
  double push_impulse = 0.5;  // U(+-) m/s on the root velocity
};

// Additive Gaussian noise on the actor-side observation channels. The critic
// and the goal channels stay clean.
struct ObservationNoiseConfig {
  double std_omega_root = 0.05;
  double std_q = 0.01;
  double std_qd = 0.15;
};

struct EpisodeConfig {
  double horizon = 10.0;           // s
  double disable_lo = 0.04, disable_hi = 1.0;
  double init_joint_noise = 0.05;  // U(+-) rad
  double init_vel_noise = 0.1;     // U(+-) m/s on the root linear velocity
  double vel_limit_scale = 1.25;   // termination at scale * joint velocity limit
  double root_speed_limit = 10.0;  // m/s
};

struct EnvConfig {
  EpisodeConfig episode;
  DomainRandomizationConfig dr;
  ObservationNoiseConfig noise;
  RewardConfig rewards;
  TerrainKind terrain = TerrainKind::kUneven;  // training terrain
  TerrainParams terrain_params;
  SimParams sim;
};

// Per-episode randomization draws, sampled once at reset.
struct EpisodeDraws {
  double friction = 0.8;
  double payload = 0.0;
  double kp_scale = 1.0, kd_scale = 1.0;
  double disable_duration = 0.0;
};

inline EpisodeDraws sample_episode_draws(const EnvConfig& cfg, Rng& episode_rng) {
  EpisodeDraws d;
  Rng dr = episode_rng.substream("dr");
  if (cfg.dr.enabled) {
    d.friction = dr.uniform(cfg.dr.friction_lo, cfg.dr.friction_hi);
    d.payload = dr.uniform(cfg.dr.payload_lo, cfg.dr.payload_hi);
    d.kp_scale = dr.uniform(cfg.dr.kp_lo, cfg.dr.kp_hi);
    d.kd_scale = dr.uniform(cfg.dr.kd_lo, cfg.dr.kd_hi);
  }
  d.disable_duration = episode_rng.substream("disable")
                           .uniform(cfg.episode.disable_lo, cfg.episode.disable_hi);
  return d;
}

// Additive Gaussian noise on the proprioceptive channels only; the goal part
// of the observation and the critic's privileged channels stay clean.
struct NoisyProprio {
  double omega_root = 0.0;
  std::vector<double> q, qd;
};

inline NoisyProprio apply_observation_noise(double omega_root,
                                            const std::vector<double>& q,
                                            const std::vector<double>& qd,
                                            const ObservationNoiseConfig& cfg,
                                            Rng& rng) {
  NoisyProprio out;
  out.omega_root = omega_root + rng.normal() * cfg.std_omega_root;
  out.q = q;
  out.qd = qd;
  for (double& v : out.q) v += rng.normal() * cfg.std_q;
  for (double& v : out.qd) v += rng.normal() * cfg.std_qd;
  return out;
}

// Fixed observation scaling so all channels land on comparable ranges.
struct ObsScales {
  double ang_vel = 0.25;
  double lin_vel = 2.0;
  double dof_pos = 1.0;
  double dof_vel = 0.05;
};

struct EnvStepResult {
  std::vector<double> actor_obs;
  std::vector<double> critic_obs;
  RewardBreakdown reward;
  bool done = false;
  bool truncated = false;            // horizon end rather than failure
  std::string done_reason;
  StepReport report;                 // full physics report for logs/datasets
  std::vector<double> diffusion_obs; // (omega_root, q, qd, a_prev), noisy
  std::vector<double> goal_q;        // next raw keyframe joint positions
  int goal_index = 0;                // index into keyframes; size() = stand
  double phase = 0.0;
};

// Goal-conditioned sparse key-frame tracking episode. One instance is
// single-threaded; run several instances for parallel rollouts.
class FallRecoverEnv {
 public:
  FallRecoverEnv(RobotModel model, SparseTrajectory sparse, DenseTrajectory dense,
                 EnvConfig cfg, uint64_t seed)
      : model_(std::move(model)),
        sparse_(std::move(sparse)),
        dense_(std::move(dense)),
        cfg_(cfg),
        rng_(Rng::derive(seed, "env")),
        sim_(std::make_unique<Simulator>(
            model_, generate_terrain(cfg.terrain, seed, cfg.terrain_params),
            cfg.sim)) {
    cfg_.rewards.validate();
    nj_ = model_.joint_count();
  }

  int action_dim() const { return nj_; }
  int actor_obs_dim() const { return 2 + 4 * nj_; }
  int critic_obs_dim() const { return actor_obs_dim() + 2; }
  int diffusion_obs_dim() const { return 1 + 3 * nj_; }
  const RobotModel& robot() const { return model_; }
  const SparseTrajectory& trajectory() const { return sparse_; }
  double control_dt() const { return sim_->control_dt(); }
  double episode_time() const { return episode_time_; }
  double trajectory_clock() const { return traj_clock_; }
  Simulator& simulator() { return *sim_; }

  // Optional stitched-goal shortcut: once the trajectory clock passes
  // cut_time, it jumps to target_time and the phase is measured against the
  // shortened effective timeline.
  void set_stitch(double cut_time, double target_time) {
    stitch_cut_ = cut_time;
    stitch_target_ = target_time;
    stitch_applied_ = false;
  }

  // When set, episodes start inside [lo, hi] of the dense trajectory time.
  void set_init_window(double lo, double hi) {
    init_window_lo_ = lo;
    init_window_hi_ = hi;
  }

  // Eval-protocol hook: fixes the payload instead of drawing from DR.
  void set_fixed_payload(double kg) { fixed_payload_ = kg; }

  EnvStepResult reset() {
    ++episode_counter_;
    Rng ep = rng_.substream("episode", episode_counter_);

    // terrain + domain randomization
    Rng terrain_rng = ep.substream("terrain");
    Terrain terrain = generate_terrain(cfg_.terrain, terrain_rng.next_u64(),
                                       cfg_.terrain_params);
    sim_ = std::make_unique<Simulator>(model_, std::move(terrain), cfg_.sim);
    last_draws_ = sample_episode_draws(cfg_, ep);
    if (cfg_.dr.enabled) {
      sim_->set_friction(last_draws_.friction);
      sim_->set_payload(last_draws_.payload);
      sim_->set_gain_scale(last_draws_.kp_scale, last_draws_.kd_scale);
    }
    if (fixed_payload_) {
      sim_->set_payload(*fixed_payload_);
      last_draws_.payload = *fixed_payload_;
    }

    // pick a dense frame and copy all joint and root information
    Rng init = ep.substream("init");
    size_t lo = 0, hi = dense_.frames.size() - 1;
    if (init_window_hi_ > init_window_lo_) {
      lo = frame_index_at(init_window_lo_);
      hi = std::max(lo, frame_index_at(init_window_hi_));
    }
    const Keyframe& frame =
        dense_.frames[static_cast<size_t>(init.uniform_int(
            static_cast<int64_t>(lo), static_cast<int64_t>(hi)))];
    std::vector<double> q = frame.q;
    std::vector<double> qd = frame.qd;
    PlanarPose root = frame.root_pose;
    PlanarTwist twist = frame.root_twist;
    for (size_t j = 0; j < q.size(); ++j) {
      q[j] += init.uniform(-cfg_.episode.init_joint_noise, cfg_.episode.init_joint_noise);
      q[j] = clampd(q[j], model_.joints[j].limit_lo, model_.joints[j].limit_hi);
    }
    twist.vx += init.uniform(-cfg_.episode.init_vel_noise, cfg_.episode.init_vel_noise);
    twist.vz += init.uniform(-cfg_.episode.init_vel_noise, cfg_.episode.init_vel_noise);
    // keep the start clear of the terrain
    double low = lowest_body_z(model_, root, q);
    double terrain_h = sim_->terrain().height(root.x);
    if (low - terrain_h < 0.01) root.z += 0.01 - (low - terrain_h);
    sim_->set_state(0.0, root, twist, q, qd);

    traj_clock_ = frame.timestamp;
    episode_time_ = 0.0;
    stitch_applied_ = false;
    prev_action_.assign(static_cast<size_t>(nj_), 0.0);
    noise_rng_ = ep.substream("noise");
    push_rng_ = ep.substream("push");
    next_push_ = cfg_.dr.pushes && cfg_.dr.enabled
                     ? push_rng_.uniform(cfg_.dr.push_interval_lo, cfg_.dr.push_interval_hi)
                     : -1.0;
    disable_left_ = last_draws_.disable_duration;
    last_disable_duration_ = disable_left_;

    // free-fall window: actuators off until the sampled duration elapses
    sim_->set_actuators_enabled(false);
    EnvStepResult first;
    std::vector<double> zero(static_cast<size_t>(nj_), 0.0);
    do {
      first = advance(zero, true);
      disable_left_ -= control_dt();
      if (first.done) break;  // diverged during free fall; caller resets again
    } while (disable_left_ > 1e-9);
    sim_->set_actuators_enabled(true);
    return first;
  }

  EnvStepResult step(const std::vector<double>& action) {
    return advance(action, false);
  }

  double last_disable_duration() const { return last_disable_duration_; }
  const EpisodeDraws& last_draws() const { return last_draws_; }
  uint64_t episodes_started() const { return episode_counter_; }
  const EnvConfig& config() const { return cfg_; }

  // Phase against the (possibly stitched) effective timeline.
  double phase() const {
    double t_elapsed, t_total;
    effective_timeline(t_elapsed, t_total);
    return std::min(t_elapsed / t_total, 1.0);
  }

  // Total duration of the effective timeline (shortened when stitched).
  double effective_total() const {
    double t_elapsed, t_total;
    effective_timeline(t_elapsed, t_total);
    return t_total;
  }

 private:
  size_t frame_index_at(double t) const {
    for (size_t i = 0; i < dense_.frames.size(); ++i)
      if (dense_.frames[i].timestamp >= t) return i;
    return dense_.frames.size() - 1;
  }

  void effective_timeline(double& elapsed, double& total) const {
    double T = sparse_.total_duration;
    if (stitch_cut_ >= 0.0) {
      double t_eff = stitch_cut_ + (T - stitch_target_);
      elapsed = stitch_applied_ ? stitch_cut_ + (traj_clock_ - stitch_target_)
                                : traj_clock_;
      total = t_eff;
    } else {
      elapsed = traj_clock_;
      total = T;
    }
  }

  EnvStepResult advance(const std::vector<double>& action, bool in_reset) {
    EnvStepResult out;
    try {
      out.report = sim_->step(action);
    } catch (const DivergedError& e) {
      out.done = true;
      out.done_reason = "sim_diverged";
      out.actor_obs.assign(static_cast<size_t>(actor_obs_dim()), 0.0);
      out.critic_obs.assign(static_cast<size_t>(critic_obs_dim()), 0.0);
      out.diffusion_obs.assign(static_cast<size_t>(diffusion_obs_dim()), 0.0);
      out.goal_q.assign(static_cast<size_t>(nj_), 0.0);
      return out;
    }
    episode_time_ += control_dt();
    traj_clock_ += control_dt();
    if (stitch_cut_ >= 0.0 && !stitch_applied_ && traj_clock_ >= stitch_cut_) {
      traj_clock_ = stitch_target_ + (traj_clock_ - stitch_cut_);
      stitch_applied_ = true;
    }

    // pushes
    if (next_push_ >= 0.0 && !in_reset && episode_time_ >= next_push_) {
      sim_->apply_root_velocity_impulse(
          push_rng_.uniform(-cfg_.dr.push_impulse, cfg_.dr.push_impulse),
          push_rng_.uniform(-cfg_.dr.push_impulse, cfg_.dr.push_impulse));
      next_push_ = episode_time_ +
                   push_rng_.uniform(cfg_.dr.push_interval_lo, cfg_.dr.push_interval_hi);
    }

    const SimState& s = out.report.state;
    Keyframe target = interpolate(sparse_, traj_clock_);
    out.reward = compute_reward(model_, out.report, target, action, prev_action_,
                                cfg_.rewards);

    out.goal_index = next_keyframe_index(sparse_, traj_clock_);
    const Keyframe& goal = next_keyframe(sparse_, traj_clock_);
    out.goal_q = goal.q;
    out.phase = phase();

    build_observations(s, goal, out);
    prev_action_ = action;

    // termination: velocity limits only; collisions never terminate
    for (size_t j = 0; j < s.qd.size(); ++j) {
      if (std::abs(s.qd[j]) >
          cfg_.episode.vel_limit_scale * model_.joints[j].velocity_limit) {
        out.done = true;
        out.done_reason = "joint_velocity_limit";
      }
    }
    double root_speed = std::hypot(s.root_twist.vx, s.root_twist.vz);
    if (root_speed > cfg_.episode.root_speed_limit) {
      out.done = true;
      out.done_reason = "root_speed_limit";
    }
    if (!out.done && episode_time_ >= cfg_.episode.horizon - 1e-9) {
      out.done = true;
      out.truncated = true;
      out.done_reason = "horizon";
    }
    return out;
  }

  void build_observations(const SimState& s, const Keyframe& goal,
                          EnvStepResult& out) {
    const ObsScales sc;
    NoisyProprio np =
        apply_observation_noise(s.root_twist.omega, s.q, s.qd, cfg_.noise, noise_rng_);
    double omega_n = np.omega_root;
    std::vector<double>& q_n = np.q;
    std::vector<double>& qd_n = np.qd;

    out.actor_obs.clear();
    out.actor_obs.reserve(static_cast<size_t>(actor_obs_dim()));
    out.actor_obs.push_back(omega_n * sc.ang_vel);
    for (double v : q_n) out.actor_obs.push_back(v * sc.dof_pos);
    for (double v : qd_n) out.actor_obs.push_back(v * sc.dof_vel);
    for (double v : prev_action_) out.actor_obs.push_back(v);
    for (size_t j = 0; j < q_n.size(); ++j)
      out.actor_obs.push_back((q_n[j] - goal.q[j]) * sc.dof_pos);
    out.actor_obs.push_back(out.phase);

    // critic: clean channels plus privileged root linear velocity
    out.critic_obs.clear();
    out.critic_obs.reserve(static_cast<size_t>(critic_obs_dim()));
    out.critic_obs.push_back(s.root_twist.omega * sc.ang_vel);
    for (double v : s.q) out.critic_obs.push_back(v * sc.dof_pos);
    for (double v : s.qd) out.critic_obs.push_back(v * sc.dof_vel);
    for (double v : prev_action_) out.critic_obs.push_back(v);
    for (size_t j = 0; j < s.q.size(); ++j)
      out.critic_obs.push_back((s.q[j] - goal.q[j]) * sc.dof_pos);
    out.critic_obs.push_back(out.phase);
    out.critic_obs.push_back(s.root_twist.vx * sc.lin_vel);
    out.critic_obs.push_back(s.root_twist.vz * sc.lin_vel);

    // diffusion observation: noisy proprioception + previous action, unscaled
    out.diffusion_obs.clear();
    out.diffusion_obs.reserve(static_cast<size_t>(diffusion_obs_dim()));
    out.diffusion_obs.push_back(omega_n);
    for (double v : q_n) out.diffusion_obs.push_back(v);
    for (double v : qd_n) out.diffusion_obs.push_back(v);
    for (double v : prev_action_) out.diffusion_obs.push_back(v);
  }

  RobotModel model_;
  SparseTrajectory sparse_;
  DenseTrajectory dense_;
  EnvConfig cfg_;
  Rng rng_;
  std::unique_ptr<Simulator> sim_;
  int nj_ = 0;

  uint64_t episode_counter_ = 0;
  double traj_clock_ = 0.0;
  double episode_time_ = 0.0;
  std::vector<double> prev_action_;
  Rng noise_rng_{0};
  Rng push_rng_{0};
  double next_push_ = -1.0;
  double disable_left_ = 0.0;
  double last_disable_duration_ = 0.0;
  double stitch_cut_ = -1.0, stitch_target_ = -1.0;
  bool stitch_applied_ = false;
  double init_window_lo_ = 0.0, init_window_hi_ = 0.0;
  std::optional<double> fixed_payload_;
  EpisodeDraws last_draws_;
};

}  // namespace firm

#endif  // FIRM_RL_ENV_HPP_
