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

#ifndef FIRM_REWARDS_HPP_
#define FIRM_REWARDS_HPP_

#include <array>
#include <string>
#include <vector>

#include "firm/keyframes.hpp"
#include "firm/sim_core.hpp"

namespace firm {

// Term order is fixed; logging columns and the scale vector follow it.
enum RewardTerm : int {
  kTrackBodyPos = 0,
  kTrackBodyRot,
  kTrackBodyLinVel,
  kTrackBodyAngVel,
  kTrackJointPos,
  kTrackJointVel,
  kStyleJointPosLimit,
  kStyleJointVelLimit,
  kStyleActionRate,
  kStyleTorque,
  kStyleAccel,
  kDamageCollision,
  kDamageMomentum,
  kDamageYank,
  kNumRewardTerms
};

inline const std::array<std::string, kNumRewardTerms>& reward_term_names() {
  static const std::array<std::string, kNumRewardTerms> names = {
      "track_body_pos",   "track_body_rot",  "track_body_linvel",
      "track_body_angvel", "track_joint_pos", "track_joint_vel",
      "limit_joint_pos",  "limit_joint_vel", "action_rate",
      "torque",           "accel",           "collision",
      "momentum",         "yank"};
  return names;
}

struct RewardConfig {
  // tracking kernel widths
  double sigma_body_pos = 0.3;
  double sigma_body_rot = 0.5;
  double sigma_body_linvel = 1.0;
  double sigma_body_angvel = 2.0;
  double sigma_joint_pos = 0.5;
  double sigma_joint_vel = 5.0;
  // term scales; tracking positive, penalties negative
  std::array<double, kNumRewardTerms> scales = {
      1.25, 0.5, 0.125, 0.125, 0.5, 0.125,          // tracking
      -10.0, -5.0, -1e-3, -1e-6, -2.5e-7,           // style
      -1e-7, -5e-3, -2e-6};                         // fall-damage reduction
  std::vector<double> body_weights;  // w_B; empty means all 1.0
  bool tracking_only = false;        // zero style+damage scales at use

  void validate() const {
    for (double s : {sigma_body_pos, sigma_body_rot, sigma_body_linvel,
                     sigma_body_angvel, sigma_joint_pos, sigma_joint_vel})
      if (s <= 0.0) throw ConfigError("reward sigma must be > 0");
    for (int i = 0; i < 6; ++i)
      if (scales[static_cast<size_t>(i)] <= 0.0)
        throw ConfigError("tracking scale must be > 0: " +
                          reward_term_names()[static_cast<size_t>(i)]);
    for (int i = 6; i < kNumRewardTerms; ++i)
      if (scales[static_cast<size_t>(i)] >= 0.0)
        throw ConfigError("penalty scale must be < 0: " +
                          reward_term_names()[static_cast<size_t>(i)]);
  }

  double weight(size_t body) const {
    return body < body_weights.size() ? body_weights[body] : 1.0;
  }

  std::array<double, kNumRewardTerms> effective_scales() const {
    auto s = scales;
    if (tracking_only)
      for (int i = kStyleJointPosLimit; i < kNumRewardTerms; ++i)
        s[static_cast<size_t>(i)] = 0.0;
    return s;
  }
};

struct RewardBreakdown {
  std::array<double, kNumRewardTerms> raw{};     // unscaled term values
  std::array<double, kNumRewardTerms> scaled{};  // scale_i * raw_i
  double total = 0.0;
};

// h(d; sigma) = exp(-d^2 / sigma), in (0, 1], 1 iff d = 0.
inline double kernel_h(double d, double sigma) {
  if (sigma <= 0.0) throw ConfigError("kernel_h: sigma must be > 0");
  return std::exp(-d * d / sigma);
}

// Squared-distance form used by the tracking rows: the summed squared error
// is already the d^2 argument of the kernel.
inline double kernel_h_sq(double sum_sq, double sigma) {
  if (sigma <= 0.0) throw ConfigError("kernel_h: sigma must be > 0");
  return std::exp(-sum_sq / sigma);
}

// ---------------------------------------------------------------------------
// Term groups
// ---------------------------------------------------------------------------

// Six tracking terms against world-frame targets. `bodies` are the current
// world body states; targets must already be composed into world frame.
inline void tracking_rewards(const std::vector<BodyState>& bodies,
                             const std::vector<double>& q,
                             const std::vector<double>& qd,
                             const std::vector<BodyTarget>& target_bodies,
                             const std::vector<double>& target_q,
                             const std::vector<double>& target_qd,
                             const RewardConfig& cfg, RewardBreakdown& out) {
  if (bodies.size() != target_bodies.size())
    throw DimensionError("tracking_rewards: body count mismatch");
  if (q.size() != target_q.size() || qd.size() != target_qd.size())
    throw DimensionError("tracking_rewards: joint count mismatch");
  double d_pos = 0.0, d_rot = 0.0, d_lin = 0.0, d_ang = 0.0;
  for (size_t b = 0; b < bodies.size(); ++b) {
    double w = cfg.weight(b);
    // body velocity of the frame origin, matching the target convention
    const BodyState& bs = bodies[b];
    Vec2 r = {bs.pose.x - bs.com.x, bs.pose.z - bs.com.z};
    double vx = bs.twist.vx - bs.twist.omega * r.z;
    double vz = bs.twist.vz + bs.twist.omega * r.x;
    const BodyTarget& tb = target_bodies[b];
    double dx = bs.pose.x - tb.pose.x;
    double dz = bs.pose.z - tb.pose.z;
    d_pos += w * (dx * dx + dz * dz);
    double dth = wrap_angle(bs.pose.theta - tb.pose.theta);
    d_rot += dth * dth;
    double dvx = vx - tb.twist.vx;
    double dvz = vz - tb.twist.vz;
    d_lin += dvx * dvx + dvz * dvz;
    double dw = bs.twist.omega - tb.twist.omega;
    d_ang += dw * dw;
  }
  double d_q = 0.0, d_qd = 0.0;
  for (size_t j = 0; j < q.size(); ++j) {
    double dq = q[j] - target_q[j];
    d_q += dq * dq;
    double dqd = qd[j] - target_qd[j];
    d_qd += dqd * dqd;
  }
  out.raw[kTrackBodyPos] = kernel_h_sq(d_pos, cfg.sigma_body_pos);
  out.raw[kTrackBodyRot] = kernel_h_sq(d_rot, cfg.sigma_body_rot);
  out.raw[kTrackBodyLinVel] = kernel_h_sq(d_lin, cfg.sigma_body_linvel);
  out.raw[kTrackBodyAngVel] = kernel_h_sq(d_ang, cfg.sigma_body_angvel);
  out.raw[kTrackJointPos] = kernel_h_sq(d_q, cfg.sigma_joint_pos);
  out.raw[kTrackJointVel] = kernel_h_sq(d_qd, cfg.sigma_joint_vel);
}

// Five style penalties (raw values; scales applied in total_reward).
// Limit overshoots measure distance outside the allowed interval.
inline void style_penalties(const RobotModel& model, const std::vector<double>& q,
                            const std::vector<double>& qd,
                            const std::vector<double>& torques,
                            const std::vector<double>& joint_accel,
                            const std::vector<double>& action,
                            const std::vector<double>& prev_action,
                            RewardBreakdown& out) {
  if (action.size() != prev_action.size())
    throw DimensionError("style_penalties: action size mismatch");
  double pos_over = 0.0, vel_over = 0.0, rate = 0.0, torq = 0.0, acc = 0.0;
  for (size_t j = 0; j < q.size(); ++j) {
    const JointSpec& js = model.joints[j];
    if (q[j] > js.limit_hi)
      pos_over += q[j] - js.limit_hi;
    else if (q[j] < js.limit_lo)
      pos_over += js.limit_lo - q[j];
    vel_over += std::max(0.0, std::abs(qd[j]) - js.velocity_limit);
    torq += torques[j] * torques[j];
    acc += joint_accel[j] * joint_accel[j];
  }
  for (size_t j = 0; j < action.size(); ++j) {
    double da = action[j] - prev_action[j];
    rate += da * da;
  }
  out.raw[kStyleJointPosLimit] = pos_over;
  out.raw[kStyleJointVelLimit] = vel_over;
  out.raw[kStyleActionRate] = rate;
  out.raw[kStyleTorque] = torq;
  out.raw[kStyleAccel] = acc;
}

// Three fall-damage terms from the step report sums.
inline void damage_penalties(const StepReport& report, const RobotModel& model,
                             RewardBreakdown& out) {
  double collision = 0.0, momentum = 0.0, yank = 0.0;
  for (size_t b = 0; b < report.body_impulse.size(); ++b) {
    const Vec2& imp = report.body_impulse[b];
    collision += imp.x * imp.x + imp.z * imp.z;
    double m = model.links[b].mass;
    const Vec2& a = report.body_accel[b];
    momentum += m * std::sqrt(a.x * a.x + a.z * a.z);
    const Vec2& fr = report.body_force_rate[b];
    yank += fr.x * fr.x + fr.z * fr.z;
  }
  out.raw[kDamageCollision] = collision;
  out.raw[kDamageMomentum] = momentum;
  out.raw[kDamageYank] = yank;
}

// total = sum scale_i * raw_i, exactly.
inline RewardBreakdown total_reward(RewardBreakdown b, const RewardConfig& cfg) {
  auto scales = cfg.effective_scales();
  b.total = 0.0;
  for (int i = 0; i < kNumRewardTerms; ++i) {
    b.scaled[static_cast<size_t>(i)] =
        scales[static_cast<size_t>(i)] * b.raw[static_cast<size_t>(i)];
    b.total += b.scaled[static_cast<size_t>(i)];
  }
  return b;
}

// Joint accelerations from the report's body angular accelerations.
inline std::vector<double> joint_accelerations(const RobotModel& model,
                                               const StepReport& report) {
  std::vector<double> out(static_cast<size_t>(model.joint_count()));
  for (size_t j = 0; j < out.size(); ++j) {
    const JointSpec& js = model.joints[j];
    out[j] = report.body_ang_accel[static_cast<size_t>(js.child_link)] -
             report.body_ang_accel[static_cast<size_t>(js.parent_link)];
  }
  return out;
}

// Full per-step reward: tracking against the interpolated world target plus
// style and damage terms.
inline RewardBreakdown compute_reward(const RobotModel& model,
                                      const StepReport& report,
                                      const Keyframe& target,
                                      const std::vector<double>& action,
                                      const std::vector<double>& prev_action,
                                      const RewardConfig& cfg) {
  RewardBreakdown b;
  auto world_targets = compose_world_targets(target);
  tracking_rewards(report.state.bodies, report.state.q, report.state.qd,
                   world_targets, target.q, target.qd, cfg, b);
  style_penalties(model, report.state.q, report.state.qd,
                  report.state.last_applied_torques,
                  joint_accelerations(model, report), action, prev_action, b);
  damage_penalties(report, model, b);
  return total_reward(b, cfg);
}

}  // namespace firm

#endif  // FIRM_REWARDS_HPP_
