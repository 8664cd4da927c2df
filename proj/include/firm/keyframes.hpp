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

#ifndef FIRM_KEYFRAMES_HPP_
#define FIRM_KEYFRAMES_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "firm/robot_model.hpp"

namespace firm {

enum class FallDirection { kForward, kBackward };

inline std::string fall_direction_name(FallDirection d) {
  return d == FallDirection::kForward ? "forward" : "backward";
}

inline FallDirection fall_direction_from_string(const std::string& s) {
  if (s == "forward") return FallDirection::kForward;
  if (s == "backward") return FallDirection::kBackward;
  throw ConfigError("unknown fall direction: " + s);
}

// One demonstration frame: joint states plus root and per-link poses/twists.
// Link poses and twists are expressed relative to the root frame; world
// quantities are recovered by composing with the root pose at use time.
struct Keyframe {
  double timestamp = 0.0;
  std::vector<double> q, qd;
  PlanarPose root_pose;
  PlanarTwist root_twist;
  std::vector<PlanarPose> body_poses_local;
  std::vector<PlanarTwist> body_twists_local;
};

struct DenseTrajectory {
  std::string model_name;
  FallDirection label = FallDirection::kForward;
  double fps = 30.0;
  std::vector<Keyframe> frames;

  double duration() const {
    return frames.empty() ? 0.0 : frames.back().timestamp;
  }
};

struct SparseTrajectory {
  std::string model_name;
  FallDirection label = FallDirection::kForward;
  std::vector<Keyframe> keyframes;
  Keyframe stand_frame;
  double total_duration = 0.0;  // T in phi = min(t/T, 1); the stand time
};

// ---------------------------------------------------------------------------
// World-frame composition
// ---------------------------------------------------------------------------

struct BodyTarget {
  PlanarPose pose;    // world
  PlanarTwist twist;  // world velocity of the frame origin
};

// Composes root-relative link data with the frame's own root pose/twist into
// world-frame tracking targets.
inline std::vector<BodyTarget> compose_world_targets(const Keyframe& kf) {
  std::vector<BodyTarget> out(kf.body_poses_local.size());
  double c = std::cos(kf.root_pose.theta), s = std::sin(kf.root_pose.theta);
  for (size_t i = 0; i < out.size(); ++i) {
    const PlanarPose& lp = kf.body_poses_local[i];
    const PlanarTwist& lt = kf.body_twists_local[i];
    Vec2 r = {c * lp.x - s * lp.z, s * lp.x + c * lp.z};
    out[i].pose = {kf.root_pose.x + r.x, kf.root_pose.z + r.z,
                   kf.root_pose.theta + lp.theta};
    // d/dt (p_root + R(theta) p_local)
    Vec2 rl = {c * lt.vx - s * lt.vz, s * lt.vx + c * lt.vz};
    out[i].twist = {kf.root_twist.vx - kf.root_twist.omega * r.z + rl.x,
                    kf.root_twist.vz + kf.root_twist.omega * r.x + rl.z,
                    kf.root_twist.omega + lt.omega};
  }
  return out;
}

// Fills body_poses_local from FK of (root_pose, q). Twists left as provided.
inline void fill_local_poses(const RobotModel& model, Keyframe& kf) {
  auto frames = forward_kinematics(model, kf.root_pose, kf.q);
  double c = std::cos(kf.root_pose.theta), s = std::sin(kf.root_pose.theta);
  kf.body_poses_local.resize(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    double dx = frames[i].pose.x - kf.root_pose.x;
    double dz = frames[i].pose.z - kf.root_pose.z;
    kf.body_poses_local[i] = {c * dx + s * dz, -s * dx + c * dz,
                              frames[i].pose.theta - kf.root_pose.theta};
  }
  if (kf.body_twists_local.size() != frames.size())
    kf.body_twists_local.assign(frames.size(), PlanarTwist{});
}

// ---------------------------------------------------------------------------
// Procedural demonstration generator
//
// Stands in for retargeted human video at desk scale: a scripted five-second
// fall-and-rise posture sequence, smoothstep-interpolated to 30 Hz, with
// velocities by finite difference. Externally produced trajectory files load
// through the same format, so recorded data can replace these.
// ---------------------------------------------------------------------------

struct DemoParams {
  double fps = 30.0;
  double duration = 5.0;
  double style_joint_jitter = 0.06;  // rad, interior waypoints
  double style_time_jitter = 0.08;   // s
  double style_height_jitter = 0.03; // m
};

namespace detail {

struct DemoWaypoint {
  double t;
  const char* phase;
  double x, z, pitch;
  // world-frame segment directions, converted to joint angles below
  double arm_u, arm_f, thigh, shank;
};

inline std::vector<DemoWaypoint> forward_script() {
  return {
      {0.000, "stand", 0.00, 0.72, 0.00, 0.00, 0.20, 0.00, 0.00},
      {0.500, "descent", 0.05, 0.68, -0.18, 0.70, 1.00, 0.12, -0.08},
      {1.000, "descent", 0.15, 0.52, -0.55, 0.90, 1.25, 0.05, -0.55},
      {1.500, "ground", 0.30, 0.30, -1.00, 1.00, 1.50, -0.30, -1.20},
      {2.200, "ground", 0.40, 0.22, -1.20, 1.10, 1.65, -0.55, -1.60},
      {2.900, "rise", 0.42, 0.32, -0.70, 0.80, 1.40, 0.50, -0.90},
      {3.600, "rise", 0.45, 0.45, -0.30, 0.20, 0.60, 0.75, -0.55},
      {4.300, "rise", 0.48, 0.62, -0.08, 0.05, 0.30, 0.30, -0.20},
      {5.000, "stand", 0.50, 0.72, 0.00, 0.00, 0.20, 0.00, 0.00},
  };
}

inline std::vector<DemoWaypoint> backward_script() {
  return {
      {0.000, "stand", 0.00, 0.72, 0.00, 0.00, 0.20, 0.00, 0.00},
      {0.500, "descent", -0.04, 0.68, 0.15, -0.50, -0.30, -0.10, -0.30},
      {1.000, "descent", -0.12, 0.45, 0.45, -0.90, -0.60, 0.50, -0.40},
      {1.500, "ground", -0.20, 0.18, 0.75, -1.50, -1.10, 1.10, 0.10},
      {2.200, "ground", -0.15, 0.25, 0.30, -1.20, -0.70, 1.20, -0.20},
      {2.900, "rise", -0.10, 0.38, 0.05, 0.30, 0.70, 0.90, -0.50},
      {3.600, "rise", -0.07, 0.55, 0.00, 0.20, 0.50, 0.50, -0.30},
      {4.300, "rise", -0.05, 0.67, 0.00, 0.05, 0.30, 0.15, -0.10},
      {5.000, "stand", -0.05, 0.72, 0.00, 0.00, 0.20, 0.00, 0.00},
  };
}

inline double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

}  // namespace detail

inline DenseTrajectory generate_demo(const RobotModel& model, FallDirection dir,
                                     uint64_t style_seed,
                                     const DemoParams& params = {}) {
  if (model.joint_count() != 6)
    throw ConfigError("demo generator targets the 6-joint planar humanoid");
  auto wps = dir == FallDirection::kForward ? detail::forward_script()
                                            : detail::backward_script();
  // scale the script to the model's stature
  double hs = model.height_scale();
  for (auto& w : wps) {
    w.x *= hs;
    w.z *= hs;
  }

  Rng rng = Rng::derive(style_seed, "demo_style");
  for (size_t i = 1; i + 1 < wps.size(); ++i) {
    auto& w = wps[i];
    w.t += rng.uniform(-params.style_time_jitter, params.style_time_jitter);
    w.z += rng.uniform(-params.style_height_jitter, params.style_height_jitter);
    w.arm_u += rng.uniform(-params.style_joint_jitter, params.style_joint_jitter);
    w.arm_f += rng.uniform(-params.style_joint_jitter, params.style_joint_jitter);
    w.thigh += rng.uniform(-params.style_joint_jitter, params.style_joint_jitter);
    w.shank += rng.uniform(-params.style_joint_jitter, params.style_joint_jitter);
    w.pitch += rng.uniform(-params.style_joint_jitter, params.style_joint_jitter);
  }

  // world segment directions -> joint angles, checked against limits
  auto joints_of = [&](const detail::DemoWaypoint& w) {
    std::vector<double> q(6);
    q[0] = w.arm_u - w.pitch;   // shoulder
    q[1] = w.arm_f - w.arm_u;   // elbow
    q[2] = w.thigh - w.pitch;   // front hip
    q[3] = w.shank - w.thigh;   // front knee
    q[4] = q[2];                // rear hip mirrors in the sagittal plane
    q[5] = q[3];
    // slight front/rear splay so the legs are distinguishable
    q[2] += 0.03;
    q[4] -= 0.03;
    for (int j = 0; j < 6; ++j) {
      const JointSpec& js = model.joints[static_cast<size_t>(j)];
      if (q[static_cast<size_t>(j)] < js.limit_lo - 1e-9 ||
          q[static_cast<size_t>(j)] > js.limit_hi + 1e-9)
        throw Error("demo generation failed in phase '" + std::string(w.phase) +
                    "': joint '" + js.name + "' target " +
                    std::to_string(q[static_cast<size_t>(j)]) + " outside limits");
      q[static_cast<size_t>(j)] =
          clampd(q[static_cast<size_t>(j)], js.limit_lo, js.limit_hi);
    }
    return q;
  };

  DenseTrajectory traj;
  traj.model_name = model.name;
  traj.label = dir;
  traj.fps = params.fps;
  int n_frames = static_cast<int>(std::lround(params.duration * params.fps));
  double t_end = wps.back().t;

  std::vector<std::vector<double>> wq;
  wq.reserve(wps.size());
  for (const auto& w : wps) wq.push_back(joints_of(w));

  for (int k = 0; k < n_frames; ++k) {
    double t = static_cast<double>(k) / params.fps;
    double tk = std::min(t, t_end);
    size_t seg = 0;
    while (seg + 2 < wps.size() && tk > wps[seg + 1].t) ++seg;
    const auto& a = wps[seg];
    const auto& b = wps[seg + 1];
    double u = detail::smoothstep(clampd((tk - a.t) / (b.t - a.t), 0.0, 1.0));
    Keyframe kf;
    kf.timestamp = t;
    kf.root_pose = {a.x + (b.x - a.x) * u, a.z + (b.z - a.z) * u,
                    a.pitch + (b.pitch - a.pitch) * u};
    kf.q.resize(6);
    for (int j = 0; j < 6; ++j)
      kf.q[static_cast<size_t>(j)] =
          wq[seg][static_cast<size_t>(j)] +
          (wq[seg + 1][static_cast<size_t>(j)] - wq[seg][static_cast<size_t>(j)]) * u;
    traj.frames.push_back(std::move(kf));
  }

  // local poses from FK, then velocities by forward finite difference
  for (auto& kf : traj.frames) fill_local_poses(model, kf);
  size_t n = traj.frames.size();
  for (size_t k = 0; k < n; ++k) {
    size_t k1 = std::min(k + 1, n - 1);
    size_t k0 = k1 == k ? k - 1 : k;
    const Keyframe& f0 = traj.frames[k0];
    const Keyframe& f1 = traj.frames[k1];
    Keyframe& kf = traj.frames[k];
    double f = params.fps;
    kf.qd.resize(kf.q.size());
    for (size_t j = 0; j < kf.q.size(); ++j)
      kf.qd[j] = (f1.q[j] - f0.q[j]) * f;
    kf.root_twist = {(f1.root_pose.x - f0.root_pose.x) * f,
                     (f1.root_pose.z - f0.root_pose.z) * f,
                     (f1.root_pose.theta - f0.root_pose.theta) * f};
    kf.body_twists_local.resize(kf.body_poses_local.size());
    for (size_t i = 0; i < kf.body_poses_local.size(); ++i) {
      kf.body_twists_local[i] = {
          (f1.body_poses_local[i].x - f0.body_poses_local[i].x) * f,
          (f1.body_poses_local[i].z - f0.body_poses_local[i].z) * f,
          (f1.body_poses_local[i].theta - f0.body_poses_local[i].theta) * f};
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Preprocessing, sparsification, interpolation
// ---------------------------------------------------------------------------

inline constexpr double kGroundClearance = 0.05;

// Shifts each frame's root height so the lowest collision point sits exactly
// at the clearance offset. Idempotent; only the root height changes.
inline DenseTrajectory preprocess_heights(const RobotModel& model,
                                          DenseTrajectory traj) {
  for (auto& kf : traj.frames) {
    double low = lowest_body_z(model, kf.root_pose, kf.q);
    kf.root_pose.z += kGroundClearance - low;
  }
  return traj;
}

struct SparsifyParams {
  double stand_transition = 1.0;  // s between the last keyframe and P_stand
  double stand_height = 0.8;      // m at reference stature, scaled per model
};

inline SparseTrajectory sparsify(const RobotModel& model,
                                 const DenseTrajectory& traj, int n_keyframes,
                                 const SparsifyParams& params = {}) {
  int n = static_cast<int>(traj.frames.size());
  if (n < 2) throw ConfigError("sparsify: trajectory needs >= 2 frames");
  if (n_keyframes < 2 || n_keyframes > n)
    throw ConfigError("sparsify: n_keyframes " + std::to_string(n_keyframes) +
                      " outside [2, " + std::to_string(n) + "]");
  SparseTrajectory out;
  out.model_name = traj.model_name;
  out.label = traj.label;
  for (int k = 0; k < n_keyframes; ++k) {
    double pos = static_cast<double>(k) * static_cast<double>(n - 1) /
                 static_cast<double>(n_keyframes - 1);
    out.keyframes.push_back(traj.frames[static_cast<size_t>(std::lround(pos))]);
  }

  Keyframe stand;
  stand.timestamp = out.keyframes.back().timestamp + params.stand_transition;
  stand.q = model.default_pose();
  stand.qd.assign(stand.q.size(), 0.0);
  stand.root_pose = {out.keyframes.back().root_pose.x,
                     params.stand_height * model.height_scale(), 0.0};
  stand.root_twist = {};
  fill_local_poses(model, stand);
  out.stand_frame = std::move(stand);
  out.total_duration = out.stand_frame.timestamp;
  return out;
}

namespace detail {

inline Keyframe lerp_keyframes(const Keyframe& a, const Keyframe& b, double u) {
  auto lv = [u](double x, double y) { return x + (y - x) * u; };
  Keyframe out;
  out.timestamp = lv(a.timestamp, b.timestamp);
  out.q.resize(a.q.size());
  out.qd.resize(a.qd.size());
  for (size_t j = 0; j < a.q.size(); ++j) {
    out.q[j] = lv(a.q[j], b.q[j]);
    out.qd[j] = lv(a.qd[j], b.qd[j]);
  }
  out.root_pose = {lv(a.root_pose.x, b.root_pose.x), lv(a.root_pose.z, b.root_pose.z),
                   lv(a.root_pose.theta, b.root_pose.theta)};
  out.root_twist = {lv(a.root_twist.vx, b.root_twist.vx),
                    lv(a.root_twist.vz, b.root_twist.vz),
                    lv(a.root_twist.omega, b.root_twist.omega)};
  out.body_poses_local.resize(a.body_poses_local.size());
  out.body_twists_local.resize(a.body_twists_local.size());
  for (size_t i = 0; i < a.body_poses_local.size(); ++i) {
    out.body_poses_local[i] = {lv(a.body_poses_local[i].x, b.body_poses_local[i].x),
                               lv(a.body_poses_local[i].z, b.body_poses_local[i].z),
                               lv(a.body_poses_local[i].theta, b.body_poses_local[i].theta)};
    out.body_twists_local[i] = {lv(a.body_twists_local[i].vx, b.body_twists_local[i].vx),
                                lv(a.body_twists_local[i].vz, b.body_twists_local[i].vz),
                                lv(a.body_twists_local[i].omega, b.body_twists_local[i].omega)};
  }
  return out;
}

}  // namespace detail

// Linear interpolation of every keyframe quantity; before the first keyframe
// the first is held, past the stand frame P_stand is held.
inline Keyframe interpolate(const SparseTrajectory& traj, double t) {
  if (traj.keyframes.empty()) throw ConfigError("interpolate: empty trajectory");
  if (t <= traj.keyframes.front().timestamp) return traj.keyframes.front();
  if (t >= traj.stand_frame.timestamp) return traj.stand_frame;
  const Keyframe* prev = &traj.keyframes.front();
  for (size_t k = 1; k < traj.keyframes.size(); ++k) {
    const Keyframe& cur = traj.keyframes[k];
    if (t <= cur.timestamp) {
      double u = (t - prev->timestamp) / (cur.timestamp - prev->timestamp);
      return detail::lerp_keyframes(*prev, cur, u);
    }
    prev = &cur;
  }
  double u = (t - prev->timestamp) / (traj.stand_frame.timestamp - prev->timestamp);
  return detail::lerp_keyframes(*prev, traj.stand_frame, u);
}

// First keyframe strictly after time t; the stand frame once past the end.
inline const Keyframe& next_keyframe(const SparseTrajectory& traj, double t) {
  for (const Keyframe& kf : traj.keyframes)
    if (kf.timestamp > t) return kf;
  return traj.stand_frame;
}

inline int next_keyframe_index(const SparseTrajectory& traj, double t) {
  for (size_t k = 0; k < traj.keyframes.size(); ++k)
    if (traj.keyframes[k].timestamp > t) return static_cast<int>(k);
  return static_cast<int>(traj.keyframes.size());  // stand frame
}

// ---------------------------------------------------------------------------
// Trajectory files
//
// Binary container, little-endian:
//   magic "FIRMTRJ1" (dense) / "FIRMSTR1" (sparse), u32 version,
//   model name, label, f64 fps (dense) or f64 total_duration (sparse),
//   u32 frame count, u32 joint count, u32 link count, frames...
// Each frame: f64 timestamp, root pose (3), root twist (3), q, qd,
// local poses (3 per link), local twists (3 per link).
// ---------------------------------------------------------------------------

namespace detail {

inline void write_keyframe(BinaryWriter& w, const Keyframe& kf) {
  w.f64(kf.timestamp);
  w.f64(kf.root_pose.x);
  w.f64(kf.root_pose.z);
  w.f64(kf.root_pose.theta);
  w.f64(kf.root_twist.vx);
  w.f64(kf.root_twist.vz);
  w.f64(kf.root_twist.omega);
  w.f64s(kf.q);
  w.f64s(kf.qd);
  for (const auto& p : kf.body_poses_local) {
    w.f64(p.x);
    w.f64(p.z);
    w.f64(p.theta);
  }
  for (const auto& t : kf.body_twists_local) {
    w.f64(t.vx);
    w.f64(t.vz);
    w.f64(t.omega);
  }
}

inline Keyframe read_keyframe(BinaryReader& r, size_t nj, size_t nl) {
  Keyframe kf;
  kf.timestamp = r.f64();
  kf.root_pose.x = r.f64();
  kf.root_pose.z = r.f64();
  kf.root_pose.theta = r.f64();
  kf.root_twist.vx = r.f64();
  kf.root_twist.vz = r.f64();
  kf.root_twist.omega = r.f64();
  r.f64s(kf.q, nj);
  r.f64s(kf.qd, nj);
  kf.body_poses_local.resize(nl);
  for (auto& p : kf.body_poses_local) {
    p.x = r.f64();
    p.z = r.f64();
    p.theta = r.f64();
  }
  kf.body_twists_local.resize(nl);
  for (auto& t : kf.body_twists_local) {
    t.vx = r.f64();
    t.vz = r.f64();
    t.omega = r.f64();
  }
  return kf;
}

}  // namespace detail

inline void save_dense_trajectory(const DenseTrajectory& traj,
                                  const std::string& path) {
  BinaryWriter w;
  w.raw("FIRMTRJ1");
  w.u32(1);
  w.str(traj.model_name);
  w.str(fall_direction_name(traj.label));
  w.f64(traj.fps);
  w.u32(static_cast<uint32_t>(traj.frames.size()));
  w.u32(traj.frames.empty() ? 0 : static_cast<uint32_t>(traj.frames[0].q.size()));
  w.u32(traj.frames.empty()
            ? 0
            : static_cast<uint32_t>(traj.frames[0].body_poses_local.size()));
  for (const auto& kf : traj.frames) detail::write_keyframe(w, kf);
  w.save(path);
}

inline DenseTrajectory load_dense_trajectory(const std::string& path) {
  BinaryReader r = BinaryReader::load(path);
  char magic[8];
  r.get(magic, 8);
  if (std::string(magic, 8) != "FIRMTRJ1")
    throw IoError("not a dense trajectory file: " + path);
  if (r.u32() != 1) throw IoError("unsupported trajectory version");
  DenseTrajectory traj;
  traj.model_name = r.str();
  traj.label = fall_direction_from_string(r.str());
  traj.fps = r.f64();
  uint32_t frames = r.u32();
  uint32_t nj = r.u32();
  uint32_t nl = r.u32();
  for (uint32_t i = 0; i < frames; ++i)
    traj.frames.push_back(detail::read_keyframe(r, nj, nl));
  return traj;
}

inline void save_sparse_trajectory(const SparseTrajectory& traj,
                                   const std::string& path) {
  BinaryWriter w;
  w.raw("FIRMSTR1");
  w.u32(1);
  w.str(traj.model_name);
  w.str(fall_direction_name(traj.label));
  w.f64(traj.total_duration);
  w.u32(static_cast<uint32_t>(traj.keyframes.size()));
  w.u32(traj.keyframes.empty() ? 0
                               : static_cast<uint32_t>(traj.keyframes[0].q.size()));
  w.u32(traj.keyframes.empty()
            ? 0
            : static_cast<uint32_t>(traj.keyframes[0].body_poses_local.size()));
  for (const auto& kf : traj.keyframes) detail::write_keyframe(w, kf);
  detail::write_keyframe(w, traj.stand_frame);
  w.save(path);
}

inline SparseTrajectory load_sparse_trajectory(const std::string& path) {
  BinaryReader r = BinaryReader::load(path);
  char magic[8];
  r.get(magic, 8);
  if (std::string(magic, 8) != "FIRMSTR1")
    throw IoError("not a sparse trajectory file: " + path);
  if (r.u32() != 1) throw IoError("unsupported trajectory version");
  SparseTrajectory traj;
  traj.model_name = r.str();
  traj.label = fall_direction_from_string(r.str());
  traj.total_duration = r.f64();
  uint32_t frames = r.u32();
  uint32_t nj = r.u32();
  uint32_t nl = r.u32();
  for (uint32_t i = 0; i < frames; ++i)
    traj.keyframes.push_back(detail::read_keyframe(r, nj, nl));
  traj.stand_frame = detail::read_keyframe(r, nj, nl);
  return traj;
}

}  // namespace firm

#endif  // FIRM_KEYFRAMES_HPP_
