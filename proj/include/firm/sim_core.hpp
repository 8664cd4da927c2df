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

#ifndef FIRM_SIM_CORE_HPP_
#define FIRM_SIM_CORE_HPP_

#include <algorithm>
#include <utility>
#include <vector>

#include "firm/robot_model.hpp"
#include "firm/terrain.hpp"

namespace firm {

struct SimParams {
  double dt = 1.0 / 200.0;        // physics substep
  int substeps_per_control = 4;   // 50 Hz control
  int velocity_iterations = 24;
  int position_iterations = 12;
  double baumgarte = 0.2;         // penetration correction rate
  double slop = 1e-3;             // allowed penetration, m
  double max_correction = 0.2;    // per-iteration position clamp, m
  double gravity = 9.81;
  double contact_margin = 1e-4;
  double divergence_limit = 1e6;
};

struct BodyState {
  PlanarPose pose;    // link frame origin + orientation, world
  PlanarTwist twist;  // CoM linear velocity + angular velocity
  Vec2 com;           // CoM position, world
};

struct SimState {
  double time = 0.0;
  PlanarPose root_pose;
  PlanarTwist root_twist;  // base frame origin velocity + omega
  std::vector<double> q;
  std::vector<double> qd;
  std::vector<double> last_applied_torques;
  std::vector<BodyState> bodies;
};

struct ContactEvent {
  int body = -1;
  Vec2 point;                       // world, end of control step
  double normal_impulse = 0.0;      // N s, >= 0
  double tangential_impulse = 0.0;  // N s, |jt| <= mu*jn
  double normal_force = 0.0;        // N, impulse / control dt
  double time = 0.0;
};

struct StepReport {
  SimState state;
  std::vector<ContactEvent> contacts;
  std::vector<Vec2> body_impulse;     // lambda_B, summed contact impulse
  std::vector<Vec2> body_accel;       // a_B = (v_t - v_{t-1}) / dt, CoM
  std::vector<double> body_ang_accel;
  std::vector<Vec2> body_force_rate;  // dF_B/dt, backward difference
  std::vector<double> joint_forces;   // |joint constraint force|, N
};

// Deterministic planar rigid-body simulator: PD-actuated revolute joints in
// maximal coordinates, sequential-impulse contacts with Coulomb friction and
// restitution 0. Penetration and joint drift are fixed by a position-level
// pass that never touches velocities, so impacts cannot gain kinetic energy.
class Simulator {
 public:
  Simulator(RobotModel model, Terrain terrain, SimParams params = {})
      : model_(std::move(model)), terrain_(std::move(terrain)), params_(params) {
    friction_ = terrain_.friction;
    size_t n = static_cast<size_t>(model_.link_count());
    bodies_.resize(n);
    force_prev_.assign(n, Vec2{});
    torques_.assign(static_cast<size_t>(model_.joint_count()), 0.0);
    mass_.resize(n);
    inertia_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      mass_[i] = model_.links[i].mass;
      inertia_[i] = model_.links[i].moment_of_inertia;
    }
    reset_standing();
  }

  const RobotModel& model() const { return model_; }
  const Terrain& terrain() const { return terrain_; }
  double control_dt() const { return params_.dt * params_.substeps_per_control; }
  const SimParams& params() const { return params_; }
  double time() const { return time_; }

  void set_actuators_enabled(bool on) { actuators_enabled_ = on; }
  bool actuators_enabled() const { return actuators_enabled_; }
  void set_friction(double mu) { friction_ = mu; }
  double friction() const { return friction_; }
  void set_gain_scale(double kp_scale, double kd_scale) {
    kp_scale_ = kp_scale;
    kd_scale_ = kd_scale;
  }

  // Extra mass carried on the base link (payload / base-mass randomization).
  void set_payload(double extra_kg) {
    mass_[static_cast<size_t>(model_.base_link)] =
        model_.links[static_cast<size_t>(model_.base_link)].mass + extra_kg;
  }

  // Rigid velocity kick on every body (push randomization).
  void apply_root_velocity_impulse(double dvx, double dvz) {
    for (auto& b : bodies_) {
      b.vx += dvx;
      b.vz += dvz;
    }
  }

  // Places the robot from generalized coordinates; twists propagate down the
  // tree so joint velocity constraints start satisfied.
  void set_state(double time, const PlanarPose& root_pose,
                 const PlanarTwist& root_twist, const std::vector<double>& q,
                 const std::vector<double>& qd) {
    if (static_cast<int>(q.size()) != model_.joint_count() ||
        static_cast<int>(qd.size()) != model_.joint_count())
      throw DimensionError("set_state: q/qd size mismatch");
    time_ = time;
    auto frames = forward_kinematics(model_, root_pose, q);
    size_t n = static_cast<size_t>(model_.link_count());
    std::vector<PlanarTwist> origin_twist(n);
    origin_twist[static_cast<size_t>(model_.base_link)] = root_twist;
    for (int j : model_.topo_joints) {
      const JointSpec& js = model_.joints[static_cast<size_t>(j)];
      const auto& pt = origin_twist[static_cast<size_t>(js.parent_link)];
      const auto& pf = frames[static_cast<size_t>(js.parent_link)];
      Vec2 r = rotate(pf.pose.theta, js.anchor);
      PlanarTwist ct;
      ct.vx = pt.vx - pt.omega * r.z;
      ct.vz = pt.vz + pt.omega * r.x;
      ct.omega = pt.omega + qd[static_cast<size_t>(j)];
      origin_twist[static_cast<size_t>(js.child_link)] = ct;
    }
    for (size_t i = 0; i < n; ++i) {
      auto& b = bodies_[i];
      const auto& f = frames[i];
      b.theta = f.pose.theta;
      b.cx = f.com.x;
      b.cz = f.com.z;
      Vec2 rc = {f.com.x - f.pose.x, f.com.z - f.pose.z};
      const auto& ot = origin_twist[i];
      b.vx = ot.vx - ot.omega * rc.z;
      b.vz = ot.vz + ot.omega * rc.x;
      b.omega = ot.omega;
    }
    std::fill(torques_.begin(), torques_.end(), 0.0);
    std::fill(force_prev_.begin(), force_prev_.end(), Vec2{});
  }

  void reset_standing() {
    PlanarPose root{0.0, model_.nominal_standing_root_height, 0.0};
    std::vector<double> qd(static_cast<size_t>(model_.joint_count()), 0.0);
    set_state(0.0, root, {}, model_.default_pose(), qd);
  }

  SimState state() const {
    SimState s;
    s.time = time_;
    size_t nj = static_cast<size_t>(model_.joint_count());
    s.q.resize(nj);
    s.qd.resize(nj);
    for (size_t j = 0; j < nj; ++j) {
      const JointSpec& js = model_.joints[j];
      const Body& p = bodies_[static_cast<size_t>(js.parent_link)];
      const Body& c = bodies_[static_cast<size_t>(js.child_link)];
      s.q[j] = c.theta - p.theta;
      s.qd[j] = c.omega - p.omega;
    }
    s.last_applied_torques = torques_;
    s.bodies.resize(bodies_.size());
    for (size_t i = 0; i < bodies_.size(); ++i) {
      const Body& b = bodies_[i];
      Vec2 rc = rotate(b.theta, model_.links[i].com);
      BodyState bs;
      bs.pose = {b.cx - rc.x, b.cz - rc.z, b.theta};
      bs.com = {b.cx, b.cz};
      bs.twist = {b.vx, b.vz, b.omega};
      s.bodies[i] = bs;
    }
    const BodyState& base = s.bodies[static_cast<size_t>(model_.base_link)];
    Vec2 r = {base.pose.x - base.com.x, base.pose.z - base.com.z};
    s.root_pose = base.pose;
    s.root_twist = {base.twist.vx - base.twist.omega * r.z,
                    base.twist.vz + base.twist.omega * r.x, base.twist.omega};
    return s;
  }

  // Kinetic + gravitational potential energy of all bodies.
  double mechanical_energy() const {
    double e = 0.0;
    for (size_t i = 0; i < bodies_.size(); ++i) {
      const Body& b = bodies_[i];
      e += 0.5 * mass_[i] * (b.vx * b.vx + b.vz * b.vz);
      e += 0.5 * inertia_[i] * b.omega * b.omega;
      e += mass_[i] * params_.gravity * b.cz;
    }
    return e;
  }

  // Advances one control step (substeps_per_control physics substeps) with
  // `action` held fixed. PD target per joint is q_default + action[j].
  StepReport step(const std::vector<double>& action) {
    if (static_cast<int>(action.size()) != model_.joint_count())
      throw DimensionError("step: action size " + std::to_string(action.size()) +
                           " != joint count " +
                           std::to_string(model_.joint_count()));
    size_t n = bodies_.size();
    size_t nj = static_cast<size_t>(model_.joint_count());
    double cdt = control_dt();

    std::vector<PlanarTwist> v_start(n);
    for (size_t i = 0; i < n; ++i)
      v_start[i] = {bodies_[i].vx, bodies_[i].vz, bodies_[i].omega};

    std::vector<Vec2> body_impulse(n, Vec2{});
    std::vector<Vec2> joint_impulse(nj, Vec2{});
    std::vector<std::vector<PointAccum>> accum(n);
    for (size_t i = 0; i < n; ++i)
      accum[i].resize(model_.links[i].collision_points.size());

    for (int sub = 0; sub < params_.substeps_per_control; ++sub)
      substep(action, body_impulse, joint_impulse, accum);

    for (const Body& b : bodies_) {
      double mag = std::abs(b.cx) + std::abs(b.cz) + std::abs(b.vx) +
                   std::abs(b.vz) + std::abs(b.omega);
      if (!std::isfinite(mag) || mag > params_.divergence_limit)
        throw DivergedError("simulation diverged", time_);
    }

    StepReport rep;
    rep.body_impulse = body_impulse;
    rep.body_accel.resize(n);
    rep.body_ang_accel.resize(n);
    rep.body_force_rate.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const Body& b = bodies_[i];
      rep.body_accel[i] = {(b.vx - v_start[i].vx) / cdt,
                           (b.vz - v_start[i].vz) / cdt};
      rep.body_ang_accel[i] = (b.omega - v_start[i].omega) / cdt;
      Vec2 force = {body_impulse[i].x / cdt, body_impulse[i].z / cdt};
      rep.body_force_rate[i] = {(force.x - force_prev_[i].x) / cdt,
                                (force.z - force_prev_[i].z) / cdt};
      force_prev_[i] = force;
    }
    rep.joint_forces.resize(nj);
    for (size_t j = 0; j < nj; ++j)
      rep.joint_forces[j] = std::sqrt(joint_impulse[j].x * joint_impulse[j].x +
                                      joint_impulse[j].z * joint_impulse[j].z) /
                            cdt;
    for (size_t i = 0; i < n; ++i)
      for (const PointAccum& pa : accum[i]) {
        if (!pa.touched) continue;
        ContactEvent ev;
        ev.body = static_cast<int>(i);
        ev.point = pa.point;
        ev.normal_impulse = pa.jn;
        double cap = friction_ * pa.jn;
        ev.tangential_impulse = clampd(pa.jt, -cap, cap);
        ev.normal_force = pa.jn / cdt;
        ev.time = time_;
        rep.contacts.push_back(ev);
      }

    time_ += cdt;
    rep.state = state();
    return rep;
  }

 private:
  struct Body {
    double cx = 0.0, cz = 0.0, theta = 0.0;  // CoM position + orientation
    double vx = 0.0, vz = 0.0, omega = 0.0;
  };

  struct PointAccum {
    double jn = 0.0, jt = 0.0;
    Vec2 point;
    bool touched = false;
  };

  struct Contact {
    int body = 0;
    int point_index = 0;
    Vec2 r;    // CoM -> contact point, world
    Vec2 n, t; // surface normal / tangent
    double kn = 0.0, kt = 0.0;
    double jn = 0.0, jt = 0.0;
  };

  struct JointScratch {
    int parent = 0, child = 0;
    Vec2 rp, rc;  // CoM -> anchor
    double k11 = 0.0, k12 = 0.0, k22 = 0.0;
  };

  static double cross2(const Vec2& r, const Vec2& f) {
    return r.x * f.z - r.z * f.x;
  }

  Vec2 point_velocity(const Body& b, const Vec2& r) const {
    return {b.vx - b.omega * r.z, b.vz + b.omega * r.x};
  }

  void apply_impulse(Body& b, double inv_m, double inv_i, const Vec2& r, Vec2 p) {
    b.vx += p.x * inv_m;
    b.vz += p.z * inv_m;
    b.omega += cross2(r, p) * inv_i;
  }

  Vec2 body_point(const Body& b, size_t link, const Vec2& local) const {
    const Vec2& cl = model_.links[link].com;
    Vec2 rel = rotate(b.theta, {local.x - cl.x, local.z - cl.z});
    return {b.cx + rel.x, b.cz + rel.z};
  }

  void joint_geometry(size_t j, JointScratch& s) const {
    const JointSpec& js = model_.joints[j];
    s.parent = js.parent_link;
    s.child = js.child_link;
    const Body& p = bodies_[static_cast<size_t>(s.parent)];
    const Body& c = bodies_[static_cast<size_t>(s.child)];
    Vec2 anchor_p = body_point(p, static_cast<size_t>(s.parent), js.anchor);
    // the child frame origin coincides with the joint anchor
    const Vec2& child_com = model_.links[static_cast<size_t>(s.child)].com;
    Vec2 rel = rotate(c.theta, {-child_com.x, -child_com.z});
    Vec2 anchor_c = {c.cx + rel.x, c.cz + rel.z};
    s.rp = {anchor_p.x - p.cx, anchor_p.z - p.cz};
    s.rc = {anchor_c.x - c.cx, anchor_c.z - c.cz};
    double imp = 1.0 / mass_[static_cast<size_t>(s.parent)];
    double imc = 1.0 / mass_[static_cast<size_t>(s.child)];
    double iip = 1.0 / inertia_[static_cast<size_t>(s.parent)];
    double iic = 1.0 / inertia_[static_cast<size_t>(s.child)];
    s.k11 = imp + imc + iip * s.rp.z * s.rp.z + iic * s.rc.z * s.rc.z;
    s.k12 = -iip * s.rp.x * s.rp.z - iic * s.rc.x * s.rc.z;
    s.k22 = imp + imc + iip * s.rp.x * s.rp.x + iic * s.rc.x * s.rc.x;
  }

  // Solves K x = rhs for the 2x2 symmetric joint effective mass.
  static Vec2 solve22(double k11, double k12, double k22, Vec2 rhs) {
    double det = k11 * k22 - k12 * k12;
    if (std::abs(det) < 1e-12) return {0.0, 0.0};
    double inv = 1.0 / det;
    return {inv * (k22 * rhs.x - k12 * rhs.z), inv * (k11 * rhs.z - k12 * rhs.x)};
  }

  void substep(const std::vector<double>& action, std::vector<Vec2>& body_impulse,
               std::vector<Vec2>& joint_impulse,
               std::vector<std::vector<PointAccum>>& accum) {
    size_t n = bodies_.size();
    size_t nj = static_cast<size_t>(model_.joint_count());
    double dt = params_.dt;

    // PD torques (equal and opposite pairs), then gravity.
    for (size_t j = 0; j < nj; ++j) {
      const JointSpec& js = model_.joints[j];
      Body& p = bodies_[static_cast<size_t>(js.parent_link)];
      Body& c = bodies_[static_cast<size_t>(js.child_link)];
      double tau = 0.0;
      if (actuators_enabled_) {
        double q = c.theta - p.theta;
        double qd = c.omega - p.omega;
        double target = js.q_default + action[j];
        tau = kp_scale_ * js.kp * (target - q) - kd_scale_ * js.kd * qd;
        tau = clampd(tau, -js.torque_limit, js.torque_limit);
      }
      torques_[j] = tau;
      c.omega += tau * dt / inertia_[static_cast<size_t>(js.child_link)];
      p.omega -= tau * dt / inertia_[static_cast<size_t>(js.parent_link)];
    }
    for (Body& b : bodies_) b.vz -= params_.gravity * dt;

    // contact set from current positions
    std::vector<Contact> contacts;
    for (size_t i = 0; i < n; ++i) {
      const Body& b = bodies_[i];
      const auto& pts = model_.links[i].collision_points;
      for (size_t k = 0; k < pts.size(); ++k) {
        Vec2 p = body_point(b, i, pts[k]);
        double h = terrain_.height(p.x);
        Vec2 nrm = terrain_.normal(p.x);
        double depth = (h - p.z) * nrm.z;
        if (depth < -params_.contact_margin) continue;
        Contact c;
        c.body = static_cast<int>(i);
        c.point_index = static_cast<int>(k);
        c.r = {p.x - b.cx, p.z - b.cz};
        c.n = nrm;
        c.t = {nrm.z, -nrm.x};
        double inv_m = 1.0 / mass_[i];
        double inv_i = 1.0 / inertia_[i];
        double rn = cross2(c.r, c.n);
        double rt = cross2(c.r, c.t);
        c.kn = inv_m + inv_i * rn * rn;
        c.kt = inv_m + inv_i * rt * rt;
        contacts.push_back(c);
      }
    }

    std::vector<JointScratch> js(nj);
    for (size_t j = 0; j < nj; ++j) joint_geometry(j, js[j]);

    // joint hard stops: active set from current angles, accumulated impulses
    std::vector<int> stop_dir(nj, 0);  // +1 pushing q up at lo, -1 down at hi
    std::vector<double> stop_acc(nj, 0.0);
    for (size_t j = 0; j < nj; ++j) {
      const JointSpec& spec = model_.joints[j];
      const Body& p = bodies_[static_cast<size_t>(spec.parent_link)];
      const Body& c = bodies_[static_cast<size_t>(spec.child_link)];
      double q = c.theta - p.theta;
      if (q <= spec.limit_lo)
        stop_dir[j] = +1;
      else if (q >= spec.limit_hi)
        stop_dir[j] = -1;
    }

    // velocity solve: joints + contacts, restitution 0, no bias
    for (int it = 0; it < params_.velocity_iterations; ++it) {
      for (size_t j = 0; j < nj; ++j) {
        if (stop_dir[j] == 0) continue;
        const JointSpec& spec = model_.joints[j];
        Body& p = bodies_[static_cast<size_t>(spec.parent_link)];
        Body& c = bodies_[static_cast<size_t>(spec.child_link)];
        double k = 1.0 / inertia_[static_cast<size_t>(spec.parent_link)] +
                   1.0 / inertia_[static_cast<size_t>(spec.child_link)];
        double qd = c.omega - p.omega;
        // stop impulse only ever pushes back inside the interval
        double dl = -stop_dir[j] * qd / k;
        double acc_new = std::max(stop_acc[j] + dl, 0.0);
        dl = (acc_new - stop_acc[j]) * stop_dir[j];
        stop_acc[j] = acc_new;
        c.omega += dl / inertia_[static_cast<size_t>(spec.child_link)];
        p.omega -= dl / inertia_[static_cast<size_t>(spec.parent_link)];
      }
      for (size_t j = 0; j < nj; ++j) {
        JointScratch& s = js[j];
        Body& p = bodies_[static_cast<size_t>(s.parent)];
        Body& c = bodies_[static_cast<size_t>(s.child)];
        Vec2 vp = point_velocity(p, s.rp);
        Vec2 vc = point_velocity(c, s.rc);
        Vec2 cdot = {vc.x - vp.x, vc.z - vp.z};
        Vec2 imp = solve22(s.k11, s.k12, s.k22, {-cdot.x, -cdot.z});
        apply_impulse(c, 1.0 / mass_[static_cast<size_t>(s.child)],
                      1.0 / inertia_[static_cast<size_t>(s.child)], s.rc, imp);
        apply_impulse(p, 1.0 / mass_[static_cast<size_t>(s.parent)],
                      1.0 / inertia_[static_cast<size_t>(s.parent)], s.rp,
                      {-imp.x, -imp.z});
        joint_impulse[j].x += imp.x;
        joint_impulse[j].z += imp.z;
      }
      for (Contact& c : contacts) {
        Body& b = bodies_[static_cast<size_t>(c.body)];
        double inv_m = 1.0 / mass_[static_cast<size_t>(c.body)];
        double inv_i = 1.0 / inertia_[static_cast<size_t>(c.body)];
        // normal: accumulated impulse clamped at zero
        Vec2 vp = point_velocity(b, c.r);
        double vn = vp.x * c.n.x + vp.z * c.n.z;
        double djn = -vn / c.kn;
        double jn_new = std::max(c.jn + djn, 0.0);
        djn = jn_new - c.jn;
        c.jn = jn_new;
        apply_impulse(b, inv_m, inv_i, c.r, {c.n.x * djn, c.n.z * djn});
        // friction: clamp to the Coulomb cone
        vp = point_velocity(b, c.r);
        double vt = vp.x * c.t.x + vp.z * c.t.z;
        double djt = -vt / c.kt;
        double cap = friction_ * c.jn;
        double jt_new = clampd(c.jt + djt, -cap, cap);
        djt = jt_new - c.jt;
        c.jt = jt_new;
        apply_impulse(b, inv_m, inv_i, c.r, {c.t.x * djt, c.t.z * djt});
      }
    }

    // integrate positions
    for (Body& b : bodies_) {
      b.cx += b.vx * dt;
      b.cz += b.vz * dt;
      b.theta += b.omega * dt;
    }

    // position correction: joints exactly, contacts and stops at the
    // Baumgarte rate; velocities are untouched.
    for (int it = 0; it < params_.position_iterations; ++it) {
      for (size_t j = 0; j < nj; ++j) {
        const JointSpec& spec = model_.joints[j];
        Body& p = bodies_[static_cast<size_t>(spec.parent_link)];
        Body& c = bodies_[static_cast<size_t>(spec.child_link)];
        double q = c.theta - p.theta;
        double err = 0.0;
        if (q < spec.limit_lo)
          err = spec.limit_lo - q;  // rotate q upward
        else if (q > spec.limit_hi)
          err = spec.limit_hi - q;
        if (err != 0.0) {
          double k = 1.0 / inertia_[static_cast<size_t>(spec.parent_link)] +
                     1.0 / inertia_[static_cast<size_t>(spec.child_link)];
          double corr = clampd(params_.baumgarte * err, -params_.max_correction,
                               params_.max_correction) /
                        k;
          c.theta += corr / inertia_[static_cast<size_t>(spec.child_link)];
          p.theta -= corr / inertia_[static_cast<size_t>(spec.parent_link)];
        }
      }
      for (size_t j = 0; j < nj; ++j) {
        JointScratch s;
        joint_geometry(j, s);
        Body& p = bodies_[static_cast<size_t>(s.parent)];
        Body& c = bodies_[static_cast<size_t>(s.child)];
        Vec2 ap = {p.cx + s.rp.x, p.cz + s.rp.z};
        Vec2 ac = {c.cx + s.rc.x, c.cz + s.rc.z};
        Vec2 err = {ac.x - ap.x, ac.z - ap.z};
        double mag = std::sqrt(err.x * err.x + err.z * err.z);
        if (mag > params_.max_correction) {
          err.x *= params_.max_correction / mag;
          err.z *= params_.max_correction / mag;
        }
        Vec2 imp = solve22(s.k11, s.k12, s.k22, {-err.x, -err.z});
        move_body(c, static_cast<size_t>(s.child), s.rc, imp);
        move_body(p, static_cast<size_t>(s.parent), s.rp, {-imp.x, -imp.z});
      }
      for (size_t i = 0; i < n; ++i) {
        Body& b = bodies_[i];
        const auto& pts = model_.links[i].collision_points;
        for (size_t k = 0; k < pts.size(); ++k) {
          Vec2 p = body_point(b, i, pts[k]);
          double h = terrain_.height(p.x);
          Vec2 nrm = terrain_.normal(p.x);
          double depth = (h - p.z) * nrm.z;
          double c = clampd(params_.baumgarte * (depth - params_.slop), 0.0,
                            params_.max_correction);
          if (c <= 0.0) continue;
          Vec2 r = {p.x - b.cx, p.z - b.cz};
          double rn = cross2(r, nrm);
          double kn = 1.0 / mass_[i] + rn * rn / inertia_[i];
          double lam = c / kn;
          move_body(b, i, r, {nrm.x * lam, nrm.z * lam});
        }
      }
    }

    // accumulate reporting sums
    for (const Contact& c : contacts) {
      PointAccum& pa = accum[static_cast<size_t>(c.body)][static_cast<size_t>(c.point_index)];
      pa.jn += c.jn;
      pa.jt += c.jt;
      pa.touched = pa.touched || c.jn > 0.0 || c.jt != 0.0;
      const Body& b = bodies_[static_cast<size_t>(c.body)];
      Vec2 world = {b.cx + c.r.x, b.cz + c.r.z};
      pa.point = world;
      Vec2& bi = body_impulse[static_cast<size_t>(c.body)];
      bi.x += c.n.x * c.jn + c.t.x * c.jt;
      bi.z += c.n.z * c.jn + c.t.z * c.jt;
    }
  }

  // Positional impulse: shifts CoM and orientation without touching velocity.
  void move_body(Body& b, size_t i, const Vec2& r, Vec2 p) {
    b.cx += p.x / mass_[i];
    b.cz += p.z / mass_[i];
    b.theta += cross2(r, p) / inertia_[i];
  }

  RobotModel model_;
  Terrain terrain_;
  SimParams params_;
  std::vector<Body> bodies_;
  std::vector<double> mass_, inertia_;
  std::vector<double> torques_;
  std::vector<Vec2> force_prev_;
  double time_ = 0.0;
  double friction_ = 0.8;
  double kp_scale_ = 1.0, kd_scale_ = 1.0;
  bool actuators_enabled_ = true;
};

}  // namespace firm

#endif  // FIRM_SIM_CORE_HPP_
