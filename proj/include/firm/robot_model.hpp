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

#ifndef FIRM_ROBOT_MODEL_HPP_
#define FIRM_ROBOT_MODEL_HPP_

#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "firm/common.hpp"

namespace firm {

// Sagittal-plane pose: x forward, z up, theta counterclockwise (pitch).
struct PlanarPose {
  double x = 0.0, z = 0.0, theta = 0.0;
};

struct PlanarTwist {
  double vx = 0.0, vz = 0.0, omega = 0.0;
};

struct Vec2 {
  double x = 0.0, z = 0.0;
};

inline Vec2 rotate(double theta, Vec2 p) {
  double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x - s * p.z, s * p.x + c * p.z};
}

// Composes a local offset into the world frame of `pose`.
inline Vec2 transform_point(const PlanarPose& pose, Vec2 local) {
  Vec2 r = rotate(pose.theta, local);
  return {pose.x + r.x, pose.z + r.z};
}

struct LinkSpec {
  std::string name;
  double mass = 0.0;               // kg
  double moment_of_inertia = 0.0;  // kg m^2 about the CoM
  double length = 0.0;             // m
  Vec2 com;                        // CoM in the link frame
  std::vector<Vec2> collision_points;  // ground-contact proxies, link frame
  double tracking_weight = 1.0;        // w_B, default 1
  int parent_joint = -1;               // joint index, -1 for the base
};

struct JointSpec {
  std::string name;
  int parent_link = -1;
  int child_link = -1;
  Vec2 anchor;                 // joint position in the parent link frame
  double limit_lo = 0.0;       // rad
  double limit_hi = 0.0;       // rad
  double velocity_limit = 0.0; // rad/s, symmetric
  double torque_limit = 0.0;   // N m, symmetric
  double kp = 0.0, kd = 0.0;   // PD gains
  double q_default = 0.0;      // rad
};

// The dynamics substrate assumes the paper-referenced standing height of the
// full-size robot; model heights are mapped through this ratio.
inline constexpr double kReferenceStandingHeight = 0.728;

struct RobotModel {
  std::string name;
  std::vector<LinkSpec> links;
  std::vector<JointSpec> joints;
  int base_link = 0;
  double nominal_standing_root_height = 0.0;
  double mass_scale = 1.0;
  std::vector<int> topo_joints;  // joint indices ordered parent-before-child

  int link_count() const { return static_cast<int>(links.size()); }
  int joint_count() const { return static_cast<int>(joints.size()); }

  // Converts paper-stated heights (0.7 m threshold, 0.8 m stand target) to
  // this model's stature.
  double height_scale() const {
    return nominal_standing_root_height / kReferenceStandingHeight;
  }

  double total_mass() const {
    double m = 0.0;
    for (const auto& l : links) m += l.mass;
    return m;
  }

  std::vector<double> default_pose() const {
    std::vector<double> q(static_cast<size_t>(joint_count()));
    for (int j = 0; j < joint_count(); ++j) q[static_cast<size_t>(j)] = joints[static_cast<size_t>(j)].q_default;
    return q;
  }

  int link_index(const std::string& n) const {
    for (int i = 0; i < link_count(); ++i)
      if (links[static_cast<size_t>(i)].name == n) return i;
    return -1;
  }
};

struct BodyFrame {
  PlanarPose pose;  // link frame origin and orientation, world
  Vec2 com;         // CoM, world
};

// ---------------------------------------------------------------------------
// Forward kinematics
// ---------------------------------------------------------------------------

inline std::vector<BodyFrame> forward_kinematics(const RobotModel& m,
                                                 const PlanarPose& root_pose,
                                                 const std::vector<double>& q) {
  if (static_cast<int>(q.size()) != m.joint_count())
    throw DimensionError("forward_kinematics: q size " + std::to_string(q.size()) +
                         " != joint count " + std::to_string(m.joint_count()));
  std::vector<BodyFrame> out(static_cast<size_t>(m.link_count()));
  out[static_cast<size_t>(m.base_link)].pose = root_pose;
  for (int j : m.topo_joints) {
    const JointSpec& js = m.joints[static_cast<size_t>(j)];
    const PlanarPose& pp = out[static_cast<size_t>(js.parent_link)].pose;
    PlanarPose cp;
    Vec2 origin = transform_point(pp, js.anchor);
    cp.x = origin.x;
    cp.z = origin.z;
    cp.theta = pp.theta + q[static_cast<size_t>(j)];
    out[static_cast<size_t>(js.child_link)].pose = cp;
  }
  for (int i = 0; i < m.link_count(); ++i) {
    out[static_cast<size_t>(i)].com =
        transform_point(out[static_cast<size_t>(i)].pose, m.links[static_cast<size_t>(i)].com);
  }
  return out;
}

// Lowest world z over all collision points of all links.
inline double lowest_body_z(const RobotModel& m, const PlanarPose& root_pose,
                            const std::vector<double>& q) {
  auto frames = forward_kinematics(m, root_pose, q);
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.link_count(); ++i)
    for (const Vec2& p : m.links[static_cast<size_t>(i)].collision_points)
      lowest = std::min(lowest, transform_point(frames[static_cast<size_t>(i)].pose, p).z);
  return lowest;
}

// ---------------------------------------------------------------------------
// Model description file
//
// Line-oriented key-value format, versioned header:
//   firm-model v1
//   name <id>
//   mass_scale <v>
//   standing_height <v>
//   link <name> mass <v> inertia <v> length <v> com <x> <z> [weight <v>]
//        points <x> <z> [<x> <z> ...]
//   joint <name> parent <link> child <link> anchor <x> <z> limits <lo> <hi>
//        vel_limit <v> torque_limit <v> kp <v> kd <v> q_default <v>
// The first link is the base. Declaration order is preserved.
// ---------------------------------------------------------------------------

namespace detail {

struct ModelParser {
  std::istringstream in;
  int line_no = 0;

  explicit ModelParser(const std::string& text) : in(text) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("model line " + std::to_string(line_no) + ": " + msg);
  }

  double num(std::istringstream& ls, const char* what) {
    double v = 0.0;
    if (!(ls >> v)) fail(std::string("expected number for ") + what);
    return v;
  }

  std::string word(std::istringstream& ls, const char* what) {
    std::string w;
    if (!(ls >> w)) fail(std::string("expected token for ") + what);
    return w;
  }

  void expect_key(std::istringstream& ls, const std::string& key) {
    std::string w;
    if (!(ls >> w) || w != key) fail("expected key '" + key + "'");
  }
};

}  // namespace detail

inline void validate_model(RobotModel& m);

inline RobotModel parse_model(const std::string& text) {
  detail::ModelParser p(text);
  RobotModel m;
  std::string line;
  bool saw_header = false;
  std::vector<std::pair<std::string, std::string>> joint_links;  // parent, child
  while (std::getline(p.in, line)) {
    ++p.line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!saw_header) {
      std::string ver;
      if (key != "firm-model" || !(ls >> ver) || ver != "v1")
        p.fail("expected header 'firm-model v1'");
      saw_header = true;
      continue;
    }
    if (key == "name") {
      m.name = p.word(ls, "name");
    } else if (key == "mass_scale") {
      m.mass_scale = p.num(ls, "mass_scale");
    } else if (key == "standing_height") {
      m.nominal_standing_root_height = p.num(ls, "standing_height");
    } else if (key == "link") {
      LinkSpec l;
      l.name = p.word(ls, "link name");
      p.expect_key(ls, "mass");
      l.mass = p.num(ls, "mass");
      p.expect_key(ls, "inertia");
      l.moment_of_inertia = p.num(ls, "inertia");
      p.expect_key(ls, "length");
      l.length = p.num(ls, "length");
      p.expect_key(ls, "com");
      l.com.x = p.num(ls, "com x");
      l.com.z = p.num(ls, "com z");
      std::string next;
      if (!(ls >> next)) p.fail("link '" + l.name + "' missing points");
      if (next == "weight") {
        l.tracking_weight = p.num(ls, "weight");
        if (!(ls >> next)) p.fail("link '" + l.name + "' missing points");
      }
      if (next != "points") p.fail("expected key 'points'");
      double x;
      while (ls >> x) {
        Vec2 pt;
        pt.x = x;
        pt.z = p.num(ls, "point z");
        l.collision_points.push_back(pt);
      }
      m.links.push_back(std::move(l));
    } else if (key == "joint") {
      JointSpec j;
      j.name = p.word(ls, "joint name");
      p.expect_key(ls, "parent");
      joint_links.emplace_back(p.word(ls, "parent link"), "");
      p.expect_key(ls, "child");
      joint_links.back().second = p.word(ls, "child link");
      p.expect_key(ls, "anchor");
      j.anchor.x = p.num(ls, "anchor x");
      j.anchor.z = p.num(ls, "anchor z");
      p.expect_key(ls, "limits");
      j.limit_lo = p.num(ls, "limit lo");
      j.limit_hi = p.num(ls, "limit hi");
      p.expect_key(ls, "vel_limit");
      j.velocity_limit = p.num(ls, "vel_limit");
      p.expect_key(ls, "torque_limit");
      j.torque_limit = p.num(ls, "torque_limit");
      p.expect_key(ls, "kp");
      j.kp = p.num(ls, "kp");
      p.expect_key(ls, "kd");
      j.kd = p.num(ls, "kd");
      p.expect_key(ls, "q_default");
      j.q_default = p.num(ls, "q_default");
      m.joints.push_back(std::move(j));
    } else {
      p.fail("unknown directive '" + key + "'");
    }
  }
  if (!saw_header) throw ParseError("model file empty or missing header");

  // resolve link references
  for (size_t j = 0; j < m.joints.size(); ++j) {
    int parent = m.link_index(joint_links[j].first);
    int child = m.link_index(joint_links[j].second);
    if (parent < 0)
      throw ParseError("joint '" + m.joints[j].name + "': unknown parent link '" +
                       joint_links[j].first + "'");
    if (child < 0)
      throw ParseError("joint '" + m.joints[j].name + "': unknown child link '" +
                       joint_links[j].second + "'");
    m.joints[j].parent_link = parent;
    m.joints[j].child_link = child;
  }

  // apply mass scaling
  for (auto& l : m.links) {
    l.mass *= m.mass_scale;
    l.moment_of_inertia *= m.mass_scale;
  }

  validate_model(m);
  return m;
}

inline void validate_model(RobotModel& m) {
  if (m.links.empty()) throw ParseError("model has no links");
  for (size_t i = 0; i < m.links.size(); ++i) {
    const LinkSpec& l = m.links[i];
    if (l.mass <= 0.0) throw ParseError("link '" + l.name + "': mass must be > 0");
    if (l.moment_of_inertia <= 0.0)
      throw ParseError("link '" + l.name + "': inertia must be > 0");
    if (l.length < 0.0)
      throw ParseError("link '" + l.name + "': length must be >= 0");
    if (l.collision_points.empty())
      throw ParseError("link '" + l.name + "': needs at least one collision point");
    for (size_t k = i + 1; k < m.links.size(); ++k)
      if (m.links[k].name == l.name)
        throw ParseError("duplicate link name '" + l.name + "'");
  }
  for (size_t j = 0; j < m.joints.size(); ++j) {
    const JointSpec& js = m.joints[j];
    if (js.limit_lo >= js.limit_hi)
      throw ParseError("joint '" + js.name + "': limits must satisfy lo < hi");
    if (js.velocity_limit <= 0.0)
      throw ParseError("joint '" + js.name + "': velocity_limit must be > 0");
    if (js.torque_limit <= 0.0)
      throw ParseError("joint '" + js.name + "': torque_limit must be > 0");
    if (js.kp < 0.0 || js.kd < 0.0)
      throw ParseError("joint '" + js.name + "': gains must be >= 0");
    if (js.q_default < js.limit_lo || js.q_default > js.limit_hi)
      throw ParseError("joint '" + js.name + "': q_default outside limits");
    for (size_t k = j + 1; k < m.joints.size(); ++k)
      if (m.joints[k].name == js.name)
        throw ParseError("duplicate joint name '" + js.name + "'");
  }
  if (m.joint_count() != m.link_count() - 1)
    throw ParseError("joint count " + std::to_string(m.joint_count()) +
                     " != link count - 1 (" + std::to_string(m.link_count() - 1) + ")");
  if (m.nominal_standing_root_height <= 0.0)
    throw ParseError("standing_height must be > 0");

  // each link is the child of at most one joint; base has none
  std::vector<int> parent_joint(static_cast<size_t>(m.link_count()), -1);
  for (int j = 0; j < m.joint_count(); ++j) {
    int c = m.joints[static_cast<size_t>(j)].child_link;
    if (parent_joint[static_cast<size_t>(c)] != -1)
      throw ParseError("link '" + m.links[static_cast<size_t>(c)].name +
                       "' is the child of two joints");
    parent_joint[static_cast<size_t>(c)] = j;
  }
  int base = -1;
  for (int i = 0; i < m.link_count(); ++i) {
    if (parent_joint[static_cast<size_t>(i)] == -1) {
      if (base != -1)
        throw ParseError("links '" + m.links[static_cast<size_t>(base)].name + "' and '" +
                         m.links[static_cast<size_t>(i)].name + "' are both unrooted");
      base = i;
    }
    m.links[static_cast<size_t>(i)].parent_joint = parent_joint[static_cast<size_t>(i)];
  }
  if (base == -1) throw ParseError("no base link: joints form a cycle");
  m.base_link = base;

  // cycle check: walk each link to the base
  for (int i = 0; i < m.link_count(); ++i) {
    int cur = i;
    int steps = 0;
    while (cur != base) {
      int pj = parent_joint[static_cast<size_t>(cur)];
      cur = m.joints[static_cast<size_t>(pj)].parent_link;
      if (++steps > m.link_count())
        throw ParseError("cycle detected involving link '" +
                         m.links[static_cast<size_t>(i)].name + "'");
    }
  }

  // topological joint order, parents before children
  m.topo_joints.clear();
  std::vector<bool> placed(static_cast<size_t>(m.link_count()), false);
  placed[static_cast<size_t>(base)] = true;
  while (static_cast<int>(m.topo_joints.size()) < m.joint_count()) {
    bool progress = false;
    for (int j = 0; j < m.joint_count(); ++j) {
      const JointSpec& js = m.joints[static_cast<size_t>(j)];
      if (!placed[static_cast<size_t>(js.child_link)] && placed[static_cast<size_t>(js.parent_link)]) {
        placed[static_cast<size_t>(js.child_link)] = true;
        m.topo_joints.push_back(j);
        progress = true;
      }
    }
    if (!progress) throw ParseError("model tree is disconnected");
  }
}

inline RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace firm

#endif  // FIRM_ROBOT_MODEL_HPP_
