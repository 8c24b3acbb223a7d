#pragma once

#include "dlokit/geom.hpp"

#include <string>
#include <vector>

namespace dlokit {

// One revolute joint: a static offset from the previous joint frame,
// then rotation about `axis` (unit vector in the post-offset frame).
struct RevoluteJoint {
  Pose origin;
  Vec3 axis{Vec3::UnitZ()};
};

struct ChainModel {
  std::vector<RevoluteJoint> joints;
  VecX lower_bounds;  // radians, one per joint, lower < upper
  VecX upper_bounds;
  Pose tip_offset;  // last joint frame -> chain tip frame

  int dof() const { return static_cast<int>(joints.size()); }
};

// Arm (6 revolute joints, rooted at world) carrying a two-finger hand
// (4 revolute joints each, rooted at the hand frame H). Joint vector
// layout everywhere: q[0..5] arm, q[6..9] index, q[10..13] thumb.
struct RobotModel {
  ChainModel arm;
  ChainModel index_finger;
  ChainModel thumb;
  Pose hand_mount;  // arm flange -> hand frame H

  // Maps fingertip-frame coordinates to sensor image-frame coordinates
  // (u right, v toward the pad bottom edge, depth into the gel), one per
  // finger: [0] index, [1] thumb.
  Pose tactile_extrinsics[2];

  // Finger configuration (8-vector: index then thumb) at which the two
  // pads touch, parallel, forming the closed V.
  VecX reference_hand_config;

  int dof() const { return arm.dof() + index_finger.dof() + thumb.dof(); }
};

struct JointState {
  VecX q;      // 14
  VecX q_dot;  // 14
};

enum class Frame { IndexTipW, ThumbTipW, IndexTipH, ThumbTipH, HandW };

enum class Finger { Index = 0, Thumb = 1 };

const ChainModel& finger_chain(const RobotModel& model, Finger finger);

// Pose of a chain's tip in the chain root frame.
Pose chain_fk(const ChainModel& chain, const VecX& q);

// Geometric Jacobian of a chain's tip in the chain root frame (6 x dof,
// rows: linear xyz then angular xyz).
MatX chain_jacobian(const ChainModel& chain, const VecX& q);

// Pose of the requested frame. H-frame variants depend only on the
// finger joints; W-frame variants on arm + that finger. Out-of-bounds q
// is permitted here; solvers enforce bounds.
Pose fk(const RobotModel& model, const VecX& q14, Frame frame);

// Geometric Jacobian (rows: linear xyz then angular xyz) expressed in the
// frame's reference (W or H). Columns follow frame_joint_indices(frame).
MatX jacobian(const RobotModel& model, const VecX& q14, Frame frame);

// q14 indices corresponding to the Jacobian columns for this frame.
std::vector<int> frame_joint_indices(Frame frame);

// Stacked 14-vector bounds (arm, index, thumb).
VecX joint_lower_bounds(const RobotModel& model);
VecX joint_upper_bounds(const RobotModel& model);

// Full 14-vector with the fingers at the reference configuration and the
// arm at `q_arm`.
VecX assemble_q(const RobotModel& model, const VecX& q_arm, const VecX& q_fingers);

// The documented default robot: generic 6-DoF elbow arm (0.3/0.3/0.1 m
// links) plus mirrored 4-DoF fingers with 0.04/0.03/0.02/0.02 m links.
RobotModel default_robot_model();

// Standard pad-sensor mounting (fingertip -> image frame) shared by the
// default model and the tactile renderer's defaults.
Pose default_tactile_extrinsic();

// JSON round trip; schema documented in the repo README.
RobotModel load_robot_model(const std::string& path);
void save_robot_model(const RobotModel& model, const std::string& path);

}  // namespace dlokit
