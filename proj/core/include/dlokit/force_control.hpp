#pragma once

#include "dlokit/geom.hpp"
#include "dlokit/kinematics.hpp"

#include <stdexcept>

namespace dlokit {

// Per-joint PD motor gains of a position-controlled servo chain.
struct MotorGains {
  VecX kp;  // N*m/rad, > 0
  VecX kv;  // N*m*s/rad, >= 0
};

// Throws std::invalid_argument on dimension mismatch or out-of-range gains.
void validate_gains(const MotorGains& gains);

// Gains with every joint at the same stiffness/damping. The defaults model
// the hand's soft position servos: 1 N*m/rad springs with light damping, so
// a commanded joint offset maps onto fingertip force through J^T with unit
// scale.
MotorGains uniform_gains(int dof, double kp = 1.0, double kv = 0.05);

// Desired fingertip forces are clamped to this magnitude by default; keeps
// the gel pads inside their rated pressure range.
constexpr double kDefaultForceLimit = 5.0;  // N

// One control tick for a finger: a joint-space position target plus the
// desired contact force at the tip, expressed in the fingertip frame.
struct GripCommand {
  VecX q_cmd;                    // radians, one per finger joint
  Vec3 force_tip{Vec3::Zero()};  // N, fingertip frame
};

// Scales f back onto the ball ||f|| <= f_max; identity inside it.
Vec3 clamp_force(const Vec3& f, double f_max = kDefaultForceLimit);

// Throws std::invalid_argument on non-finite entries or a force beyond f_max.
void validate_grip_command(const GripCommand& cmd, double f_max = kDefaultForceLimit);

// Raised when the force -> joint-offset mapping amplifies beyond what any
// healthy finger posture explains (joint torque above 10x the longest link's
// moment arm per newton); the Jacobian at q is then numerically suspect.
struct SingularityWarning : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// PD servo law: tau = kp .* (q_d - q) - kv .* q_dot, elementwise. Also used
// by the simulator as the motor model.
VecX torque_model(const MotorGains& gains, const VecX& q_d, const VecX& q, const VecX& q_dot);

// Joint offset that makes the PD springs press the tip against the
// environment with force_tip (fingertip frame) once motion has settled:
//
//   offset = kp^-1 * Jv^T * R * force_tip
//
// where Jv is the linear-velocity block of the finger Jacobian in the hand
// frame and R rotates the fingertip frame into the hand frame at q_finger.
// Statics only: link gravity is not compensated (the finger links are light
// enough that the resulting force error stays well inside the 5% band the
// grip controller tolerates). Throws SingularityWarning per above.
VecX force_offset(const RobotModel& model, Finger finger, const VecX& q_finger,
                  const Vec3& force_tip, const MotorGains& gains);

// Position/force superposition for one finger: the IK joint target plus the
// force offset evaluated at the currently measured configuration. This is
// the final position command sent to the servos. Propagates
// SingularityWarning from force_offset.
VecX hybrid_command(const VecX& q_target, const VecX& q_now, const Vec3& force_tip,
                    const RobotModel& model, Finger finger, const MotorGains& gains);

}  // namespace dlokit
