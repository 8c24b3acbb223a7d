#include "dlokit/following.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dlokit {

void validate_policy_gains(const PolicyGains& g) {
  if (!(g.kp_rot_x > 0.0) || !(g.kp_rot_z > 0.0)) {
    throw std::invalid_argument("policy gains: rotation gains must be positive");
  }
  if (!(g.shear_threshold > 0.0)) {
    throw std::invalid_argument("policy gains: shear threshold must be positive");
  }
  if (!(g.theta_step > 0.0)) {
    throw std::invalid_argument("policy gains: theta step must be positive");
  }
}

FollowState init_grasp(const std::function<std::pair<bool, bool>(double)>& contact_at,
                       const FollowOptions& opts) {
  if (!contact_at) throw std::invalid_argument("init_grasp: contact probe required");
  validate_policy_gains(opts.gains);
  if (!(opts.theta_sweep_step > 0.0)) {
    throw std::invalid_argument("init_grasp: sweep step must be positive");
  }

  const auto both = [&](double th) {
    const std::pair<bool, bool> c = contact_at(th);
    return c.first && c.second;
  };

  if (!both(0.0)) throw GraspFailed("init_grasp: no bilateral contact in the parallel grasp");

  // Open the V in fixed increments until a pad loses the object; keep the
  // last angle where both sensors still saw it.
  double last_ok = 0.0;
  for (int k = 1; k * opts.theta_sweep_step <= opts.theta_sweep_max + 1e-12; ++k) {
    const double th = k * opts.theta_sweep_step;
    if (!both(th)) break;
    last_ok = th;
  }

  FollowState s;
  s.mode = FollowMode::Following;
  s.theta = std::clamp(last_ok, kThetaMin, kThetaMax);
  s.grip_force = opts.grip_force;
  return s;
}

double regulate_theta(const FollowState& state, const Vec2& shear_index, const Vec2& shear_thumb,
                      bool sensing_ok, const PolicyGains& gains) {
  validate_policy_gains(gains);
  if (state.mode != FollowMode::Following) {
    throw std::logic_error("regulate_theta: theta is regulated while following");
  }

  const double shear = std::max(shear_index.norm(), shear_thumb.norm());
  double t = state.theta;
  if (shear > gains.shear_threshold) {
    t += gains.theta_step;  // object drags through the groove: open to ease it
  } else if (!sensing_ok) {
    t -= gains.theta_step;  // weak contact: close toward the pads
  }
  return std::clamp(t, kThetaMin, kThetaMax);
}

Vec2 orient_adjust(const DloLineEstimate& estimate, const PolicyGains& gains,
                   const RobotModel& model) {
  validate_policy_gains(gains);

  // The estimate's direction lives in the index-tip frame, where the pads'
  // shared bottom edge runs along +X and the sign gauge already puts psi in
  // the +X hemisphere. The rotation that carries the edge onto psi is the
  // misalignment; express it in the hand frame and feed its pitch (about
  // hand X) and yaw (about hand Z) components to the P controller. Spin
  // about the groove axis itself is unobservable for a cylinder and drops
  // out of the cross product.
  Vec3 psi = estimate.psi.normalized();
  if (psi.x() < 0.0) psi = -psi;  // enforce the gauge on hand-rolled inputs
  const Vec3 cross = Vec3::UnitX().cross(psi);
  const double sin_a = cross.norm();
  if (sin_a < 1e-12) return Vec2::Zero();
  const Vec3 omega_tip = cross / sin_a * std::atan2(sin_a, psi.x());

  const Pose ref = reference_tip_pose_h(model, static_cast<int>(Finger::Index));
  const Vec3 omega_h = ref.orientation * omega_tip;
  return Vec2(gains.kp_rot_x * omega_h.x(), gains.kp_rot_z * omega_h.z());
}

FollowStepResult follow_step(const FollowState& state, const RobotModel& model, const VecX& q_now,
                             const StepSensing& sensing, const FollowOptions& opts) {
  validate_policy_gains(opts.gains);
  if (q_now.size() != 14) throw std::invalid_argument("follow_step: q_now must have 14 joints");

  if (state.mode == FollowMode::Lost) {
    FollowStepResult out;
    out.q_cmd = q_now;
    out.state = state;
    return out;
  }
  if (state.mode != FollowMode::Following) {
    throw std::logic_error("follow_step: start following via init_grasp or switch_mode");
  }

  FollowStepResult out;
  FollowState s = state;

  bool fresh = false;
  try {
    const DloLineEstimate* prev = s.last_estimate ? &*s.last_estimate : nullptr;
    const DloLineEstimate e =
        estimate_pose(sensing.index_frame, sensing.thumb_frame, model, q_now, prev, opts.estimate);
    s.last_estimate = e;
    s.lost_count = 0;
    fresh = true;
  } catch (const SensingLost&) {
    ++s.lost_count;
  } catch (const DegenerateSpread&) {
    ++s.lost_count;  // a contact blob with no extent cannot aim the groove
  }
  if (!fresh && s.lost_count >= opts.k_lost) {
    s.mode = FollowMode::Lost;
    out.q_cmd = q_now;
    out.state = s;
    return out;
  }

  out.estimate_ok = fresh && s.last_estimate->converged;
  const bool sensing_ok = out.estimate_ok &&
                          s.last_estimate->n_index >= opts.min_contact_pixels &&
                          s.last_estimate->n_thumb >= opts.min_contact_pixels;
  s.theta = regulate_theta(s, sensing.shear_index, sensing.shear_thumb, sensing_ok, opts.gains);

  if (s.last_estimate && s.last_estimate->converged) {
    out.orient_cmd = orient_adjust(*s.last_estimate, opts.gains, model);
  }

  // Advance the Cartesian target along the DLO and re-aim the groove by the
  // P-controlled pitch/yaw increments about the hand's own axes.
  s.center_pose_w.position += opts.dt * s.follow_speed * s.follow_direction_w;
  const Quat dq = Quat(Eigen::AngleAxisd(out.orient_cmd[0], Vec3::UnitX())) *
                  Quat(Eigen::AngleAxisd(out.orient_cmd[1], Vec3::UnitZ()));
  s.center_pose_w.orientation = (s.center_pose_w.orientation * dq).normalized();

  const IkObjectives obj = preset_v_shape(s.theta, s.center_pose_w, model);
  const IkSolution sol = solve_ik(obj, model, q_now, IkSolver::Sqp, opts.ik);
  out.ik_converged = sol.converged;
  out.ik_error = sol.weighted_error;

  // Grip: each pad presses along its inward normal (tip -Z); the offsets
  // ride on the position targets through the motor stiffness.
  VecX q_cmd = sol.q;
  const Vec3 f_tip(0.0, 0.0, -s.grip_force);
  q_cmd.segment(6, 4) = hybrid_command(sol.q.segment(6, 4), q_now.segment(6, 4), f_tip, model,
                                       Finger::Index, opts.finger_motor_gains);
  q_cmd.segment(10, 4) = hybrid_command(sol.q.segment(10, 4), q_now.segment(10, 4), f_tip, model,
                                        Finger::Thumb, opts.finger_motor_gains);

  out.q_cmd = q_cmd;
  out.state = s;
  return out;
}

FollowState switch_mode(const FollowState& state, FollowMode target,
                        std::vector<double>* theta_trace,
                        const std::function<std::pair<bool, bool>(double)>* contact_at,
                        const FollowOptions& opts) {
  if (target == state.mode) return state;

  FollowState s = state;
  switch (target) {
    case FollowMode::RigidGrasp: {
      if (state.mode != FollowMode::Following) {
        throw std::invalid_argument("switch_mode: rigid grasp is entered from following");
      }
      double th = state.theta;
      while (th > 0.0) {
        th -= opts.gains.theta_step;
        if (th < 1e-12) th = 0.0;  // snap float residue so the ramp ends cleanly
        if (theta_trace) theta_trace->push_back(th);
      }
      s.theta = 0.0;
      s.mode = FollowMode::RigidGrasp;
      return s;
    }
    case FollowMode::Following: {
      if (contact_at == nullptr || !*contact_at) {
        throw std::invalid_argument("switch_mode: following requires the grasp probe");
      }
      const FollowState g = init_grasp(*contact_at, opts);
      s.mode = g.mode;  // keep the Cartesian plan, refresh the grasp fields
      s.theta = g.theta;
      s.grip_force = g.grip_force;
      s.lost_count = 0;
      s.last_estimate.reset();
      return s;
    }
    default:
      throw std::invalid_argument("switch_mode: grasping/lost are not commandable targets");
  }
}

}  // namespace dlokit
