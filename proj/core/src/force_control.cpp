#include "dlokit/force_control.hpp"

#include <algorithm>
#include <stdexcept>

namespace dlokit {

void validate_gains(const MotorGains& gains) {
  if (gains.kp.size() == 0 || gains.kp.size() != gains.kv.size()) {
    throw std::invalid_argument("motor gains: kp and kv must be same-sized and non-empty");
  }
  if (!gains.kp.allFinite() || !gains.kv.allFinite()) {
    throw std::invalid_argument("motor gains: non-finite entries");
  }
  if ((gains.kp.array() <= 0.0).any() || (gains.kv.array() < 0.0).any()) {
    throw std::invalid_argument("motor gains: kp must be > 0 and kv >= 0");
  }
}

MotorGains uniform_gains(int dof, double kp, double kv) {
  MotorGains g;
  g.kp = VecX::Constant(dof, kp);
  g.kv = VecX::Constant(dof, kv);
  validate_gains(g);
  return g;
}

Vec3 clamp_force(const Vec3& f, double f_max) {
  if (f_max < 0.0) throw std::invalid_argument("clamp_force: negative limit");
  const double n = f.norm();
  if (n <= f_max) return f;
  return Vec3((f_max / n) * f);
}

void validate_grip_command(const GripCommand& cmd, double f_max) {
  if (!cmd.q_cmd.allFinite() || !cmd.force_tip.allFinite()) {
    throw std::invalid_argument("grip command: non-finite entries");
  }
  if (cmd.force_tip.norm() > f_max * (1.0 + 1e-12)) {
    throw std::invalid_argument("grip command: desired force exceeds the limit");
  }
}

VecX torque_model(const MotorGains& gains, const VecX& q_d, const VecX& q, const VecX& q_dot) {
  validate_gains(gains);
  const auto n = gains.kp.size();
  if (q_d.size() != n || q.size() != n || q_dot.size() != n) {
    throw std::invalid_argument("torque_model: dimension mismatch");
  }
  return gains.kp.cwiseProduct(q_d - q) - gains.kv.cwiseProduct(q_dot);
}

namespace {

// Longest single segment of the chain (joint-to-joint offsets and the tip
// offset); bounds any one joint's moment arm contribution per newton.
double longest_link(const ChainModel& chain) {
  double len = chain.tip_offset.position.norm();
  for (const auto& j : chain.joints) len = std::max(len, j.origin.position.norm());
  return len;
}

}  // namespace

VecX force_offset(const RobotModel& model, Finger finger, const VecX& q_finger,
                  const Vec3& force_tip, const MotorGains& gains) {
  validate_gains(gains);
  const ChainModel& chain = finger_chain(model, finger);
  if (q_finger.size() != chain.dof() || gains.kp.size() != chain.dof()) {
    throw std::invalid_argument("force_offset: dimension mismatch");
  }
  if (!q_finger.allFinite() || !force_tip.allFinite()) {
    throw std::invalid_argument("force_offset: non-finite input");
  }
  // Finger chains are rooted at the hand frame, so chain FK / Jacobian are
  // already expressed in H; only the force needs rotating out of the tip.
  const Vec3 f_h = chain_fk(chain, q_finger).orientation * force_tip;
  const MatX jv = chain_jacobian(chain, q_finger).topRows<3>();
  const VecX joint_torque = jv.transpose() * f_h;
  if (joint_torque.norm() > 10.0 * force_tip.norm() * longest_link(chain)) {
    throw SingularityWarning("force_offset: force-to-torque gain exceeds 10x the longest link");
  }
  return joint_torque.cwiseQuotient(gains.kp);
}

VecX hybrid_command(const VecX& q_target, const VecX& q_now, const Vec3& force_tip,
                    const RobotModel& model, Finger finger, const MotorGains& gains) {
  if (q_target.size() != q_now.size()) {
    throw std::invalid_argument("hybrid_command: target/measured dimension mismatch");
  }
  return q_target + force_offset(model, finger, q_now, force_tip, gains);
}

}  // namespace dlokit
