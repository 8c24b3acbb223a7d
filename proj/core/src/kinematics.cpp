#include "dlokit/kinematics.hpp"

#include "json_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dlokit {

namespace {

Pose joint_rotation(const RevoluteJoint& j, double q) {
  return make_pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(q, j.axis)));
}

void check_chain(const ChainModel& c, const char* name) {
  const int n = c.dof();
  if (c.lower_bounds.size() != n || c.upper_bounds.size() != n) {
    throw std::invalid_argument(std::string(name) + ": bounds size != joint count");
  }
  for (int i = 0; i < n; ++i) {
    if (!(c.lower_bounds[i] < c.upper_bounds[i])) {
      throw std::invalid_argument(std::string(name) + ": lower bound must be < upper bound");
    }
  }
}

// Joint frames (after each joint's rotation) and the tip, all in the
// chain's root frame; used for FK and Jacobian assembly.
struct ChainFrames {
  std::vector<Pose> joint_frames;
  Pose tip;
};

ChainFrames chain_frames(const ChainModel& chain, const VecX& q, const Pose& root) {
  if (q.size() != chain.dof()) {
    throw std::invalid_argument("chain configuration has wrong dimension");
  }
  ChainFrames out;
  out.joint_frames.reserve(chain.joints.size());
  Pose T = root;
  for (size_t i = 0; i < chain.joints.size(); ++i) {
    T = pose_compose(T, chain.joints[i].origin);
    T = pose_compose(T, joint_rotation(chain.joints[i], q[static_cast<int>(i)]));
    out.joint_frames.push_back(T);
  }
  out.tip = pose_compose(T, chain.tip_offset);
  return out;
}

// Columns of a geometric Jacobian for revolute joints: [z x (p_tip - p); z].
void fill_columns(MatX& J, int col0, const ChainModel& chain, const ChainFrames& frames,
                  const Vec3& p_tip) {
  for (size_t i = 0; i < chain.joints.size(); ++i) {
    const Vec3 z = frames.joint_frames[i].orientation * chain.joints[i].axis;
    const Vec3 p = frames.joint_frames[i].position;
    const int c = col0 + static_cast<int>(i);
    J.block<3, 1>(0, c) = z.cross(p_tip - p);
    J.block<3, 1>(3, c) = z;
  }
}

const ChainModel& finger_of(const RobotModel& m, Frame f) {
  return (f == Frame::IndexTipW || f == Frame::IndexTipH) ? m.index_finger : m.thumb;
}

int finger_q_offset(Frame f) {
  return (f == Frame::IndexTipW || f == Frame::IndexTipH) ? 6 : 10;
}

}  // namespace

const ChainModel& finger_chain(const RobotModel& model, Finger finger) {
  return finger == Finger::Index ? model.index_finger : model.thumb;
}

Pose chain_fk(const ChainModel& chain, const VecX& q) {
  return chain_frames(chain, q, Pose::identity()).tip;
}

MatX chain_jacobian(const ChainModel& chain, const VecX& q) {
  const ChainFrames f = chain_frames(chain, q, Pose::identity());
  MatX J = MatX::Zero(6, chain.dof());
  fill_columns(J, 0, chain, f, f.tip.position);
  return J;
}

Pose fk(const RobotModel& model, const VecX& q14, Frame frame) {
  if (q14.size() != 14) throw std::invalid_argument("fk: q must have dimension 14");

  if (frame == Frame::IndexTipH || frame == Frame::ThumbTipH) {
    return chain_fk(finger_of(model, frame), q14.segment(finger_q_offset(frame), 4));
  }

  const Pose flange = chain_fk(model.arm, q14.head(6));
  const Pose hand = pose_compose(flange, model.hand_mount);
  if (frame == Frame::HandW) return hand;

  const Pose tip_h = chain_fk(finger_of(model, frame), q14.segment(finger_q_offset(frame), 4));
  return pose_compose(hand, tip_h);
}

MatX jacobian(const RobotModel& model, const VecX& q14, Frame frame) {
  if (q14.size() != 14) throw std::invalid_argument("jacobian: q must have dimension 14");

  if (frame == Frame::IndexTipH || frame == Frame::ThumbTipH) {
    const ChainModel& finger = finger_of(model, frame);
    const ChainFrames f =
        chain_frames(finger, q14.segment(finger_q_offset(frame), 4), Pose::identity());
    MatX J = MatX::Zero(6, 4);
    fill_columns(J, 0, finger, f, f.tip.position);
    return J;
  }

  const ChainFrames arm_f = chain_frames(model.arm, q14.head(6), Pose::identity());
  const Pose hand = pose_compose(arm_f.tip, model.hand_mount);

  if (frame == Frame::HandW) {
    MatX J = MatX::Zero(6, 6);
    fill_columns(J, 0, model.arm, arm_f, hand.position);
    return J;
  }

  const ChainModel& finger = finger_of(model, frame);
  const ChainFrames finger_f =
      chain_frames(finger, q14.segment(finger_q_offset(frame), 4), hand);
  const Vec3 p_tip = finger_f.tip.position;

  MatX J = MatX::Zero(6, 10);
  fill_columns(J, 0, model.arm, arm_f, p_tip);
  fill_columns(J, 6, finger, finger_f, p_tip);
  return J;
}

std::vector<int> frame_joint_indices(Frame frame) {
  switch (frame) {
    case Frame::IndexTipH:
      return {6, 7, 8, 9};
    case Frame::ThumbTipH:
      return {10, 11, 12, 13};
    case Frame::HandW:
      return {0, 1, 2, 3, 4, 5};
    case Frame::IndexTipW:
      return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    case Frame::ThumbTipW:
      return {0, 1, 2, 3, 4, 5, 10, 11, 12, 13};
  }
  throw std::invalid_argument("unknown frame");
}

VecX joint_lower_bounds(const RobotModel& model) {
  VecX lb(14);
  lb << model.arm.lower_bounds, model.index_finger.lower_bounds, model.thumb.lower_bounds;
  return lb;
}

VecX joint_upper_bounds(const RobotModel& model) {
  VecX ub(14);
  ub << model.arm.upper_bounds, model.index_finger.upper_bounds, model.thumb.upper_bounds;
  return ub;
}

VecX assemble_q(const RobotModel& model, const VecX& q_arm, const VecX& q_fingers) {
  if (q_arm.size() != model.arm.dof() || q_fingers.size() != 8) {
    throw std::invalid_argument("assemble_q: expected 6 arm and 8 finger joints");
  }
  VecX q(14);
  q << q_arm, q_fingers;
  return q;
}

RobotModel default_robot_model() {
  auto deg = [](double d) { return d * M_PI / 180.0; };
  auto at = [](double x, double y, double z) { return make_pose(Vec3(x, y, z), Quat::Identity()); };

  RobotModel m;

  // Elbow arm: shoulder column 0.25 m, upper arm 0.3 m, forearm 0.2+0.1 m,
  // wrist-to-flange 0.1 m. Axes: base yaw, shoulder/elbow/wrist pitch,
  // roll at j4/j6.
  m.arm.joints = {
      {at(0.0, 0.0, 0.25), Vec3::UnitZ()},
      {Pose::identity(), Vec3::UnitY()},
      {at(0.0, 0.0, 0.30), Vec3::UnitY()},
      {at(0.20, 0.0, 0.0), Vec3::UnitX()},
      {at(0.10, 0.0, 0.0), Vec3::UnitY()},
      {Pose::identity(), Vec3::UnitX()},
  };
  m.arm.tip_offset = at(0.10, 0.0, 0.0);
  m.arm.lower_bounds = VecX(6);
  m.arm.upper_bounds = VecX(6);
  m.arm.lower_bounds << -deg(170), -deg(100), -deg(140), -deg(170), -deg(110), -deg(170);
  m.arm.upper_bounds << deg(170), deg(100), deg(140), deg(170), deg(110), deg(170);

  // Hand frame H hangs below/behind the flange; fingers are mirrored
  // about the Y-Z plane of H and reach downward (-Z).
  m.hand_mount = at(-0.05, 0.0, -0.12);

  // Index finger: abduction about Z, two pitch joints about Y, distal
  // twist about the pad normal; tip frame at the pad bottom edge center
  // (X along the groove, Y up the pad, Z out of the pad toward the thumb).
  Eigen::Matrix3d r_tip_index;
  r_tip_index.col(0) = Vec3(0, -1, 0);
  r_tip_index.col(1) = Vec3(0, 0, 1);
  r_tip_index.col(2) = Vec3(-1, 0, 0);

  m.index_finger.joints = {
      {at(0.02, 0.0, 0.0), Vec3::UnitZ()},
      {at(0.0, 0.0, -0.04), Vec3::UnitY()},
      {at(0.0, 0.0, -0.03), Vec3::UnitY()},
      {at(0.0, 0.0, -0.02), Vec3(-1, 0, 0)},
  };
  m.index_finger.tip_offset = make_pose(Vec3(0.0, 0.0, -0.02), r_tip_index);
  m.index_finger.lower_bounds = VecX(4);
  m.index_finger.upper_bounds = VecX(4);
  m.index_finger.lower_bounds << -deg(30), -0.35, -1.48, -deg(45);
  m.index_finger.upper_bounds << deg(30), 1.48, 1.48, deg(45);

  // Thumb: mirror image (axes flipped so equal joint values keep the two
  // pads parallel and closing toward each other).
  Eigen::Matrix3d r_tip_thumb;
  r_tip_thumb.col(0) = Vec3(0, 1, 0);
  r_tip_thumb.col(1) = Vec3(0, 0, 1);
  r_tip_thumb.col(2) = Vec3(1, 0, 0);

  m.thumb.joints = {
      {at(-0.02, 0.0, 0.0), Vec3(0, 0, -1)},
      {at(0.0, 0.0, -0.04), Vec3(0, -1, 0)},
      {at(0.0, 0.0, -0.03), Vec3(0, -1, 0)},
      {at(0.0, 0.0, -0.02), Vec3(1, 0, 0)},
  };
  m.thumb.tip_offset = make_pose(Vec3(0.0, 0.0, -0.02), r_tip_thumb);
  m.thumb.lower_bounds = m.index_finger.lower_bounds;
  m.thumb.upper_bounds = m.index_finger.upper_bounds;

  // Pads touch, parallel, when the proximal pitch folds in by asin(2/3)
  // and the next joint folds back by the same amount.
  const double fold = std::asin(2.0 / 3.0);
  m.reference_hand_config = VecX(8);
  m.reference_hand_config << 0.0, fold, -fold, 0.0, 0.0, fold, -fold, 0.0;

  m.tactile_extrinsics[0] = default_tactile_extrinsic();
  m.tactile_extrinsics[1] = default_tactile_extrinsic();

  check_chain(m.arm, "arm");
  check_chain(m.index_finger, "index_finger");
  check_chain(m.thumb, "thumb");
  return m;
}

Pose default_tactile_extrinsic() {
  // Sensor image frame per pad: u right (+X tip), v down toward the pad
  // bottom edge, depth into the gel; gel window starts 4 mm above the tip
  // origin and spans 18.56 x 13.92 mm (320 x 240 px at 0.058 mm pitch).
  Eigen::Matrix3d r_img = Eigen::Matrix3d::Identity();
  r_img(1, 1) = -1.0;
  r_img(2, 2) = -1.0;
  return make_pose(Vec3(0.00928, 0.01792, 0.0), r_img);
}

namespace {

using detail::json;

json chain_to_json(const ChainModel& c) {
  json joints = json::array();
  for (const auto& j : c.joints) {
    joints.push_back({{"origin", detail::pose_to_json(j.origin)},
                      {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}}});
  }
  return {{"joints", joints},
          {"lower_bounds", detail::vec_to_json(c.lower_bounds)},
          {"upper_bounds", detail::vec_to_json(c.upper_bounds)},
          {"tip_offset", detail::pose_to_json(c.tip_offset)}};
}

ChainModel chain_from_json(const json& j, const std::string& name) {
  ChainModel c;
  for (const auto& jj : detail::require(j, "joints", name)) {
    RevoluteJoint joint;
    joint.origin = detail::pose_from_json(detail::require(jj, "origin", name), name);
    joint.axis = detail::vec3_from_json(detail::require(jj, "axis", name), name);
    const double n = joint.axis.norm();
    if (n < 1e-9) throw std::runtime_error(name + ": joint axis must be nonzero");
    joint.axis /= n;
    c.joints.push_back(joint);
  }
  c.lower_bounds = detail::vec_from_json(detail::require(j, "lower_bounds", name), name);
  c.upper_bounds = detail::vec_from_json(detail::require(j, "upper_bounds", name), name);
  c.tip_offset = detail::pose_from_json(detail::require(j, "tip_offset", name), name);
  check_chain(c, name.c_str());
  return c;
}

}  // namespace

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open robot model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("robot model " + path + ": " + e.what());
  }

  RobotModel m;
  m.arm = chain_from_json(detail::require(j, "arm", path), "arm");
  m.index_finger = chain_from_json(detail::require(j, "index_finger", path), "index_finger");
  m.thumb = chain_from_json(detail::require(j, "thumb", path), "thumb");
  m.hand_mount = detail::pose_from_json(detail::require(j, "hand_mount", path), "hand_mount");

  const json& ext = detail::require(j, "tactile_extrinsics", path);
  m.tactile_extrinsics[0] =
      detail::pose_from_json(detail::require(ext, "index", path), "tactile_extrinsics.index");
  m.tactile_extrinsics[1] =
      detail::pose_from_json(detail::require(ext, "thumb", path), "tactile_extrinsics.thumb");

  m.reference_hand_config =
      detail::vec_from_json(detail::require(j, "reference_hand_config", path), path);

  if (m.arm.dof() != 6 || m.index_finger.dof() != 4 || m.thumb.dof() != 4) {
    throw std::runtime_error(path + ": expected a 6-DoF arm and two 4-DoF fingers");
  }
  if (m.reference_hand_config.size() != 8) {
    throw std::runtime_error(path + ": reference_hand_config must have 8 entries");
  }
  return m;
}

void save_robot_model(const RobotModel& m, const std::string& path) {
  check_chain(m.arm, "arm");
  check_chain(m.index_finger, "index_finger");
  check_chain(m.thumb, "thumb");
  json j = {{"arm", chain_to_json(m.arm)},
            {"index_finger", chain_to_json(m.index_finger)},
            {"thumb", chain_to_json(m.thumb)},
            {"hand_mount", detail::pose_to_json(m.hand_mount)},
            {"tactile_extrinsics",
             {{"index", detail::pose_to_json(m.tactile_extrinsics[0])},
              {"thumb", detail::pose_to_json(m.tactile_extrinsics[1])}}},
            {"reference_hand_config", detail::vec_to_json(m.reference_hand_config)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write robot model file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace dlokit
