#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace dlokit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Rigid transform: position in meters, orientation as a unit quaternion.
// Construct through make_pose() (or the static helpers) so the quaternion
// is always normalized.
struct Pose {
  Vec3 position{Vec3::Zero()};
  Quat orientation{Quat::Identity()};

  static Pose identity() { return Pose{}; }

  Eigen::Matrix4d matrix() const;
  static Pose from_matrix(const Eigen::Matrix4d& T);

  // Wire format used by configs and logs: [px, py, pz, qw, qx, qy, qz].
  std::array<double, 7> to_array() const;
  static Pose from_array(const std::array<double, 7>& a);
};

Pose make_pose(const Vec3& position, const Quat& orientation);
Pose make_pose(const Vec3& position, const Eigen::Matrix3d& rotation);

// Compose: apply a, then b in a's frame (homogeneous product T_a * T_b).
Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);

// Map a point expressed in p's frame into p's parent frame.
Vec3 pose_apply(const Pose& p, const Vec3& point);
// Rotate a direction (no translation).
Vec3 pose_rotate(const Pose& p, const Vec3& dir);

// Task-space error split into translation and shortest-arc axis-angle
// rotation; rotational magnitude always lands in [0, pi].
struct PoseError {
  Vec3 translational{Vec3::Zero()};
  Vec3 rotational{Vec3::Zero()};

  Vec6 vector() const {
    Vec6 e;
    e << translational, rotational;
    return e;
  }
};

// translational = desired.position - current.position,
// rotational    = log(desired.orientation * current.orientation^-1).
PoseError pose_error(const Pose& desired, const Pose& current);

// Rotation-vector log/exp on unit quaternions, shortest arc (|phi| <= pi).
Vec3 quat_log(const Quat& q);
Quat quat_exp(const Vec3& phi);

// Angle in [0, pi] between two orientations.
double rotation_angle(const Quat& a, const Quat& b);

// Skew-symmetric cross-product matrix [v]x.
Eigen::Matrix3d skew(const Vec3& v);

}  // namespace dlokit
