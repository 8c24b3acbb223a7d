#include "dlokit/geom.hpp"

#include <cmath>

namespace dlokit {

Pose make_pose(const Vec3& position, const Quat& orientation) {
  Pose p;
  p.position = position;
  p.orientation = orientation.normalized();
  return p;
}

Pose make_pose(const Vec3& position, const Eigen::Matrix3d& rotation) {
  return make_pose(position, Quat(rotation));
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() = orientation.toRotationMatrix();
  T.topRightCorner<3, 1>() = position;
  return T;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& T) {
  return make_pose(T.topRightCorner<3, 1>(), Quat(Eigen::Matrix3d(T.topLeftCorner<3, 3>())));
}

std::array<double, 7> Pose::to_array() const {
  return {position.x(),      position.y(),      position.z(),     orientation.w(),
          orientation.x(),   orientation.y(),   orientation.z()};
}

Pose Pose::from_array(const std::array<double, 7>& a) {
  return make_pose(Vec3(a[0], a[1], a[2]), Quat(a[3], a[4], a[5], a[6]));
}

Pose pose_compose(const Pose& a, const Pose& b) {
  Pose out;
  out.position = a.position + a.orientation * b.position;
  out.orientation = (a.orientation * b.orientation).normalized();
  return out;
}

Pose pose_inverse(const Pose& p) {
  Pose out;
  out.orientation = p.orientation.conjugate();
  out.position = -(out.orientation * p.position);
  return out;
}

Vec3 pose_apply(const Pose& p, const Vec3& point) {
  return p.position + p.orientation * point;
}

Vec3 pose_rotate(const Pose& p, const Vec3& dir) {
  return p.orientation * dir;
}

Vec3 quat_log(const Quat& q_in) {
  // Pick the hemisphere with w >= 0 so the arc is shortest (angle <= pi).
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() *= -1.0;

  const double s = q.vec().norm();
  const double w = q.w();
  if (s < 1e-12) {
    // Near identity: 2*atan2(s, w)/s -> 2/w; first-order term is exact enough.
    return (2.0 / std::max(w, 1e-12)) * q.vec();
  }
  const double angle = 2.0 * std::atan2(s, w);  // in [0, pi]
  return (angle / s) * q.vec();
}

Quat quat_exp(const Vec3& phi) {
  const double angle = phi.norm();
  double scale;
  if (angle < 1e-12) {
    scale = 0.5 - angle * angle / 48.0;  // sin(a/2)/a series
  } else {
    scale = std::sin(0.5 * angle) / angle;
  }
  Quat q;
  q.w() = std::cos(0.5 * angle);
  q.vec() = scale * phi;
  return q.normalized();
}

PoseError pose_error(const Pose& desired, const Pose& current) {
  PoseError e;
  e.translational = desired.position - current.position;
  e.rotational = quat_log(desired.orientation * current.orientation.conjugate());
  return e;
}

double rotation_angle(const Quat& a, const Quat& b) {
  return quat_log(a * b.conjugate()).norm();
}

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace dlokit
