#pragma once

#include "dlokit/force_control.hpp"
#include "dlokit/ik.hpp"
#include "dlokit/pose_estimation.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace dlokit {

// The follow policy: grasp initialization, gripping-angle regulation,
// fingertip orientation P control and the per-step composition of pose
// estimation -> IK -> grip-force command. Pure state-in/state-out; the
// simulator (or a robot shim) owns the loop and the sensors.

enum class FollowMode { Grasping, Following, RigidGrasp, Lost };

// Gripping-angle limits while following. Below the floor the V stops
// cradling the object; above the cap the pads lose the opposing squeeze.
constexpr double kThetaMin = 15.0 * M_PI / 180.0;
constexpr double kThetaMax = 50.0 * M_PI / 180.0;

struct PolicyGains {
  double kp_rot_x = 0.5;                       // P gain on in-hand pitch
  double kp_rot_z = 0.5;                       // P gain on in-hand yaw
  double shear_threshold = 1.0;                // N, per sensor
  double theta_step = 2.0 * M_PI / 180.0;      // per regulation event
};

void validate_policy_gains(const PolicyGains& g);  // all must be positive

struct FollowState {
  FollowMode mode = FollowMode::Grasping;
  double theta = 0.0;      // gripping angle, rad
  double grip_force = 1.5;  // N, per finger along its pad normal
  std::optional<DloLineEstimate> last_estimate;
  Vec3 follow_direction_w = Vec3::UnitY();
  double follow_speed = 0.025;  // m/s
  Pose center_pose_w;           // fingertip-center Cartesian target
  int lost_count = 0;           // consecutive steps without sensing
};

struct FollowOptions {
  PolicyGains gains;
  double dt = 0.05;              // control period, s
  int k_lost = 10;               // lost steps before giving up
  long min_contact_pixels = 150;  // per sensor for "sensing ok"
  double grip_force = 1.5;       // N
  double theta_sweep_step = 1.0 * M_PI / 180.0;  // grasp-init sweep
  double theta_sweep_max = 60.0 * M_PI / 180.0;
  // Gains of the finger position motors the commands are computed against;
  // must match the plant or the grip-force offsets land wrong.
  MotorGains finger_motor_gains = uniform_gains(4);
  EstimateOptions estimate;
  IkSolveOptions ik;
  FollowOptions() { ik.sqp.max_iter = 50; }  // warm-started budget per step
};

struct GraspFailed : std::runtime_error {
  explicit GraspFailed(const std::string& what) : std::runtime_error(what) {}
};

// Parallel grasp, then the gripping angle sweeps up until either sensor
// loses contact; the initial theta is the last angle where both still saw
// the object, clamped into [kThetaMin, kThetaMax]. `contact_at` reports
// (index, thumb) contact with the hand closed at a given angle — the
// simulator implements it by rendering and segmenting both sensors.
FollowState init_grasp(const std::function<std::pair<bool, bool>(double)>& contact_at,
                       const FollowOptions& opts = {});

// One regulation event: raise theta when shear exceeds the threshold
// (object dragging through the groove), lower it when sensing degraded;
// shear wins when both fire (opening further would jam the object). The
// result is clamped into [kThetaMin, kThetaMax].
double regulate_theta(const FollowState& state, const Vec2& shear_index, const Vec2& shear_thumb,
                      bool sensing_ok, const PolicyGains& gains);

// P control on the estimated in-hand direction, mapped into the hand
// frame: returns (rot_x, rot_z) increments about the hand X and Z axes
// that rotate the groove toward the estimated object direction. Zero when
// psi lies along the nominal in-hand axis.
Vec2 orient_adjust(const DloLineEstimate& estimate, const PolicyGains& gains,
                   const RobotModel& model);

// Sensor bundle for one control step. Shear comes from the simulator's
// friction model (a real sensor would estimate it from the marker field).
struct StepSensing {
  TactileFrame index_frame;
  TactileFrame thumb_frame;
  Vec2 shear_index = Vec2::Zero();  // N, in-plane
  Vec2 shear_thumb = Vec2::Zero();
};

struct FollowStepResult {
  VecX q_cmd;  // 14, position targets for the PD motors
  FollowState state;
  bool estimate_ok = false;  // this step's estimate converged
  bool ik_converged = false;
  double ik_error = 0.0;     // weighted task error at the IK solution
  Vec2 orient_cmd = Vec2::Zero();
};

// One policy step: estimate the in-hand pose, regulate theta, advance the
// Cartesian center along the follow direction, aim the groove via the
// orientation P controller, solve the V-shape IK warm-started at q_now and
// add the grip-force joint offsets. Sensing dropouts fall back to the last
// estimate for up to k_lost steps, then the mode flips to Lost and the
// command holds q_now.
FollowStepResult follow_step(const FollowState& state, const RobotModel& model, const VecX& q_now,
                             const StepSensing& sensing, const FollowOptions& opts = {});

// Mode transition. To RigidGrasp: theta ramps linearly to zero (trace
// reported per control step when asked). Back to Following requires the
// grasp probe and re-runs the init sweep. Switching to the current mode is
// a no-op.
FollowState switch_mode(const FollowState& state, FollowMode target,
                        std::vector<double>* theta_trace = nullptr,
                        const std::function<std::pair<bool, bool>(double)>* contact_at = nullptr,
                        const FollowOptions& opts = {});

}  // namespace dlokit
