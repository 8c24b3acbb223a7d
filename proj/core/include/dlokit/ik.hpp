#pragma once

#include "dlokit/geom.hpp"
#include "dlokit/kinematics.hpp"
#include "dlokit/nlp.hpp"

#include <map>
#include <optional>
#include <string>

namespace dlokit {

// One pose objective: 6x6 diagonal weight (stored as the diagonal) on the
// pose error [translation; axis-angle rotation] in the target's frame.
struct WeightedPoseTarget {
  Pose pose;
  Vec6 weight;
};

// Multi-objective IK task set. Diagonals must be >= 0; zero entries make
// that error axis free. At least one objective must be present.
// Finger slots: [0] index, [1] thumb.
struct IkObjectives {
  std::optional<WeightedPoseTarget> fingertip_world[2];
  std::optional<WeightedPoseTarget> fingertip_hand[2];

  // Target for the inter-fingertip offset p_index - p_thumb in H.
  struct RelativeTarget {
    Vec3 delta{Vec3::Zero()};
    Vec3 weight{Vec3::Zero()};
  };
  std::optional<RelativeTarget> relative_fingertip;

  std::optional<WeightedPoseTarget> hand_world;
};

enum class IkSolver { Sqp, Dls };

struct IkSolveOptions {
  // IK runs the SQP to stationarity rather than stopping on an absolute
  // cost-change threshold: the cost scale varies by orders of magnitude
  // across task sets, so a fixed |delta f| cutoff fires mid-descent.
  IkSolveOptions() { sqp.cost_tol = 0.0; }

  SqpOptions sqp;
  DlsOptions dls;

  // Tiny pull toward the warm start, added to the solver objective only
  // (never to the reported errors). The arm wrist is X-Y-X with collinear
  // links, so at j5 = 0 a j4/j6 counter-rotation is an exact null motion
  // of every task; without an anchor the quasi-Newton iterates drift tens
  // of degrees along that manifold between warm-started solves.
  double posture_regularization = 1e-6;
};

struct IkSolution {
  VecX q;                 // 14, within bounds
  double weighted_error;  // sqrt(2 * cost): the scalar used in comparisons
  std::map<std::string, double> per_objective_errors;  // e' W e per term
  bool converged = false;
  int iterations = 0;
};

// Summed half-quadratic objective 0.5 * sum e' W e over the present terms.
double ik_cost(const IkObjectives& obj, const RobotModel& model, const VecX& q14);

// Analytic gradient of ik_cost (rotation handled via the inverse right
// Jacobian of the log map); matches central differences to ~1e-6 rel.
VecX ik_cost_gradient(const IkObjectives& obj, const RobotModel& model, const VecX& q14);

IkSolution solve_ik(const IkObjectives& obj, const RobotModel& model, const VecX& q0,
                    IkSolver solver, const IkSolveOptions& options = {});

// Published task presets. Global rotation: track a world pose for the
// index tip while keeping the tips together, the in-hand pitch/yaw near
// the reference, and the hand orientation near nominal.
IkObjectives preset_global_rotation(const Pose& target_tip_pose_w, const RobotModel& model);

// V-shape: open the pads to gripping angle theta about the shared bottom
// edge, keep the tips coincident on the groove line, pin the index tip
// world position to `center_pose_w`'s position and the hand orientation
// to its orientation. theta in [0, 50] degrees (radians input).
IkObjectives preset_v_shape(double theta, const Pose& center_pose_w, const RobotModel& model);

// Fingertip poses in H at the reference hand configuration.
Pose reference_tip_pose_h(const RobotModel& model, int finger);

}  // namespace dlokit
