#include "dlokit/ik.hpp"

#include <cmath>
#include <stdexcept>

namespace dlokit {

namespace {

// Inverse right Jacobian of the SO(3) log map: d/dq log(Rd R(q)') equals
// -invJr(e) * Jw for a world-expressed angular Jacobian Jw.
Eigen::Matrix3d inv_right_jacobian(const Vec3& phi) {
  const double t = phi.norm();
  double c;
  if (t < 1e-4) {
    c = 1.0 / 12.0 + t * t / 720.0;
  } else {
    // 1/t^2 - cot(t/2)/(2t), written with the half-angle identity so it
    // stays finite as t approaches pi.
    c = 1.0 / (t * t) - std::cos(0.5 * t) / (2.0 * t * std::sin(0.5 * t));
  }
  const Eigen::Matrix3d S = skew(phi);
  return Eigen::Matrix3d::Identity() + 0.5 * S + c * (S * S);
}

struct PoseTerm {
  Frame frame;
  const WeightedPoseTarget* target;
  const char* key;
};

void collect_pose_terms(const IkObjectives& obj, std::vector<PoseTerm>& terms) {
  if (obj.fingertip_world[0]) {
    terms.push_back({Frame::IndexTipW, &*obj.fingertip_world[0], "fw_index"});
  }
  if (obj.fingertip_world[1]) {
    terms.push_back({Frame::ThumbTipW, &*obj.fingertip_world[1], "fw_thumb"});
  }
  if (obj.fingertip_hand[0]) {
    terms.push_back({Frame::IndexTipH, &*obj.fingertip_hand[0], "fh_index"});
  }
  if (obj.fingertip_hand[1]) {
    terms.push_back({Frame::ThumbTipH, &*obj.fingertip_hand[1], "fh_thumb"});
  }
  if (obj.hand_world) {
    terms.push_back({Frame::HandW, &*obj.hand_world, "hw"});
  }
}

void validate(const IkObjectives& obj) {
  std::vector<PoseTerm> terms;
  collect_pose_terms(obj, terms);
  bool any = !terms.empty() || obj.relative_fingertip.has_value();
  if (!any) throw std::invalid_argument("ik: no objective present");
  for (const auto& t : terms) {
    if ((t.target->weight.array() < 0).any()) {
      throw std::invalid_argument("ik: negative objective weight");
    }
  }
  if (obj.relative_fingertip && (obj.relative_fingertip->weight.array() < 0).any()) {
    throw std::invalid_argument("ik: negative objective weight");
  }
}

Vec3 relative_offset_h(const RobotModel& model, const VecX& q) {
  return fk(model, q, Frame::IndexTipH).position - fk(model, q, Frame::ThumbTipH).position;
}

}  // namespace

double ik_cost(const IkObjectives& obj, const RobotModel& model, const VecX& q14) {
  validate(obj);
  std::vector<PoseTerm> terms;
  collect_pose_terms(obj, terms);

  double c = 0.0;
  for (const auto& t : terms) {
    const Vec6 e = pose_error(t.target->pose, fk(model, q14, t.frame)).vector();
    c += 0.5 * e.dot(t.target->weight.asDiagonal() * e);
  }
  if (obj.relative_fingertip) {
    const Vec3 e = obj.relative_fingertip->delta - relative_offset_h(model, q14);
    c += 0.5 * e.dot(obj.relative_fingertip->weight.asDiagonal() * e);
  }
  return c;
}

VecX ik_cost_gradient(const IkObjectives& obj, const RobotModel& model, const VecX& q14) {
  validate(obj);
  std::vector<PoseTerm> terms;
  collect_pose_terms(obj, terms);

  VecX g = VecX::Zero(14);
  for (const auto& t : terms) {
    const Pose current = fk(model, q14, t.frame);
    const PoseError pe = pose_error(t.target->pose, current);
    const MatX J = jacobian(model, q14, t.frame);
    const auto idx = frame_joint_indices(t.frame);

    // de/dq = [-Jv; -invJr(e_rot) * Jw]; contribution (de/dq)' W e.
    const Vec3 wt = t.target->weight.head<3>().asDiagonal() * pe.translational;
    const Vec3 wr = t.target->weight.tail<3>().asDiagonal() * pe.rotational;
    const Eigen::Matrix3d T = inv_right_jacobian(pe.rotational);
    for (size_t k = 0; k < idx.size(); ++k) {
      const Vec3 jv = J.block<3, 1>(0, static_cast<int>(k));
      const Vec3 jw = J.block<3, 1>(3, static_cast<int>(k));
      g[idx[k]] += -jv.dot(wt) - (T * jw).dot(wr);
    }
  }

  if (obj.relative_fingertip) {
    const Vec3 e = obj.relative_fingertip->delta - relative_offset_h(model, q14);
    const Vec3 we = obj.relative_fingertip->weight.asDiagonal() * e;
    const MatX Ji = jacobian(model, q14, Frame::IndexTipH);
    const MatX Jt = jacobian(model, q14, Frame::ThumbTipH);
    const auto ii = frame_joint_indices(Frame::IndexTipH);
    const auto ti = frame_joint_indices(Frame::ThumbTipH);
    for (size_t k = 0; k < ii.size(); ++k) {
      g[ii[k]] += -Ji.block<3, 1>(0, static_cast<int>(k)).dot(we);
    }
    for (size_t k = 0; k < ti.size(); ++k) {
      g[ti[k]] += Jt.block<3, 1>(0, static_cast<int>(k)).dot(we);
    }
  }
  return g;
}

namespace {

// Gauss-Newton model Hessian sum (de/dq)' W (de/dq) of ik_cost, using the
// same residual derivatives as the gradient. Handing this to the SQP's QP
// subproblem is what lets it converge to the same depth as the
// residual-based DLS instead of the cost line-search floor.
MatX gauss_newton_hessian(const IkObjectives& obj, const RobotModel& model, const VecX& q) {
  std::vector<PoseTerm> terms;
  collect_pose_terms(obj, terms);

  MatX h = MatX::Zero(14, 14);
  for (const auto& t : terms) {
    const Pose current = fk(model, q, t.frame);
    const PoseError pe = pose_error(t.target->pose, current);
    const MatX J = jacobian(model, q, t.frame);
    const auto idx = frame_joint_indices(t.frame);
    const Eigen::Matrix3d T = inv_right_jacobian(pe.rotational);

    MatX E(6, static_cast<int>(idx.size()));
    E.topRows<3>() = -J.topRows<3>();
    E.bottomRows<3>() = -(T * J.bottomRows<3>());
    const MatX wee = E.transpose() * t.target->weight.asDiagonal() * E;
    for (size_t r = 0; r < idx.size(); ++r) {
      for (size_t c = 0; c < idx.size(); ++c) {
        h(idx[r], idx[c]) += wee(static_cast<int>(r), static_cast<int>(c));
      }
    }
  }

  if (obj.relative_fingertip) {
    const MatX Ji = jacobian(model, q, Frame::IndexTipH);
    const MatX Jt = jacobian(model, q, Frame::ThumbTipH);
    const auto ii = frame_joint_indices(Frame::IndexTipH);
    const auto ti = frame_joint_indices(Frame::ThumbTipH);
    MatX E = MatX::Zero(3, 14);
    for (size_t k = 0; k < ii.size(); ++k) {
      E.col(ii[k]) -= Ji.block<3, 1>(0, static_cast<int>(k));
    }
    for (size_t k = 0; k < ti.size(); ++k) {
      E.col(ti[k]) += Jt.block<3, 1>(0, static_cast<int>(k));
    }
    h += E.transpose() * obj.relative_fingertip->weight.asDiagonal() * E;
  }
  return h;
}

std::map<std::string, double> per_objective(const IkObjectives& obj, const RobotModel& model,
                                            const VecX& q) {
  std::map<std::string, double> out;
  std::vector<PoseTerm> terms;
  collect_pose_terms(obj, terms);
  for (const auto& t : terms) {
    const Vec6 e = pose_error(t.target->pose, fk(model, q, t.frame)).vector();
    out[t.key] = e.dot(t.target->weight.asDiagonal() * e);
  }
  if (obj.relative_fingertip) {
    const Vec3 e = obj.relative_fingertip->delta - relative_offset_h(model, q);
    out["rfh"] = e.dot(obj.relative_fingertip->weight.asDiagonal() * e);
  }
  return out;
}

std::vector<DlsTask> dls_tasks(const IkObjectives& obj, const RobotModel& model, const VecX& q) {
  std::vector<DlsTask> tasks;
  std::vector<PoseTerm> terms;
  collect_pose_terms(obj, terms);
  for (const auto& t : terms) {
    DlsTask task;
    task.residual = pose_error(t.target->pose, fk(model, q, t.frame)).vector();
    task.weight_diag = t.target->weight;
    task.jacobian = MatX::Zero(6, 14);
    const MatX J = jacobian(model, q, t.frame);
    const auto idx = frame_joint_indices(t.frame);
    for (size_t k = 0; k < idx.size(); ++k) task.jacobian.col(idx[k]) = J.col(static_cast<int>(k));
    tasks.push_back(std::move(task));
  }
  if (obj.relative_fingertip) {
    DlsTask task;
    task.residual = obj.relative_fingertip->delta - relative_offset_h(model, q);
    task.weight_diag = obj.relative_fingertip->weight;
    task.jacobian = MatX::Zero(3, 14);
    const MatX Ji = jacobian(model, q, Frame::IndexTipH);
    const MatX Jt = jacobian(model, q, Frame::ThumbTipH);
    const auto ii = frame_joint_indices(Frame::IndexTipH);
    const auto ti = frame_joint_indices(Frame::ThumbTipH);
    for (size_t k = 0; k < ii.size(); ++k) {
      task.jacobian.col(ii[k]) = Ji.block<3, 4>(0, 0).col(static_cast<int>(k));
    }
    for (size_t k = 0; k < ti.size(); ++k) {
      task.jacobian.col(ti[k]) = -Jt.block<3, 4>(0, 0).col(static_cast<int>(k));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace

IkSolution solve_ik(const IkObjectives& obj, const RobotModel& model, const VecX& q0,
                    IkSolver solver, const IkSolveOptions& options) {
  validate(obj);
  if (q0.size() != 14) throw std::invalid_argument("solve_ik: q0 must have dimension 14");

  const VecX lb = joint_lower_bounds(model);
  const VecX ub = joint_upper_bounds(model);

  SolveResult r;
  if (solver == IkSolver::Sqp) {
    // Anchored pass, then an unanchored polish from its solution. The
    // anchor keeps the iterates near the warm start through flat stretches
    // of the landscape; the polish removes its (tiny) bias from the
    // converged q so the reported error is that of the task cost alone.
    auto solve_once = [&](const VecX& start, double reg) {
      NlpProblem p;
      p.dim = 14;
      p.cost = [&obj, &model, &start, reg](const VecX& q) {
        return ik_cost(obj, model, q) + 0.5 * reg * (q - start).squaredNorm();
      };
      p.cost_gradient = [&obj, &model, &start, reg](const VecX& q) {
        return VecX(ik_cost_gradient(obj, model, q) + reg * (q - start));
      };
      p.cost_hessian = [&obj, &model, reg](const VecX& q) {
        // Ridge keeps the model positive definite through singular poses.
        return MatX(gauss_newton_hessian(obj, model, q) +
                    (reg + 1e-10) * MatX::Identity(14, 14));
      };
      p.lower = lb;
      p.upper = ub;
      p.x0 = start;
      return solve_sqp(p, options.sqp);
    };

    r = solve_once(q0, options.posture_regularization);
    if (options.posture_regularization > 0.0) {
      const int first_phase = r.iterations;
      r = solve_once(r.x_star, 0.0);
      r.iterations += first_phase;
    }
  } else {
    r = solve_dls([&obj, &model](const VecX& q) { return dls_tasks(obj, model, q); }, q0, lb, ub,
                  options.dls);
    r.cost_star = ik_cost(obj, model, r.x_star);
  }

  IkSolution sol;
  sol.q = r.x_star;
  sol.weighted_error = std::sqrt(2.0 * std::max(0.0, r.cost_star));
  sol.per_objective_errors = per_objective(obj, model, sol.q);
  sol.converged = r.converged;
  sol.iterations = r.iterations;
  return sol;
}

Pose reference_tip_pose_h(const RobotModel& model, int finger) {
  if (finger < 0 || finger > 1) throw std::invalid_argument("finger must be 0 or 1");
  VecX q = VecX::Zero(14);
  q.tail(8) = model.reference_hand_config;
  return fk(model, q, finger == 0 ? Frame::IndexTipH : Frame::ThumbTipH);
}

IkObjectives preset_global_rotation(const Pose& target_tip_pose_w, const RobotModel& model) {
  IkObjectives obj;

  WeightedPoseTarget fw;
  fw.pose = target_tip_pose_w;
  fw.weight << 100, 100, 100, 1, 1, 1;
  obj.fingertip_world[0] = fw;

  IkObjectives::RelativeTarget rel;
  rel.delta = Vec3::Zero();
  rel.weight = Vec3(10, 10, 10);
  obj.relative_fingertip = rel;

  for (int f = 0; f < 2; ++f) {
    WeightedPoseTarget fh;
    fh.pose = reference_tip_pose_h(model, f);
    fh.weight << 0, 0, 0, 0, 0.1, 0.1;
    obj.fingertip_hand[f] = fh;
  }

  WeightedPoseTarget hw;
  hw.pose = Pose::identity();  // nominal hand orientation; position unweighted
  hw.weight << 0, 0, 0, 0.05, 0.05, 0.05;
  obj.hand_world = hw;

  return obj;
}

IkObjectives preset_v_shape(double theta, const Pose& center_pose_w, const RobotModel& model) {
  if (theta < 0.0 || theta > 50.0 * M_PI / 180.0 + 1e-12) {
    throw std::out_of_range("v-shape gripping angle must be within [0 deg, 50 deg]");
  }

  IkObjectives obj;

  // Each pad leans outward by theta/2 about its own bottom edge (tip X),
  // keeping the shared edge closed; the groove opens upward.
  for (int f = 0; f < 2; ++f) {
    WeightedPoseTarget fh;
    const Pose ref = reference_tip_pose_h(model, f);
    fh.pose = pose_compose(
        ref, make_pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(-0.5 * theta, Vec3::UnitX()))));
    fh.weight << 1, 0, 0, 0.1, 0.1, 0.01;
    obj.fingertip_hand[f] = fh;
  }

  IkObjectives::RelativeTarget rel;
  rel.delta = Vec3::Zero();
  rel.weight = Vec3(100, 100, 100);
  obj.relative_fingertip = rel;

  WeightedPoseTarget fw;
  fw.pose = center_pose_w;
  fw.weight << 100, 100, 100, 0, 0, 0;
  obj.fingertip_world[0] = fw;

  WeightedPoseTarget hw;
  hw.pose = center_pose_w;
  hw.weight << 0, 0, 0, 10, 10, 10;
  obj.hand_world = hw;

  return obj;
}

}  // namespace dlokit
