#pragma once

#include "dlokit/geom.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dlokit {

// Equality constraint c(x) = 0 with optional analytic gradient; a central
// finite-difference fallback is used when `gradient` is empty.
struct EqualityConstraint {
  std::function<double(const VecX&)> value;
  std::function<VecX(const VecX&)> gradient;
};

// Small dense nonlinear program:
//   min f(x)  s.t.  c_j(x) = 0,  lower <= x <= upper.
// All callables must be deterministic for a fixed x.
struct NlpProblem {
  int dim = 0;
  std::function<double(const VecX&)> cost;
  std::function<VecX(const VecX&)> cost_gradient;  // optional
  // Optional model Hessian for the QP subproblem (must be positive
  // definite; e.g. a Gauss-Newton matrix J'WJ + ridge for least-squares
  // costs). Without it the solver maintains a damped-BFGS approximation,
  // whose cost-based line search cannot resolve minima past ~sqrt(eps) —
  // least-squares callers that need full-depth convergence supply this.
  std::function<MatX(const VecX&)> cost_hessian;
  std::vector<EqualityConstraint> equality_constraints;
  VecX lower;  // empty = unbounded (or use +-inf entries)
  VecX upper;
  VecX x0;
};

struct SqpOptions {
  int max_iter = 200;
  double cost_tol = 1e-8;  // absolute cost-change stop
  double eq_tol = 1e-8;    // max |c_j| for a point to count as feasible
  double step_limit = std::numeric_limits<double>::infinity();  // inf-norm cap per step
};

enum class TerminationReason { Converged, MaxIterations, LineSearchStall };

struct SolveResult {
  VecX x_star;
  double cost_star = 0.0;
  double constraint_violation = 0.0;  // max abs equality residual
  int iterations = 0;
  bool converged = false;
  TerminationReason reason = TerminationReason::MaxIterations;
  std::vector<double> merit_history;  // merit value after each accepted step
};

// SQP with a damped-BFGS Hessian model, an active-set QP over the box
// bounds + equalities, and a backtracking line search on an l1 merit
// function. x0 is clamped into the bounds before solving; the returned
// x_star is always within bounds.
SolveResult solve_sqp(const NlpProblem& p, const SqpOptions& opts = {});

// One task-space residual block for the damped-least-squares baseline:
// rows of `jacobian` map joint velocities to the task velocity and
// `residual` is (desired - current), weighted per row by `weight_diag`.
struct DlsTask {
  VecX residual;
  MatX jacobian;
  VecX weight_diag;
};

struct DlsOptions {
  double damping = 0.05;
  double step_size = 1.0;
  int max_iter = 200;
  double step_tol = 1e-12;  // stop when the clamped update is this small
};

// Weighted damped least squares: dq = J^T (J J^T + lambda^2 I)^-1 e on the
// sqrt(W)-scaled stacked tasks, q clamped to bounds after every step. The
// task list is re-evaluated at each iterate. Never fails; may stall at
// bounds (that is the point of the baseline). cost_star reports the final
// 0.5 * sum(w * e^2), same convention as the SQP cost it is compared to.
SolveResult solve_dls(const std::function<std::vector<DlsTask>(const VecX&)>& tasks_at,
                      const VecX& q0, const VecX& lower, const VecX& upper,
                      const DlsOptions& opts = {});

// Central-difference gradient used as the fallback everywhere; exposed so
// tests can verify analytic gradients against it.
VecX finite_difference_gradient(const std::function<double(const VecX&)>& f, const VecX& x,
                                double h = 1e-6);

}  // namespace dlokit
