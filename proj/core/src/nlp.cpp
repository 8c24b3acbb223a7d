#include "dlokit/nlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dlokit {

VecX finite_difference_gradient(const std::function<double(const VecX&)>& f, const VecX& x,
                                double h) {
  VecX g(x.size());
  VecX xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VecX clamped(const VecX& x, const VecX& lo, const VecX& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

double l1(const VecX& v) { return v.size() ? v.cwiseAbs().sum() : 0.0; }
double linf(const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct QpSolution {
  VecX d;
  VecX lambda;
};

// Active-set solve of  min 0.5 d'Bd + g'd  s.t.  A d = rhs,  lo <= d <= hi.
// B must be positive definite (the caller maintains a damped BFGS model).
// Working-set pivots: fix the most violated free bound, release the active
// bound with the worst wrong-sign multiplier; capped for anti-cycling.
QpSolution solve_qp(const MatX& B, const VecX& g, const MatX& A, const VecX& rhs,
                    const VecX& lo, const VecX& hi) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(rhs.size());

  std::vector<int> state(n, 0);  // 0 free, -1 at lower, +1 at upper
  for (int i = 0; i < n; ++i) {
    if (hi[i] - lo[i] < 1e-14) state[i] = -1;  // pinned variable
  }

  VecX d = VecX::Zero(n);
  VecX lambda = VecX::Zero(m);
  const int max_pivots = 3 * n + m + 10;

  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    std::vector<int> free_idx;
    free_idx.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) free_idx.push_back(i);
    }
    const int nf = static_cast<int>(free_idx.size());

    VecX d_act = VecX::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == -1) d_act[i] = lo[i];
      if (state[i] == +1) d_act[i] = hi[i];
    }

    // Reduced KKT system on the free variables + equality multipliers.
    MatX K = MatX::Zero(nf + m, nf + m);
    VecX r(nf + m);
    for (int a = 0; a < nf; ++a) {
      for (int b = 0; b < nf; ++b) K(a, b) = B(free_idx[a], free_idx[b]);
      double bd = 0.0;
      for (int i = 0; i < n; ++i) {
        if (state[i] != 0) bd += B(free_idx[a], i) * d_act[i];
      }
      r[a] = -g[free_idx[a]] - bd;
      for (int j = 0; j < m; ++j) {
        K(a, nf + j) = A(j, free_idx[a]);
        K(nf + j, a) = A(j, free_idx[a]);
      }
    }
    for (int j = 0; j < m; ++j) {
      double ad = 0.0;
      for (int i = 0; i < n; ++i) {
        if (state[i] != 0) ad += A(j, i) * d_act[i];
      }
      r[nf + j] = rhs[j] - ad;
    }

    VecX sol;
    if (nf + m > 0) {
      Eigen::FullPivLU<MatX> lu(K);
      if (!lu.isInvertible()) {
        for (int a = 0; a < nf; ++a) K(a, a) += 1e-10;
        lu.compute(K);
      }
      sol = lu.solve(r);
    } else {
      sol = VecX();
    }

    d = d_act;
    for (int a = 0; a < nf; ++a) d[free_idx[a]] = sol[a];
    for (int j = 0; j < m; ++j) lambda[j] = sol[nf + j];

    // Fix the most violated free bound, if any.
    int worst = -1, worst_side = 0;
    double worst_amt = 1e-11;  // violations below this are noise
    for (int i : free_idx) {
      const double below = lo[i] - d[i];
      const double above = d[i] - hi[i];
      if (below > worst_amt) {
        worst = i;
        worst_side = -1;
        worst_amt = below;
      }
      if (above > worst_amt) {
        worst = i;
        worst_side = +1;
        worst_amt = above;
      }
    }
    if (worst >= 0) {
      state[worst] = worst_side;
      continue;
    }

    // All free variables feasible; check active-bound multiplier signs.
    const VecX resid = B * d + g + (m ? VecX(A.transpose() * lambda) : VecX::Zero(n));
    int release = -1;
    double release_amt = 1e-10;
    for (int i = 0; i < n; ++i) {
      if (state[i] == -1 && hi[i] - lo[i] >= 1e-14 && resid[i] < -release_amt) {
        release = i;
        release_amt = -resid[i];
      }
      if (state[i] == +1 && resid[i] > release_amt) {
        release = i;
        release_amt = resid[i];
      }
    }
    if (release >= 0) {
      state[release] = 0;
      continue;
    }

    return {d, lambda};  // KKT point of the QP
  }

  // Anti-cycling bailout: return the last iterate clamped into the box;
  // the caller's merit line search decides whether it helps.
  return {clamped(d, lo, hi), lambda};
}

struct ConstraintEval {
  VecX c;  // m values
  MatX A;  // m x n gradients
};

// KKT stationarity residual: projected Lagrangian gradient, where bound
// directions pointing back into the box do not count.
double kkt_stationarity(const VecX& x, const VecX& g, const MatX& A, const VecX& lambda,
                        const VecX& lo, const VecX& hi) {
  VecX r = g;
  if (lambda.size()) r += A.transpose() * lambda;
  double stat = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const bool at_lo = x[i] - lo[i] < 1e-12 * (1.0 + std::abs(x[i]));
    const bool at_hi = hi[i] - x[i] < 1e-12 * (1.0 + std::abs(x[i]));
    double v = std::abs(r[i]);
    if (at_lo && r[i] > 0.0) v = 0.0;  // pushing into the lower bound is fine
    if (at_hi && r[i] < 0.0) v = 0.0;
    stat = std::max(stat, v);
  }
  return stat;
}

ConstraintEval eval_constraints(const NlpProblem& p, const VecX& x) {
  const int m = static_cast<int>(p.equality_constraints.size());
  ConstraintEval out;
  out.c.resize(m);
  out.A.resize(m, p.dim);
  for (int j = 0; j < m; ++j) {
    const auto& ec = p.equality_constraints[j];
    out.c[j] = ec.value(x);
    out.A.row(j) = ec.gradient ? VecX(ec.gradient(x)).transpose()
                               : finite_difference_gradient(ec.value, x).transpose();
  }
  return out;
}

}  // namespace

SolveResult solve_sqp(const NlpProblem& p, const SqpOptions& opts) {
  const int n = p.dim;
  if (n <= 0 || !p.cost) throw std::invalid_argument("solve_sqp: problem has no cost/dimension");
  if (p.x0.size() != n) throw std::invalid_argument("solve_sqp: x0 dimension mismatch");

  const VecX lo = p.lower.size() ? p.lower : VecX::Constant(n, -kInf);
  const VecX hi = p.upper.size() ? p.upper : VecX::Constant(n, kInf);
  if (lo.size() != n || hi.size() != n || ((hi - lo).array() < 0).any()) {
    throw std::invalid_argument("solve_sqp: malformed bounds");
  }

  auto grad = [&](const VecX& x) {
    return p.cost_gradient ? p.cost_gradient(x) : finite_difference_gradient(p.cost, x);
  };

  VecX x = clamped(p.x0, lo, hi);
  double f = p.cost(x);
  VecX g = grad(x);
  ConstraintEval ce = eval_constraints(p, x);

  // Hessian model: the supplied one (e.g. Gauss-Newton) while it predicts
  // well, damped BFGS otherwise. A Gauss-Newton matrix omits the residual
  // curvature, so on large-residual problems its steps need deep
  // backtracking; when that persists we freeze the current model matrix
  // and let secant updates supply the missing curvature.
  bool use_model = static_cast<bool>(p.cost_hessian);
  MatX B = use_model ? MatX(p.cost_hessian(x)) : MatX(MatX::Identity(n, n));
  bool b_scaled = use_model;  // keep a handed-over model matrix unscaled
  int slow_steps = 0;
  double rho = 1e-3;

  SolveResult res;
  res.merit_history.push_back(f + rho * l1(ce.c));
  res.reason = TerminationReason::MaxIterations;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    QpSolution qp = solve_qp(B, g, ce.A, -ce.c, lo - x, hi - x);
    VecX d = qp.d;
    if (std::isfinite(opts.step_limit) && linf(d) > opts.step_limit) {
      d *= opts.step_limit / linf(d);
    }

    const double viol = linf(ce.c);
    const double stat = kkt_stationarity(x, g, ce.A, qp.lambda, lo, hi);
    const double g_scale = 1.0 + linf(g);

    if (viol < opts.eq_tol &&
        (linf(d) < 1e-11 * (1.0 + linf(x)) || stat < 1e-9 * g_scale)) {
      res.converged = true;
      res.reason = TerminationReason::Converged;
      break;
    }

    rho = std::max(rho, 2.0 * linf(qp.lambda) + 1e-3);
    const double phi0 = f + rho * l1(ce.c);
    double dphi = g.dot(d) - rho * l1(ce.c);
    dphi = std::min(dphi, -1e-16);

    double alpha = 1.0;
    bool accepted = false;
    VecX xt;
    double ft = 0.0;
    ConstraintEval cet;
    VecX gt_cached;
    bool have_gt = false;
    for (int ls = 0; ls < 60; ++ls) {
      xt = clamped(x + alpha * d, lo, hi);
      ft = p.cost(xt);
      cet = eval_constraints(p, xt);
      const double merit_t = ft + rho * l1(cet.c);
      if (merit_t <= phi0 + 1e-4 * alpha * dphi) {
        accepted = true;
        break;
      }
      // The merit comparison is below floating-point resolution: the cost
      // carries no more information here. Fall back to the gradient and
      // accept steps that reduce the projected stationarity — this is what
      // lets the quasi-Newton model keep polishing at the numeric floor of
      // the cost instead of stalling several digits short of the optimum.
      if (std::abs(merit_t - phi0) <= 4e-16 * (1.0 + std::abs(phi0))) {
        gt_cached = grad(xt);
        have_gt = true;
        const double stat_t = kkt_stationarity(xt, gt_cached, cet.A, qp.lambda, lo, hi);
        if (stat_t < stat * (1.0 - 1e-9)) {
          accepted = true;
          break;
        }
      }
      have_gt = false;
      alpha *= 0.5;
    }
    res.iterations = iter + 1;
    if (!accepted) {
      // The merit could not be reduced. At the floating-point noise floor
      // of a stationary point that is convergence, not failure.
      if (viol < opts.eq_tol && stat < 1e-6 * g_scale) {
        res.converged = true;
        res.reason = TerminationReason::Converged;
      } else {
        res.reason = TerminationReason::LineSearchStall;
      }
      break;
    }

    const VecX gt = have_gt ? gt_cached : grad(xt);

    if (use_model) {
      slow_steps = alpha <= 0.0625 ? slow_steps + 1 : 0;
      if (slow_steps >= 3) use_model = false;  // model misfits; switch to secant updates
    }

    // Damped BFGS on the Lagrangian gradient difference (Powell's rule
    // keeps B positive definite even with negative curvature samples).
    const VecX s = xt - x;
    if (use_model) {
      B = p.cost_hessian(xt);
    } else if (s.norm() > 1e-14) {
      const VecX atl_new = ce.A.rows() ? VecX(cet.A.transpose() * qp.lambda) : VecX::Zero(n);
      const VecX atl_old = ce.A.rows() ? VecX(ce.A.transpose() * qp.lambda) : VecX::Zero(n);
      VecX y = (gt + atl_new) - (g + atl_old);
      if (!b_scaled) {
        // Size the initial model to the first sampled curvature; identity
        // is off by the cost's scale and wastes line-search halvings.
        const double sy0 = s.dot(y);
        if (sy0 > 1e-16) B = (y.squaredNorm() / sy0) * MatX::Identity(n, n);
        b_scaled = true;
      }
      const VecX Bs = B * s;
      const double sBs = s.dot(Bs);
      double sy = s.dot(y);
      if (sBs > 1e-16) {
        if (sy < 0.2 * sBs) {
          const double th = 0.8 * sBs / (sBs - sy);
          y = th * y + (1.0 - th) * Bs;
          sy = s.dot(y);
        }
        if (sy > 1e-16) {
          B += (y * y.transpose()) / sy - (Bs * Bs.transpose()) / sBs;
        }
      }
    }

    const double df = std::abs(ft - f);
    x = xt;
    f = ft;
    g = gt;
    ce = cet;
    res.merit_history.push_back(f + rho * l1(ce.c));

    if (df < opts.cost_tol && linf(ce.c) < opts.eq_tol) {
      res.converged = true;
      res.reason = TerminationReason::Converged;
      break;
    }
  }

  res.x_star = clamped(x, lo, hi);
  res.cost_star = f;
  res.constraint_violation = linf(ce.c);
  if (res.constraint_violation >= opts.eq_tol) res.converged = false;
  return res;
}

SolveResult solve_dls(const std::function<std::vector<DlsTask>(const VecX&)>& tasks_at,
                      const VecX& q0, const VecX& lower, const VecX& upper,
                      const DlsOptions& opts) {
  const int n = static_cast<int>(q0.size());
  const VecX lo = lower.size() ? lower : VecX::Constant(n, -kInf);
  const VecX hi = upper.size() ? upper : VecX::Constant(n, kInf);

  VecX x = clamped(q0, lo, hi);

  auto weighted_cost = [](const std::vector<DlsTask>& tasks) {
    double c = 0.0;
    for (const auto& t : tasks) {
      for (int r = 0; r < t.residual.size(); ++r) {
        c += 0.5 * t.weight_diag[r] * t.residual[r] * t.residual[r];
      }
    }
    return c;
  };

  SolveResult res;
  res.reason = TerminationReason::MaxIterations;
  std::vector<DlsTask> tasks = tasks_at(x);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    int rows = 0;
    for (const auto& t : tasks) {
      if (t.jacobian.rows() != t.residual.size() || t.weight_diag.size() != t.residual.size() ||
          t.jacobian.cols() != n) {
        throw std::invalid_argument("solve_dls: inconsistent task dimensions");
      }
      for (int r = 0; r < t.residual.size(); ++r) {
        if (t.weight_diag[r] > 0.0) ++rows;
      }
    }
    if (rows == 0) break;

    MatX Jw(rows, n);
    VecX ew(rows);
    int k = 0;
    for (const auto& t : tasks) {
      for (int r = 0; r < t.residual.size(); ++r) {
        if (t.weight_diag[r] <= 0.0) continue;
        const double s = std::sqrt(t.weight_diag[r]);
        Jw.row(k) = s * t.jacobian.row(r);
        ew[k] = s * t.residual[r];
        ++k;
      }
    }

    // Damped least squares on the sqrt(W)-scaled stack. The n x n normal
    // form (J'J + lambda^2 I)^-1 J'e equals J'(JJ' + lambda^2 I)^-1 e for
    // lambda > 0 and keeps the factorization at joint-space size.
    const double l2 = opts.damping * opts.damping;
    const MatX H = Jw.transpose() * Jw + l2 * MatX::Identity(n, n);
    const VecX dq = Eigen::LDLT<MatX>(H).solve(Jw.transpose() * ew);

    const VecX xn = clamped(x + opts.step_size * dq, lo, hi);
    const double moved = linf(xn - x);
    x = xn;
    res.iterations = iter + 1;
    tasks = tasks_at(x);
    if (moved < opts.step_tol) {
      res.converged = true;
      res.reason = TerminationReason::Converged;
      break;
    }
  }

  res.x_star = x;
  res.cost_star = weighted_cost(tasks);
  res.constraint_violation = 0.0;
  return res;
}

}  // namespace dlokit
