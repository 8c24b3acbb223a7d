#include "dlokit/pose_estimation.hpp"

#include "dlokit/hash.hpp"
#include "json_io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>

namespace dlokit {

double point_line_distance(const Vec3& o, const Vec3& xi, const Vec3& psi) {
  const double s = psi.norm();
  if (s <= 0.0) throw std::invalid_argument("point_line_distance: zero direction");
  return (o - xi).cross(psi).norm() / s;
}

LineFitOptions::LineFitOptions() {
  sqp.max_iter = 150;
  sqp.cost_tol = 0.0;  // run to stationarity; the KKT test is the stop
  sqp.eq_tol = 1e-10;
}

namespace {

// Theta layout: [xi(3), psi(3), r(1), delta_p(3)].
struct FitData {
  const Mat3X& idx;
  const Mat3X& th;
  Vec3 w_dp;

  // Cost, and optionally its gradient and Gauss-Newton matrix, in one pass.
  // The distance model is 0-homogeneous in psi, so the GN matrix is blind
  // along the psi radius — the unit-norm constraint owns that direction.
  double eval(const VecX& t, VecX* grad, MatX* gn) const {
    const Vec3 xi = t.segment<3>(0);
    const Vec3 psi = t.segment<3>(3);
    const double r = t[6];
    const Vec3 dp = t.segment<3>(7);
    const double s2 = psi.squaredNorm();

    double f = 0.5 * dp.cwiseProduct(w_dp).dot(dp);
    if (grad) {
      grad->setZero(10);
      grad->segment<3>(7) = w_dp.cwiseProduct(dp);
    }
    if (gn) {
      gn->setZero(10, 10);
      gn->diagonal().segment<3>(7) = w_dp;
    }

    VecX J(10);
    for (int pass = 0; pass < 2; ++pass) {
      const Mat3X& pts = pass == 0 ? idx : th;
      const bool thumb = pass == 1;
      for (long c = 0; c < pts.cols(); ++c) {
        const Vec3 v = (thumb ? Vec3(pts.col(c) + dp) : Vec3(pts.col(c))) - xi;
        const double vpsi = v.dot(psi);
        const Vec3 p = v - (vpsi / s2) * psi;
        const double d = p.norm();
        const double res = d - r;
        f += 0.5 * res * res;
        if (!grad && !gn) continue;
        J.setZero();
        if (d > 1e-12) {  // on-axis points carry no direction information
          const Vec3 pd = p / d;
          J.segment<3>(0) = -pd;
          J.segment<3>(3) = -(vpsi / s2) * pd;
          if (thumb) J.segment<3>(7) = pd;
        }
        J[6] = -1.0;
        if (grad) *grad += res * J;
        if (gn) gn->selfadjointView<Eigen::Lower>().rankUpdate(J, 1.0);
      }
    }
    if (gn) *gn = gn->selfadjointView<Eigen::Lower>();
    return f;
  }

  double rms(const VecX& t) const {
    const Vec3 xi = t.segment<3>(0);
    const Vec3 u = t.segment<3>(3).normalized();
    const double r = t[6];
    const Vec3 dp = t.segment<3>(7);
    double ss = 0.0;
    for (long c = 0; c < idx.cols(); ++c) {
      const double d = (Vec3(idx.col(c)) - xi).cross(u).norm();
      ss += (d - r) * (d - r);
    }
    for (long c = 0; c < th.cols(); ++c) {
      const double d = (Vec3(th.col(c) + dp) - xi).cross(u).norm();
      ss += (d - r) * (d - r);
    }
    const long n = idx.cols() + th.cols();
    return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
  }
};

}  // namespace

PcaLine fit_pca3d(const FusedContacts& c) {
  const long n = c.total();
  if (n < 3) throw std::invalid_argument("fit_pca3d: need at least 3 points");
  Mat3X all(3, n);
  all << c.index_points, c.thumb_points;
  const Vec3 centroid = all.rowwise().mean();
  const Mat3X centered = all.colwise() - centroid;
  const Eigen::Matrix3d cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (ev[2] - ev[1] <= 1e-9 * std::max(1.0, ev[2])) {
    throw DegenerateSpread("fit_pca3d: top two eigenvalues coincide");
  }
  Vec3 dir = eig.eigenvectors().col(2);
  if (dir.x() < 0.0) dir = -dir;
  return PcaLine{centroid, dir};
}

Eigen::Vector4d pose4d_from_line(const Vec3& xi, const Vec3& psi) {
  return Eigen::Vector4d(xi.y(), xi.z(), std::atan2(psi.y(), psi.x()),
                         std::atan2(psi.z(), std::hypot(psi.x(), psi.y())));
}

DloLineEstimate fit_dlo_line(const FusedContacts& c, const LineFitOptions& opts,
                             const DloLineEstimate* init) {
  const long n = c.total();
  if (n < opts.n_min) {
    throw InsufficientPoints("fit_dlo_line: " + std::to_string(n) + " points, need " +
                             std::to_string(opts.n_min));
  }
  if (!c.index_points.allFinite() || !c.thumb_points.allFinite()) {
    throw std::invalid_argument("fit_dlo_line: non-finite contact point");
  }

  const FitData data{c.index_points, c.thumb_points, opts.delta_p_weight};
  const double n_th = static_cast<double>(c.thumb_points.cols());
  const double sum_x = c.index_points.cols() ? c.index_points.row(0).sum() : 0.0;
  const double sum_x_all = sum_x + (c.thumb_points.cols() ? c.thumb_points.row(0).sum() : 0.0);

  VecX x0(10);
  if (init) {
    x0.segment<3>(0) = init->xi;
    x0.segment<3>(3) = init->psi.normalized();
    x0[6] = std::clamp(init->radius, opts.radius_min, opts.radius_max);
    x0.segment<3>(7) = init->delta_p;
  } else {
    const PcaLine pca = fit_pca3d(c);
    x0.segment<3>(0) = pca.point;
    x0.segment<3>(3) = pca.dir;
    x0[6] = std::clamp(opts.nominal_radius, opts.radius_min, opts.radius_max);
    x0.segment<3>(7).setZero();
  }
  // Start on the xi_x gauge constraint for the current delta_p.
  x0[0] = (sum_x_all + n_th * x0[7]) / static_cast<double>(n);

  NlpProblem p;
  p.dim = 10;
  p.x0 = x0;
  p.cost = [&data](const VecX& t) { return data.eval(t, nullptr, nullptr); };
  p.cost_gradient = [&data](const VecX& t) {
    VecX g(10);
    data.eval(t, &g, nullptr);
    return g;
  };
  p.cost_hessian = [&data](const VecX& t) {
    MatX h(10, 10);
    data.eval(t, nullptr, &h);
    h += 1e-10 * MatX::Identity(10, 10);
    return h;
  };
  p.equality_constraints.push_back(
      {[](const VecX& t) { return t.segment<3>(3).squaredNorm() - 1.0; },
       [](const VecX& t) {
         VecX g = VecX::Zero(10);
         g.segment<3>(3) = 2.0 * t.segment<3>(3);
         return g;
       }});
  const double nd = static_cast<double>(n);
  p.equality_constraints.push_back(
      {[sum_x_all, n_th, nd](const VecX& t) { return t[0] - (sum_x_all + n_th * t[7]) / nd; },
       [n_th, nd](const VecX&) {
         VecX g = VecX::Zero(10);
         g[0] = 1.0;
         g[7] = -n_th / nd;
         return g;
       }});
  p.lower = VecX::Constant(10, -std::numeric_limits<double>::infinity());
  p.upper = VecX::Constant(10, std::numeric_limits<double>::infinity());
  p.lower[6] = opts.radius_min;
  p.upper[6] = opts.radius_max;

  const SolveResult res = solve_sqp(p, opts.sqp);

  DloLineEstimate e;
  e.xi = res.x_star.segment<3>(0);
  e.psi = res.x_star.segment<3>(3).normalized();
  if (e.psi.x() < 0.0) e.psi = -e.psi;  // the line is undirected; fix the gauge
  e.radius = res.x_star[6];
  e.delta_p = res.x_star.segment<3>(7);
  e.residual = data.rms(res.x_star);
  e.iterations = res.iterations;
  e.converged = res.converged;
  e.pose4d = pose4d_from_line(e.xi, e.psi);
  e.n_index = c.index_points.cols();
  e.n_thumb = c.thumb_points.cols();
  return e;
}

DloLineEstimate estimate_pose(const TactileFrame& index_frame, const TactileFrame& thumb_frame,
                              const RobotModel& model, const VecX& q14,
                              const DloLineEstimate* prev, const EstimateOptions& opts) {
  if (index_frame.sensor_id != Finger::Index || thumb_frame.sensor_id != Finger::Thumb) {
    throw std::invalid_argument("estimate_pose: frames must be (index, thumb)");
  }
  FusedContacts c;
  const ContactMask m_idx = segment_contact(index_frame, opts.segment);
  const ContactMask m_th = segment_contact(thumb_frame, opts.segment);
  if (m_idx.contact_pixels > 0) c.index_points = mask_to_points(m_idx, index_frame, model, q14);
  if (m_th.contact_pixels > 0) c.thumb_points = mask_to_points(m_th, thumb_frame, model, q14);

  const long n = c.total();
  if (n < opts.fit.n_min) {
    throw SensingLost("estimate_pose: " + std::to_string(n) + " fused contact points, need " +
                      std::to_string(opts.fit.n_min));
  }
  DloLineEstimate e = fit_dlo_line(c, opts.fit, prev);
  e.single_sensor = c.index_points.cols() == 0 || c.thumb_points.cols() == 0;
  return e;
}

uint64_t contacts_hash(const FusedContacts& c) {
  const int64_t counts[2] = {c.index_points.cols(), c.thumb_points.cols()};
  uint64_t h = fnv1a64(counts, sizeof counts);
  if (c.index_points.size()) {
    h = fnv1a64(c.index_points.data(), sizeof(double) * c.index_points.size(), h);
  }
  if (c.thumb_points.size()) {
    h = fnv1a64(c.thumb_points.data(), sizeof(double) * c.thumb_points.size(), h);
  }
  return h;
}

void write_estimate_debug(const DloLineEstimate& e, uint64_t inputs_hash,
                          const std::string& path) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(inputs_hash));
  detail::json j;
  j["inputs_hash"] = hex;
  j["theta"] = {{"xi", {e.xi.x(), e.xi.y(), e.xi.z()}},
                {"psi", {e.psi.x(), e.psi.y(), e.psi.z()}},
                {"radius", e.radius},
                {"delta_p", {e.delta_p.x(), e.delta_p.y(), e.delta_p.z()}}};
  j["residual"] = e.residual;
  j["iterations"] = e.iterations;
  j["converged"] = e.converged;
  j["single_sensor"] = e.single_sensor;
  j["pose4d"] = {e.pose4d[0], e.pose4d[1], e.pose4d[2], e.pose4d[3]};
  detail::write_json_file(j, path);
}

}  // namespace dlokit
