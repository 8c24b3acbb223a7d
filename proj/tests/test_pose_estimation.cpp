#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dlokit/pose_estimation.hpp>
#include <dlokit/rng.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>

using namespace dlokit;

namespace {

constexpr double kDeg = 180.0 / M_PI;

double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c)) * kDeg;
}

// Points on the cylinder arc whose outward normal faces `side`, sampled
// along the axis over `length` and across the arc over +-half_angle.
Mat3X band(Rng& rng, const Vec3& xi, const Vec3& axis, double radius, const Vec3& side,
           double half_angle_deg, double length, int n, double noise = 0.0,
           double axis_offset = 0.0) {
  const Vec3 u = axis.normalized();
  const Vec3 nrm = (side - side.dot(u) * u).normalized();
  const Vec3 b = u.cross(nrm);
  Mat3X pts(3, n);
  for (int k = 0; k < n; ++k) {
    const double t = rng.uniform(-length / 2, length / 2) + axis_offset;
    const double a = rng.uniform(-half_angle_deg, half_angle_deg) / kDeg;
    Vec3 p = xi + t * u + radius * (std::cos(a) * nrm + std::sin(a) * b);
    for (int i = 0; i < 3; ++i) p[i] += rng.normal(0.0, noise);
    pts.col(k) = p;
  }
  return pts;
}

FusedContacts two_bands(Rng& rng, const Vec3& xi, const Vec3& axis, double radius,
                        double half_angle_deg, double noise) {
  FusedContacts c;
  c.index_points = band(rng, xi, axis, radius, -Vec3::UnitZ(), half_angle_deg, 14, 150, noise);
  c.thumb_points = band(rng, xi, axis, radius, Vec3::UnitZ(), half_angle_deg, 14, 150, noise);
  return c;
}

// Same cost the fit minimizes, reimplemented from the definition.
double fit_cost(const FusedContacts& c, const Vec3& xi, const Vec3& psi, double r,
                const Vec3& dp, const Vec3& w) {
  double f = 0.5 * dp.cwiseProduct(w).dot(dp);
  for (long k = 0; k < c.index_points.cols(); ++k) {
    const double d = point_line_distance(c.index_points.col(k), xi, psi);
    f += 0.5 * (d - r) * (d - r);
  }
  for (long k = 0; k < c.thumb_points.cols(); ++k) {
    const double d = point_line_distance(Vec3(c.thumb_points.col(k) + dp), xi, psi);
    f += 0.5 * (d - r) * (d - r);
  }
  return f;
}

double corrected_mean_x(const FusedContacts& c, const Vec3& dp) {
  const double sx = c.index_points.row(0).sum() + c.thumb_points.row(0).sum() +
                    dp.x() * static_cast<double>(c.thumb_points.cols());
  return sx / static_cast<double>(c.total());
}

const Vec3 kCenter(0.0, 11.0, 0.3);

}  // namespace

TEST_CASE("point_line_distance matches the projection formula") {
  CHECK(point_line_distance(Vec3(3, 0, 0), Vec3::Zero(), Vec3::UnitX()) == 0.0);
  // non-unit psi exercises the normalization
  CHECK(point_line_distance(Vec3(0, 1, 0), Vec3::Zero(), Vec3(2, 0, 0)) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(point_line_distance(Vec3(0, 1, 0), Vec3::Zero(), Vec3::Zero()),
                  std::invalid_argument);

  Rng rng(41);
  for (int k = 0; k < 200; ++k) {
    Vec3 o, xi, psi;
    for (int i = 0; i < 3; ++i) {
      o[i] = rng.uniform(-10, 10);
      xi[i] = rng.uniform(-10, 10);
      psi[i] = rng.normal();
    }
    if (psi.norm() < 1e-3) continue;
    const Vec3 v = o - xi;
    const Vec3 perp = v - v.dot(psi.normalized()) * psi.normalized();
    CHECK(std::abs(point_line_distance(o, xi, psi) - perp.norm()) < 1e-12);
  }
}

TEST_CASE("fit: noiseless cylinder is recovered to machine precision") {
  Rng rng(1001);
  const Vec3 axis = Vec3(1, 0, 0);
  const FusedContacts c = two_bands(rng, kCenter, axis, 2.0, 40, 0.0);
  const DloLineEstimate e = fit_dlo_line(c);

  CHECK(e.converged);
  CHECK(angle_deg(e.psi, axis) < 0.5);
  CHECK(std::abs(e.radius - 2.0) < 0.05);
  CHECK(e.residual < 1e-6);
  CHECK(e.radius > 0.0);
  // both equality constraints hold on the reported estimate
  CHECK(std::abs(e.psi.squaredNorm() - 1.0) <= 1e-8);
  CHECK(std::abs(e.xi.x() - corrected_mean_x(c, e.delta_p)) <= 1e-8);
}

TEST_CASE("fit: rigid thumb offset is recovered as -delta_p") {
  // The offset truth is perpendicular to the axis (a component along the
  // line slides points along it and is unobservable), and the bands use
  // gripped-contact arcs (depth ~ radius -> half-angle ~ 70 deg) so each
  // band's own curvature pins the radius instead of absorbing the shift.
  Rng rng(1002);
  const Vec3 axis = Vec3(1.0, 0.35, -0.2).normalized();
  const Vec3 d_raw(0.3, 0.0, 0.2);
  const Vec3 d = d_raw - d_raw.dot(axis) * axis;

  FusedContacts c;
  c.index_points = band(rng, kCenter, axis, 2.0, -Vec3::UnitZ(), 70, 14, 150);
  c.thumb_points = band(rng, kCenter, axis, 2.0, Vec3::UnitZ(), 70, 14, 150);
  c.thumb_points.colwise() += d;

  const DloLineEstimate e = fit_dlo_line(c);
  CHECK(e.converged);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(e.delta_p[i] + d[i]) < 0.15);
  CHECK(std::abs(e.radius - 2.0) < 0.1);
}

TEST_CASE("fit: rotating the cloud rotates psi and keeps the residual") {
  Rng rng(1003);
  const FusedContacts c = two_bands(rng, kCenter, Vec3(1, 0, 0), 2.0, 40, 0.05);
  const DloLineEstimate e0 = fit_dlo_line(c);

  const double th = 30.0 / kDeg;
  Eigen::Matrix3d rz;
  rz << std::cos(th), -std::sin(th), 0, std::sin(th), std::cos(th), 0, 0, 0, 1;
  FusedContacts cr;
  cr.index_points = rz * c.index_points;
  cr.thumb_points = rz * c.thumb_points;
  const DloLineEstimate e1 = fit_dlo_line(cr);

  CHECK(std::abs(e0.residual - e1.residual) < 1e-6);
  CHECK(angle_deg(e1.psi, rz * e0.psi) < 0.05);
}

TEST_CASE("fit: converged point is a constrained local minimum") {
  Rng rng(1004);
  const FusedContacts c = two_bands(rng, kCenter, Vec3(1, 0.2, 0.1).normalized(), 2.0, 60, 0.05);
  const LineFitOptions opts;
  const DloLineEstimate e = fit_dlo_line(c, opts);
  REQUIRE(e.converged);
  const double f_star = fit_cost(c, e.xi, e.psi, e.radius, e.delta_p, opts.delta_p_weight);

  for (int trial = 0; trial < 20; ++trial) {
    VecX delta(7);
    for (int i = 0; i < 7; ++i) delta[i] = rng.normal();
    delta *= 1e-3 / delta.norm();
    Vec3 xi = e.xi + delta.segment<3>(0);
    const Vec3 psi = (e.psi + delta.segment<3>(3)).normalized();  // back onto ||psi|| = 1
    const double r = e.radius + delta[6];
    xi.x() = corrected_mean_x(c, e.delta_p);  // back onto the gauge
    const double f = fit_cost(c, xi, psi, r, e.delta_p, opts.delta_p_weight);
    CHECK(f >= f_star - 1e-10);
  }
}

TEST_CASE("fit: direction error grows smoothly with point noise") {
  const double sigmas[4] = {0.0, 0.05, 0.1, 0.2};
  double mean_err[4] = {0, 0, 0, 0};
  for (int s = 0; s < 4; ++s) {
    for (int seed = 0; seed < 8; ++seed) {
      Rng rng(2000 + seed);
      const double a = rng.uniform(0.0, 30.0) / kDeg;
      const double ph = rng.uniform(0.0, 2 * M_PI);
      const Vec3 axis(std::cos(a), std::sin(a) * std::cos(ph), std::sin(a) * std::sin(ph));
      const FusedContacts c = two_bands(rng, kCenter, axis, 2.0, 40, sigmas[s]);
      mean_err[s] += angle_deg(fit_dlo_line(c).psi, axis) / 8.0;
    }
  }
  for (int s = 0; s + 1 < 4; ++s) CHECK(mean_err[s] <= mean_err[s + 1] + 0.02);
  CHECK(mean_err[3] < 2.0);  // degraded, not cliffed
}

TEST_CASE("fit: warm start reuses the previous solution") {
  Rng rng(1005);
  const FusedContacts c = two_bands(rng, kCenter, Vec3(1, 0.1, 0).normalized(), 2.0, 50, 0.05);
  const DloLineEstimate cold = fit_dlo_line(c);
  const DloLineEstimate warm = fit_dlo_line(c, {}, &cold);
  CHECK(warm.converged);
  CHECK(warm.iterations <= cold.iterations);
  CHECK((warm.xi - cold.xi).norm() < 1e-6);
  CHECK(angle_deg(warm.psi, cold.psi) < 1e-4);

  // determinism: identical inputs give identical estimates
  const DloLineEstimate again = fit_dlo_line(c);
  CHECK((again.xi - cold.xi).norm() == 0.0);
  CHECK(again.radius == cold.radius);
}

TEST_CASE("fit: too few points") {
  Rng rng(1006);
  FusedContacts c;
  c.index_points = band(rng, kCenter, Vec3::UnitX(), 2.0, -Vec3::UnitZ(), 40, 14, 20);
  CHECK_THROWS_AS(fit_dlo_line(c), InsufficientPoints);
}

TEST_CASE("pca baseline: exact on collinear points, degenerate on a cluster") {
  FusedContacts c;
  c.index_points.resize(3, 40);
  const Vec3 dir = Vec3(2, 1, -1).normalized();
  for (int k = 0; k < 40; ++k) c.index_points.col(k) = Vec3(1, 2, 3) + 0.3 * k * dir;
  const PcaLine line = fit_pca3d(c);
  CHECK(angle_deg(line.dir, dir) < 1e-8);

  FusedContacts cluster;
  cluster.index_points = Mat3X::Zero(3, 50);
  cluster.index_points.colwise() += Vec3(0.5, -1.0, 2.0);
  CHECK_THROWS_AS(fit_pca3d(cluster), DegenerateSpread);

  FusedContacts tiny;
  tiny.index_points = Mat3X::Zero(3, 2);
  CHECK_THROWS_AS(fit_pca3d(tiny), std::invalid_argument);
}

TEST_CASE("pca baseline loses to the cylinder fit on asymmetric two-band data") {
  Rng rng(99);
  const Vec3 axis = Vec3::UnitX();
  FusedContacts c;
  c.index_points = band(rng, kCenter, axis, 2.0, -Vec3::UnitZ(), 40, 14, 150, 0.05, 2.0);
  c.thumb_points = band(rng, kCenter, axis, 2.0, Vec3::UnitZ(), 25, 10, 120, 0.05);
  c.thumb_points.colwise() += Vec3(0.0, 0.2, 0.3);

  const double e_fit = angle_deg(fit_dlo_line(c).psi, axis);
  const double e_pca = angle_deg(fit_pca3d(c).dir, axis);
  CHECK(e_pca > e_fit);
  CHECK(e_fit < 2.0);
  CHECK(e_pca > 2.0);  // the band gap dominates the spread and tilts it
}

TEST_CASE("fixture campaign: direction, radius and offset within bounds") {
  // Smaller in-test edition of the acceptance sweep (20 draws, sigma 0.05).
  std::vector<double> dir_errs;
  int pca_worse = 0;
  for (int k = 0; k < 20; ++k) {
    Rng rng(5000 + k);
    const double a = rng.uniform(0.0, 40.0) / kDeg;
    const double ph = rng.uniform(0.0, 2 * M_PI);
    const Vec3 axis(std::cos(a), std::sin(a) * std::cos(ph), std::sin(a) * std::sin(ph));
    const double radius = rng.uniform(1.0, 4.0);
    const Vec3 xi(0.0, rng.uniform(9.0, 13.0), rng.uniform(-0.5, 0.5));
    Vec3 d;
    for (int i = 0; i < 3; ++i) d[i] = rng.normal();
    d = (d - d.dot(axis) * axis).normalized() * rng.uniform(0.0, 0.5);
    // squeeze split: both pads indent, depths sum to the diameter
    const double dep_i = radius * rng.uniform(0.6, 1.4);
    const double ha_i = std::acos((radius - dep_i) / radius) * kDeg;
    const double ha_t = std::acos((dep_i - radius) / radius) * kDeg;

    FusedContacts c;
    c.index_points =
        band(rng, xi, axis, radius, -Vec3::UnitZ(), ha_i, rng.uniform(10, 14), 160, 0.05);
    c.thumb_points = band(rng, xi, axis, radius, Vec3::UnitZ(), ha_t, rng.uniform(8, 12), 140,
                          0.05, rng.uniform(-1.5, 1.5));
    c.thumb_points.colwise() += d;

    const DloLineEstimate e = fit_dlo_line(c);
    CHECK(e.converged);
    dir_errs.push_back(angle_deg(e.psi, axis));
    CHECK(std::abs(e.radius - radius) / radius < 0.10);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(e.delta_p[i] + d[i]) < 0.2);
    if (angle_deg(fit_pca3d(c).dir, axis) > dir_errs.back()) ++pca_worse;
  }
  std::sort(dir_errs.begin(), dir_errs.end());
  CHECK(dir_errs[18] < 2.0);  // 95th percentile of 20
  CHECK(pca_worse >= 18);
}

TEST_CASE("estimate_pose: rendered sensor pair recovers the placed cylinder") {
  const RobotModel model = default_robot_model();
  const VecX q = assemble_q(model, VecX::Zero(6), model.reference_hand_config);
  const double radius = 2.0, z0 = 0.4;

  // One world line in the index-fingertip frame; the render indentations
  // keep the two sensor views consistent with a single squeezed cylinder
  // (depths sum to the diameter).
  ImageLine world;
  world.point = Vec3(0.0, 11.0, z0);
  world.dir = Vec3(1.0, 0.1, 0.05).normalized();

  auto render_view = [&](Finger sensor, double indent, Rng& rng) {
    RenderOptions opts;
    opts.sensor_id = sensor;
    const ImageLine in_sensor = line_in_sensor_frame(world, sensor, opts.extrinsic, model, q);
    return render_tactile(in_sensor, radius, indent, 0.05, rng, opts);
  };
  Rng rng_i(42), rng_t(43);
  const TactileFrame f_idx = render_view(Finger::Index, radius - z0, rng_i);
  const TactileFrame f_th = render_view(Finger::Thumb, radius + z0, rng_t);

  const DloLineEstimate e = estimate_pose(f_idx, f_th, model, q);
  CHECK(e.converged);
  CHECK_FALSE(e.single_sensor);

  // position error at the estimate's own x-slice
  const double t = (e.xi.x() - world.point.x()) / world.dir.x();
  const Vec3 on_line = world.point + t * world.dir;
  CHECK(std::hypot(e.xi.y() - on_line.y(), e.xi.z() - on_line.z()) < 0.5);
  CHECK(angle_deg(e.psi, world.dir) < 3.0);
  CHECK(std::abs(e.radius - radius) < 0.2);

  // pose4d mirrors (xi, psi)
  CHECK(e.pose4d[0] == e.xi.y());
  CHECK(e.pose4d[1] == e.xi.z());
  CHECK(e.pose4d[2] == doctest::Approx(std::atan2(e.psi.y(), e.psi.x())));
}

TEST_CASE("estimate_pose: one silent sensor still yields a flagged estimate") {
  const RobotModel model = default_robot_model();
  const VecX q = assemble_q(model, VecX::Zero(6), model.reference_hand_config);

  ImageLine world;
  world.point = Vec3(0.0, 11.0, 0.0);
  world.dir = Vec3::UnitX();

  Rng rng_i(44), rng_t(45);
  RenderOptions oi;
  oi.sensor_id = Finger::Index;
  const ImageLine li = line_in_sensor_frame(world, Finger::Index, oi.extrinsic, model, q);
  const TactileFrame f_idx = render_tactile(li, 2.0, 0.5, 0.02, rng_i, oi);

  RenderOptions ot;
  ot.sensor_id = Finger::Thumb;
  const ImageLine lt = line_in_sensor_frame(world, Finger::Thumb, ot.extrinsic, model, q);
  const TactileFrame f_th = render_tactile(lt, 2.0, 0.0, 0.02, rng_t, ot);  // no contact

  const DloLineEstimate e = estimate_pose(f_idx, f_th, model, q);
  CHECK(e.single_sensor);
  CHECK(e.converged);
  CHECK(angle_deg(e.psi, world.dir) < 3.0);

  // both sensors silent -> the lost signal
  const TactileFrame f_idx0 = render_tactile(li, 2.0, 0.0, 0.02, rng_i, oi);
  CHECK_THROWS_AS(estimate_pose(f_idx0, f_th, model, q), SensingLost);

  // frames swapped -> caller error
  CHECK_THROWS_AS(estimate_pose(f_th, f_idx, model, q), std::invalid_argument);
}

TEST_CASE("pose4d convention") {
  const Eigen::Vector4d a = pose4d_from_line(Vec3(1, 2, 3), Vec3(1, 1, 0).normalized());
  CHECK(a[0] == 2.0);
  CHECK(a[1] == 3.0);
  CHECK(a[2] == doctest::Approx(M_PI / 4).epsilon(1e-12));
  CHECK(a[3] == doctest::Approx(0.0).epsilon(1e-12));
  const Eigen::Vector4d b = pose4d_from_line(Vec3::Zero(), Vec3(1, 0, 1).normalized());
  CHECK(b[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b[3] == doctest::Approx(M_PI / 4).epsilon(1e-12));
}

TEST_CASE("contacts hash and estimate debug dump") {
  Rng rng(1007);
  const FusedContacts c = two_bands(rng, kCenter, Vec3::UnitX(), 2.0, 40, 0.05);
  const uint64_t h = contacts_hash(c);
  CHECK(h == contacts_hash(c));
  FusedContacts c2 = c;
  c2.thumb_points(1, 7) += 1e-9;
  CHECK(contacts_hash(c2) != h);

  const DloLineEstimate e = fit_dlo_line(c);
  const std::string path = std::string(DLOKIT_TEST_TMPDIR) + "/estimate_debug.json";
  write_estimate_debug(e, h, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  CHECK(j["inputs_hash"].get<std::string>().size() == 16);
  CHECK(j["theta"]["radius"].get<double>() == e.radius);
  CHECK(j["theta"]["psi"].size() == 3);
  CHECK(j["residual"].get<double>() == e.residual);
  CHECK(j["iterations"].get<int>() == e.iterations);
}
