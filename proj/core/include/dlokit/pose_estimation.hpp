#pragma once

#include "dlokit/nlp.hpp"
#include "dlokit/tactile.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dlokit {

// In-hand object pose estimation. The contact points lifted from the two
// tactile sensors (both expressed in the index-fingertip frame, mm) are
// fused and fit with an infinite-cylinder model: a line (point xi +
// direction psi) and a radius, plus a small rigid translation delta_p
// applied to the thumb-side points to absorb residual registration error
// between the two sensors. Everything here is millimetres.

constexpr int kMinContactPoints = 30;  // below this the estimate is noise

struct FusedContacts {
  Mat3X index_points{3, 0};
  Mat3X thumb_points{3, 0};  // uncorrected lift; delta_p is applied by the fit
  long total() const { return index_points.cols() + thumb_points.cols(); }
};

struct DloLineEstimate {
  Vec3 xi = Vec3::Zero();       // point on the axis
  Vec3 psi = Vec3::UnitX();     // unit direction, sign-fixed to psi_x >= 0
  double radius = 0.0;
  Vec3 delta_p = Vec3::Zero();  // correction ADDED to thumb points
  double residual = 0.0;        // RMS of (point-to-axis distance - radius)
  // Reduced pose for the follow controller: (xi_y, xi_z, yaw, pitch) where
  // yaw/pitch are the azimuth/elevation of psi about the fingertip X axis.
  Eigen::Vector4d pose4d = Eigen::Vector4d::Zero();
  int iterations = 0;
  bool converged = false;
  bool single_sensor = false;  // one sensor contributed no points
  long n_index = 0;            // contact points per sensor that fed the fit
  long n_thumb = 0;
};

// Fused contact count below the minimum — the follow policy consumes this.
struct SensingLost : std::runtime_error {
  explicit SensingLost(const std::string& what) : std::runtime_error(what) {}
};

// Caller handed fit_dlo_line fewer points than its precondition allows.
struct InsufficientPoints : std::invalid_argument {
  explicit InsufficientPoints(const std::string& what) : std::invalid_argument(what) {}
};

// Point spread has no usable principal direction (e.g. a single cluster).
struct DegenerateSpread : std::runtime_error {
  explicit DegenerateSpread(const std::string& what) : std::runtime_error(what) {}
};

// Distance from o to the line through xi with direction psi (any nonzero
// norm): ||(o - xi) x psi|| / ||psi||.
double point_line_distance(const Vec3& o, const Vec3& xi, const Vec3& psi);

struct LineFitOptions {
  Vec3 delta_p_weight = Vec3::Ones();  // ridge on delta_p, per axis
  double nominal_radius = 2.0;         // initial radius without a warm start
  double radius_min = 0.2;
  double radius_max = 10.0;
  int n_min = kMinContactPoints;
  SqpOptions sqp;
  LineFitOptions();
};

// Least-squares cylinder fit, 0.5 * sum_i (d_i - r)^2 plus the delta_p
// ridge, subject to ||psi|| = 1 and the gauge constraint that xi_x equals
// the mean x of the delta_p-corrected points (pins xi along the axis).
// Initialized from the principal direction + centroid + nominal radius, or
// from `init` when given (warm start). Radius is kept in [radius_min,
// radius_max] by bounds. A non-converged run still returns best-so-far
// with converged = false.
DloLineEstimate fit_dlo_line(const FusedContacts& c, const LineFitOptions& opts = {},
                             const DloLineEstimate* init = nullptr);

struct PcaLine {
  Vec3 point;  // centroid
  Vec3 dir;    // principal eigenvector, sign-fixed to dir_x >= 0
};

// Straight-line baseline: centroid plus the principal direction of the
// fused cloud. Ignores the cylinder geometry, which is exactly why the
// two-band contact pattern biases it — kept as the comparison baseline.
PcaLine fit_pca3d(const FusedContacts& c);

// (xi_y, xi_z, yaw, pitch) from a fitted line; yaw = atan2(psi_y, psi_x),
// pitch = elevation of psi toward fingertip Z.
Eigen::Vector4d pose4d_from_line(const Vec3& xi, const Vec3& psi);

struct EstimateOptions {
  SegmentOptions segment;
  LineFitOptions fit;
};

// Full pipeline: segment both frames, lift the masks to 3-D points, fuse
// and fit. Throws SensingLost when the fused count is below n_min; sets
// single_sensor when one sensor contributed nothing but the other carried
// enough. `prev` warm-starts the solve at the previous estimate.
DloLineEstimate estimate_pose(const TactileFrame& index_frame, const TactileFrame& thumb_frame,
                              const RobotModel& model, const VecX& q14,
                              const DloLineEstimate* prev = nullptr,
                              const EstimateOptions& opts = {});

// Order-sensitive fingerprint of a fused cloud (point bytes + counts),
// for regression bookkeeping.
uint64_t contacts_hash(const FusedContacts& c);

// Debug dump consumed by the regression tooling: inputs hash, the fitted
// parameters, residual and iteration count as JSON.
void write_estimate_debug(const DloLineEstimate& e, uint64_t inputs_hash, const std::string& path);

}  // namespace dlokit
