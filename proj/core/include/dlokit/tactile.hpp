#pragma once

#include "dlokit/geom.hpp"
#include "dlokit/kinematics.hpp"
#include "dlokit/rng.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Tactile pipeline, from synthetic gel images to 3-D contact points.
// Convention: image coordinates and depths are in MILLIMETRES (u right,
// v down toward the pad bottom edge, depth positive into the gel), while
// poses coming from the kinematics side stay in metres; conversions happen
// inside this module. The gel is modeled as a rigid imprint -- measured
// depth equals geometric penetration, with no membrane smoothing.

namespace dlokit {

using DepthGrid = MatX;  // (row, col) = (v, u), mm of indentation
using MaskGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

constexpr int kSensorRows = 240;
constexpr int kSensorCols = 320;
constexpr double kPixelPitchMm = 0.058;
// Sensor noise floor: readings are clamped here, and anything below it in a
// stored file is unrepresentable.
constexpr double kDepthFloorMm = -0.5;

struct TactileFrame {
  DepthGrid depth;  // rows x cols, mm
  Finger sensor_id{Finger::Index};
  Pose extrinsic;  // fingertip -> image frame, metres
  double pixel_pitch{kPixelPitchMm};  // mm per pixel
};

// Throws std::invalid_argument unless dimensions are positive, pitch > 0,
// and every depth is finite and >= the noise floor.
void validate_frame(const TactileFrame& frame);

// A 3-D line in image coordinates (mm). dir need not be unit length but
// must not be parallel to the depth axis.
struct ImageLine {
  Vec3 point;
  Vec3 dir;
};

struct RenderOptions {
  int rows = kSensorRows;
  int cols = kSensorCols;
  double pixel_pitch = kPixelPitchMm;  // mm
  Finger sensor_id = Finger::Index;
  Pose extrinsic;  // metres; default set from the standard sensor mounting
  // Gel baseline bias: real gels report nonzero rest depth that shifts with
  // contact state, so frames can carry a constant offset and a linear ramp
  // across the window (mm, and mm per mm of image coordinate).
  double baseline_offset = 0.0;
  double baseline_tilt_u = 0.0;
  double baseline_tilt_v = 0.0;

  RenderOptions();
};

// Byproducts of rendering that tests and corpus generators use as ground
// truth; the noisy frame itself never exposes these.
struct RenderTruth {
  ImageLine axis;     // axis as placed (anchor depth set from indentation)
  DepthGrid clean;    // noise- and baseline-free depth, mm
  MaskGrid contact;   // clean > 0
};

// Presses a rigid cylinder of `radius_mm` into the gel plane. The axis
// anchor point's depth is overridden so that peak penetration at the anchor
// equals `indentation_mm`; the direction's depth component tilts the axis,
// making penetration vary along the band. Per pixel:
//
//   depth = max(0, indentation - gap(pixel, cylinder)) + baseline + noise
//
// where gap is the vertical clearance between the gel plane and the
// cylinder surface over the pixel centre. Zero indentation renders pure
// noise. Throws std::invalid_argument on negative indentation, non-positive
// radius, or an axis parallel to the depth direction.
TactileFrame render_tactile(const ImageLine& dlo_axis, double radius_mm, double indentation_mm,
                            double noise_sigma_mm, Rng& rng, const RenderOptions& opts = {},
                            RenderTruth* truth = nullptr);

struct GmmComponent {
  double mean{0.0};
  double sigma{0.0};
  double weight{0.0};
};

struct Gmm2 {
  GmmComponent comp[2];
  double log_likelihood{0.0};
  int iterations{0};
  // Log-likelihood after every EM iteration; non-decreasing up to roundoff.
  std::vector<double> ll_trace;
};

struct GmmOptions {
  int max_iter = 100;
  // Stop when the total log-likelihood improves by less than tol per
  // sample; a per-sample criterion keeps the fit scale-consistent.
  double tol = 1e-8;
  // Explicit component seeds (mean/sigma/weight) instead of the median
  // split; lets callers run restart studies.
  std::optional<std::array<GmmComponent, 2>> init;
};

// A mixture component collapsed (sigma < 1e-6 mm), e.g. on a uniform frame;
// segmentation treats the frame as contact-free when this fires.
struct DegenerateComponent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// EM fit of a two-component 1-D Gaussian mixture. Initialized by splitting
// the sample at its median. Requires >= 100 samples.
Gmm2 fit_gmm2(const VecX& values, const GmmOptions& opts = {});

struct ContactMask {
  MaskGrid mask;
  double threshold_used{0.0};  // mm; +inf when the mixture was degenerate
  Gmm2 gmm;
  int contact_pixels{0};
};

struct SegmentOptions {
  GmmOptions gmm;
  // The mixture component with the higher weight models the non-contact
  // background; contact is anything deeper than its mean + 3 sigma.
  double sigma_gain = 3.0;
  int open_size = 3;   // removes isolated speckles
  int close_size = 5;  // bridges small gaps inside the band
  // The pad bottom region images the opposing pad when the V closes, so its
  // rows are discarded outright.
  double bottom_fraction = 0.15;
};

// Threshold from the fitted mixture, then morphological open/close and
// bottom-row removal. An all-false mask (contact_pixels == 0) is the
// no-contact signal, produced also when the mixture is degenerate.
ContactMask segment_contact(const TactileFrame& frame, const SegmentOptions& opts = {});

// Same morphology pipeline with a caller-fixed threshold instead of the
// mixture rule; exists as the baseline the adaptive threshold is compared
// against.
ContactMask segment_fixed_threshold(const TactileFrame& frame, double threshold_mm,
                                    const SegmentOptions& opts = {});

// Lifts every true pixel to a 3-D point (pixel centre + measured depth),
// maps it through the sensor extrinsic onto the fingertip and, for the
// thumb sensor, across the hand FK at q into the index fingertip frame.
// Returns points in MILLIMETRES, index-fingertip frame, 3 x N in row-major
// scan order (count == number of true pixels).
Mat3X mask_to_points(const ContactMask& mask, const TactileFrame& frame, const RobotModel& model,
                     const VecX& q14);

// Inverse of the mask_to_points mapping for a line: expresses a line given
// in the index-fingertip frame (mm) in one sensor's image frame (mm), going
// through the hand FK at q14 when that sensor sits on the thumb. Used to
// synthesize consistent two-sensor views of a single object.
ImageLine line_in_sensor_frame(const ImageLine& line_index_tip, Finger sensor,
                               const Pose& extrinsic, const RobotModel& model, const VecX& q14);

// 16-bit binary PGM (big-endian, maxval 65535), 1 unit = 0.01 mm with a
// +0.5 mm zero offset so noise-negative depths survive the round trip, plus
// a JSON sidecar <path>.json carrying sensor_id, extrinsic and pixel pitch.
void save_tactile_frame(const TactileFrame& frame, const std::string& pgm_path);
TactileFrame load_tactile_frame(const std::string& pgm_path);

}  // namespace dlokit
