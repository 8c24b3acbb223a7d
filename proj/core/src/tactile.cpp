#include "dlokit/tactile.hpp"

#include "json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dlokit {

RenderOptions::RenderOptions() : extrinsic(default_tactile_extrinsic()) {}

void validate_frame(const TactileFrame& frame) {
  if (frame.depth.rows() <= 0 || frame.depth.cols() <= 0) {
    throw std::invalid_argument("tactile frame: empty depth grid");
  }
  if (!(frame.pixel_pitch > 0.0)) {
    throw std::invalid_argument("tactile frame: pixel pitch must be positive");
  }
  if (!frame.depth.allFinite() || (frame.depth.array() < kDepthFloorMm).any()) {
    throw std::invalid_argument("tactile frame: depths must be finite and above the noise floor");
  }
}

TactileFrame render_tactile(const ImageLine& dlo_axis, double radius_mm, double indentation_mm,
                            double noise_sigma_mm, Rng& rng, const RenderOptions& opts,
                            RenderTruth* truth) {
  if (indentation_mm < 0.0) throw std::invalid_argument("render_tactile: negative indentation");
  if (!(radius_mm > 0.0)) throw std::invalid_argument("render_tactile: radius must be positive");
  if (noise_sigma_mm < 0.0) throw std::invalid_argument("render_tactile: negative noise sigma");
  const double dir_norm = dlo_axis.dir.norm();
  if (dir_norm < 1e-12) throw std::invalid_argument("render_tactile: zero axis direction");
  const Vec3 u = dlo_axis.dir / dir_norm;
  if (u.z() * u.z() > 1.0 - 1e-6) {
    throw std::invalid_argument("render_tactile: axis parallel to the depth direction");
  }

  // Anchor depth such that the cylinder's deepest point on the anchor's
  // cross-section sits indentation_mm below the gel plane.
  Vec3 a = dlo_axis.point;
  a.z() = indentation_mm - radius_mm;

  TactileFrame frame;
  frame.sensor_id = opts.sensor_id;
  frame.extrinsic = opts.extrinsic;
  frame.pixel_pitch = opts.pixel_pitch;
  frame.depth.resize(opts.rows, opts.cols);

  DepthGrid clean(opts.rows, opts.cols);
  const double uz2 = u.z() * u.z();
  const double qa = 1.0 - uz2;  // leading coefficient of the depth quadratic
  for (int i = 0; i < opts.rows; ++i) {
    const double y = (i + 0.5) * opts.pixel_pitch;
    for (int j = 0; j < opts.cols; ++j) {
      const double x = (j + 0.5) * opts.pixel_pitch;
      // Deepest intersection of the vertical ray through the pixel centre
      // with the cylinder |p - proj_axis(p)| = r.
      const Vec3 b(x - a.x(), y - a.y(), -a.z());
      const double bu = b.dot(u);
      const double qb = 2.0 * (b.z() - bu * u.z());
      const double qc = b.squaredNorm() - bu * bu - radius_mm * radius_mm;
      const double disc = qb * qb - 4.0 * qa * qc;
      double d = 0.0;
      if (indentation_mm > 0.0 && disc >= 0.0) {
        d = std::max(0.0, (-qb + std::sqrt(disc)) / (2.0 * qa));
      }
      clean(i, j) = d;
    }
  }

  const double cx = 0.5 * opts.cols * opts.pixel_pitch;
  const double cy = 0.5 * opts.rows * opts.pixel_pitch;
  for (int i = 0; i < opts.rows; ++i) {
    const double y = (i + 0.5) * opts.pixel_pitch;
    for (int j = 0; j < opts.cols; ++j) {
      const double x = (j + 0.5) * opts.pixel_pitch;
      const double baseline = opts.baseline_offset + opts.baseline_tilt_u * (x - cx) +
                              opts.baseline_tilt_v * (y - cy);
      frame.depth(i, j) =
          std::max(kDepthFloorMm, clean(i, j) + baseline + rng.normal(0.0, noise_sigma_mm));
    }
  }

  if (truth != nullptr) {
    truth->axis = ImageLine{a, u};
    // Ground-truth support is what a sensor at this noise level can in
    // principle detect: indentation above 4 sigma. At zero noise this is
    // exactly the geometric footprint. Without the floor, no thresholding
    // method can reach the documented IoU bounds on shallow imprints — the
    // sub-noise penumbra of a rigid imprint is invisible by construction.
    truth->contact = clean.array() > std::max(0.0, 4.0 * noise_sigma_mm);
    truth->clean = std::move(clean);
  }
  return frame;
}

// --- two-component 1-D GMM ---------------------------------------------

namespace {

constexpr double kSigmaFloor = 1e-6;  // mm; below this a component collapsed
constexpr double kHalfLog2Pi = 0.9189385332046727;

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

Gmm2 fit_gmm2(const VecX& values, const GmmOptions& opts) {
  const int n = static_cast<int>(values.size());
  if (n < 100) throw std::invalid_argument("fit_gmm2: need at least 100 samples");
  if (!values.allFinite()) throw std::invalid_argument("fit_gmm2: non-finite samples");

  const double total_mean = values.mean();
  const double total_std = std::sqrt((values.array() - total_mean).square().mean());
  if (total_std < kSigmaFloor) {
    throw DegenerateComponent("fit_gmm2: samples are uniform");
  }

  Gmm2 g;
  if (opts.init) {
    for (int k = 0; k < 2; ++k) {
      const GmmComponent& c = (*opts.init)[static_cast<size_t>(k)];
      if (!(c.sigma > kSigmaFloor) || !(c.weight > 0.0)) {
        throw std::invalid_argument("fit_gmm2: init needs positive sigma and weight");
      }
      g.comp[k] = c;
    }
    const double wsum = g.comp[0].weight + g.comp[1].weight;
    g.comp[0].weight /= wsum;
    g.comp[1].weight /= wsum;
  } else {
    // Median split seeds the two components. A floor on the seed widths
    // keeps the fit alive when one half is (nearly) constant, e.g. an
    // exact-zero background; if a component still collapses during EM we
    // bail out below.
    std::vector<double> sorted(values.data(), values.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double median = sorted[static_cast<size_t>(n) / 2];
    std::vector<double> low, high;
    for (int i = 0; i < n; ++i) (values[i] <= median ? low : high).push_back(values[i]);
    if (high.empty()) {
      // Everything at or below a median equal to the max: effectively
      // uniform up to ties; split the sorted halves instead.
      std::sort(sorted.begin(), sorted.end());
      low.assign(sorted.begin(), sorted.begin() + n / 2);
      high.assign(sorted.begin() + n / 2, sorted.end());
    }

    const double sigma_seed_floor = std::max(kSigmaFloor * 10.0, total_std / 10.0);
    for (int k = 0; k < 2; ++k) {
      const std::vector<double>& part = (k == 0) ? low : high;
      double mean = 0.0;
      for (double x : part) mean += x;
      mean /= std::max<size_t>(1, part.size());
      g.comp[k].mean = mean;
      g.comp[k].sigma = std::max(sample_std(part, mean), sigma_seed_floor);
      g.comp[k].weight = static_cast<double>(part.size()) / n;
    }
  }

  VecX resp1(n);  // responsibility of component 1; component 0 gets 1 - r
  double prev_ll = -std::numeric_limits<double>::infinity();
  g.ll_trace.reserve(16);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // E step in the log domain; also accumulates the log-likelihood of the
    // parameters from the previous M step.
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      double lp[2];
      for (int k = 0; k < 2; ++k) {
        const double z = (values[i] - g.comp[k].mean) / g.comp[k].sigma;
        lp[k] = std::log(g.comp[k].weight) - std::log(g.comp[k].sigma) - 0.5 * z * z -
                kHalfLog2Pi;
      }
      const double m = std::max(lp[0], lp[1]);
      const double lse = m + std::log(std::exp(lp[0] - m) + std::exp(lp[1] - m));
      ll += lse;
      resp1[i] = std::exp(lp[1] - lse);
    }
    g.ll_trace.push_back(ll);
    g.log_likelihood = ll;
    g.iterations = iter + 1;
    if (std::abs(ll - prev_ll) <= opts.tol * n) break;
    prev_ll = ll;

    // M step.
    const double n1 = resp1.sum();
    const double n0 = n - n1;
    if (n0 < 1e-9 || n1 < 1e-9) {
      throw DegenerateComponent("fit_gmm2: component weight collapsed");
    }
    const double mu1 = resp1.dot(values) / n1;
    const double mu0 = ((1.0 - resp1.array()) * values.array()).sum() / n0;
    const double var1 = (resp1.array() * (values.array() - mu1).square()).sum() / n1;
    const double var0 = ((1.0 - resp1.array()) * (values.array() - mu0).square()).sum() / n0;
    g.comp[0] = {mu0, std::sqrt(var0), n0 / n};
    g.comp[1] = {mu1, std::sqrt(var1), n1 / n};
    for (const auto& c : g.comp) {
      if (c.sigma < kSigmaFloor) throw DegenerateComponent("fit_gmm2: component collapsed");
    }
  }
  return g;
}

// --- segmentation --------------------------------------------------------

namespace {

// Separable binary erosion/dilation with a k x k box. Outside the image,
// erosion pads true and dilation pads false, so contact bands running off
// the window keep their border pixels through open/close (zero-padding
// both ways would shave k/2 border rows/cols off every full-width band).
MaskGrid box_filter(const MaskGrid& in, int k, bool erode) {
  const int a = k / 2;
  const auto rows = in.rows();
  const auto cols = in.cols();
  MaskGrid tmp(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      bool v = erode;
      for (long dj = -a; dj <= a; ++dj) {
        const long jj = j + dj;
        const bool px = (jj >= 0 && jj < cols) ? in(i, jj) : erode;
        v = erode ? (v && px) : (v || px);
      }
      tmp(i, j) = v;
    }
  }
  MaskGrid out(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      bool v = erode;
      for (long di = -a; di <= a; ++di) {
        const long ii = i + di;
        const bool px = (ii >= 0 && ii < rows) ? tmp(ii, j) : erode;
        v = erode ? (v && px) : (v || px);
      }
      out(i, j) = v;
    }
  }
  return out;
}

MaskGrid morph_open(const MaskGrid& m, int k) {
  return box_filter(box_filter(m, k, true), k, false);
}

MaskGrid morph_close(const MaskGrid& m, int k) {
  return box_filter(box_filter(m, k, false), k, true);
}

ContactMask finish_mask(MaskGrid raw, double threshold, const SegmentOptions& opts) {
  ContactMask out;
  if (opts.open_size > 1) raw = morph_open(raw, opts.open_size);
  if (opts.close_size > 1) raw = morph_close(raw, opts.close_size);
  const long bottom = std::lround(opts.bottom_fraction * static_cast<double>(raw.rows()));
  if (bottom > 0) raw.bottomRows(bottom).setConstant(false);
  out.threshold_used = threshold;
  out.contact_pixels = static_cast<int>(raw.count());
  out.mask = std::move(raw);
  return out;
}

}  // namespace

ContactMask segment_contact(const TactileFrame& frame, const SegmentOptions& opts) {
  validate_frame(frame);
  const Eigen::Map<const VecX> flat(frame.depth.data(), frame.depth.size());
  Gmm2 gmm;
  try {
    gmm = fit_gmm2(VecX(flat), opts.gmm);
  } catch (const DegenerateComponent&) {
    // Uniform frame: nothing pressed into the gel.
    ContactMask out;
    out.mask = MaskGrid::Constant(frame.depth.rows(), frame.depth.cols(), false);
    out.threshold_used = std::numeric_limits<double>::infinity();
    out.contact_pixels = 0;
    return out;
  }

  // The higher-weight component models the non-contact background (ties go
  // to the lower mean); contact is anything beyond mean + sigma_gain*sigma.
  int bg = gmm.comp[0].weight >= gmm.comp[1].weight ? 0 : 1;
  if (std::abs(gmm.comp[0].weight - gmm.comp[1].weight) < 1e-6) {
    bg = gmm.comp[0].mean <= gmm.comp[1].mean ? 0 : 1;
  }
  const double threshold = gmm.comp[bg].mean + opts.sigma_gain * gmm.comp[bg].sigma;

  ContactMask out = finish_mask(frame.depth.array() > threshold, threshold, opts);
  out.gmm = std::move(gmm);
  return out;
}

ContactMask segment_fixed_threshold(const TactileFrame& frame, double threshold_mm,
                                    const SegmentOptions& opts) {
  validate_frame(frame);
  return finish_mask(frame.depth.array() > threshold_mm, threshold_mm, opts);
}

// --- lifting to 3-D ------------------------------------------------------

Mat3X mask_to_points(const ContactMask& mask, const TactileFrame& frame, const RobotModel& model,
                     const VecX& q14) {
  validate_frame(frame);
  if (mask.mask.rows() != frame.depth.rows() || mask.mask.cols() != frame.depth.cols()) {
    throw std::invalid_argument("mask_to_points: mask/frame size mismatch");
  }

  // image (metres) -> sensor fingertip -> index fingertip.
  Pose img_to_index = pose_inverse(frame.extrinsic);
  if (frame.sensor_id == Finger::Thumb) {
    const Pose thumb_to_index =
        pose_compose(pose_inverse(fk(model, q14, Frame::IndexTipH)), fk(model, q14, Frame::ThumbTipH));
    img_to_index = pose_compose(thumb_to_index, img_to_index);
  }

  Mat3X points(3, mask.mask.count());
  long out = 0;
  for (long i = 0; i < mask.mask.rows(); ++i) {
    for (long j = 0; j < mask.mask.cols(); ++j) {
      if (!mask.mask(i, j)) continue;
      const Vec3 p_img_mm((static_cast<double>(j) + 0.5) * frame.pixel_pitch,
                          (static_cast<double>(i) + 0.5) * frame.pixel_pitch, frame.depth(i, j));
      points.col(out++) = 1000.0 * pose_apply(img_to_index, 1e-3 * p_img_mm);
    }
  }
  return points;
}

ImageLine line_in_sensor_frame(const ImageLine& line_index_tip, Finger sensor,
                               const Pose& extrinsic, const RobotModel& model, const VecX& q14) {
  Pose index_to_img = extrinsic;  // extrinsic maps fingertip -> image
  if (sensor == Finger::Thumb) {
    const Pose index_to_thumb =
        pose_compose(pose_inverse(fk(model, q14, Frame::ThumbTipH)), fk(model, q14, Frame::IndexTipH));
    index_to_img = pose_compose(extrinsic, index_to_thumb);
  }
  ImageLine out;
  out.point = 1000.0 * pose_apply(index_to_img, 1e-3 * line_index_tip.point);
  out.dir = pose_rotate(index_to_img, line_index_tip.dir);
  return out;
}

// --- file round trip -----------------------------------------------------

namespace {

constexpr double kUnitsPerMm = 100.0;   // 1 unit = 0.01 mm
constexpr double kZeroOffsetMm = 0.5;   // stored 50 units = depth 0

}  // namespace

void save_tactile_frame(const TactileFrame& frame, const std::string& pgm_path) {
  validate_frame(frame);
  std::ofstream f(pgm_path, std::ios::binary);
  if (!f) throw std::runtime_error("save_tactile_frame: cannot open " + pgm_path);
  f << "P5\n" << frame.depth.cols() << " " << frame.depth.rows() << "\n65535\n";
  std::vector<unsigned char> row(static_cast<size_t>(frame.depth.cols()) * 2);
  for (long i = 0; i < frame.depth.rows(); ++i) {
    for (long j = 0; j < frame.depth.cols(); ++j) {
      const double units = std::round((frame.depth(i, j) + kZeroOffsetMm) * kUnitsPerMm);
      const auto v = static_cast<uint16_t>(std::clamp(units, 0.0, 65535.0));
      row[static_cast<size_t>(j) * 2] = static_cast<unsigned char>(v >> 8);  // big-endian
      row[static_cast<size_t>(j) * 2 + 1] = static_cast<unsigned char>(v & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("save_tactile_frame: write failed for " + pgm_path);

  detail::json side;
  side["sensor_id"] = frame.sensor_id == Finger::Index ? "index" : "thumb";
  side["extrinsic"] = detail::pose_to_json(frame.extrinsic);
  side["pixel_pitch_mm"] = frame.pixel_pitch;
  side["units_per_mm"] = kUnitsPerMm;
  side["zero_offset_mm"] = kZeroOffsetMm;
  detail::write_json_file(side, pgm_path + ".json");
}

TactileFrame load_tactile_frame(const std::string& pgm_path) {
  std::ifstream f(pgm_path, std::ios::binary);
  if (!f) throw std::runtime_error("load_tactile_frame: cannot open " + pgm_path);
  std::string magic;
  long cols = 0, rows = 0, maxval = 0;
  f >> magic >> cols >> rows >> maxval;
  if (magic != "P5" || cols <= 0 || rows <= 0 || maxval != 65535) {
    throw std::runtime_error("load_tactile_frame: not a 16-bit PGM: " + pgm_path);
  }
  f.get();  // single whitespace after the header

  const detail::json side = detail::read_json_file(pgm_path + ".json");
  TactileFrame frame;
  const std::string sensor = detail::require(side, "sensor_id", pgm_path).get<std::string>();
  if (sensor != "index" && sensor != "thumb") {
    throw std::runtime_error("load_tactile_frame: unknown sensor_id '" + sensor + "'");
  }
  frame.sensor_id = sensor == "index" ? Finger::Index : Finger::Thumb;
  frame.extrinsic = detail::pose_from_json(detail::require(side, "extrinsic", pgm_path), pgm_path);
  frame.pixel_pitch = detail::require(side, "pixel_pitch_mm", pgm_path).get<double>();
  const double units_per_mm = detail::require(side, "units_per_mm", pgm_path).get<double>();
  const double zero_offset = detail::require(side, "zero_offset_mm", pgm_path).get<double>();

  frame.depth.resize(rows, cols);
  std::vector<unsigned char> row(static_cast<size_t>(cols) * 2);
  for (long i = 0; i < rows; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) throw std::runtime_error("load_tactile_frame: truncated pixel data: " + pgm_path);
    for (long j = 0; j < cols; ++j) {
      const uint16_t v = static_cast<uint16_t>((row[static_cast<size_t>(j) * 2] << 8) |
                                               row[static_cast<size_t>(j) * 2 + 1]);
      frame.depth(i, j) = static_cast<double>(v) / units_per_mm - zero_offset;
    }
  }
  validate_frame(frame);
  return frame;
}

}  // namespace dlokit
