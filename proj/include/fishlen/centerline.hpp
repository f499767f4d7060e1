#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fishlen/camera.hpp"
#include "fishlen/error.hpp"
#include "fishlen/hull.hpp"
#include "fishlen/skeleton.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

/// Smooth centerline: a polynomial over the rotated-frame abscissa, evaluated
/// across the convex hull's extent along the principal axis.
struct CenterlineFit {
  double angle = 0.0;        // rotation aligning the principal axis with +x
  Vec2 center = Vec2::Zero();  // rotation center (mask centroid, px)

  // y_rot = sum_i coeffs[i] * u^i with u the rescaled abscissa.
  std::vector<double> coeffs;
  double abscissa_mid = 0.0;   // rotated-frame px
  double abscissa_half = 1.0;  // rotated-frame px, skeleton extent maps to [-1,1]
  double u_min = 0.0;          // evaluation domain: hull extent, rescaled
  double u_max = 0.0;
  std::vector<std::string> flags;

  double eval(double u) const {
    double y = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) y = y * u + coeffs[i];
    return y;
  }

  double u_from_rotated_x(double x) const { return (x - abscissa_mid) / abscissa_half; }
  double rotated_x_from_u(double u) const { return abscissa_mid + u * abscissa_half; }

  /// Rotated-frame point back to image pixel coordinates.
  Vec2 image_point(double x_rot, double y_rot) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {center.x() + c * x_rot - s * y_rot,
            center.y() + s * x_rot + c * y_rot};
  }
};

struct LengthEstimate {
  int image_id = -1;
  int fish_id = -1;
  int pred_index = -1;  // set in prediction mode
  double length_mm = 0.0;
  int sample_count = 0;
  std::vector<std::string> flags;
};

namespace detail {

inline Vec2 rotate_into_frame(const Vec2& p, double angle, const Vec2& center) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec2 d = p - center;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

/// Least-squares polynomial fit via column-pivoted QR. Returns false when the
/// Vandermonde system is rank-deficient at this degree.
inline bool fit_polynomial(const std::vector<double>& u,
                           const std::vector<double>& y, int degree,
                           std::vector<double>& coeffs) {
  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd a(n, degree + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pw = 1.0;
    for (int d = 0; d <= degree; ++d) {
      a(i, d) = pw;
      pw *= u[static_cast<std::size_t>(i)];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < degree + 1) return false;
  const Eigen::VectorXd sol =
      qr.solve(Eigen::Map<const Eigen::VectorXd>(y.data(), n));
  coeffs.assign(sol.data(), sol.data() + degree + 1);
  return true;
}

}  // namespace detail

/// Fits a 4th-degree polynomial to the skeleton in the rotated frame. The
/// evaluation domain is the hull's abscissa extent, which carries the curve
/// across forked tails and occlusion gaps. Rank-deficient fits fall back to
/// the highest full-rank degree and are flagged.
inline CenterlineFit fit_centerline(const Skeleton& skeleton,
                                    const ConvexHull& hull, double axis_angle,
                                    const Vec2& centroid) {
  if (skeleton.pixels.empty())
    throw ContractError("fit_centerline: empty skeleton");
  if (hull.vertices.empty())
    throw ContractError("fit_centerline: empty hull");

  CenterlineFit fit;
  fit.angle = axis_angle;
  fit.center = centroid;

  std::vector<double> xs, ys;
  xs.reserve(skeleton.pixels.size());
  ys.reserve(skeleton.pixels.size());
  for (const auto& p : skeleton.pixels) {
    const Vec2 q = detail::rotate_into_frame(Vec2(p.x, p.y), axis_angle, centroid);
    xs.push_back(q.x());
    ys.push_back(q.y());
  }

  const auto [sx_min_it, sx_max_it] = std::minmax_element(xs.begin(), xs.end());
  const double sx_min = *sx_min_it, sx_max = *sx_max_it;
  if (sx_max - sx_min < 1e-9)
    throw ContractError(
        "fit_centerline: skeleton has no abscissa extent along the axis");
  fit.abscissa_mid = 0.5 * (sx_min + sx_max);
  fit.abscissa_half = 0.5 * (sx_max - sx_min);

  std::vector<double> us(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    us[i] = (xs[i] - fit.abscissa_mid) / fit.abscissa_half;

  // Hull extent in the same frame: the evaluation domain plus the sanity band.
  double hx_min = std::numeric_limits<double>::max();
  double hx_max = std::numeric_limits<double>::lowest();
  double hy_min = hx_min, hy_max = hx_max;
  for (const auto& v : hull.vertices) {
    const Vec2 q = detail::rotate_into_frame(Vec2(v.x, v.y), axis_angle, centroid);
    hx_min = std::min(hx_min, q.x());
    hx_max = std::max(hx_max, q.x());
    hy_min = std::min(hy_min, q.y());
    hy_max = std::max(hy_max, q.y());
  }
  fit.u_min = fit.u_from_rotated_x(hx_min);
  fit.u_max = fit.u_from_rotated_x(hx_max);
  if (!(fit.u_max > fit.u_min))
    throw ContractError("fit_centerline: empty evaluation domain");

  int distinct = 1;
  {
    std::vector<double> sorted = us;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i] - sorted[i - 1] > 1e-7) ++distinct;
  }
  if (distinct < 2)
    throw ContractError("fit_centerline: fewer than 2 distinct abscissae");

  const double band_center = 0.5 * (hy_min + hy_max);
  const double band_half = std::max(hy_max - hy_min, 1.0);  // 2x hull extent
  const auto within_band = [&](const std::vector<double>& coeffs) {
    CenterlineFit probe = fit;
    probe.coeffs = coeffs;
    constexpr int kSamples = 200;
    for (int i = 0; i <= kSamples; ++i) {
      const double u = fit.u_min + (fit.u_max - fit.u_min) * i / kSamples;
      if (std::abs(probe.eval(u) - band_center) > band_half) return false;
    }
    return true;
  };

  const int target_degree = std::min(4, distinct - 1);
  std::vector<double> coeffs;
  std::vector<double> first_full_rank;
  int fitted_degree = -1;
  for (int degree = target_degree; degree >= 1; --degree) {
    if (!detail::fit_polynomial(us, ys, degree, coeffs)) continue;
    if (first_full_rank.empty()) first_full_rank = coeffs;
    if (within_band(coeffs)) {
      fitted_degree = degree;
      break;
    }
  }
  if (fitted_degree < 0) {
    if (first_full_rank.empty())
      throw NumericError("fit_centerline: no full-rank fit at any degree");
    coeffs = first_full_rank;
    fitted_degree = static_cast<int>(first_full_rank.size()) - 1;
    fit.flags.push_back("fit_unstable");
  }
  fit.coeffs = coeffs;
  if (fitted_degree < 4) fit.flags.push_back("degree_reduced");
  return fit;
}

/// Samples the centerline at a fixed step along the rotated abscissa, maps
/// every sample through the camera onto the belt plane, and accumulates the
/// polyline length in millimeters.
inline LengthEstimate estimate_length(const CenterlineFit& fit,
                                      const CameraModel& camera,
                                      double step_px = 1.0) {
  if (step_px <= 0.0) throw ContractError("estimate_length: step must be > 0");
  const double x_lo = fit.rotated_x_from_u(fit.u_min);
  const double x_hi = fit.rotated_x_from_u(fit.u_max);

  LengthEstimate est;
  est.flags = fit.flags;

  Vec2 prev;
  bool have_prev = false;
  double length = 0.0;
  int samples = 0;
  double x = x_lo;
  while (true) {
    const double u = fit.u_from_rotated_x(x);
    const Vec2 img = fit.image_point(x, fit.eval(u));
    const Vec2 belt = camera.pixel_to_belt(img);
    if (have_prev) length += (belt - prev).norm();
    prev = belt;
    have_prev = true;
    ++samples;
    if (x >= x_hi) break;
    x = std::min(x + step_px, x_hi);
  }

  est.length_mm = length;
  est.sample_count = samples;
  return est;
}

}  // namespace fishlen
