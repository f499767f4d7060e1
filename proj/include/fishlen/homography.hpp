#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <span>
#include <vector>

#include "fishlen/error.hpp"
#include "fishlen/lm.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

/// Invertible plane-to-plane projective map, normalized so H(2,2) = 1.
struct Homography {
  Mat3 matrix = Mat3::Identity();

  Vec2 apply(const Vec2& p) const {
    const Vec3 q = matrix * Vec3(p.x(), p.y(), 1.0);
    if (std::abs(q.z()) < 1e-12)
      throw NumericError("Homography: point maps to the plane at infinity");
    return {q.x() / q.z(), q.y() / q.z()};
  }

  Homography inverse() const {
    Homography inv;
    inv.matrix = matrix.inverse();
    normalize(inv.matrix);
    return inv;
  }

  static void normalize(Mat3& m) {
    if (std::abs(m(2, 2)) < 1e-15)
      throw NumericError("Homography: bottom-right entry vanishes");
    m /= m(2, 2);
  }
};

struct PointPair {
  Vec2 source;
  Vec2 target;
};

struct HomographyEstimate {
  Homography h;
  double rms_transfer_px = 0.0;  // forward transfer residual
};

namespace detail {

struct Conditioning {
  Mat3 transform = Mat3::Identity();
};

/// Hartley normalization: centroid to origin, mean distance sqrt(2).
inline Conditioning conditioning_transform(std::span<const Vec2> pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - mean).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist < 1e-12 ? 1.0 : std::sqrt(2.0) / mean_dist;

  Conditioning c;
  c.transform << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return c;
}

inline double rms_transfer(const Homography& h, std::span<const PointPair> pairs) {
  double ss = 0.0;
  for (const auto& pp : pairs) ss += (h.apply(pp.source) - pp.target).squaredNorm();
  return std::sqrt(ss / static_cast<double>(pairs.size()));
}

}  // namespace detail

/// Normalized DLT. Requires >= 4 correspondences with no 3 source points
/// collinear; a rank-deficient design matrix raises NumericError.
inline HomographyEstimate estimate_homography(std::span<const PointPair> pairs) {
  if (pairs.size() < 4)
    throw ContractError("estimate_homography: needs at least 4 correspondences");

  std::vector<Vec2> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& pp : pairs) {
    src.push_back(pp.source);
    dst.push_back(pp.target);
  }
  const auto cs = detail::conditioning_transform(src);
  const auto cd = detail::conditioning_transform(dst);

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 ps = cs.transform * Vec3(src[static_cast<std::size_t>(i)].x(),
                                        src[static_cast<std::size_t>(i)].y(), 1.0);
    const Vec3 pd = cd.transform * Vec3(dst[static_cast<std::size_t>(i)].x(),
                                        dst[static_cast<std::size_t>(i)].y(), 1.0);
    const double x = ps.x() / ps.z(), y = ps.y() / ps.z();
    const double u = pd.x() / pd.z(), v = pd.y() / pd.z();
    a.row(2 * i + 0) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A homography needs rank 8; collinear sources collapse the second-smallest
  // singular value.
  if (sv(7) < 1e-10 * sv(0))
    throw NumericError("estimate_homography: degenerate configuration "
                       "(rank-deficient design matrix)");

  const Eigen::VectorXd hvec = svd.matrixV().col(8);
  Mat3 hn;
  hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7),
      hvec(8);

  Mat3 h = cd.transform.inverse() * hn * cs.transform;
  Homography::normalize(h);
  if (std::abs(h.determinant()) < 1e-12)
    throw NumericError("estimate_homography: singular homography");

  HomographyEstimate est;
  est.h.matrix = h;
  est.rms_transfer_px = detail::rms_transfer(est.h, pairs);
  return est;
}

/// Levenberg-Marquardt refinement of the forward transfer error. The eight
/// free parameters are the matrix entries with H(2,2) pinned at 1.
inline HomographyEstimate refine_homography(const Homography& init,
                                            std::span<const PointPair> pairs) {
  Eigen::VectorXd x0(8);
  for (int i = 0; i < 8; ++i) x0[i] = init.matrix(i / 3, i % 3);

  const auto unpack = [](const Eigen::VectorXd& x) {
    Homography h;
    for (int i = 0; i < 8; ++i) h.matrix(i / 3, i % 3) = x[i];
    h.matrix(2, 2) = 1.0;
    return h;
  };

  const auto residual = [&](const Eigen::VectorXd& x) {
    const Homography h = unpack(x);
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(pairs.size()));
    Eigen::Index k = 0;
    for (const auto& pp : pairs) {
      const Vec2 d = h.apply(pp.source) - pp.target;
      r[k++] = d.x();
      r[k++] = d.y();
    }
    return r;
  };

  const auto lm = lm_minimize(residual, x0);
  HomographyEstimate est;
  est.h = unpack(lm.x);
  est.rms_transfer_px = detail::rms_transfer(est.h, pairs);
  if (std::abs(est.h.matrix.determinant()) < 1e-12)
    throw NumericError("refine_homography: singular homography");
  return est;
}

}  // namespace fishlen
