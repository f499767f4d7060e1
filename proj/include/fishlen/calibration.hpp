#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishlen/camera.hpp"
#include "fishlen/error.hpp"
#include "fishlen/homography.hpp"
#include "fishlen/lm.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

struct BoardSpec {
  double square_size_mm = 20.0;
  int rows = 6;  // inner-corner grid
  int cols = 9;
};

struct Correspondence {
  Vec2 image_px;
  Vec2 board_mm;
};

struct PlanarView {
  std::vector<Correspondence> points;
  bool flat_on_belt = false;
};

struct CalibrationSet {
  BoardSpec board;
  std::vector<PlanarView> views;
};

struct ViewPose {
  Vec3 rotation;  // Rodrigues vector
  Vec3 translation;
};

struct CalibrationResult {
  CameraModel camera;
  std::vector<ViewPose> poses;
  double initial_rms_px = 0.0;  // closed-form model, zero distortion
  double refined_rms_px = 0.0;
  double mean_reprojection_px = 0.0;
  double belt_fit_rms_mm = 0.0;
};

namespace detail {

inline Mat3 rodrigues_to_matrix(const Vec3& rvec) {
  const double theta = rvec.norm();
  if (theta < 1e-12) return Mat3::Identity();
  const Vec3 k = rvec / theta;
  Mat3 kx;
  kx << 0.0, -k.z(), k.y(), k.z(), 0.0, -k.x(), -k.y(), k.x(), 0.0;
  return Mat3::Identity() + std::sin(theta) * kx +
         (1.0 - std::cos(theta)) * (kx * kx);
}

inline Vec3 matrix_to_rodrigues(const Mat3& r) {
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-12) return Vec3::Zero();
  Vec3 antisym(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 2.0 * std::sin(theta);
  if (std::abs(s) < 1e-6) {
    // theta ~ pi: R + I = 2 a a^T + O(pi - theta). Read the axis off the
    // strongest row so the component signs stay consistent.
    const Mat3 a = 0.5 * (r + Mat3::Identity());
    int k = 0;
    if (a(1, 1) > a(k, k)) k = 1;
    if (a(2, 2) > a(k, k)) k = 2;
    Vec3 axis;
    axis[k] = std::sqrt(std::max(a(k, k), 1e-12));
    axis[(k + 1) % 3] = a(k, (k + 1) % 3) / axis[k];
    axis[(k + 2) % 3] = a(k, (k + 2) % 3) / axis[k];
    axis.normalize();
    // The residual antisymmetric part still carries the sign of the axis.
    if (antisym.norm() > 1e-12 && axis.dot(antisym) < 0.0) axis = -axis;
    return axis * theta;
  }
  return antisym / s * theta;
}

struct PlanarParams {
  double fx, fy, cx, cy;
  Distortion dist;
  std::vector<ViewPose> poses;
};

inline Vec2 project_board_point(const PlanarParams& p, const Mat3& rot,
                                const Vec3& t, const Vec2& board_mm) {
  const Vec3 cam = rot * Vec3(board_mm.x(), board_mm.y(), 0.0) + t;
  const double z = std::abs(cam.z()) < 1e-12 ? 1e-12 : cam.z();
  const Vec2 distorted = p.dist.apply(Vec2(cam.x() / z, cam.y() / z));
  return {p.fx * distorted.x() + p.cx, p.fy * distorted.y() + p.cy};
}

inline double reprojection_rms(const PlanarParams& p,
                               const std::vector<PlanarView>& views) {
  double ss = 0.0;
  std::int64_t n = 0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Mat3 rot = rodrigues_to_matrix(p.poses[v].rotation);
    for (const auto& c : views[v].points) {
      ss += (project_board_point(p, rot, p.poses[v].translation, c.board_mm) -
             c.image_px)
                .squaredNorm();
      ++n;
    }
  }
  return std::sqrt(ss / static_cast<double>(n));
}

inline Eigen::Matrix<double, 6, 1> zhang_v(const Mat3& h, int i, int j) {
  Eigen::Matrix<double, 6, 1> v;
  v << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j),
      h(1, i) * h(1, j), h(2, i) * h(0, j) + h(0, i) * h(2, j),
      h(2, i) * h(1, j) + h(1, i) * h(2, j), h(2, i) * h(2, j);
  return v;
}

/// Closed-form intrinsics from plane homographies. The homographies are
/// preconditioned by the pixel scale: raw-pixel entries span several orders
/// of magnitude and make the constraint system ill-conditioned.
inline PlanarParams zhang_closed_form(const std::vector<Mat3>& hs_raw,
                                      double pixel_scale) {
  const double s = std::max(1.0, pixel_scale);
  Mat3 precondition;
  precondition << 1.0 / s, 0.0, 0.0, 0.0, 1.0 / s, 0.0, 0.0, 0.0, 1.0;
  std::vector<Mat3> hs;
  hs.reserve(hs_raw.size());
  for (const auto& h : hs_raw) hs.push_back(precondition * h);

  const auto m = static_cast<Eigen::Index>(hs.size());
  Eigen::MatrixXd vmat(2 * m, 6);
  for (Eigen::Index k = 0; k < m; ++k) {
    vmat.row(2 * k) = zhang_v(hs[static_cast<std::size_t>(k)], 0, 1).transpose();
    vmat.row(2 * k + 1) = (zhang_v(hs[static_cast<std::size_t>(k)], 0, 0) -
                           zhang_v(hs[static_cast<std::size_t>(k)], 1, 1))
                              .transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(vmat, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Unique null direction requires rank 5; views sharing one orientation
  // collapse it.
  if (sv(4) < 1e-9 * sv(0))
    throw NumericError(
        "calibrate_planar: view orientations are near-coplanar; the "
        "intrinsic system is ill-conditioned");

  Eigen::VectorXd b = svd.matrixV().col(5);
  const auto solve = [&](const Eigen::VectorXd& bb) {
    const double b11 = bb(0), b12 = bb(1), b22 = bb(2), b13 = bb(3),
                 b23 = bb(4), b33 = bb(5);
    const double denom = b11 * b22 - b12 * b12;
    const double v0 = (b12 * b13 - b11 * b23) / denom;
    const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    PlanarParams p{};
    p.fx = std::sqrt(lambda / b11);
    p.fy = std::sqrt(lambda * b11 / denom);
    const double skew = -b12 * p.fx * p.fx * p.fy / lambda;
    p.cx = skew * v0 / p.fy - b13 * p.fx * p.fx / lambda;
    p.cy = v0;
    return p;
  };

  PlanarParams p = solve(b);
  if (!std::isfinite(p.fx) || !std::isfinite(p.fy) || p.fx <= 0 || p.fy <= 0) {
    p = solve(-b);
    if (!std::isfinite(p.fx) || !std::isfinite(p.fy) || p.fx <= 0 || p.fy <= 0)
      throw NumericError("calibrate_planar: closed-form intrinsics failed");
  }
  p.fx *= s;
  p.fy *= s;
  p.cx *= s;
  p.cy *= s;
  return p;
}

inline ViewPose pose_from_homography(const PlanarParams& p, const Mat3& h) {
  Mat3 kmat;
  kmat << p.fx, 0.0, p.cx, 0.0, p.fy, p.cy, 0.0, 0.0, 1.0;
  const Mat3 kinv = kmat.inverse();
  const Vec3 r1p = kinv * h.col(0);
  const Vec3 r2p = kinv * h.col(1);
  double s = 1.0 / std::max(1e-12, r1p.norm());
  Vec3 t = s * (kinv * h.col(2));
  if (t.z() < 0.0) {  // board must sit in front of the camera
    s = -s;
    t = -t;
  }
  Mat3 r;
  r.col(0) = s * r1p;
  r.col(1) = s * r2p;
  r.col(2) = r.col(0).cross(r.col(1));

  const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {matrix_to_rodrigues(r), t};
}

// Parameter layout: [fx fy cx cy k1 k2 p1 p2 | (rvec tvec) * M]
inline Eigen::VectorXd pack_params(const PlanarParams& p) {
  Eigen::VectorXd x(8 + 6 * static_cast<Eigen::Index>(p.poses.size()));
  x << p.fx, p.fy, p.cx, p.cy, p.dist.k1, p.dist.k2, p.dist.p1, p.dist.p2,
      Eigen::VectorXd::Zero(x.size() - 8);
  for (std::size_t v = 0; v < p.poses.size(); ++v) {
    x.segment<3>(8 + 6 * static_cast<Eigen::Index>(v)) = p.poses[v].rotation;
    x.segment<3>(11 + 6 * static_cast<Eigen::Index>(v)) = p.poses[v].translation;
  }
  return x;
}

inline PlanarParams unpack_params(const Eigen::VectorXd& x, std::size_t n_views) {
  PlanarParams p{};
  p.fx = x(0);
  p.fy = x(1);
  p.cx = x(2);
  p.cy = x(3);
  p.dist.k1 = x(4);
  p.dist.k2 = x(5);
  p.dist.p1 = x(6);
  p.dist.p2 = x(7);
  p.poses.resize(n_views);
  for (std::size_t v = 0; v < n_views; ++v) {
    p.poses[v].rotation = x.segment<3>(8 + 6 * static_cast<Eigen::Index>(v));
    p.poses[v].translation = x.segment<3>(11 + 6 * static_cast<Eigen::Index>(v));
  }
  return p;
}

}  // namespace detail

/// Plane-based calibration: per-view homographies, closed-form intrinsics,
/// then staged Levenberg-Marquardt over intrinsics, distortion, and poses.
/// The belt homography is re-fit against the pooled correspondences of all
/// views flagged flat-on-belt.
inline CalibrationResult calibrate_planar(const CalibrationSet& set) {
  const auto& views = set.views;
  if (views.size() < 3)
    throw ContractError("calibrate_planar: needs at least 3 views, got " +
                        std::to_string(views.size()));
  for (std::size_t v = 0; v < views.size(); ++v)
    if (views[v].points.size() < 4)
      throw ContractError("calibrate_planar: view " + std::to_string(v) +
                          " has fewer than 4 correspondences");

  std::vector<Mat3> hs;
  hs.reserve(views.size());
  double pixel_scale = 0.0;
  std::int64_t n_points = 0;
  for (const auto& view : views) {
    std::vector<PointPair> pairs;
    pairs.reserve(view.points.size());
    for (const auto& c : view.points) {
      pairs.push_back({c.board_mm, c.image_px});
      pixel_scale += std::abs(c.image_px.x()) + std::abs(c.image_px.y());
      n_points += 2;
    }
    hs.push_back(estimate_homography(pairs).h.matrix);
  }
  pixel_scale /= static_cast<double>(n_points);

  detail::PlanarParams params = detail::zhang_closed_form(hs, pixel_scale);
  params.poses.reserve(views.size());
  for (const auto& h : hs) params.poses.push_back(detail::pose_from_homography(params, h));

  CalibrationResult result;
  result.initial_rms_px = detail::reprojection_rms(params, views);

  // Staged refinement; later stages release the distortion coefficients.
  const auto residual_for = [&](const std::vector<int>& active,
                                const Eigen::VectorXd& frozen) {
    return [&views, active, frozen](const Eigen::VectorXd& xa) {
      Eigen::VectorXd full = frozen;
      for (std::size_t i = 0; i < active.size(); ++i)
        full(active[i]) = xa(static_cast<Eigen::Index>(i));
      const auto p = detail::unpack_params(full, views.size());
      std::int64_t total = 0;
      for (const auto& v : views) total += static_cast<std::int64_t>(v.points.size());
      Eigen::VectorXd r(2 * total);
      Eigen::Index k = 0;
      for (std::size_t v = 0; v < views.size(); ++v) {
        const Mat3 rot = detail::rodrigues_to_matrix(p.poses[v].rotation);
        for (const auto& c : views[v].points) {
          const Vec2 d = detail::project_board_point(
                             p, rot, p.poses[v].translation, c.board_mm) -
                         c.image_px;
          r(k++) = d.x();
          r(k++) = d.y();
        }
      }
      return r;
    };
  };

  const int n_pose = static_cast<int>(6 * views.size());
  std::vector<std::vector<int>> stages;
  {
    std::vector<int> base{0, 1, 2, 3};
    for (int i = 0; i < n_pose; ++i) base.push_back(8 + i);
    stages.push_back(base);                     // intrinsics + poses
    base.insert(base.begin() + 4, {4, 5});      // + k1 k2
    stages.push_back(base);
    base.insert(base.begin() + 6, {6, 7});      // + p1 p2
    stages.push_back(base);
  }

  Eigen::VectorXd full = detail::pack_params(params);
  for (const auto& active : stages) {
    Eigen::VectorXd xa(static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i)
      xa(static_cast<Eigen::Index>(i)) = full(active[i]);
    LmOptions opts;
    opts.max_iterations = 60;
    const auto lm = lm_minimize(residual_for(active, full), xa, opts);
    for (std::size_t i = 0; i < active.size(); ++i)
      full(active[i]) = lm.x(static_cast<Eigen::Index>(i));
  }
  params = detail::unpack_params(full, views.size());
  result.refined_rms_px = detail::reprojection_rms(params, views);

  {
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
      const Mat3 rot = detail::rodrigues_to_matrix(params.poses[v].rotation);
      for (const auto& c : views[v].points) {
        sum += (detail::project_board_point(params, rot,
                                            params.poses[v].translation,
                                            c.board_mm) -
                c.image_px)
                   .norm();
        ++n;
      }
    }
    result.mean_reprojection_px = sum / static_cast<double>(n);
  }

  CameraModel camera;
  camera.fx = params.fx;
  camera.fy = params.fy;
  camera.cx = params.cx;
  camera.cy = params.cy;
  camera.skew = 0.0;
  camera.distortion = params.dist;

  // Belt plane: pool the flat-on-belt views and fit undistorted px -> mm.
  std::vector<PointPair> belt_pairs;
  for (const auto& view : views) {
    if (!view.flat_on_belt) continue;
    for (const auto& c : view.points)
      belt_pairs.push_back({camera.undistort_pixel(c.image_px), c.board_mm});
  }
  if (belt_pairs.empty())
    throw ContractError("calibrate_planar: no view is flagged flat_on_belt");
  auto belt = estimate_homography(belt_pairs);
  belt = refine_homography(belt.h, belt_pairs);
  camera.belt_from_pixel = belt.h;
  result.belt_fit_rms_mm = belt.rms_transfer_px;  // source px, target mm

  result.camera = camera;
  result.poses = params.poses;
  return result;
}

// ---------------------------------------------------------------------------
// Calibration file I/O
// ---------------------------------------------------------------------------

inline CalibrationSet calibration_from_json(const nlohmann::json& j) {
  try {
    CalibrationSet set;
    const auto& b = j.at("board");
    set.board.square_size_mm = b.at("square_size_mm").get<double>();
    set.board.rows = b.at("rows").get<int>();
    set.board.cols = b.at("cols").get<int>();
    if (set.board.square_size_mm <= 0.0 || set.board.rows < 2 ||
        set.board.cols < 2)
      throw ParseError("calibration file: invalid board spec");

    for (const auto& vj : j.at("views")) {
      PlanarView view;
      view.flat_on_belt = vj.value("flat_on_belt", false);
      for (const auto& pj : vj.at("points")) {
        Correspondence c;
        c.image_px = {pj.at("image_xy").at(0).get<double>(),
                      pj.at("image_xy").at(1).get<double>()};
        c.board_mm = {pj.at("board_xy").at(0).get<double>(),
                      pj.at("board_xy").at(1).get<double>()};
        view.points.push_back(c);
      }
      if (view.points.size() < 4)
        throw ParseError("calibration file: view with fewer than 4 points");
      set.views.push_back(std::move(view));
    }

    // Board points must sit on the declared grid.
    const double pitch = set.board.square_size_mm;
    for (const auto& view : set.views) {
      const Vec2 origin = view.points.front().board_mm;
      for (const auto& c : view.points) {
        const Vec2 rel = (c.board_mm - origin) / pitch;
        if (std::abs(rel.x() - std::round(rel.x())) > 1e-6 ||
            std::abs(rel.y() - std::round(rel.y())) > 1e-6)
          throw ContractError(
              "calibration file: board points are off the declared grid pitch");
      }
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("calibration file: ") + e.what());
  }
}

inline nlohmann::json calibration_to_json(const CalibrationSet& set) {
  nlohmann::json j;
  j["board"] = {{"square_size_mm", set.board.square_size_mm},
                {"rows", set.board.rows},
                {"cols", set.board.cols}};
  nlohmann::json views = nlohmann::json::array();
  for (const auto& view : set.views) {
    nlohmann::json vj;
    vj["flat_on_belt"] = view.flat_on_belt;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& c : view.points)
      pts.push_back({{"image_xy", {c.image_px.x(), c.image_px.y()}},
                     {"board_xy", {c.board_mm.x(), c.board_mm.y()}}});
    vj["points"] = pts;
    views.push_back(vj);
  }
  j["views"] = views;
  return j;
}

inline CalibrationSet load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open calibration file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return calibration_from_json(j);
}

inline void save_calibration(const CalibrationSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write calibration file: " + path);
  out << calibration_to_json(set).dump(2) << '\n';
}

}  // namespace fishlen
