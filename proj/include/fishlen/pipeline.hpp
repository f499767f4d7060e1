#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fishlen/camera.hpp"
#include "fishlen/centerline.hpp"
#include "fishlen/dataset.hpp"
#include "fishlen/error.hpp"
#include "fishlen/hull.hpp"
#include "fishlen/mask.hpp"
#include "fishlen/skeleton.hpp"

namespace fishlen {

struct SklOptions {
  double confidence_threshold = 0.9;
  double sample_step_px = 1.0;
  int threads = 0;  // 0 = hardware concurrency
};

struct SklRun {
  std::vector<LengthEstimate> estimates;
  std::vector<std::string> warnings;
  int skipped = 0;
};

/// Skeleton -> polynomial centerline -> mapped arc length for one mask.
/// An isotropic principal axis falls back to the longer side of the mask's
/// bounding box and is flagged. The pipeline runs on the bounding-box crop;
/// full-frame masks are mostly background.
inline LengthEstimate estimate_mask_length(const BinaryMask& mask,
                                           const CameraModel& camera,
                                           double sample_step_px = 1.0) {
  int x0, y0, x1, y1;
  if (!mask.bounding_box(x0, y0, x1, y1))
    throw ContractError("estimate_mask_length: empty mask");

  // One-pixel border so thinning neighborhoods stay in range.
  BinaryMask crop(x1 - x0 + 3, y1 - y0 + 3);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (mask.at(x, y)) crop.set(x - x0 + 1, y - y0 + 1);
  const Vec2 offset(x0 - 1, y0 - 1);

  const auto axis = principal_axis(crop);
  double angle = axis.angle;
  std::vector<std::string> extra_flags;
  if (axis.isotropic) {
    angle = (x1 - x0) >= (y1 - y0) ? 0.0 : M_PI / 2.0;
    extra_flags.push_back("axis_isotropic_fallback");
  }

  const Skeleton skeleton = skeletonize(crop);
  const ConvexHull hull = convex_hull(crop);
  const Vec2 centroid = mask_centroid(crop);

  CenterlineFit fit = fit_centerline(skeleton, hull, angle, centroid);
  fit.center += offset;  // back to full-image pixel coordinates
  for (const auto& f : extra_flags) fit.flags.push_back(f);
  return estimate_length(fit, camera, sample_step_px);
}

namespace detail {

template <typename Work>
inline void parallel_for(std::size_t n, int threads, Work&& work) {
  unsigned int t = threads > 0 ? static_cast<unsigned int>(threads)
                               : std::thread::hardware_concurrency();
  t = std::max(1u, std::min(t, static_cast<unsigned int>(n ? n : 1)));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (unsigned int w = 0; w < t; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        work(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline const CameraModel& camera_for_image(
    const DatasetIndex& index, const std::map<int, CameraModel>& cameras,
    int image_id) {
  const ImageRecord* image = index.find_image(image_id);
  if (!image)
    throw ContractError("run_skl: unknown image id " + std::to_string(image_id));
  const auto it = cameras.find(image->group);
  if (it == cameras.end())
    throw ContractError("run_skl: missing camera for group " +
                        std::to_string(image->group));
  return it->second;
}

}  // namespace detail

/// Ground-truth mode: one estimate per instance, multi-segment masks unioned
/// at rasterization. Results are ordered by (image id, fish id).
inline SklRun run_skl(const DatasetIndex& index,
                      const std::map<int, CameraModel>& cameras,
                      const SklOptions& options = {}) {
  for (const auto& im : index.images)
    if (!cameras.count(im.group))
      throw ContractError("run_skl: missing camera for group " +
                          std::to_string(im.group));

  SklRun run;
  const std::size_t n = index.instances.size();
  std::vector<std::optional<LengthEstimate>> slots(n);
  std::vector<std::string> errors(n);

  detail::parallel_for(n, options.threads, [&](std::size_t i) {
    const auto& inst = index.instances[i];
    const ImageRecord* image = index.find_image(inst.image_id);
    const CameraModel& camera =
        detail::camera_for_image(index, cameras, inst.image_id);
    try {
      const BinaryMask mask =
          rasterize(inst.segmentation, image->width, image->height);
      LengthEstimate est =
          estimate_mask_length(mask, camera, options.sample_step_px);
      est.image_id = inst.image_id;
      est.fish_id = inst.fish_id;
      slots[i] = std::move(est);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      run.estimates.push_back(std::move(*slots[i]));
    } else {
      ++run.skipped;
      run.warnings.push_back(
          "instance (image " + std::to_string(index.instances[i].image_id) +
          ", fish " + std::to_string(index.instances[i].fish_id) +
          ") skipped: " + errors[i]);
    }
  }
  std::sort(run.estimates.begin(), run.estimates.end(),
            [](const LengthEstimate& a, const LengthEstimate& b) {
              return a.image_id != b.image_id ? a.image_id < b.image_id
                                              : a.fish_id < b.fish_id;
            });
  return run;
}

/// Prediction mode: estimates for predictions at or above the confidence
/// threshold. Results keep the prediction's index and are ordered by
/// (image id, prediction index).
inline SklRun run_skl(const DatasetIndex& index,
                      const std::vector<Prediction>& predictions,
                      const std::map<int, CameraModel>& cameras,
                      const SklOptions& options = {}) {
  for (const auto& im : index.images)
    if (!cameras.count(im.group))
      throw ContractError("run_skl: missing camera for group " +
                          std::to_string(im.group));

  std::vector<std::size_t> retained;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i].confidence >= options.confidence_threshold)
      retained.push_back(i);

  SklRun run;
  if (retained.empty()) {
    run.warnings.push_back(
        "no predictions at or above the confidence threshold");
    return run;
  }

  const std::size_t n = retained.size();
  std::vector<std::optional<LengthEstimate>> slots(n);
  std::vector<std::string> errors(n);

  detail::parallel_for(n, options.threads, [&](std::size_t i) {
    const auto& pred = predictions[retained[i]];
    const ImageRecord* image = index.find_image(pred.image_id);
    const CameraModel& camera =
        detail::camera_for_image(index, cameras, pred.image_id);
    try {
      const BinaryMask mask =
          rasterize(pred.segmentation, image->width, image->height);
      LengthEstimate est =
          estimate_mask_length(mask, camera, options.sample_step_px);
      est.image_id = pred.image_id;
      est.pred_index = static_cast<int>(retained[i]);
      slots[i] = std::move(est);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      run.estimates.push_back(std::move(*slots[i]));
    } else {
      ++run.skipped;
      run.warnings.push_back(
          "prediction " + std::to_string(retained[i]) + " (image " +
          std::to_string(predictions[retained[i]].image_id) +
          ") skipped: " + errors[i]);
    }
  }
  std::sort(run.estimates.begin(), run.estimates.end(),
            [](const LengthEstimate& a, const LengthEstimate& b) {
              return a.image_id != b.image_id ? a.image_id < b.image_id
                                              : a.pred_index < b.pred_index;
            });
  return run;
}

// ---------------------------------------------------------------------------
// Length output file
// ---------------------------------------------------------------------------

inline nlohmann::json length_estimates_to_json(
    const std::vector<LengthEstimate>& estimates,
    const std::string& method = "skl") {
  auto root = nlohmann::json::array();
  for (const auto& e : estimates) {
    nlohmann::json j;
    j["image_id"] = e.image_id;
    j["fish_id"] = e.fish_id;
    j["method"] = method;
    j["length_mm"] = e.length_mm;
    j["flags"] = e.flags;
    if (e.pred_index >= 0) j["pred_index"] = e.pred_index;
    root.push_back(j);
  }
  return root;
}

inline std::vector<LengthEstimate> length_estimates_from_json(
    const nlohmann::json& root) {
  if (!root.is_array())
    throw ParseError("length file: top level must be an array");
  std::vector<LengthEstimate> out;
  try {
    for (const auto& j : root) {
      LengthEstimate e;
      e.image_id = j.at("image_id").get<int>();
      e.fish_id = j.at("fish_id").get<int>();
      e.length_mm = j.at("length_mm").get<double>();
      e.pred_index = j.value("pred_index", -1);
      if (j.contains("flags"))
        for (const auto& f : j.at("flags"))
          e.flags.push_back(f.get<std::string>());
      if (e.length_mm <= 0.0)
        throw ParseError("length file: non-positive length_mm");
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("length file: ") + e.what());
  }
  return out;
}

inline std::vector<LengthEstimate> load_length_estimates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open length file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return length_estimates_from_json(root);
}

inline void save_length_estimates(const std::vector<LengthEstimate>& estimates,
                                  const std::string& path,
                                  const std::string& method = "skl") {
  std::ofstream out(path);
  if (!out) throw Error("cannot write length file: " + path);
  out << length_estimates_to_json(estimates, method).dump(2) << '\n';
}

}  // namespace fishlen
