#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishlen/dataset.hpp"
#include "fishlen/error.hpp"
#include "fishlen/mask.hpp"

namespace fishlen {

struct SegGtItem {
  int image_id = 0;
  int category_id = 0;
  BinaryMask mask;
};

struct SegPredItem {
  int image_id = 0;
  int category_id = 0;
  double confidence = 0.0;
  BinaryMask mask;
};

struct ClassSegMetrics {
  int category_id = 0;
  std::string name;
  std::vector<double> ap_per_threshold;
  double mean_ap = 0.0;
};

struct SegReport {
  std::vector<double> thresholds;
  std::vector<ClassSegMetrics> per_class;
  double overall_map = 0.0;
  // Diagnostics over matches at the loosest threshold (0.50).
  double mean_matched_iou = 0.0;
  double fraction_matched_above_09 = 0.0;
  std::vector<int> excluded_categories;  // requested but absent from gt
  std::int64_t n_gt = 0;
  std::int64_t n_pred = 0;
};

inline std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 9; ++i) t.push_back(0.50 + 0.05 * i);
  return t;
}

namespace detail {

/// 101-point interpolated average precision from ranked TP/FP flags.
inline double average_precision(const std::vector<char>& tp_flags,
                                std::int64_t n_gt) {
  if (n_gt == 0) return 0.0;
  const std::size_t n = tp_flags.size();
  std::vector<double> recall(n), precision(n);
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp_flags[i] ? ++tp : ++fp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  for (std::size_t i = n; i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double ap = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = static_cast<double>(r) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(),
                                     target - 1e-12);
    if (it != recall.end())
      ap += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return ap / 101.0;
}

}  // namespace detail

/// COCO-style greedy matching and AP over an IoU threshold sweep.
/// Predictions are ranked by confidence (ties: higher best-IoU, then input
/// order) and matched one-to-one to the unmatched same-class ground truth of
/// highest IoU at or above the threshold.
inline SegReport evaluate_segmentation(
    const std::vector<SegGtItem>& gts, const std::vector<SegPredItem>& preds,
    const std::vector<double>& thresholds = default_iou_thresholds()) {
  if (thresholds.empty())
    throw ContractError("evaluate_segmentation: empty threshold list");

  SegReport report;
  report.thresholds = thresholds;
  report.n_gt = static_cast<std::int64_t>(gts.size());
  report.n_pred = static_cast<std::int64_t>(preds.size());

  std::set<int> categories;
  for (const auto& g : gts) categories.insert(g.category_id);
  for (const auto& p : preds)
    if (!categories.count(p.category_id))
      report.excluded_categories.push_back(p.category_id);

  double matched_iou_sum = 0.0;
  std::int64_t matched_total = 0, matched_confident = 0;

  for (const int category : categories) {
    std::vector<std::size_t> gt_idx, pred_idx;
    for (std::size_t i = 0; i < gts.size(); ++i)
      if (gts[i].category_id == category) gt_idx.push_back(i);
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i].category_id == category) pred_idx.push_back(i);

    // IoU is only meaningful within one image; cache candidates per prediction.
    struct Candidate {
      std::size_t gt;  // position within gt_idx
      double iou;
    };
    std::vector<std::vector<Candidate>> candidates(pred_idx.size());
    std::vector<double> best_iou(pred_idx.size(), 0.0);
    for (std::size_t pi = 0; pi < pred_idx.size(); ++pi) {
      const auto& pred = preds[pred_idx[pi]];
      for (std::size_t gi = 0; gi < gt_idx.size(); ++gi) {
        const auto& gt = gts[gt_idx[gi]];
        if (gt.image_id != pred.image_id) continue;
        const double iou = mask_iou(pred.mask, gt.mask);
        if (iou > 0.0) candidates[pi].push_back({gi, iou});
        best_iou[pi] = std::max(best_iou[pi], iou);
      }
    }

    std::vector<std::size_t> order(pred_idx.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ca = preds[pred_idx[a]].confidence;
      const double cb = preds[pred_idx[b]].confidence;
      if (ca != cb) return ca > cb;
      if (best_iou[a] != best_iou[b]) return best_iou[a] > best_iou[b];
      return pred_idx[a] < pred_idx[b];
    });

    ClassSegMetrics metrics;
    metrics.category_id = category;
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      const double threshold = thresholds[ti];
      std::vector<char> gt_matched(gt_idx.size(), 0);
      std::vector<char> tp_flags;
      tp_flags.reserve(order.size());
      for (const std::size_t pi : order) {
        std::size_t best_gt = gt_idx.size();
        double best = threshold - 1e-12;
        for (const auto& c : candidates[pi]) {
          if (gt_matched[c.gt]) continue;
          if (c.iou > best) {
            best = c.iou;
            best_gt = c.gt;
          }
        }
        if (best_gt < gt_idx.size()) {
          gt_matched[best_gt] = 1;
          tp_flags.push_back(1);
          if (ti == 0) {  // diagnostics at the loosest threshold
            matched_iou_sum += best;
            ++matched_total;
            if (preds[pred_idx[pi]].confidence > 0.9) ++matched_confident;
          }
        } else {
          tp_flags.push_back(0);
        }
      }
      metrics.ap_per_threshold.push_back(
          detail::average_precision(tp_flags, static_cast<std::int64_t>(gt_idx.size())));
    }
    double sum = 0.0;
    for (const double ap : metrics.ap_per_threshold) sum += ap;
    metrics.mean_ap = sum / static_cast<double>(metrics.ap_per_threshold.size());
    report.per_class.push_back(std::move(metrics));
  }

  if (!report.per_class.empty()) {
    double sum = 0.0;
    for (const auto& c : report.per_class) sum += c.mean_ap;
    report.overall_map = sum / static_cast<double>(report.per_class.size());
  }
  if (matched_total > 0) {
    report.mean_matched_iou = matched_iou_sum / static_cast<double>(matched_total);
    report.fraction_matched_above_09 =
        static_cast<double>(matched_confident) / static_cast<double>(matched_total);
  }
  return report;
}

/// Rasterizes a dataset slice and its predictions, then evaluates.
inline SegReport evaluate_segmentation(const DatasetIndex& index,
                                       const std::vector<Prediction>& preds,
                                       const std::vector<double>& thresholds =
                                           default_iou_thresholds()) {
  std::vector<SegGtItem> gt_items;
  gt_items.reserve(index.instances.size());
  for (const auto& inst : index.instances) {
    const ImageRecord* image = index.find_image(inst.image_id);
    gt_items.push_back({inst.image_id, inst.category_id,
                        rasterize(inst.segmentation, image->width, image->height)});
  }
  std::vector<SegPredItem> pred_items;
  pred_items.reserve(preds.size());
  for (const auto& p : preds) {
    const ImageRecord* image = index.find_image(p.image_id);
    if (!image) continue;  // prediction outside the selected slice
    pred_items.push_back({p.image_id, p.category_id, p.confidence,
                          rasterize(p.segmentation, image->width, image->height)});
  }

  SegReport report = evaluate_segmentation(gt_items, pred_items, thresholds);
  for (auto& c : report.per_class)
    if (const Category* cat = index.find_category(c.category_id)) c.name = cat->name;
  return report;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline nlohmann::json seg_report_to_json(const SegReport& r) {
  nlohmann::json j;
  j["thresholds"] = r.thresholds;
  auto classes = nlohmann::json::array();
  for (const auto& c : r.per_class) {
    nlohmann::json cj;
    cj["category_id"] = c.category_id;
    cj["name"] = c.name;
    cj["ap_per_threshold"] = c.ap_per_threshold;
    cj["map"] = c.mean_ap;
    classes.push_back(cj);
  }
  j["per_class"] = classes;
  j["overall_map"] = r.overall_map;
  j["mean_matched_iou"] = r.mean_matched_iou;
  j["fraction_matched_above_09"] = r.fraction_matched_above_09;
  j["excluded_categories"] = r.excluded_categories;
  j["n_gt"] = r.n_gt;
  j["n_pred"] = r.n_pred;
  return j;
}

/// Flat class-by-threshold grid for plotting.
inline std::string seg_report_to_csv(const SegReport& r) {
  std::string csv = "class";
  char buf[64];
  for (const double t : r.thresholds) {
    std::snprintf(buf, sizeof(buf), ",%.2f", t);
    csv += buf;
  }
  csv += ",mAP\n";
  for (const auto& c : r.per_class) {
    csv += c.name.empty() ? std::to_string(c.category_id) : c.name;
    for (const double ap : c.ap_per_threshold) {
      std::snprintf(buf, sizeof(buf), ",%.9f", ap);
      csv += buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.9f\n", c.mean_ap);
    csv += buf;
  }
  return csv;
}

}  // namespace fishlen
