#pragma once

// Brute-force average-precision evaluator used as the oracle for the
// segmentation metrics: naive quadratic loops, no caching, no envelope
// shortcuts. Implements the same ranking and greedy matching rule as the
// library, spelled out independently.

#include <algorithm>
#include <vector>

#include "fishlen/eval_seg.hpp"
#include "fishlen/mask.hpp"

namespace fishlen::testing {

struct OracleResult {
  double map = 0.0;
  std::vector<std::pair<int, double>> per_class;  // (category, mean ap)
};

inline double oracle_ap_single(const std::vector<SegGtItem>& gts,
                               const std::vector<SegPredItem>& preds,
                               int category, double threshold) {
  std::vector<std::size_t> gt_ids;
  for (std::size_t i = 0; i < gts.size(); ++i)
    if (gts[i].category_id == category) gt_ids.push_back(i);
  if (gt_ids.empty()) return 0.0;

  std::vector<std::size_t> pred_ids;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].category_id == category) pred_ids.push_back(i);

  // Rank: confidence desc, then best-possible IoU desc, then input order.
  std::sort(pred_ids.begin(), pred_ids.end(),
            [&](std::size_t a, std::size_t b) {
              if (preds[a].confidence != preds[b].confidence)
                return preds[a].confidence > preds[b].confidence;
              double best_a = 0.0, best_b = 0.0;
              for (const std::size_t g : gt_ids) {
                if (gts[g].image_id == preds[a].image_id)
                  best_a = std::max(best_a, mask_iou(preds[a].mask, gts[g].mask));
                if (gts[g].image_id == preds[b].image_id)
                  best_b = std::max(best_b, mask_iou(preds[b].mask, gts[g].mask));
              }
              if (best_a != best_b) return best_a > best_b;
              return a < b;
            });

  std::vector<bool> taken(gt_ids.size(), false);
  std::vector<bool> is_tp;
  for (const std::size_t p : pred_ids) {
    int best_gt = -1;
    double best_iou = -1.0;
    for (std::size_t k = 0; k < gt_ids.size(); ++k) {
      if (taken[k]) continue;
      if (gts[gt_ids[k]].image_id != preds[p].image_id) continue;
      const double iou = mask_iou(preds[p].mask, gts[gt_ids[k]].mask);
      if (iou >= threshold - 1e-12 && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(k);
      }
    }
    if (best_gt >= 0) {
      taken[static_cast<std::size_t>(best_gt)] = true;
      is_tp.push_back(true);
    } else {
      is_tp.push_back(false);
    }
  }

  // 101-point interpolation directly from the definition: for each recall
  // level, the maximum precision among ranked prefixes reaching it.
  double ap = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = r / 100.0;
    double best_precision = 0.0;
    int tp = 0;
    for (std::size_t i = 0; i < is_tp.size(); ++i) {
      if (is_tp[i]) ++tp;
      const double recall = static_cast<double>(tp) / gt_ids.size();
      const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
      if (recall >= target - 1e-12)
        best_precision = std::max(best_precision, precision);
    }
    ap += best_precision;
  }
  return ap / 101.0;
}

inline OracleResult oracle_evaluate(const std::vector<SegGtItem>& gts,
                                    const std::vector<SegPredItem>& preds,
                                    const std::vector<double>& thresholds) {
  OracleResult result;
  std::vector<int> categories;
  for (const auto& g : gts)
    if (std::find(categories.begin(), categories.end(), g.category_id) ==
        categories.end())
      categories.push_back(g.category_id);
  std::sort(categories.begin(), categories.end());

  for (const int category : categories) {
    double sum = 0.0;
    for (const double t : thresholds)
      sum += oracle_ap_single(gts, preds, category, t);
    result.per_class.emplace_back(category, sum / thresholds.size());
  }
  for (const auto& [cat, ap] : result.per_class) result.map += ap;
  if (!result.per_class.empty()) result.map /= result.per_class.size();
  return result;
}

}  // namespace fishlen::testing
