#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishlen/centerline.hpp"
#include "fishlen/dataset.hpp"
#include "fishlen/error.hpp"
#include "fishlen/mask.hpp"
#include "fishlen/rng.hpp"

namespace fishlen {

struct LengthPair {
  int image_id = 0;
  int fish_id = 0;
  double estimate_mm = 0.0;
  double gt_mm = 0.0;
};

struct MatchOutcome {
  std::vector<LengthPair> pairs;
  int unmatched_estimates = 0;
  int unmatched_gts = 0;
};

/// Ground-truth mode: pair every estimate with the instance of the same
/// (image, fish id).
inline MatchOutcome match_lengths(const std::vector<LengthEstimate>& estimates,
                                  const DatasetIndex& index) {
  std::map<std::pair<int, int>, double> gt;
  for (const auto& inst : index.instances)
    gt[{inst.image_id, inst.fish_id}] = static_cast<double>(inst.length_mm);

  MatchOutcome out;
  std::set<std::pair<int, int>> used;
  for (const auto& est : estimates) {
    const auto key = std::make_pair(est.image_id, est.fish_id);
    const auto it = gt.find(key);
    if (it == gt.end()) {
      ++out.unmatched_estimates;
      continue;
    }
    used.insert(key);
    out.pairs.push_back({est.image_id, est.fish_id, est.length_mm, it->second});
  }
  out.unmatched_gts = static_cast<int>(gt.size() - used.size());
  return out;
}

/// Prediction mode: estimates carry prediction indices; each retained
/// prediction is paired greedily (by confidence, then IoU, then input order)
/// with the unmatched ground-truth instance of highest mask IoU >= threshold.
inline MatchOutcome match_lengths(const std::vector<LengthEstimate>& estimates,
                                  const std::vector<Prediction>& predictions,
                                  const DatasetIndex& index,
                                  double iou_threshold = 0.5) {
  MatchOutcome out;

  std::map<int, std::vector<std::size_t>> est_by_image;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].pred_index < 0)
      throw ContractError(
          "match_lengths: estimate lacks a prediction index; use the "
          "ground-truth overload");
    est_by_image[estimates[i].image_id].push_back(i);
  }
  std::map<int, std::vector<std::size_t>> gt_by_image;
  for (std::size_t i = 0; i < index.instances.size(); ++i)
    gt_by_image[index.instances[i].image_id].push_back(i);

  for (const auto& [image_id, est_ids] : est_by_image) {
    const ImageRecord* image = index.find_image(image_id);
    if (!image)
      throw ContractError("match_lengths: estimates reference image " +
                          std::to_string(image_id) + " outside the index");
    const auto git = gt_by_image.find(image_id);
    const std::vector<std::size_t> empty;
    const auto& gt_ids = git == gt_by_image.end() ? empty : git->second;

    std::vector<BinaryMask> gt_masks;
    gt_masks.reserve(gt_ids.size());
    for (const std::size_t gi : gt_ids)
      gt_masks.push_back(rasterize(index.instances[gi].segmentation,
                                   image->width, image->height));

    struct Row {
      std::size_t est;
      double confidence;
      std::vector<double> ious;
      double best_iou = 0.0;
    };
    std::vector<Row> rows;
    for (const std::size_t ei : est_ids) {
      const auto& est = estimates[ei];
      if (est.pred_index >= static_cast<int>(predictions.size()))
        throw ContractError("match_lengths: prediction index out of range");
      const auto& pred = predictions[static_cast<std::size_t>(est.pred_index)];
      const BinaryMask pred_mask =
          rasterize(pred.segmentation, image->width, image->height);
      Row row;
      row.est = ei;
      row.confidence = pred.confidence;
      for (const auto& gm : gt_masks) {
        const double iou = mask_iou(pred_mask, gm);
        row.ious.push_back(iou);
        row.best_iou = std::max(row.best_iou, iou);
      }
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.best_iou != b.best_iou) return a.best_iou > b.best_iou;
      return a.est < b.est;
    });

    std::vector<char> gt_matched(gt_ids.size(), 0);
    for (const auto& row : rows) {
      std::size_t best_gt = gt_ids.size();
      double best = iou_threshold - 1e-12;
      for (std::size_t gi = 0; gi < gt_ids.size(); ++gi) {
        if (gt_matched[gi]) continue;
        if (row.ious[gi] > best) {
          best = row.ious[gi];
          best_gt = gi;
        }
      }
      if (best_gt == gt_ids.size()) {
        ++out.unmatched_estimates;
        continue;
      }
      gt_matched[best_gt] = 1;
      const auto& inst = index.instances[gt_ids[best_gt]];
      out.pairs.push_back({image_id, inst.fish_id,
                           estimates[row.est].length_mm,
                           static_cast<double>(inst.length_mm)});
    }
    for (const char m : gt_matched)
      if (!m) ++out.unmatched_gts;
  }

  // Ground truth in images without any estimate still counts as unmatched.
  for (const auto& [image_id, gt_ids] : gt_by_image)
    if (!est_by_image.count(image_id))
      out.unmatched_gts += static_cast<int>(gt_ids.size());
  return out;
}

// ---------------------------------------------------------------------------
// Length report
// ---------------------------------------------------------------------------

struct LengthReport {
  std::string regime;
  double mae_cm = 0.0;
  double mape_percent = 0.0;
  double mean_error_cm = 0.0;
  double std_error_cm = 0.0;
  double clip_cm = 5.0;
  double bin_cm = 0.25;
  std::vector<std::int64_t> histogram;  // signed error, outliers in outer bins
  std::vector<double> signed_errors_cm;
  std::int64_t n = 0;
};

enum class LengthUnit { Millimeters, Centimeters };

/// MAE/MAPE over unclipped errors; clipping affects only the histogram, where
/// out-of-range errors accumulate in the outer bins. Pairs are millimeters by
/// default; the unit flag accepts centimeter inputs instead.
inline LengthReport length_report(const std::vector<LengthPair>& pairs,
                                  double clip_cm = 5.0, double bin_cm = 0.25,
                                  LengthUnit unit = LengthUnit::Millimeters) {
  if (pairs.empty()) throw ContractError("length_report: no pairs");
  if (clip_cm <= 0.0 || bin_cm <= 0.0)
    throw ContractError("length_report: clip and bin width must be > 0");

  LengthReport r;
  r.clip_cm = clip_cm;
  r.bin_cm = bin_cm;
  r.n = static_cast<std::int64_t>(pairs.size());

  const int n_bins = std::max(1, static_cast<int>(std::lround(2.0 * clip_cm / bin_cm)));
  r.histogram.assign(static_cast<std::size_t>(n_bins), 0);

  const double to_cm = unit == LengthUnit::Millimeters ? 0.1 : 1.0;
  double abs_sum = 0.0, pct_sum = 0.0, sum = 0.0, sq_sum = 0.0;
  for (const auto& p : pairs) {
    const double err_cm = (p.estimate_mm - p.gt_mm) * to_cm;
    r.signed_errors_cm.push_back(err_cm);
    abs_sum += std::abs(err_cm);
    pct_sum += std::abs(p.estimate_mm - p.gt_mm) / p.gt_mm;
    sum += err_cm;
    sq_sum += err_cm * err_cm;

    int bin = static_cast<int>(std::floor((err_cm + clip_cm) / bin_cm));
    bin = std::clamp(bin, 0, n_bins - 1);
    ++r.histogram[static_cast<std::size_t>(bin)];
  }
  const double n = static_cast<double>(r.n);
  r.mae_cm = abs_sum / n;
  r.mape_percent = 100.0 * pct_sum / n;
  r.mean_error_cm = sum / n;
  r.std_error_cm = std::sqrt(std::max(0.0, sq_sum / n - r.mean_error_cm * r.mean_error_cm));
  return r;
}

inline nlohmann::json length_report_to_json(const LengthReport& r) {
  nlohmann::json j;
  j["regime"] = r.regime;
  j["n"] = r.n;
  j["mae_cm"] = r.mae_cm;
  j["mape_percent"] = r.mape_percent;
  j["mean_error_cm"] = r.mean_error_cm;
  j["std_error_cm"] = r.std_error_cm;
  j["clip_cm"] = r.clip_cm;
  j["bin_cm"] = r.bin_cm;
  j["histogram"] = r.histogram;
  return j;
}

inline std::string length_histogram_to_csv(const LengthReport& r) {
  std::string csv = "bin_left_cm,bin_right_cm,count\n";
  char buf[96];
  for (std::size_t i = 0; i < r.histogram.size(); ++i) {
    const double left = -r.clip_cm + static_cast<double>(i) * r.bin_cm;
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%lld\n", left, left + r.bin_cm,
                  static_cast<long long>(r.histogram[i]));
    csv += buf;
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Per-fish median aggregation
// ---------------------------------------------------------------------------

struct AggregationCurve {
  std::vector<int> n_values;
  std::vector<double> mae_cm;      // mean MAE over trials at each n
  std::vector<double> mae_std_cm;  // std of MAE over trials at each n
  int trials = 0;
  int fish_used = 0;
  int fish_excluded = 0;  // fewer samples than max(n_values)
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Re-computes the MAE using the median estimate per fish over `trials`
/// seeded random subsets of each size in `n_values`. Fish with fewer samples
/// than max(n_values) are excluded so the fish set is constant across n.
inline AggregationCurve aggregation_curve(
    const std::map<int, std::vector<double>>& estimates_by_fish,
    const std::map<int, double>& gt_by_fish, const std::vector<int>& n_values,
    int trials = 100, std::uint64_t seed = 0) {
  if (n_values.empty()) throw ContractError("aggregation_curve: empty n-values");
  if (trials < 1) throw ContractError("aggregation_curve: trials must be >= 1");
  int n_max = 0;
  for (const int n : n_values) {
    if (n < 1) throw ContractError("aggregation_curve: n-values must be >= 1");
    n_max = std::max(n_max, n);
  }

  struct FishPool {
    const std::vector<double>* estimates;
    double gt;
  };
  std::vector<FishPool> pool;
  AggregationCurve curve;
  curve.trials = trials;
  for (const auto& [fish_id, ests] : estimates_by_fish) {
    const auto git = gt_by_fish.find(fish_id);
    if (git == gt_by_fish.end())
      throw ContractError("aggregation_curve: no ground truth for fish " +
                          std::to_string(fish_id));
    if (static_cast<int>(ests.size()) < n_max) {
      ++curve.fish_excluded;
      continue;
    }
    pool.push_back({&ests, git->second});
  }
  curve.fish_used = static_cast<int>(pool.size());
  if (pool.empty())
    throw ContractError("aggregation_curve: no fish has enough samples");

  curve.n_values = n_values;
  for (const int n : n_values) {
    std::vector<double> maes;
    maes.reserve(static_cast<std::size_t>(trials));
    for (int trial = 0; trial < trials; ++trial) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n),
                          static_cast<std::uint64_t>(trial)));
      double abs_sum = 0.0;
      for (const auto& fish : pool) {
        const auto idx =
            rng.sample_indices(static_cast<int>(fish.estimates->size()), n);
        std::vector<double> subset;
        subset.reserve(idx.size());
        for (const int i : idx)
          subset.push_back((*fish.estimates)[static_cast<std::size_t>(i)]);
        abs_sum += std::abs(detail::median_of(std::move(subset)) - fish.gt) / 10.0;
      }
      maes.push_back(abs_sum / static_cast<double>(pool.size()));
    }
    double mean = 0.0;
    for (const double m : maes) mean += m;
    mean /= static_cast<double>(maes.size());
    double var = 0.0;
    for (const double m : maes) var += (m - mean) * (m - mean);
    var /= static_cast<double>(maes.size());
    curve.mae_cm.push_back(mean);
    curve.mae_std_cm.push_back(std::sqrt(var));
  }
  return curve;
}

inline nlohmann::json aggregation_curve_to_json(const AggregationCurve& c) {
  nlohmann::json j;
  j["n_values"] = c.n_values;
  j["mae_cm"] = c.mae_cm;
  j["mae_std_cm"] = c.mae_std_cm;
  j["trials"] = c.trials;
  j["fish_used"] = c.fish_used;
  j["fish_excluded"] = c.fish_excluded;
  return j;
}

inline std::string aggregation_curve_to_csv(const AggregationCurve& c) {
  std::string csv = "n,mae_cm,mae_std_cm\n";
  char buf[96];
  for (std::size_t i = 0; i < c.n_values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f\n", c.n_values[i], c.mae_cm[i],
                  c.mae_std_cm[i]);
    csv += buf;
  }
  return csv;
}

}  // namespace fishlen
