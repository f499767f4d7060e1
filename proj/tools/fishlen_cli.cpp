// Command-line front end: synthetic dataset generation, per-group planar
// calibration, skeleton-based length estimation, and the segmentation /
// length evaluation protocols. All subcommands validate their inputs fully
// before writing any output and are deterministic given (inputs, seed).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fishlen/fishlen.hpp"

namespace fs = std::filesystem;
using namespace fishlen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;    // parse/contract errors
constexpr int kExitNumeric = 3;  // numerical failures

struct PendingFile {
  fs::path path;
  std::string content;
};

/// Collects outputs in memory; nothing touches the filesystem until commit().
class OutputSet {
public:
  explicit OutputSet(bool force) : force_(force) {}

  void add(const fs::path& path, std::string content) {
    files_.push_back({path, std::move(content)});
  }

  void commit() {
    for (const auto& f : files_)
      if (!force_ && fs::exists(f.path))
        throw ContractError("refusing to overwrite existing output " +
                            f.path.string() + " (use --force)");
    for (const auto& f : files_) {
      if (f.path.has_parent_path()) fs::create_directories(f.path.parent_path());
      std::ofstream out(f.path);
      if (!out) throw Error("cannot write " + f.path.string());
      out << f.content;
    }
  }

private:
  bool force_;
  std::vector<PendingFile> files_;
};

std::set<int> parse_group_list(const std::string& csv) {
  std::set<int> groups;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      groups.insert(std::stoi(tok));
    } catch (const std::exception&) {
      throw ContractError("bad group number: '" + tok + "'");
    }
  }
  if (groups.empty()) throw ContractError("empty group list");
  return groups;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

std::string group_file_name(const char* stem, int group) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_group_%02d.json", stem, group);
  return buf;
}

DatasetIndex load_and_report(const std::string& path) {
  DatasetIndex index = load_dataset(path);
  std::set<std::string> names;
  for (const auto& c : index.categories) names.insert(c.name);
  std::cout << "loaded " << index.images.size() << " images, "
            << index.instances.size() << " instances, " << names.size()
            << " categories from " << path << "\n";
  return index;
}

DatasetIndex apply_selection(const DatasetIndex& index,
                             const std::optional<std::string>& groups_csv,
                             const std::string& regime_str) {
  const Regime regime = regime_from_string(regime_str);
  std::set<int> groups;
  if (groups_csv) {
    groups = parse_group_list(*groups_csv);
  } else {
    for (const auto& [g, ids] : index.groups) groups.insert(g);
  }
  return select(index, groups, regime);
}

std::map<int, CameraModel> load_cameras_for(const DatasetIndex& index,
                                            const fs::path& camera_dir) {
  std::map<int, CameraModel> cameras;
  for (const auto& [group, ids] : index.groups) {
    const fs::path path = camera_dir / group_file_name("camera", group);
    if (!fs::exists(path))
      throw ContractError("missing camera for group " + std::to_string(group) +
                          " (expected " + path.string() + ")");
    cameras[group] = load_camera(path.string());
  }
  return cameras;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const std::string& input_dir, const std::string& out_dir,
                  bool force) {
  const std::regex pattern(R"(calibration_group_(\d+)\.json)");
  std::vector<std::pair<int, fs::path>> inputs;
  if (!fs::is_directory(input_dir))
    throw ContractError("calibrate: --input must be a directory of "
                        "calibration_group_NN.json files");
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern))
      inputs.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  if (inputs.empty())
    throw ContractError("calibrate: no calibration_group_NN.json files in " +
                        input_dir);
  std::sort(inputs.begin(), inputs.end());

  OutputSet outputs(force);
  for (const auto& [group, path] : inputs) {
    CalibrationSet set;
    try {
      set = load_calibration(path.string());
      bool has_flat = false;
      for (const auto& v : set.views) has_flat |= v.flat_on_belt;
      if (!has_flat)
        throw ContractError("group " + std::to_string(group) +
                            ": no view is flagged flat_on_belt");
      const CalibrationResult result = calibrate_planar(set);
      std::cout << "group " << group << ": reprojection rms "
                << result.refined_rms_px << " px (closed-form "
                << result.initial_rms_px << " px), belt fit rms "
                << result.belt_fit_rms_mm << " mm\n";
      outputs.add(fs::path(out_dir) / group_file_name("camera", group),
                  camera_to_json(result.camera).dump(2) + "\n");
    } catch (const Error& e) {
      throw ContractError("group " + std::to_string(group) + ": " + e.what());
    }
  }
  outputs.commit();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// skl
// ---------------------------------------------------------------------------

int cmd_skl(const std::string& annotations, const std::string& predictions,
            const std::string& camera_dir,
            const std::optional<std::string>& groups, const std::string& regime,
            double conf_threshold, int threads, const std::string& out_file,
            bool force) {
  const DatasetIndex full = load_and_report(annotations);
  const DatasetIndex index = apply_selection(full, groups, regime);
  const auto cameras = load_cameras_for(index, camera_dir);

  SklOptions options;
  options.confidence_threshold = conf_threshold;
  options.threads = threads;

  SklRun run;
  if (predictions.empty()) {
    run = run_skl(index, cameras, options);
  } else {
    const auto preds = load_predictions(predictions, full);
    std::vector<Prediction> sliced;
    for (const auto& p : preds)
      if (index.find_image(p.image_id)) sliced.push_back(p);
    run = run_skl(index, sliced, cameras, options);
  }
  for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";

  OutputSet outputs(force);
  outputs.add(out_file, length_estimates_to_json(run.estimates).dump(2) + "\n");
  outputs.commit();

  std::cout << "estimated " << run.estimates.size() << " lengths ("
            << run.skipped << " skipped)\n";
  if (predictions.empty() && !run.estimates.empty()) {
    const auto matched = match_lengths(run.estimates, index);
    if (!matched.pairs.empty()) {
      const auto report = length_report(matched.pairs);
      std::printf("MAE %.3f cm, MAPE %.2f%% over %lld instances\n",
                  report.mae_cm, report.mape_percent,
                  static_cast<long long>(report.n));
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-seg
// ---------------------------------------------------------------------------

int cmd_eval_seg(const std::string& annotations, const std::string& predictions,
                 const std::optional<std::string>& groups,
                 const std::string& regime, const std::string& out_dir,
                 bool force) {
  const DatasetIndex full = load_and_report(annotations);
  const DatasetIndex index = apply_selection(full, groups, regime);
  const auto preds = load_predictions(predictions, full);
  std::vector<Prediction> sliced;
  for (const auto& p : preds)
    if (index.find_image(p.image_id)) sliced.push_back(p);

  const SegReport report = evaluate_segmentation(index, sliced);

  OutputSet outputs(force);
  outputs.add(fs::path(out_dir) / "seg_report.json",
              seg_report_to_json(report).dump(2) + "\n");
  outputs.add(fs::path(out_dir) / "seg_report.csv", seg_report_to_csv(report));
  outputs.commit();

  std::printf("mAP %.4f over %zu classes (%lld gt, %lld predictions)\n",
              report.overall_map, report.per_class.size(),
              static_cast<long long>(report.n_gt),
              static_cast<long long>(report.n_pred));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-len
// ---------------------------------------------------------------------------

int cmd_eval_len(const std::string& annotations, const std::string& lengths,
                 const std::string& predictions,
                 const std::optional<std::string>& groups,
                 const std::string& regime, double clip_cm, double bin_cm,
                 const std::string& agg_samples, int trials,
                 std::uint64_t seed, const std::string& out_dir, bool force) {
  const DatasetIndex full = load_and_report(annotations);
  const DatasetIndex index = apply_selection(full, groups, regime);

  auto estimates = load_length_estimates(lengths);
  std::erase_if(estimates, [&](const LengthEstimate& e) {
    return index.find_image(e.image_id) == nullptr;
  });
  if (estimates.empty())
    throw ContractError("eval-len: no estimates fall inside the selection");

  const bool pd_mode =
      std::any_of(estimates.begin(), estimates.end(),
                  [](const LengthEstimate& e) { return e.pred_index >= 0; });
  MatchOutcome matched;
  if (pd_mode) {
    if (predictions.empty())
      throw ContractError(
          "eval-len: length file carries prediction indices; --predictions "
          "is required for mask matching");
    const auto preds = load_predictions(predictions, full);
    matched = match_lengths(estimates, preds, index);
  } else {
    matched = match_lengths(estimates, index);
  }
  if (matched.pairs.empty())
    throw ContractError("eval-len: no estimate/ground-truth pairs matched");

  LengthReport report = length_report(matched.pairs, clip_cm, bin_cm);
  report.regime = regime;

  OutputSet outputs(force);
  nlohmann::json rj = length_report_to_json(report);
  rj["unmatched_estimates"] = matched.unmatched_estimates;
  rj["unmatched_gts"] = matched.unmatched_gts;
  outputs.add(fs::path(out_dir) / "length_report.json", rj.dump(2) + "\n");
  outputs.add(fs::path(out_dir) / "length_histogram.csv",
              length_histogram_to_csv(report));

  // Per-fish median aggregation over the matched pairs.
  std::map<int, std::vector<double>> by_fish;
  std::map<int, double> gt_by_fish;
  for (const auto& p : matched.pairs) {
    by_fish[p.fish_id].push_back(p.estimate_mm);
    gt_by_fish[p.fish_id] = p.gt_mm;
  }
  const std::vector<int> n_values = parse_int_list(agg_samples);
  bool curve_written = false;
  try {
    const AggregationCurve curve =
        aggregation_curve(by_fish, gt_by_fish, n_values, trials, seed);
    outputs.add(fs::path(out_dir) / "aggregation_curve.json",
                aggregation_curve_to_json(curve).dump(2) + "\n");
    outputs.add(fs::path(out_dir) / "aggregation_curve.csv",
                aggregation_curve_to_csv(curve));
    curve_written = true;
  } catch (const ContractError& e) {
    std::cerr << "warning: aggregation curve skipped: " << e.what() << "\n";
  }
  outputs.commit();

  std::printf("MAE %.3f cm, MAPE %.2f%% over %lld pairs (%d estimates, %d gts "
              "unmatched)%s\n",
              report.mae_cm, report.mape_percent,
              static_cast<long long>(report.n), matched.unmatched_estimates,
              matched.unmatched_gts,
              curve_written ? "" : "; aggregation curve skipped");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthCliOptions {
  int n_groups = 2;
  int images_per_set = 2;
  int fish_min = 6;
  int fish_max = 8;
  double overlap_target = 0.3;
  double min_length_mm = 150.0;
  double max_length_mm = 600.0;
  double fork_probability = 0.5;
  int image_width = 2464;
  int image_height = 2056;
  double belt_w_mm = 980.0;
  double belt_h_mm = 800.0;
  double k1 = -0.1;
  double k2 = 0.0;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthCliOptions& opt, const std::string& out_dir,
              bool force) {
  if (opt.fish_min < 2 || opt.fish_max < opt.fish_min)
    throw ContractError("synth: need fish-min >= 2 and fish-max >= fish-min");

  OutputSet outputs(force);
  DatasetIndex index;
  index.categories.push_back({1, "fish"});
  std::string truth_csv = "image_id,fish_id,length_mm_true,visible_fraction\n";

  int next_image_id = 1;
  for (int group = 1; group <= opt.n_groups; ++group) {
    Rng group_rng(derive_seed(opt.seed, 0x6807, static_cast<std::uint64_t>(group)));

    Distortion dist;
    dist.k1 = opt.k1;
    dist.k2 = opt.k2;
    const SynthCamera camera = make_synth_camera(
        opt.belt_w_mm, opt.belt_h_mm, opt.image_width, opt.image_height,
        1500.0, dist, group_rng.uniform(-0.4, 0.4),
        group_rng.uniform(-0.4, 0.4));

    const CalibrationSet calib = generate_calibration_views(
        camera, 20, derive_seed(opt.seed, 0xca1, static_cast<std::uint64_t>(group)),
        {BoardSpec{}, opt.belt_w_mm, opt.belt_h_mm, opt.image_width,
         opt.image_height});
    outputs.add(fs::path(out_dir) / "calibration" /
                    group_file_name("calibration", group),
                calibration_to_json(calib).dump() + "\n");

    const int n_fish = group_rng.uniform_int(opt.fish_min, opt.fish_max);
    std::vector<SynthFishSpec> fish;
    FishRandomization ranges;
    ranges.min_length_mm = opt.min_length_mm;
    ranges.max_length_mm = opt.max_length_mm;
    ranges.fork_probability = opt.fork_probability;
    for (int k = 0; k < n_fish; ++k)
      fish.push_back(make_random_fish(group_rng, group * 1000 + k + 1, ranges));

    const int half = n_fish / 2;
    const std::vector<SynthFishSpec> set1(fish.begin(), fish.begin() + half);
    const std::vector<SynthFishSpec> set2(fish.begin() + half, fish.end());

    struct SetPlan {
      SetKind kind;
      const std::vector<SynthFishSpec>* fish;
      OcclusionMode mode;
    };
    const SetPlan plans[3] = {{SetKind::Set1, &set1, OcclusionMode::None},
                              {SetKind::Set2, &set2, OcclusionMode::None},
                              {SetKind::All, &fish, OcclusionMode::Overlapping}};

    for (const auto& plan : plans) {
      for (int shot = 0; shot < opt.images_per_set; ++shot) {
        SynthSceneSpec scene;
        scene.belt_w_mm = opt.belt_w_mm;
        scene.belt_h_mm = opt.belt_h_mm;
        scene.image_width = opt.image_width;
        scene.image_height = opt.image_height;
        scene.camera = camera;
        scene.fish = *plan.fish;
        scene.occlusion = plan.mode;
        scene.overlap_target = opt.overlap_target;

        // Placement can fail for crowded scenes; retry on derived seeds.
        SceneResult result;
        bool placed = false;
        std::string last_error;
        for (int attempt = 0; attempt < 8 && !placed; ++attempt) {
          scene.seed = derive_seed(
              opt.seed,
              static_cast<std::uint64_t>(group * 100 + static_cast<int>(plan.kind)),
              static_cast<std::uint64_t>(shot * 16 + attempt));
          try {
            result = generate_scene(scene);
            placed = true;
          } catch (const ContractError& e) {
            last_error = e.what();
          }
        }
        if (!placed)
          throw ContractError("synth: group " + std::to_string(group) +
                              " scene failed: " + last_error);

        ImageRecord image;
        image.id = next_image_id++;
        image.width = opt.image_width;
        image.height = opt.image_height;
        image.group = group;
        image.set = plan.kind;
        {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "synthetic_%05d.png", image.id);
          image.file_name = buf;
        }
        index.groups[group].push_back(image.id);
        index.images.push_back(image);
        for (auto inst : result.instances) {
          inst.image_id = image.id;
          index.instances.push_back(std::move(inst));
        }
        for (const auto& row : result.truth) {
          char buf[128];
          std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f\n", image.id,
                        row.fish_id, row.length_mm_true, row.visible_fraction);
          truth_csv += buf;
        }
      }
    }
    std::cout << "group " << group << ": " << n_fish << " fish, "
              << 3 * opt.images_per_set << " images\n";
  }

  outputs.add(fs::path(out_dir) / "annotations.json",
              dataset_to_json(index).dump() + "\n");
  outputs.add(fs::path(out_dir) / "truth.csv", truth_csv);
  outputs.commit();
  std::cout << "wrote synthetic dataset: " << index.images.size() << " images, "
            << index.instances.size() << " instances\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conveyor-belt fish length estimation and evaluation toolkit"};
  app.require_subcommand(1);

  // calibrate
  auto* calibrate = app.add_subcommand(
      "calibrate", "Fit per-group camera models from checkerboard views");
  std::string cal_input, cal_out;
  bool cal_force = false;
  calibrate->add_option("--input", cal_input, "Directory of calibration files")
      ->required();
  calibrate->add_option("--out", cal_out, "Output directory")->required();
  calibrate->add_flag("--force", cal_force, "Overwrite existing outputs");

  // skl
  auto* skl = app.add_subcommand(
      "skl", "Skeleton-based length estimation over masks");
  std::string skl_ann, skl_pred, skl_cam, skl_out, skl_regime = "combined";
  std::optional<std::string> skl_groups;
  double skl_conf = 0.9;
  int skl_threads = 0;
  bool skl_force = false;
  skl->add_option("--annotations", skl_ann, "Annotation file")->required();
  skl->add_option("--predictions", skl_pred,
                  "Prediction file (omit to use ground-truth masks)");
  skl->add_option("--cameras", skl_cam, "Directory of camera files")->required();
  skl->add_option("--groups", skl_groups, "Comma-separated group numbers");
  skl->add_option("--regime", skl_regime, "separated|touching|combined");
  skl->add_option("--conf-threshold", skl_conf, "Prediction confidence cut")
      ->check(CLI::Range(0.0, 1.0));
  skl->add_option("--threads", skl_threads, "Worker threads (0 = all)");
  skl->add_option("--out", skl_out, "Output length file")->required();
  skl->add_flag("--force", skl_force, "Overwrite existing outputs");

  // eval-seg
  auto* eseg = app.add_subcommand("eval-seg",
                                  "Instance segmentation mAP evaluation");
  std::string es_ann, es_pred, es_out, es_regime = "combined";
  std::optional<std::string> es_groups;
  bool es_force = false;
  eseg->add_option("--annotations", es_ann, "Annotation file")->required();
  eseg->add_option("--predictions", es_pred, "Prediction file")->required();
  eseg->add_option("--groups", es_groups, "Comma-separated group numbers");
  eseg->add_option("--regime", es_regime, "separated|touching|combined");
  eseg->add_option("--out", es_out, "Output directory")->required();
  eseg->add_flag("--force", es_force, "Overwrite existing outputs");

  // eval-len
  auto* elen = app.add_subcommand("eval-len",
                                  "Length MAE/MAPE and aggregation curves");
  std::string el_ann, el_len, el_pred, el_out, el_regime = "combined";
  std::optional<std::string> el_groups;
  double el_clip = 5.0, el_bin = 0.25;
  std::string el_samples = "1,2,3,4,5,10,15,20,25,30,35,40";
  int el_trials = 100;
  std::uint64_t el_seed = 0;
  bool el_force = false;
  elen->add_option("--annotations", el_ann, "Annotation file")->required();
  elen->add_option("--lengths", el_len, "Length estimate file")->required();
  elen->add_option("--predictions", el_pred,
                   "Prediction file (needed when lengths reference predictions)");
  elen->add_option("--groups", el_groups, "Comma-separated group numbers");
  elen->add_option("--regime", el_regime, "separated|touching|combined");
  elen->add_option("--clip-cm", el_clip, "Histogram clip bound (cm)")
      ->check(CLI::PositiveNumber);
  elen->add_option("--bin-cm", el_bin, "Histogram bin width (cm)");
  elen->add_option("--agg-samples", el_samples,
                   "Sample counts for the aggregation curve");
  elen->add_option("--trials", el_trials, "Random subsets per sample count");
  elen->add_option("--seed", el_seed, "Aggregation sampling seed");
  elen->add_option("--out", el_out, "Output directory")->required();
  elen->add_flag("--force", el_force, "Overwrite existing outputs");

  // synth
  auto* synth = app.add_subcommand("synth",
                                   "Generate a synthetic dataset tree");
  SynthCliOptions so;
  std::string sy_out;
  bool sy_force = false;
  synth->add_option("--num-groups", so.n_groups, "Number of groups");
  synth->add_option("--images-per-set", so.images_per_set,
                    "Images per set (set1, set2, all)");
  synth->add_option("--fish-min", so.fish_min, "Minimum fish per group");
  synth->add_option("--fish-max", so.fish_max, "Maximum fish per group");
  synth->add_option("--occlusion-target", so.overlap_target,
                    "Overlap fraction target for the all-fish sets");
  synth->add_option("--min-length-mm", so.min_length_mm, "Fish length lower bound");
  synth->add_option("--max-length-mm", so.max_length_mm, "Fish length upper bound");
  synth->add_option("--fork-probability", so.fork_probability,
                    "Probability of a forked tail");
  synth->add_option("--image-width", so.image_width, "Image width (px)");
  synth->add_option("--image-height", so.image_height, "Image height (px)");
  synth->add_option("--belt-width-mm", so.belt_w_mm, "Belt width (mm)");
  synth->add_option("--belt-height-mm", so.belt_h_mm, "Belt height (mm)");
  synth->add_option("--k1", so.k1, "Radial distortion k1");
  synth->add_option("--k2", so.k2, "Radial distortion k2");
  synth->add_option("--seed", so.seed, "Generator seed");
  synth->add_option("--out", sy_out, "Output directory")->required();
  synth->add_flag("--force", sy_force, "Overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (calibrate->parsed())
      return cmd_calibrate(cal_input, cal_out, cal_force);
    if (skl->parsed())
      return cmd_skl(skl_ann, skl_pred, skl_cam, skl_groups, skl_regime,
                     skl_conf, skl_threads, skl_out, skl_force);
    if (eseg->parsed())
      return cmd_eval_seg(es_ann, es_pred, es_groups, es_regime, es_out,
                          es_force);
    if (elen->parsed())
      return cmd_eval_len(el_ann, el_len, el_pred, el_groups, el_regime,
                          el_clip, el_bin, el_samples, el_trials, el_seed,
                          el_out, el_force);
    if (synth->parsed()) return cmd_synth(so, sy_out, sy_force);
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContractError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitInput;
}
