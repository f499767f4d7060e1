#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishlen/error.hpp"
#include "fishlen/mask.hpp"

namespace fishlen {

enum class SetKind { Set1, Set2, All };
enum class Regime { Separated, Touching, Combined };

inline std::string to_string(SetKind s) {
  switch (s) {
    case SetKind::Set1: return "set1";
    case SetKind::Set2: return "set2";
    case SetKind::All: return "all";
  }
  return "?";
}

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::Separated: return "separated";
    case Regime::Touching: return "touching";
    case Regime::Combined: return "combined";
  }
  return "?";
}

inline Regime regime_from_string(const std::string& s) {
  if (s == "separated") return Regime::Separated;
  if (s == "touching") return Regime::Touching;
  if (s == "combined") return Regime::Combined;
  throw ParseError("unknown regime: " + s);
}

/// Separated covers set1 and set2 (no contact); touching covers the
/// all-fish images.
inline bool regime_admits(Regime r, SetKind s) {
  switch (r) {
    case Regime::Separated: return s != SetKind::All;
    case Regime::Touching: return s == SetKind::All;
    case Regime::Combined: return true;
  }
  return false;
}

struct ImageRecord {
  int id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  int group = 0;
  SetKind set = SetKind::Set1;
};

/// One annotated fish in one image. Occlusion splits are merged: all mask
/// records sharing a fish id within an image form a single instance.
struct GtInstance {
  int image_id = 0;
  int category_id = 0;
  int fish_id = 0;
  Segmentation segmentation;
  int length_mm = 0;
};

struct Prediction {
  int image_id = 0;
  int category_id = 0;
  Segmentation segmentation;
  double confidence = 0.0;
  std::optional<double> length_mm;
};

struct Category {
  int id = 0;
  std::string name;
};

struct DatasetIndex {
  std::vector<ImageRecord> images;
  std::vector<GtInstance> instances;
  std::vector<Category> categories;
  std::map<int, std::vector<int>> groups;  // group number -> image ids

  const ImageRecord* find_image(int id) const {
    for (const auto& im : images)
      if (im.id == id) return &im;
    return nullptr;
  }

  const Category* find_category(int id) const {
    for (const auto& c : categories)
      if (c.id == id) return &c;
    return nullptr;
  }
};

struct SplitConfig {
  std::set<int> test_groups{10, 14, 20, 21, 22};
  std::set<int> validation_groups{1, 6, 11, 17, 25};
  Regime regime = Regime::Combined;

  void validate() const {
    for (const int g : test_groups)
      if (validation_groups.count(g))
        throw ContractError("SplitConfig: group " + std::to_string(g) +
                            " is in both test and validation");
  }
};

// ---------------------------------------------------------------------------
// Segmentation JSON (COCO conventions: polygons as flat coordinate lists,
// RLE as {"size": [h, w], "counts": [...]})
// ---------------------------------------------------------------------------

inline Segmentation segmentation_from_json(const nlohmann::json& j,
                                           const std::string& where) {
  Segmentation seg;
  if (j.is_object()) {
    const auto& size = j.at("size");
    seg.rle.height = size.at(0).get<int>();
    seg.rle.width = size.at(1).get<int>();
    for (const auto& c : j.at("counts"))
      seg.rle.counts.push_back(c.get<std::int64_t>());
    if (seg.rle.counts.empty())
      throw ParseError(where + ": empty RLE counts");
    return seg;
  }
  if (!j.is_array() || j.empty())
    throw ParseError(where + ": segmentation must be polygon list or RLE object");
  for (const auto& pj : j) {
    if (!pj.is_array() || pj.size() < 6 || pj.size() % 2 != 0)
      throw ParseError(where + ": polygon needs >= 3 (x, y) vertex pairs");
    Polygon poly;
    for (std::size_t i = 0; i + 1 < pj.size(); i += 2)
      poly.emplace_back(pj.at(i).get<double>(), pj.at(i + 1).get<double>());
    seg.polygons.push_back(std::move(poly));
  }
  return seg;
}

inline nlohmann::json segmentation_to_json(const Segmentation& seg) {
  if (seg.is_rle()) {
    nlohmann::json j;
    j["size"] = {seg.rle.height, seg.rle.width};
    j["counts"] = seg.rle.counts;
    return j;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& poly : seg.polygons) {
    nlohmann::json flat = nlohmann::json::array();
    for (const auto& v : poly) {
      flat.push_back(v.x());
      flat.push_back(v.y());
    }
    arr.push_back(flat);
  }
  return arr;
}

namespace detail {

inline void validate_segmentation_dims(const Segmentation& seg,
                                       const ImageRecord& image,
                                       const std::string& where) {
  if (!seg.is_rle()) return;
  if (seg.rle.width != image.width || seg.rle.height != image.height)
    throw ParseError(where + ": RLE size does not match image " +
                     std::to_string(image.id) + " dimensions");
  std::int64_t total = 0, foreground = 0;
  bool value = false;
  for (const auto c : seg.rle.counts) {
    if (c < 0) throw ParseError(where + ": negative RLE count");
    total += c;
    if (value) foreground += c;
    value = !value;
  }
  if (total != static_cast<std::int64_t>(image.width) * image.height)
    throw ParseError(where + ": RLE counts do not cover the image raster");
  if (foreground == 0) throw ParseError(where + ": segmentation decodes empty");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

struct LoadOptions {
  /// Optional category renaming (label-granularity configurations). Applied
  /// by name before ids are reassigned; unmapped names pass through.
  std::map<std::string, std::string> category_remap;
};

inline DatasetIndex dataset_from_json(const nlohmann::json& root,
                                      const LoadOptions& options = {}) {
  DatasetIndex index;
  try {
    std::map<int, std::size_t> image_pos;
    for (const auto& ij : root.at("images")) {
      ImageRecord im;
      im.id = ij.at("id").get<int>();
      im.width = ij.at("width").get<int>();
      im.height = ij.at("height").get<int>();
      im.file_name = ij.value("file_name", std::string{});
      const auto& attrs = ij.at("attributes");
      im.group = attrs.at("group").get<int>();
      const std::string set = attrs.at("set").get<std::string>();
      if (set == "set1")
        im.set = SetKind::Set1;
      else if (set == "set2")
        im.set = SetKind::Set2;
      else if (set == "all")
        im.set = SetKind::All;
      else
        throw ParseError("image " + std::to_string(im.id) +
                         ": set must be set1, set2, or all");
      if (im.width <= 0 || im.height <= 0)
        throw ParseError("image " + std::to_string(im.id) +
                         ": non-positive dimensions");
      if (im.group < 1)
        throw ParseError("image " + std::to_string(im.id) + ": group must be >= 1");
      if (image_pos.count(im.id))
        throw ParseError("duplicate image id " + std::to_string(im.id));
      image_pos[im.id] = index.images.size();
      index.groups[im.group].push_back(im.id);
      index.images.push_back(std::move(im));
    }

    std::map<int, std::string> raw_categories;  // id -> (possibly remapped) name
    std::vector<int> raw_order;
    for (const auto& cj : root.at("categories")) {
      const int id = cj.at("id").get<int>();
      std::string name = cj.at("name").get<std::string>();
      if (const auto it = options.category_remap.find(name);
          it != options.category_remap.end())
        name = it->second;
      if (raw_categories.count(id))
        throw ParseError("duplicate category id " + std::to_string(id));
      raw_categories[id] = name;
      raw_order.push_back(id);
    }
    // Remapped names may merge several ids into one category.
    std::map<int, int> category_id_map;
    for (const int id : raw_order) {
      const std::string& name = raw_categories[id];
      int mapped = -1;
      for (const auto& c : index.categories)
        if (c.name == name) mapped = c.id;
      if (mapped < 0) {
        mapped = static_cast<int>(index.categories.size()) + 1;
        index.categories.push_back({mapped, name});
      }
      category_id_map[id] = mapped;
    }

    std::map<int, int> fish_group;                    // fish id -> group
    std::map<std::pair<int, int>, std::size_t> slot;  // (image, fish) -> instance
    for (const auto& aj : root.at("annotations")) {
      const int image_id = aj.at("image_id").get<int>();
      const std::string where =
          "annotation for image " + std::to_string(image_id);
      const auto img_it = image_pos.find(image_id);
      if (img_it == image_pos.end())
        throw ParseError(where + ": unknown image id");
      const ImageRecord& image = index.images[img_it->second];

      const int raw_cat = aj.at("category_id").get<int>();
      const auto cat_it = category_id_map.find(raw_cat);
      if (cat_it == category_id_map.end())
        throw ParseError(where + ": unknown category id " +
                         std::to_string(raw_cat));

      const auto& attrs = aj.at("attributes");
      const int fish_id = attrs.at("fish_id").get<int>();
      const int length_mm = attrs.at("length_mm").get<int>();
      if (length_mm <= 0 || length_mm % 5 != 0)
        throw ParseError(where + ", fish " + std::to_string(fish_id) +
                         ": length_mm must be a positive multiple of 5");

      if (const auto fit = fish_group.find(fish_id); fit != fish_group.end()) {
        if (fit->second != image.group)
          throw ParseError("fish id " + std::to_string(fish_id) +
                           " appears in groups " + std::to_string(fit->second) +
                           " and " + std::to_string(image.group));
      } else {
        fish_group[fish_id] = image.group;
      }

      Segmentation seg = segmentation_from_json(aj.at("segmentation"), where);
      detail::validate_segmentation_dims(seg, image, where);

      const auto key = std::make_pair(image_id, fish_id);
      if (const auto sit = slot.find(key); sit != slot.end()) {
        GtInstance& inst = index.instances[sit->second];
        if (inst.length_mm != length_mm)
          throw ParseError(where + ": split masks of fish " +
                           std::to_string(fish_id) +
                           " disagree on length_mm");
        if (inst.category_id != cat_it->second)
          throw ParseError(where + ": split masks of fish " +
                           std::to_string(fish_id) +
                           " disagree on category");
        if (seg.is_rle() && inst.segmentation.is_rle()) {
          // Merge by raster union so the instance stays a single mask.
          BinaryMask m = decode_rle(inst.segmentation.rle);
          m.union_with(decode_rle(seg.rle));
          inst.segmentation.rle = encode_rle(m);
        } else if (!seg.is_rle() && !inst.segmentation.is_rle()) {
          for (auto& poly : seg.polygons)
            inst.segmentation.polygons.push_back(std::move(poly));
        } else {
          throw ParseError(where + ": split masks of fish " +
                           std::to_string(fish_id) +
                           " mix polygon and RLE encodings");
        }
      } else {
        GtInstance inst;
        inst.image_id = image_id;
        inst.category_id = cat_it->second;
        inst.fish_id = fish_id;
        inst.length_mm = length_mm;
        inst.segmentation = std::move(seg);
        slot[key] = index.instances.size();
        index.instances.push_back(std::move(inst));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("annotation file: ") + e.what());
  }
  return index;
}

inline DatasetIndex load_dataset(const std::string& path,
                                 const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotation file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return dataset_from_json(root, options);
}

inline nlohmann::json dataset_to_json(const DatasetIndex& index) {
  nlohmann::json root;
  auto images = nlohmann::json::array();
  for (const auto& im : index.images) {
    nlohmann::json ij;
    ij["id"] = im.id;
    ij["width"] = im.width;
    ij["height"] = im.height;
    ij["file_name"] = im.file_name;
    ij["attributes"] = {{"group", im.group}, {"set", to_string(im.set)}};
    images.push_back(ij);
  }
  root["images"] = images;

  auto annotations = nlohmann::json::array();
  int next_id = 1;
  for (const auto& inst : index.instances) {
    nlohmann::json aj;
    aj["id"] = next_id++;
    aj["image_id"] = inst.image_id;
    aj["category_id"] = inst.category_id;
    aj["segmentation"] = segmentation_to_json(inst.segmentation);
    aj["iscrowd"] = 0;
    aj["attributes"] = {{"fish_id", inst.fish_id}, {"length_mm", inst.length_mm}};
    annotations.push_back(aj);
  }
  root["annotations"] = annotations;

  auto categories = nlohmann::json::array();
  for (const auto& c : index.categories)
    categories.push_back({{"id", c.id}, {"name", c.name}});
  root["categories"] = categories;
  return root;
}

inline void save_dataset(const DatasetIndex& index, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotation file: " + path);
  out << dataset_to_json(index).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

inline std::vector<Prediction> predictions_from_json(const nlohmann::json& root,
                                                     const DatasetIndex& index) {
  if (!root.is_array())
    throw ParseError("prediction file: top level must be an array");
  std::vector<Prediction> preds;
  try {
    for (const auto& pj : root) {
      Prediction p;
      p.image_id = pj.at("image_id").get<int>();
      const ImageRecord* image = index.find_image(p.image_id);
      if (!image)
        throw ParseError("prediction references unknown image id " +
                         std::to_string(p.image_id));
      p.category_id = pj.at("category_id").get<int>();
      if (!index.find_category(p.category_id))
        throw ParseError("prediction references unknown category id " +
                         std::to_string(p.category_id));
      p.confidence = pj.at("score").get<double>();
      if (p.confidence < 0.0 || p.confidence > 1.0)
        throw ParseError("prediction for image " + std::to_string(p.image_id) +
                         ": score outside [0, 1]");
      if (pj.contains("length_mm")) p.length_mm = pj.at("length_mm").get<double>();
      const std::string where =
          "prediction for image " + std::to_string(p.image_id);
      p.segmentation = segmentation_from_json(pj.at("segmentation"), where);
      detail::validate_segmentation_dims(p.segmentation, *image, where);
      preds.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction file: ") + e.what());
  }
  return preds;
}

inline std::vector<Prediction> load_predictions(const std::string& path,
                                                const DatasetIndex& index) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open prediction file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return predictions_from_json(root, index);
}

inline nlohmann::json predictions_to_json(const std::vector<Prediction>& preds) {
  auto root = nlohmann::json::array();
  for (const auto& p : preds) {
    nlohmann::json pj;
    pj["image_id"] = p.image_id;
    pj["category_id"] = p.category_id;
    pj["segmentation"] = segmentation_to_json(p.segmentation);
    pj["score"] = p.confidence;
    if (p.length_mm) pj["length_mm"] = *p.length_mm;
    root.push_back(pj);
  }
  return root;
}

inline void save_predictions(const std::vector<Prediction>& preds,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write prediction file: " + path);
  out << predictions_to_json(preds).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Split selection
// ---------------------------------------------------------------------------

/// Restricts the index to the given groups and regime. Group numbers missing
/// from the index are contract errors.
inline DatasetIndex select(const DatasetIndex& index, const std::set<int>& groups,
                           Regime regime) {
  for (const int g : groups)
    if (!index.groups.count(g))
      throw ContractError("select: group " + std::to_string(g) +
                          " is not present in the dataset");

  DatasetIndex out;
  out.categories = index.categories;
  std::set<int> kept_images;
  for (const auto& im : index.images) {
    if (!groups.count(im.group)) continue;
    if (!regime_admits(regime, im.set)) continue;
    kept_images.insert(im.id);
    out.groups[im.group].push_back(im.id);
    out.images.push_back(im);
  }
  for (const auto& inst : index.instances)
    if (kept_images.count(inst.image_id)) out.instances.push_back(inst);
  return out;
}

inline DatasetIndex select(const DatasetIndex& index, const SplitConfig& split) {
  split.validate();
  return select(index, split.test_groups, split.regime);
}

inline DatasetIndex select_validation(const DatasetIndex& index,
                                      const SplitConfig& split) {
  split.validate();
  return select(index, split.validation_groups, split.regime);
}

}  // namespace fishlen
