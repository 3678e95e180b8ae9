#include "hardhat/coco_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hardhat/error.hpp"
#include "hardhat/file_util.hpp"

namespace hardhat {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

std::string where(std::string_view section, std::size_t index) {
  std::ostringstream os;
  os << section << '[' << index << ']';
  return os.str();
}

const json& require(const json& obj, const char* key, const std::string& at) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(at + ": missing field '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& at, const char* key) {
  if (!v.is_number()) throw ParseError(at + ": field '" + key + "' is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(at + ": field '" + key + "' is not finite");
  return d;
}

std::int64_t as_id(const json& v, const std::string& at, const char* key) {
  if (!v.is_number_integer()) throw ParseError(at + ": field '" + key + "' is not an integer");
  return v.get<std::int64_t>();
}

BBox parse_bbox(const json& obj, const std::string& at) {
  const json& v = require(obj, "bbox", at);
  if (!v.is_array() || v.size() != 4) throw ParseError(at + ": bbox must be [x, y, w, h]");
  BBox b{as_number(v[0], at, "bbox"), as_number(v[1], at, "bbox"), as_number(v[2], at, "bbox"),
         as_number(v[3], at, "bbox")};
  if (!is_valid(b)) throw ValidationError(at + ": bbox has negative extent");
  return b;
}

// First [x, y, v] triplet of a COCO keypoints array, if any.
std::optional<std::array<double, 3>> first_triplet(const json& obj, const std::string& at) {
  auto it = obj.find("keypoints");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_array() || it->size() % 3 != 0) {
    throw ParseError(at + ": keypoints must be a flat list of [x, y, v] triplets");
  }
  if (it->empty()) return std::nullopt;
  return std::array<double, 3>{as_number((*it)[0], at, "keypoints"),
                               as_number((*it)[1], at, "keypoints"),
                               as_number((*it)[2], at, "keypoints")};
}

bool is_crowd(const json& obj, const std::string& at) {
  auto it = obj.find("iscrowd");
  if (it == obj.end() || it->is_null()) return false;
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number()) return it->get<double>() != 0.0;
  throw ParseError(at + ": iscrowd must be 0/1");
}

const Category& resolve_category(const Dataset& dataset, std::int64_t id, const std::string& at) {
  const Category* c = dataset.find_category(id);
  if (c == nullptr) {
    throw IntegrityError(at + ": unknown category_id " + std::to_string(id));
  }
  return *c;
}

ordered_json instance_record(const Instance& inst, bool with_area) {
  ordered_json rec;
  rec["id"] = inst.id;
  rec["image_id"] = inst.image_id;
  rec["category_id"] = inst.category.id;
  rec["bbox"] = {inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h};
  if (with_area) rec["area"] = inst.bbox.area();
  if (inst.score) rec["score"] = *inst.score;
  if (inst.head_keypoint) {
    const Keypoint& k = *inst.head_keypoint;
    rec["keypoints"] = {k.x, k.y, k.visibility};
    if (with_area) rec["num_keypoints"] = k.labeled() ? 1 : 0;
  }
  if (inst.ignore || with_area) rec["iscrowd"] = inst.ignore ? 1 : 0;
  return rec;
}

}  // namespace

const Category* Dataset::find_category(std::int64_t id) const noexcept {
  auto it = std::find_if(categories.begin(), categories.end(),
                         [id](const Category& c) { return c.id == id; });
  return it == categories.end() ? nullptr : &*it;
}

const Category* Dataset::find_category(CategoryKind kind) const noexcept {
  auto it = std::find_if(categories.begin(), categories.end(),
                         [kind](const Category& c) { return c.kind == kind; });
  return it == categories.end() ? nullptr : &*it;
}

bool Dataset::has_image(std::int64_t id) const noexcept {
  return std::any_of(images.begin(), images.end(),
                     [id](const ImageInfo& im) { return im.id == id; });
}

Category Dataset::ensure_category(CategoryKind kind) {
  if (const Category* c = find_category(kind)) return *c;
  std::int64_t next = 1;
  for (const Category& c : categories) next = std::max(next, c.id + 1);
  categories.push_back(Category{next, kind});
  return categories.back();
}

void Dataset::validate() const {
  std::unordered_set<std::int64_t> image_ids;
  for (const ImageInfo& im : images) {
    if (!image_ids.insert(im.id).second) {
      throw IntegrityError("duplicate image id " + std::to_string(im.id));
    }
  }
  std::unordered_set<std::int64_t> category_ids;
  std::unordered_set<int> kinds;
  for (const Category& c : categories) {
    if (!category_ids.insert(c.id).second) {
      throw IntegrityError("duplicate category id " + std::to_string(c.id));
    }
    if (!kinds.insert(static_cast<int>(c.kind)).second) {
      throw IntegrityError("duplicate category name " + std::string(c.name()));
    }
  }
  std::unordered_set<std::int64_t> instance_ids;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Instance& inst = instances[i];
    const std::string at = where("annotations", i);
    if (!image_ids.contains(inst.image_id)) {
      throw IntegrityError(at + ": unknown image_id " + std::to_string(inst.image_id));
    }
    const Category* c = find_category(inst.category.id);
    if (c == nullptr || c->kind != inst.category.kind) {
      throw IntegrityError(at + ": unknown category_id " + std::to_string(inst.category.id));
    }
    if (!instance_ids.insert(inst.id).second) {
      throw IntegrityError(at + ": duplicate annotation id " + std::to_string(inst.id));
    }
  }
}

Dataset parse_ground_truth(const std::string& json_text) {
  const json root = parse_json(json_text);
  if (!root.is_object()) throw ParseError("ground truth root must be an object");

  Dataset ds;
  const json& images = require(root, "images", "root");
  const json& categories = require(root, "categories", "root");
  const json& annotations = require(root, "annotations", "root");
  if (!images.is_array() || !categories.is_array() || !annotations.is_array()) {
    throw ParseError("root: images, categories and annotations must be lists");
  }

  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string at = where("images", i);
    const json& rec = images[i];
    if (!rec.is_object()) throw ParseError(at + ": not an object");
    ImageInfo im;
    im.id = as_id(require(rec, "id", at), at, "id");
    if (auto w = rec.find("width"); w != rec.end() && w->is_number()) im.width = w->get<int>();
    if (auto h = rec.find("height"); h != rec.end() && h->is_number()) im.height = h->get<int>();
    if (auto f = rec.find("file_name"); f != rec.end() && f->is_string()) {
      im.file_name = f->get<std::string>();
    }
    ds.images.push_back(std::move(im));
  }

  for (std::size_t i = 0; i < categories.size(); ++i) {
    const std::string at = where("categories", i);
    const json& rec = categories[i];
    if (!rec.is_object()) throw ParseError(at + ": not an object");
    const json& name = require(rec, "name", at);
    if (!name.is_string()) throw ParseError(at + ": name must be a string");
    auto kind = parse_category_kind(name.get<std::string>());
    if (!kind) throw ValidationError(at + ": unsupported category name '" + name.get<std::string>() + "'");
    ds.categories.push_back(Category{as_id(require(rec, "id", at), at, "id"), *kind});
  }

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const std::string at = where("annotations", i);
    const json& rec = annotations[i];
    if (!rec.is_object()) throw ParseError(at + ": not an object");
    Instance inst;
    inst.id = as_id(require(rec, "id", at), at, "id");
    inst.image_id = as_id(require(rec, "image_id", at), at, "image_id");
    inst.category = resolve_category(ds, as_id(require(rec, "category_id", at), at, "category_id"), at);
    inst.bbox = parse_bbox(rec, at);
    inst.ignore = is_crowd(rec, at);
    if (auto t = first_triplet(rec, at)) {
      const double v = (*t)[2];
      if (v != 0.0 && v != 1.0 && v != 2.0) {
        throw ValidationError(at + ": keypoint visibility must be 0, 1 or 2");
      }
      if (v > 0.0 && is_person_family(inst.category.kind)) {
        inst.head_keypoint = Keypoint{(*t)[0], (*t)[1], static_cast<int>(v)};
      }
    }
    ds.instances.push_back(std::move(inst));
  }

  ds.validate();
  return ds;
}

Dataset load_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_file(path));
}

std::vector<Instance> parse_detections(const std::string& json_text, const Dataset& dataset) {
  const json root = parse_json(json_text);
  if (!root.is_array()) throw ParseError("detections root must be a list");

  std::vector<Instance> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string at = where("detections", i);
    const json& rec = root[i];
    if (!rec.is_object()) throw ParseError(at + ": not an object");
    Instance inst;
    auto id = rec.find("id");
    inst.id = (id != rec.end() && !id->is_null()) ? as_id(*id, at, "id")
                                                  : static_cast<std::int64_t>(i + 1);
    inst.image_id = as_id(require(rec, "image_id", at), at, "image_id");
    if (!dataset.has_image(inst.image_id)) {
      throw IntegrityError(at + ": unknown image_id " + std::to_string(inst.image_id));
    }
    inst.category =
        resolve_category(dataset, as_id(require(rec, "category_id", at), at, "category_id"), at);
    inst.bbox = parse_bbox(rec, at);
    const double score = as_number(require(rec, "score", at), at, "score");
    if (score < 0.0 || score > 1.0) throw ValidationError(at + ": score outside [0, 1]");
    inst.score = score;
    inst.ignore = is_crowd(rec, at);
    // A predicted keypoint is always present; its third value is a confidence
    // in most exporters, so only the COCO flags 1 and 2 are preserved.
    if (auto t = first_triplet(rec, at)) {
      inst.head_keypoint = Keypoint{(*t)[0], (*t)[1], (*t)[2] == 1.0 ? 1 : 2};
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> load_detections(const std::filesystem::path& path, const Dataset& dataset) {
  return parse_detections(read_file(path), dataset);
}

std::string serialize_instances(const std::vector<Instance>& instances) {
  ordered_json arr = ordered_json::array();
  for (const Instance& inst : instances) arr.push_back(instance_record(inst, false));
  return arr.dump() + "\n";
}

void write_instances(const std::vector<Instance>& instances, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_instances(instances));
}

std::string serialize_dataset(const Dataset& dataset) {
  ordered_json root;
  root["images"] = ordered_json::array();
  for (const ImageInfo& im : dataset.images) {
    ordered_json rec;
    rec["id"] = im.id;
    rec["width"] = im.width;
    rec["height"] = im.height;
    rec["file_name"] = im.file_name;
    root["images"].push_back(std::move(rec));
  }
  root["categories"] = ordered_json::array();
  for (const Category& c : dataset.categories) {
    ordered_json rec;
    rec["id"] = c.id;
    rec["name"] = std::string(c.name());
    if (is_person_family(c.kind)) {
      rec["keypoints"] = {"head"};
      rec["skeleton"] = ordered_json::array();
    }
    root["categories"].push_back(std::move(rec));
  }
  root["annotations"] = ordered_json::array();
  for (const Instance& inst : dataset.instances) {
    root["annotations"].push_back(instance_record(inst, true));
  }
  return root.dump() + "\n";
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

const StatsRow* StatsReport::find(std::string_view category, std::string_view subgroup) const noexcept {
  for (const StatsRow& r : rows) {
    if (r.category == category && r.subgroup == subgroup) return &r;
  }
  return nullptr;
}

std::string StatsReport::to_csv() const {
  std::ostringstream os;
  os << "category,subgroup,all,small,medium,large\n";
  for (const StatsRow& r : rows) {
    os << r.category << ',' << r.subgroup << ',' << r.counts[0] << ',' << r.counts[1] << ','
       << r.counts[2] << ',' << r.counts[3] << '\n';
  }
  return os.str();
}

StatsReport dataset_stats(const Dataset& dataset) {
  StatsReport report;
  std::vector<CategoryKind> kinds = {CategoryKind::person, CategoryKind::hard_hat};
  for (const Category& c : dataset.categories) {
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) kinds.push_back(c.kind);
  }
  std::unordered_map<int, std::size_t> row_of_kind;
  for (CategoryKind k : kinds) {
    row_of_kind[static_cast<int>(k)] = report.rows.size();
    report.rows.push_back(StatsRow{std::string(to_string(k)), "all", {}});
    if (k == CategoryKind::person) {
      report.rows.push_back(StatsRow{"person", "with_head_keypoint", {}});
      report.rows.push_back(StatsRow{"person", "with_head_keypoint_wearing", {}});
    }
  }

  std::unordered_map<std::int64_t, std::vector<const BBox*>> hats_by_image;
  for (const Instance& inst : dataset.instances) {
    if (!inst.ignore && inst.category.kind == CategoryKind::hard_hat) {
      hats_by_image[inst.image_id].push_back(&inst.bbox);
    }
  }

  auto bump = [](StatsRow& row, const BBox& b) {
    row.counts[0] += 1;
    row.counts[static_cast<std::size_t>(bucket_of(b).name)] += 1;
  };

  for (const Instance& inst : dataset.instances) {
    if (inst.ignore) continue;
    const std::size_t r = row_of_kind.at(static_cast<int>(inst.category.kind));
    bump(report.rows[r], inst.bbox);
    if (inst.category.kind != CategoryKind::person || !inst.has_head_keypoint()) continue;
    bump(report.rows[r + 1], inst.bbox);
    auto hats = hats_by_image.find(inst.image_id);
    if (hats == hats_by_image.end()) continue;
    const bool wearing = std::any_of(hats->second.begin(), hats->second.end(), [&](const BBox* hat) {
      return contains(*hat, *inst.head_keypoint);
    });
    if (wearing) bump(report.rows[r + 2], inst.bbox);
  }
  return report;
}

}  // namespace hardhat
