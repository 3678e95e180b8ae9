#include "hardhat/compliance.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hardhat/error.hpp"
#include "hardhat/metrics.hpp"

namespace hardhat {

namespace {

void check_one_image(std::span<const Instance> instances) {
  if (instances.empty()) return;
  const std::int64_t image = instances.front().image_id;
  for (const Instance& inst : instances) {
    if (inst.image_id != image) throw ValidationError("classify: instances span several images");
  }
}

void split_roles(std::span<const Instance> instances, std::vector<const Instance*>& persons,
                 std::vector<Instance>& hats) {
  for (const Instance& inst : instances) {
    switch (inst.category.kind) {
      case CategoryKind::person:
        persons.push_back(&inst);
        break;
      case CategoryKind::hard_hat:
        hats.push_back(inst);
        break;
      default:
        throw ValidationError("classify: unexpected category '" + std::string(inst.category.name()) +
                              "' (expected person or hard_hat)");
    }
  }
}

std::vector<std::vector<std::size_t>> group_by_image(std::span<const Instance> instances) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::int64_t, std::size_t> slot;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(instances[i].image_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

// Hat overlapping the person box with the largest share of its own area;
// ties go to the higher score, then to the earlier hat.
const Instance* candidate_hat(const BBox& person, std::span<const Instance> hats) {
  const Instance* best = nullptr;
  double best_ratio = 0.0;
  for (const Instance& hat : hats) {
    const double inter = intersection_area(person, hat.bbox);
    if (!(inter > 0.0)) continue;
    const double ratio = inter / hat.bbox.area();
    if (best == nullptr || ratio > best_ratio ||
        (ratio == best_ratio && hat.score.value_or(0.0) > best->score.value_or(0.0))) {
      best = &hat;
      best_ratio = ratio;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(VerdictLabel label) noexcept {
  switch (label) {
    case VerdictLabel::wearer:
      return "wearer";
    case VerdictLabel::nonwearer:
      return "nonwearer";
    case VerdictLabel::indeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

std::vector<Instance> filter_by_threshold(std::span<const Instance> detections, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("threshold outside [0, 1]");
  std::vector<Instance> out;
  for (const Instance& d : detections) {
    if (!d.score) throw ValidationError("filter: detection " + std::to_string(d.id) + " has no score");
    if (*d.score >= t) out.push_back(d);
  }
  return out;
}

std::vector<Verdict> classify_rule(std::span<const Instance> instances, Boundary edges) {
  check_one_image(instances);
  std::vector<const Instance*> persons;
  std::vector<Instance> hats;
  split_roles(instances, persons, hats);

  std::vector<Verdict> out;
  out.reserve(persons.size());
  for (const Instance* p : persons) {
    Verdict v{*p, VerdictLabel::indeterminate, std::nullopt};
    if (p->has_head_keypoint()) {
      v.label = VerdictLabel::nonwearer;
      for (const Instance& hat : hats) {
        if (contains(hat.bbox, *p->head_keypoint, edges)) {
          v.label = VerdictLabel::wearer;
          v.matched_hat = hat;
          break;
        }
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

HatFeatures extract_features(const Instance& person, std::span<const Instance> hats) {
  if (!is_person_family(person.category.kind)) {
    throw ValidationError("extract_features: not a person instance");
  }
  const BBox& pb = person.bbox;
  if (!(pb.area() > 0.0)) throw ValidationError("degenerate person");

  const Instance* hat = candidate_hat(pb, hats);
  if (hat == nullptr) return HatFeatures{};
  const BBox& hb = hat->bbox;
  HatFeatures f;
  f.has_hat = true;
  f.cx = (hb.x + hb.w / 2.0 - pb.x) / pb.w;
  f.cy = (hb.y + hb.h / 2.0 - pb.y) / pb.h;
  f.rw = hb.w / pb.w;
  f.rh = hb.h / pb.h;
  return f;
}

std::vector<Verdict> classify_dt(std::span<const Instance> instances, const cart::DecisionTree& tree) {
  check_one_image(instances);
  std::vector<const Instance*> persons;
  std::vector<Instance> hats;
  split_roles(instances, persons, hats);

  std::vector<Verdict> out;
  out.reserve(persons.size());
  for (const Instance* p : persons) {
    const HatFeatures f = extract_features(*p, hats);
    Verdict v{*p, VerdictLabel::nonwearer, std::nullopt};
    if (cart::predict(tree, f) == cart::Wearing::wearer) {
      v.label = VerdictLabel::wearer;
      if (const Instance* hat = candidate_hat(p->bbox, hats)) v.matched_hat = *hat;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Verdict> classify_by_image(std::span<const Instance> instances, const cart::DecisionTree* tree,
                                       Boundary edges) {
  // Keyed by position of the person in the input, so output order is global.
  std::vector<std::pair<std::size_t, Verdict>> tagged;
  for (const auto& group : group_by_image(instances)) {
    std::vector<Instance> image;
    std::vector<std::size_t> person_pos;
    image.reserve(group.size());
    for (std::size_t i : group) {
      image.push_back(instances[i]);
      if (instances[i].category.kind == CategoryKind::person) person_pos.push_back(i);
    }
    auto verdicts = tree ? classify_dt(image, *tree) : classify_rule(image, edges);
    for (std::size_t k = 0; k < verdicts.size(); ++k) {
      tagged.emplace_back(person_pos[k], std::move(verdicts[k]));
    }
  }
  std::sort(tagged.begin(), tagged.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Verdict> out;
  out.reserve(tagged.size());
  for (auto& [pos, v] : tagged) out.push_back(std::move(v));
  return out;
}

DerivedCategories ensure_derived_categories(Dataset& dataset) {
  DerivedCategories c;
  c.wearer = dataset.ensure_category(CategoryKind::hard_hat_wearer);
  c.nonwearer = dataset.ensure_category(CategoryKind::hard_hat_nonwearer);
  return c;
}

std::vector<Instance> verdicts_to_instances(std::span<const Verdict> verdicts, bool keep_indeterminate,
                                            const DerivedCategories& categories) {
  std::vector<Instance> out;
  out.reserve(verdicts.size());
  for (const Verdict& v : verdicts) {
    Instance inst = v.person;
    switch (v.label) {
      case VerdictLabel::wearer:
        inst.category = categories.wearer;
        break;
      case VerdictLabel::nonwearer:
        inst.category = categories.nonwearer;
        break;
      case VerdictLabel::indeterminate:
        if (!keep_indeterminate) continue;
        break;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

Dataset derive_ground_truth(const Dataset& gt) {
  Dataset out;
  out.images = gt.images;
  out.categories = gt.categories;
  if (gt.find_category(CategoryKind::hard_hat_wearer) != nullptr) {
    ensure_derived_categories(out);
    for (const Instance& inst : gt.instances) {
      if (inst.category.kind == CategoryKind::hard_hat_wearer ||
          inst.category.kind == CategoryKind::hard_hat_nonwearer) {
        out.instances.push_back(inst);
      }
    }
    return out;
  }

  const DerivedCategories cats = ensure_derived_categories(out);
  std::vector<Instance> relevant;
  for (const Instance& inst : gt.instances) {
    if (inst.category.kind == CategoryKind::person || inst.category.kind == CategoryKind::hard_hat) {
      relevant.push_back(inst);
    }
  }
  std::int64_t next_id = 1;
  for (const Instance& inst : gt.instances) next_id = std::max(next_id, inst.id + 1);

  for (const Verdict& v : classify_by_image(relevant)) {
    if (v.label != VerdictLabel::indeterminate) {
      Instance inst = v.person;
      inst.category = v.label == VerdictLabel::wearer ? cats.wearer : cats.nonwearer;
      out.instances.push_back(std::move(inst));
      continue;
    }
    for (const Category& c : {cats.wearer, cats.nonwearer}) {
      Instance region = v.person;
      region.id = next_id++;
      region.category = c;
      region.ignore = true;
      out.instances.push_back(std::move(region));
    }
  }
  return out;
}

TrainingSet training_samples(const Dataset& gt) {
  TrainingSet set;
  const Dataset derived = derive_ground_truth(gt);
  std::unordered_map<std::int64_t, std::vector<Instance>> hats;
  for (const Instance& inst : gt.instances) {
    if (inst.category.kind == CategoryKind::hard_hat && !inst.ignore) hats[inst.image_id].push_back(inst);
  }
  static const std::vector<Instance> kNoHats;
  for (const Instance& p : derived.instances) {
    if (p.ignore || !(p.bbox.area() > 0.0)) continue;
    auto it = hats.find(p.image_id);
    const auto& image_hats = it == hats.end() ? kNoHats : it->second;
    set.features.push_back(extract_features(p, image_hats));
    set.labels.push_back(p.category.kind == CategoryKind::hard_hat_wearer ? cart::Wearing::wearer
                                                                         : cart::Wearing::nonwearer);
  }
  return set;
}

std::optional<double> ClassF1::f1() const {
  if (tp + fp + fn == 0) return std::nullopt;
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::vector<double> sweep_grid() {
  std::vector<double> grid;
  for (int k = 5; k <= 99; ++k) grid.push_back(static_cast<double>(k) / 100.0);
  return grid;
}

std::string ThresholdSweepResult::to_csv() const {
  std::ostringstream os;
  os << "threshold,wearer_f1,nonwearer_f1,overall_f1\n";
  char buf[64];
  auto cell = [&](std::optional<double> v) -> std::string {
    if (!v) return "undefined";
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
  };
  for (const SweepPoint& p : grid) {
    std::snprintf(buf, sizeof buf, "%.2f", p.threshold);
    os << buf << ',' << cell(p.wearer.f1()) << ',' << cell(p.nonwearer.f1()) << ','
       << cell(p.overall_f1) << '\n';
  }
  return os.str();
}

ThresholdSweepResult tune_threshold(const Dataset& gt, std::span<const Instance> detections,
                                    double iou_for_f1) {
  if (!(iou_for_f1 > 0.0 && iou_for_f1 <= 1.0)) throw ValidationError("f1 IoU must lie in (0, 1]");
  Dataset derived = derive_ground_truth(gt);
  const DerivedCategories cats = ensure_derived_categories(derived);

  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Instance>> gt_cells;  // (class, image)
  for (const Instance& g : derived.instances) gt_cells[{g.category.id, g.image_id}].push_back(g);

  const SimilarityFn sim = iou_similarity();
  ThresholdSweepResult result;
  for (double t : sweep_grid()) {
    const auto kept = filter_by_threshold(detections, t);
    const auto verdicts = classify_by_image(kept);
    const auto derived_dets = verdicts_to_instances(verdicts, false, cats);

    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Instance>> det_cells;
    for (const Instance& d : derived_dets) det_cells[{d.category.id, d.image_id}].push_back(d);

    SweepPoint point;
    point.threshold = t;
    for (const Category& c : {cats.wearer, cats.nonwearer}) {
      ClassF1& counts = c.id == cats.wearer.id ? point.wearer : point.nonwearer;
      std::int64_t npos = 0;
      for (auto it = gt_cells.lower_bound({c.id, INT64_MIN}); it != gt_cells.end() && it->first.first == c.id;
           ++it) {
        for (const Instance& g : it->second) npos += g.ignore ? 0 : 1;
      }
      for (auto it = det_cells.lower_bound({c.id, INT64_MIN});
           it != det_cells.end() && it->first.first == c.id; ++it) {
        auto g = gt_cells.find(it->first);
        const std::vector<Instance> none;
        const MatchResult m = match(g == gt_cells.end() ? none : g->second, it->second, sim, iou_for_f1,
                                    AreaBucket::all(), -1);
        for (const DetectionRecord& r : m.records) {
          if (r.true_positive) {
            ++counts.tp;
          } else if (!r.ignored) {
            ++counts.fp;
          }
        }
      }
      counts.fn = npos - counts.tp;
    }
    double sum = 0.0;
    int defined = 0;
    for (const ClassF1* c : {&point.wearer, &point.nonwearer}) {
      if (auto f = c->f1()) {
        sum += *f;
        ++defined;
      }
    }
    point.overall_f1 = defined > 0 ? sum / defined : 0.0;
    if (result.grid.empty() || point.overall_f1 > result.chosen_f1) {
      result.chosen = t;
      result.chosen_f1 = point.overall_f1;
    }
    result.grid.push_back(point);
  }
  return result;
}

}  // namespace hardhat
