#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "hardhat/coco_io.hpp"
#include "hardhat/geometry.hpp"

namespace fixtures {

using namespace hardhat;

inline const Category kPerson{1, CategoryKind::person};
inline const Category kHat{2, CategoryKind::hard_hat};
inline const Category kWearer{3, CategoryKind::hard_hat_wearer};
inline const Category kNonwearer{4, CategoryKind::hard_hat_nonwearer};

inline Instance make(std::int64_t id, std::int64_t image, const Category& cat, BBox box,
                     std::optional<double> score = std::nullopt) {
  Instance i;
  i.id = id;
  i.image_id = image;
  i.category = cat;
  i.bbox = box;
  i.score = score;
  return i;
}

inline Instance person(std::int64_t id, std::int64_t image, BBox box, std::optional<Keypoint> kp,
                       std::optional<double> score = std::nullopt) {
  Instance i = make(id, image, kPerson, box, score);
  i.head_keypoint = kp;
  return i;
}

inline Instance hat(std::int64_t id, std::int64_t image, BBox box, std::optional<double> score = std::nullopt) {
  return make(id, image, kHat, box, score);
}

inline Dataset dataset(std::vector<Instance> instances, int images = 1) {
  Dataset d;
  for (int i = 1; i <= images; ++i) d.images.push_back(ImageInfo{i, 640, 480, "img" + std::to_string(i) + ".jpg"});
  d.categories = {kPerson, kHat};
  d.instances = std::move(instances);
  return d;
}

// Detections mirroring ground truth exactly, score 1.
inline std::vector<Instance> as_detections(const Dataset& gt, double score = 1.0) {
  std::vector<Instance> out;
  for (Instance i : gt.instances) {
    i.score = score;
    out.push_back(i);
  }
  return out;
}

inline BBox random_box(std::mt19937_64& rng, double max_side = 200.0) {
  std::uniform_real_distribution<double> pos(0.0, 500.0);
  std::uniform_real_distribution<double> side(1.0, max_side);
  return BBox{pos(rng), pos(rng), side(rng), side(rng)};
}

}  // namespace fixtures
