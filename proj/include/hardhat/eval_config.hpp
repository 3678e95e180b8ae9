#pragma once

#include <optional>
#include <vector>

#include "hardhat/geometry.hpp"

namespace hardhat {

// `count` evenly spaced values from start to stop inclusive, computed as
// start + i * step with the last value pinned to stop. Reproduces the grids
// of the reference COCO tooling bit for bit.
std::vector<double> linspace(double start, double stop, std::size_t count);

enum class Similarity { iou, oks };

struct EvalConfig {
  std::vector<double> iou_thresholds = linspace(0.50, 0.95, 10);
  std::vector<double> recall_thresholds = linspace(0.0, 1.0, 101);
  std::vector<AreaBucket> area_buckets = {AreaBucket::all(), AreaBucket::small(),
                                          AreaBucket::medium(), AreaBucket::large()};
  int max_dets_per_image = 100;
  std::vector<double> oks_sigmas = {0.026};
  // Restrict evaluation to these category ids; empty means every category.
  std::vector<std::int64_t> category_ids;

  // Throws ValidationError unless thresholds are strictly increasing and in
  // [0, 1], sigmas are positive and max_dets is positive.
  void validate() const;
};

}  // namespace hardhat
