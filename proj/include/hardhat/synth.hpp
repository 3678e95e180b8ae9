#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hardhat/coco_io.hpp"

namespace hardhat::synth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

enum class ScoreNoise { uniform, normal };

// Parameters of a synthetic scene set. Persons stand in disjoint horizontal
// slots so no head can fall inside another person's hat.
struct SceneSpec {
  int image_count = 4;
  int persons_min = 1;
  int persons_max = 3;
  double wearer_probability = 0.7;
  double keypoint_probability = 1.0;  // chance a person's head keypoint is labeled
  Range person_width = {20.0, 120.0};
  Range person_height = {40.0, 240.0};
  double head_fraction = 0.12;  // keypoint depth below the box top, in box heights
  double hat_width_fraction = 0.35;
  double hat_height_fraction = 0.12;
  int image_width = 640;
  int image_height = 480;

  // Detection noise.
  double box_jitter = 0.0;       // max shift/resize, fraction of box size
  double keypoint_jitter = 0.0;  // max keypoint shift, fraction of box size
  ScoreNoise score_noise = ScoreNoise::uniform;
  double score_a = 0.5;  // uniform: lower bound; normal: mean
  double score_b = 1.0;  // uniform: upper bound; normal: standard deviation
  double false_positive_rate = 0.0;  // spurious detections per ground-truth instance
  double drop_rate = 0.0;
  std::uint64_t seed = 0;

  // Throws ValidationError for probabilities outside [0, 1] or empty ranges.
  void validate() const;
};

struct Scene {
  Dataset ground_truth;  // categories person (id 1) and hard_hat (id 2)
  std::vector<Instance> detections;
  // Generator's wearer truth per person id, for persons with a keypoint.
  std::vector<std::pair<std::int64_t, bool>> wearer_truth;
};

// Deterministic for a given spec; every random draw is made whether or not
// its outcome is used, so raising drop_rate only removes detections.
Scene generate(const SceneSpec& spec);

// Versioned JSON config ({"version": 1, ...}); missing keys keep defaults.
SceneSpec scene_spec_from_json(const std::string& text);
std::string to_json(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::filesystem::path& path);

}  // namespace hardhat::synth
