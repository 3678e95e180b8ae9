#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardhat/cart.hpp"
#include "hardhat/coco_io.hpp"
#include "hardhat/features.hpp"
#include "hardhat/geometry.hpp"

namespace hardhat {

enum class VerdictLabel { wearer, nonwearer, indeterminate };
std::string_view to_string(VerdictLabel label) noexcept;

struct Verdict {
  Instance person;
  VerdictLabel label = VerdictLabel::indeterminate;
  // Rule classifier: the first hat whose box holds the head keypoint, set iff
  // the label is wearer. DT classifier: the candidate hat the features came
  // from, when predicted wearer.
  std::optional<Instance> matched_hat;
};

// Keeps detections with score >= t, in order. Throws ValidationError when a
// detection has no score or t is outside [0, 1].
std::vector<Instance> filter_by_threshold(std::span<const Instance> detections, double t);

// Keypoint rule for one image: a person with a labeled head keypoint is a
// wearer iff the keypoint lies in some hard-hat box, otherwise a non-wearer;
// a person without one is indeterminate. One verdict per person, in input
// order; hats are not consumed. Throws ValidationError for other categories
// or when instances span several images.
std::vector<Verdict> classify_rule(std::span<const Instance> instances,
                                   Boundary edges = Boundary::inclusive);

// Normalizes the best candidate hat into the person box frame. Candidates
// overlap the person with positive area; the winner maximizes overlap over
// hat area, then score, then input order. Throws ValidationError for a
// zero-area person box or a non-person category.
HatFeatures extract_features(const Instance& person, std::span<const Instance> hats);

// Decision-tree classifier for one image. Never yields indeterminate.
std::vector<Verdict> classify_dt(std::span<const Instance> instances, const cart::DecisionTree& tree);

// Runs the rule (tree == nullptr) or the tree image by image. Verdicts follow
// the input order of persons.
std::vector<Verdict> classify_by_image(std::span<const Instance> instances,
                                       const cart::DecisionTree* tree = nullptr,
                                       Boundary edges = Boundary::inclusive);

struct DerivedCategories {
  Category wearer;
  Category nonwearer;
};

// Adds (or finds) the wearer and non-wearer categories in `dataset`.
DerivedCategories ensure_derived_categories(Dataset& dataset);

// Persons relabeled with the derived categories; indeterminate persons keep
// the person category and are dropped unless keep_indeterminate.
std::vector<Instance> verdicts_to_instances(std::span<const Verdict> verdicts, bool keep_indeterminate,
                                            const DerivedCategories& categories);

// Ground truth over the derived classes. Taken verbatim when the dataset
// already has a hard_hat_wearer category; otherwise derived by the keypoint
// rule, with each indeterminate person turned into an ignored region of both
// derived classes so it is neither a miss nor a false alarm.
Dataset derive_ground_truth(const Dataset& gt);

struct TrainingSet {
  std::vector<HatFeatures> features;
  std::vector<cart::Wearing> labels;
};

// One sample per non-ignored ground-truth person with a derived label;
// features come from the ground-truth hats of the same image.
TrainingSet training_samples(const Dataset& gt);

struct ClassF1 {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  // nullopt when the class has neither ground truth nor detections.
  std::optional<double> f1() const;
};

struct SweepPoint {
  double threshold = 0.0;
  ClassF1 wearer;
  ClassF1 nonwearer;
  double overall_f1 = 0.0;  // mean of the defined class F1s, 0 if none
};

struct ThresholdSweepResult {
  std::vector<SweepPoint> grid;
  double chosen = 0.0;
  double chosen_f1 = 0.0;

  std::string to_csv() const;
};

// The 95 score thresholds 0.05, 0.06, ..., 0.99.
std::vector<double> sweep_grid();

// Per-class F1 of rule-derived detections against derived ground truth at
// every grid threshold; chosen is the smallest threshold reaching the best
// overall F1.
ThresholdSweepResult tune_threshold(const Dataset& gt, std::span<const Instance> detections,
                                    double iou_for_f1 = 0.5);

}  // namespace hardhat
