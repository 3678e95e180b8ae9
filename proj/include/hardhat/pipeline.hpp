#pragma once

#include <optional>
#include <span>

#include "hardhat/cart.hpp"
#include "hardhat/coco_io.hpp"
#include "hardhat/compliance.hpp"
#include "hardhat/eval_config.hpp"
#include "hardhat/metrics.hpp"

namespace hardhat {

struct PipelineOptions {
  // Score cutoff; tuned by F1 maximization when absent.
  std::optional<double> threshold;
  double f1_iou = 0.5;
  // Keypoint rule when null, decision tree otherwise.
  const cart::DecisionTree* tree = nullptr;
  EvalConfig eval;
};

struct PipelineResult {
  double threshold = 0.0;
  std::optional<ThresholdSweepResult> sweep;
  std::vector<Instance> derived_detections;
  MetricsReport report;
};

// Threshold, classify person/hat detections into wearers and non-wearers,
// derive the same classes on the ground truth, and score the derived classes
// with box AP.
PipelineResult pipeline_classify_then_evaluate(const Dataset& gt, std::span<const Instance> dets,
                                               const PipelineOptions& options);

}  // namespace hardhat
