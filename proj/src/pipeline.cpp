#include "hardhat/pipeline.hpp"

namespace hardhat {

PipelineResult pipeline_classify_then_evaluate(const Dataset& gt, std::span<const Instance> dets,
                                               const PipelineOptions& options) {
  PipelineResult result;
  if (options.threshold) {
    result.threshold = *options.threshold;
  } else {
    result.sweep = tune_threshold(gt, dets, options.f1_iou);
    result.threshold = result.sweep->chosen;
  }

  const Dataset derived_gt = derive_ground_truth(gt);
  const DerivedCategories cats{*derived_gt.find_category(CategoryKind::hard_hat_wearer),
                               *derived_gt.find_category(CategoryKind::hard_hat_nonwearer)};

  const auto kept = filter_by_threshold(dets, result.threshold);
  const auto verdicts = classify_by_image(kept, options.tree);
  result.derived_detections = verdicts_to_instances(verdicts, false, cats);

  EvalConfig cfg = options.eval;
  cfg.category_ids = {cats.wearer.id, cats.nonwearer.id};
  result.report = ap_coco(derived_gt, result.derived_detections, cfg, Similarity::iou);
  return result;
}

}  // namespace hardhat
