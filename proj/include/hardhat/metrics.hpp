#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardhat/coco_io.hpp"
#include "hardhat/eval_config.hpp"
#include "hardhat/geometry.hpp"

namespace hardhat {

// Object keypoint similarity over paired keypoint lists:
//   sum_i exp(-d_i^2 / (2 s^2 k_i^2)) [v_i > 0] / sum_i [v_i > 0],  k_i = 2 sigma_i,
// with s^2 the ground-truth object area. A missing or unlabeled detected
// keypoint contributes 0. Throws ValidationError("OKS undefined") when no
// ground-truth keypoint is labeled.
double oks(std::span<const Keypoint> gt, std::span<const std::optional<Keypoint>> det,
           double gt_area, std::span<const double> sigmas);

// Single head-keypoint form; s = sqrt(gt bbox area), first sigma is used.
double oks(const Instance& gt, const Instance& det, std::span<const double> sigmas);

// Similarity between a ground-truth instance and a detection, in [0, 1].
using SimilarityFn = std::function<double(const Instance& gt, const Instance& det)>;

SimilarityFn iou_similarity();
// Returns 0 for ground truth without a labeled head keypoint instead of throwing.
SimilarityFn oks_similarity(std::vector<double> sigmas);

struct DetectionRecord {
  std::size_t order = 0;  // position of the detection in the caller's list
  double score = 0.0;
  bool true_positive = false;
  bool ignored = false;  // matched an ignored ground truth; neither TP nor FP
  std::optional<std::int64_t> gt_id;
};

// Outcome of greedy matching for one cell (image or class aggregate, one
// threshold, one area bucket). Records are sorted by descending score with
// ties in input order; num_gt counts non-ignored ground truth.
struct MatchResult {
  std::vector<DetectionRecord> records;
  std::size_t num_gt = 0;
};

// Greedy COCO matching for one image and one class. Detections are ranked by
// score (stable), cut to max_dets, and each takes the unmatched non-ignored
// ground truth of highest similarity >= thr (first in input order on ties),
// falling back to the best unmatched ignored one. Ground truth outside the
// bucket counts as ignored; unmatched detections outside it are dropped.
// Throws ValidationError when inputs mix images or classes or a detection has
// no score.
MatchResult match(std::span<const Instance> gts, std::span<const Instance> dets,
                  const SimilarityFn& sim, double thr, AreaBucket bucket, int max_dets);

// Concatenates per-image results and re-sorts by (score desc, order asc).
MatchResult merge(std::vector<MatchResult> parts);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;
};

struct PRCurve {
  bool defined = false;  // false when there is no non-ignored ground truth
  std::vector<PRPoint> points;
  std::vector<double> recall_thresholds;
  std::vector<double> interpolated;  // p_int at each recall threshold
};

// Cumulative precision/recall down the ranking, sampled at the recall
// thresholds as p_int(r) = max precision over points with recall >= r (0 if
// none).
PRCurve pr_curve(const MatchResult& match, std::span<const double> recall_thresholds);

// Mean of p_int over the recall thresholds; nullopt for an undefined curve.
std::optional<double> ap_interpolated(const PRCurve& curve);

enum class Metric : std::size_t { ap = 0, ap50, ap75, ap_small, ap_medium, ap_large };
inline constexpr std::size_t kMetricCount = 6;
std::string_view metric_name(Metric m) noexcept;

struct MetricsRow {
  std::string name;
  std::int64_t category_id = 0;  // 0 for the overall row
  // nullopt marks an undefined cell (no ground truth in that cell).
  std::array<std::optional<double>, kMetricCount> values{};

  std::optional<double> get(Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

struct ClassCurves {
  std::int64_t category_id = 0;
  std::string name;
  std::vector<double> thresholds;
  std::vector<PRCurve> curves;  // one per threshold, area bucket "all"
};

struct MetricsReport {
  Similarity similarity = Similarity::iou;
  MetricsRow overall;
  std::vector<MetricsRow> classes;
  std::vector<ClassCurves> curves;

  // The keypoint report has no small-object column.
  std::vector<Metric> columns() const;
  const MetricsRow* find(std::string_view class_name) const noexcept;

  std::string to_csv() const;
  std::string to_json() const;
  // Rows of (class, threshold, score, recall, precision, p_int).
  std::string curves_csv() const;
};

// COCO-style AP family per class and overall (unweighted class mean over
// defined cells). Under OKS, ground truth without a labeled head keypoint is
// treated as ignored and the small bucket is skipped. Throws IntegrityError
// for detections whose category or image is unknown to `gt`.
MetricsReport ap_coco(const Dataset& gt, std::span<const Instance> dets, const EvalConfig& cfg,
                      Similarity sim);

}  // namespace hardhat
