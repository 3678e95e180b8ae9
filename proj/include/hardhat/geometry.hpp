#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hardhat {

// Axis-aligned box in COCO order: top-left corner plus extent, in pixels.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// A single labeled point. visibility follows COCO: 0 = not labeled,
// 1 = labeled but occluded, 2 = labeled and visible.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  int visibility = 0;

  bool labeled() const noexcept { return visibility > 0; }

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

enum class CategoryKind { person, hard_hat, hard_hat_wearer, hard_hat_nonwearer };

std::string_view to_string(CategoryKind kind) noexcept;
std::optional<CategoryKind> parse_category_kind(std::string_view name) noexcept;

// Person plus its two derived subclasses carry a head keypoint.
constexpr bool is_person_family(CategoryKind kind) noexcept {
  return kind != CategoryKind::hard_hat;
}

struct Category {
  std::int64_t id = 0;
  CategoryKind kind = CategoryKind::person;

  std::string_view name() const noexcept { return to_string(kind); }

  friend bool operator==(const Category&, const Category&) = default;
};

// One annotated or detected object. Detections carry a score, ground truth
// does not. Ignored instances (COCO crowd regions) never count as FP or FN.
struct Instance {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  Category category;
  BBox bbox;
  std::optional<Keypoint> head_keypoint;
  std::optional<double> score;
  bool ignore = false;

  bool has_head_keypoint() const noexcept {
    return head_keypoint.has_value() && head_keypoint->labeled();
  }
  bool is_detection() const noexcept { return score.has_value(); }

  friend bool operator==(const Instance&, const Instance&) = default;
};

enum class AreaBucketName { all, small, medium, large };

// Area range in px^2. small = [0, 1024), medium = [1024, 9216],
// large = (9216, inf), all = [0, inf).
struct AreaBucket {
  AreaBucketName name = AreaBucketName::all;

  bool contains(double area) const noexcept;
  std::string_view label() const noexcept;

  static constexpr AreaBucket all() noexcept { return {AreaBucketName::all}; }
  static constexpr AreaBucket small() noexcept { return {AreaBucketName::small}; }
  static constexpr AreaBucket medium() noexcept { return {AreaBucketName::medium}; }
  static constexpr AreaBucket large() noexcept { return {AreaBucketName::large}; }

  friend bool operator==(const AreaBucket&, const AreaBucket&) = default;
};

inline constexpr double kSmallAreaLimit = 1024.0;   // 32^2
inline constexpr double kMediumAreaLimit = 9216.0;  // 96^2

bool is_valid(const BBox& b) noexcept;

// Intersection area of two boxes, 0 when they do not overlap.
double intersection_area(const BBox& a, const BBox& b) noexcept;

// Intersection over union; 0 when the union is empty.
double iou(const BBox& a, const BBox& b) noexcept;

enum class Boundary { inclusive, exclusive };

// Point-in-box test, inclusive on all four edges unless told otherwise.
// Throws ValidationError for an unlabeled point.
bool contains(const BBox& b, const Keypoint& k, Boundary edges = Boundary::inclusive);

// One of small/medium/large; never returns all.
AreaBucket bucket_of(const BBox& b) noexcept;
AreaBucket bucket_of_area(double area) noexcept;

}  // namespace hardhat
