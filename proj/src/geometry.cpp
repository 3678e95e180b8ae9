#include "hardhat/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "hardhat/error.hpp"

namespace hardhat {

namespace {

constexpr std::array<std::string_view, 4> kCategoryNames = {
    "person", "hard_hat", "hard_hat_wearer", "hard_hat_nonwearer"};

}  // namespace

std::string_view to_string(CategoryKind kind) noexcept {
  return kCategoryNames[static_cast<std::size_t>(kind)];
}

std::optional<CategoryKind> parse_category_kind(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<CategoryKind>(i);
  }
  return std::nullopt;
}

bool AreaBucket::contains(double area) const noexcept {
  switch (name) {
    case AreaBucketName::all:
      return area >= 0.0;
    case AreaBucketName::small:
      return area >= 0.0 && area < kSmallAreaLimit;
    case AreaBucketName::medium:
      return area >= kSmallAreaLimit && area <= kMediumAreaLimit;
    case AreaBucketName::large:
      return area > kMediumAreaLimit;
  }
  return false;
}

std::string_view AreaBucket::label() const noexcept {
  switch (name) {
    case AreaBucketName::all:
      return "all";
    case AreaBucketName::small:
      return "small";
    case AreaBucketName::medium:
      return "medium";
    case AreaBucketName::large:
      return "large";
  }
  return "all";
}

bool is_valid(const BBox& b) noexcept {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) &&
         std::isfinite(b.h) && b.w >= 0.0 && b.h >= 0.0;
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BBox& a, const BBox& b) noexcept {
  // x + w - x can round below w; keep the identity exact.
  if (a == b) return a.area() > 0.0 ? 1.0 : 0.0;
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const BBox& b, const Keypoint& k, Boundary edges) {
  if (!k.labeled()) throw ValidationError("keypoint not labeled");
  if (edges == Boundary::exclusive) {
    return k.x > b.x && k.x < b.right() && k.y > b.y && k.y < b.bottom();
  }
  return k.x >= b.x && k.x <= b.right() && k.y >= b.y && k.y <= b.bottom();
}

AreaBucket bucket_of_area(double area) noexcept {
  if (area < kSmallAreaLimit) return AreaBucket::small();
  if (area <= kMediumAreaLimit) return AreaBucket::medium();
  return AreaBucket::large();
}

AreaBucket bucket_of(const BBox& b) noexcept { return bucket_of_area(b.area()); }

}  // namespace hardhat
