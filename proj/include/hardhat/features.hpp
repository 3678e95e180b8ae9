#pragma once

#include <array>

namespace hardhat {

// Hard-hat box expressed in the person box's coordinate frame: center offset
// from the person's top-left corner and size, both in units of the person's
// width/height. When has_hat is false every real is 0.
struct HatFeatures {
  double cx = 0.0;
  double cy = 0.0;
  double rw = 0.0;
  double rh = 0.0;
  bool has_hat = false;

  static constexpr std::size_t kDimension = 4;
  std::array<double, kDimension> values() const { return {cx, cy, rw, rh}; }

  friend bool operator==(const HatFeatures&, const HatFeatures&) = default;
};

}  // namespace hardhat
