#include "hardhat/eval_config.hpp"

#include <algorithm>
#include <cmath>

#include "hardhat/error.hpp"

namespace hardhat {

std::vector<double> linspace(double start, double stop, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {start};
  out.reserve(count);
  const double step = (stop - start) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i + 1 < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  out.push_back(stop);
  return out;
}

namespace {

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw ValidationError(std::string(name) + " must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
      throw ValidationError(std::string(name) + " must lie in [0, 1]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ValidationError(std::string(name) + " must be strictly increasing");
    }
  }
}

}  // namespace

void EvalConfig::validate() const {
  check_grid(iou_thresholds, "iou_thresholds");
  check_grid(recall_thresholds, "recall_thresholds");
  if (area_buckets.empty()) throw ValidationError("area_buckets must not be empty");
  if (max_dets_per_image <= 0) throw ValidationError("max_dets_per_image must be positive");
  if (oks_sigmas.empty()) throw ValidationError("oks_sigmas must not be empty");
  if (std::any_of(oks_sigmas.begin(), oks_sigmas.end(),
                  [](double s) { return !(s > 0.0) || !std::isfinite(s); })) {
    throw ValidationError("oks sigmas must be positive");
  }
}

}  // namespace hardhat
