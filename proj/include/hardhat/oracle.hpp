#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hardhat/coco_io.hpp"
#include "hardhat/eval_config.hpp"

namespace hardhat::synth {

// Cell order: AP, AP50, AP75, AP_S, AP_M, AP_L. nullopt marks an undefined
// cell; AP_S is always nullopt under OKS.
using OracleCells = std::array<std::optional<double>, 6>;

struct OracleRow {
  std::int64_t category_id = 0;
  OracleCells values{};
};

struct OracleResult {
  std::vector<OracleRow> classes;
  OracleCells overall{};
};

// Largest per-image, per-class ground-truth or detection count the oracle
// will enumerate.
inline constexpr std::size_t kOracleMaxPerCell = 8;

// Reference AP by exhaustive search: every injective detection-to-ground-truth
// assignment is enumerated and the one that is lexicographically best along
// the score ranking (non-ignored before ignored before unmatched, then higher
// similarity, then earlier ground truth) is kept; precision at each recall
// threshold is then read off the step curve by direct scan. Throws
// BoundsError when a cell exceeds kOracleMaxPerCell.
OracleResult oracle_ap(const Dataset& gt, std::span<const Instance> dets, const EvalConfig& cfg,
                       Similarity sim);

}  // namespace hardhat::synth
