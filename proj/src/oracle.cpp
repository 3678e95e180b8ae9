#include "hardhat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "hardhat/error.hpp"

// Deliberately self-contained: nothing here calls into the metrics engine or
// the geometry helpers it uses.
namespace hardhat::synth {

namespace {

enum Cell : std::size_t { kAp = 0, kAp50, kAp75, kApS, kApM, kApL };

struct Corners {
  double x1, y1, x2, y2;
};

Corners corners(const BBox& b) { return {b.x, b.y, b.x + b.w, b.y + b.h}; }

double box_iou(const BBox& a, const BBox& b) {
  const Corners p = corners(a);
  const Corners q = corners(b);
  const double area_p = (p.x2 - p.x1) * (p.y2 - p.y1);
  const double area_q = (q.x2 - q.x1) * (q.y2 - q.y1);
  const double w = std::max(0.0, std::min(p.x2, q.x2) - std::max(p.x1, q.x1));
  const double h = std::max(0.0, std::min(p.y2, q.y2) - std::max(p.y1, q.y1));
  const double inter = w * h;
  const double uni = area_p + area_q - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double head_oks(const Instance& g, const Instance& d, double sigma) {
  if (!g.head_keypoint || g.head_keypoint->visibility <= 0 || !d.head_keypoint) return 0.0;
  const double ex = g.head_keypoint->x - d.head_keypoint->x;
  const double ey = g.head_keypoint->y - d.head_keypoint->y;
  const double scale_sq = g.bbox.w * g.bbox.h;
  const double kappa = sigma + sigma;
  if (scale_sq <= 0.0) return ex == 0.0 && ey == 0.0 ? 1.0 : 0.0;
  return std::exp(-(ex * ex + ey * ey) / (2.0 * scale_sq * kappa * kappa));
}

bool in_range(double area, AreaBucketName name) {
  switch (name) {
    case AreaBucketName::all:
      return true;
    case AreaBucketName::small:
      return area < 32.0 * 32.0;
    case AreaBucketName::medium:
      return area >= 32.0 * 32.0 && area <= 96.0 * 96.0;
    case AreaBucketName::large:
      return area > 96.0 * 96.0;
  }
  return false;
}

struct Det {
  const Instance* inst;
  std::size_t global;
};

struct Outcome {
  double score;
  std::size_t global;
  int kind;  // 0 TP, 1 ignored, 2 FP
};

// Per-detection preference key; smaller is better.
using Choice = std::tuple<int, double, int>;  // (tier, -similarity, gt index)

class Enumerator {
 public:
  Enumerator(const std::vector<std::vector<double>>& sim, const std::vector<bool>& gt_ignored, double thr)
      : sim_(sim), ignored_(gt_ignored), thr_(thr), used_(gt_ignored.size(), false) {}

  std::vector<int> best() {
    current_.clear();
    best_.clear();
    have_best_ = false;
    recurse(0);
    return best_assignment_;
  }

 private:
  void recurse(std::size_t d) {
    if (d == sim_.size()) {
      if (!have_best_ || current_ < best_) {
        best_ = current_;
        best_assignment_ = assignment_;
        have_best_ = true;
      }
      return;
    }
    assignment_.resize(sim_.size());
    // Unmatched is always feasible.
    current_.push_back(Choice{2, 0.0, 0});
    assignment_[d] = -1;
    recurse(d + 1);
    current_.pop_back();
    for (std::size_t g = 0; g < ignored_.size(); ++g) {
      if (used_[g] || !(sim_[d][g] >= thr_)) continue;
      used_[g] = true;
      current_.push_back(Choice{ignored_[g] ? 1 : 0, -sim_[d][g], static_cast<int>(g)});
      assignment_[d] = static_cast<int>(g);
      recurse(d + 1);
      current_.pop_back();
      used_[g] = false;
    }
  }

  const std::vector<std::vector<double>>& sim_;
  const std::vector<bool>& ignored_;
  double thr_;
  std::vector<bool> used_;
  std::vector<Choice> current_;
  std::vector<Choice> best_;
  std::vector<int> assignment_;
  std::vector<int> best_assignment_;
  bool have_best_ = false;
};

std::optional<double> integrate(std::vector<Outcome> outcomes, std::size_t npos,
                                const std::vector<double>& recall_grid) {
  if (npos == 0) return std::nullopt;
  std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) {
    return a.score != b.score ? a.score > b.score : a.global < b.global;
  });
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  double tp = 0.0;
  double fp = 0.0;
  for (const Outcome& o : outcomes) {
    if (o.kind == 1) continue;
    if (o.kind == 0) tp += 1.0; else fp += 1.0;
    points.emplace_back(tp / static_cast<double>(npos), tp / (tp + fp));
  }
  double total = 0.0;
  for (double r : recall_grid) {
    double best = 0.0;
    for (const auto& [recall, precision] : points) {
      if (recall >= r && precision > best) best = precision;
    }
    total += best;
  }
  return total / static_cast<double>(recall_grid.size());
}

}  // namespace

OracleResult oracle_ap(const Dataset& gt, std::span<const Instance> dets, const EvalConfig& cfg,
                       Similarity sim) {
  std::vector<std::int64_t> class_ids = cfg.category_ids;
  if (class_ids.empty()) {
    for (const Category& c : gt.categories) class_ids.push_back(c.id);
  }
  const double sigma = cfg.oks_sigmas.empty() ? 0.026 : cfg.oks_sigmas.front();
  auto similarity = [&](const Instance& g, const Instance& d) {
    return sim == Similarity::iou ? box_iou(g.bbox, d.bbox) : head_oks(g, d, sigma);
  };

  OracleResult result;
  for (std::int64_t cls : class_ids) {
    OracleRow row;
    row.category_id = cls;

    struct ImageCell {
      std::vector<const Instance*> gts;
      std::vector<Det> dets;
      std::vector<std::vector<double>> sim;
    };
    std::map<std::int64_t, ImageCell> images;
    for (const Instance& g : gt.instances) {
      if (g.category.id == cls) images[g.image_id].gts.push_back(&g);
    }
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].category.id == cls) images[dets[i].image_id].dets.push_back(Det{&dets[i], i});
    }
    for (auto& [image, cell] : images) {
      std::sort(cell.dets.begin(), cell.dets.end(), [](const Det& a, const Det& b) {
        return *a.inst->score != *b.inst->score ? *a.inst->score > *b.inst->score : a.global < b.global;
      });
      if (cell.dets.size() > static_cast<std::size_t>(cfg.max_dets_per_image)) {
        cell.dets.resize(static_cast<std::size_t>(cfg.max_dets_per_image));
      }
      if (cell.gts.size() > kOracleMaxPerCell || cell.dets.size() > kOracleMaxPerCell) {
        throw BoundsError("oracle: scene exceeds enumeration bounds");
      }
      for (const Det& d : cell.dets) {
        std::vector<double> r;
        for (const Instance* g : cell.gts) r.push_back(similarity(*g, *d.inst));
        cell.sim.push_back(std::move(r));
      }
    }

    const std::array<AreaBucketName, 4> buckets = {AreaBucketName::all, AreaBucketName::small,
                                                   AreaBucketName::medium, AreaBucketName::large};
    for (AreaBucketName bucket : buckets) {
      if (sim == Similarity::oks && bucket == AreaBucketName::small) continue;
      const bool configured = std::any_of(cfg.area_buckets.begin(), cfg.area_buckets.end(),
                                          [&](const AreaBucket& b) { return b.name == bucket; });
      if (!configured) continue;

      std::vector<std::optional<double>> per_threshold;
      for (double thr : cfg.iou_thresholds) {
        std::vector<Outcome> outcomes;
        std::size_t npos = 0;
        for (auto& [image, cell] : images) {
          std::vector<bool> ignored;
          for (const Instance* g : cell.gts) {
            const bool no_kp = sim == Similarity::oks &&
                               (!g->head_keypoint || g->head_keypoint->visibility <= 0);
            const bool ig = g->ignore || no_kp || !in_range(g->bbox.w * g->bbox.h, bucket);
            ignored.push_back(ig);
            if (!ig) ++npos;
          }
          Enumerator search(cell.sim, ignored, thr);
          const std::vector<int> assignment = search.best();
          for (std::size_t d = 0; d < cell.dets.size(); ++d) {
            const Instance& det = *cell.dets[d].inst;
            const int g = assignment.empty() ? -1 : assignment[d];
            int kind;
            if (g >= 0) {
              kind = ignored[static_cast<std::size_t>(g)] ? 1 : 0;
            } else if (in_range(det.bbox.w * det.bbox.h, bucket)) {
              kind = 2;
            } else {
              continue;
            }
            outcomes.push_back(Outcome{*det.score, cell.dets[d].global, kind});
          }
        }
        per_threshold.push_back(integrate(std::move(outcomes), npos, cfg.recall_thresholds));
      }

      std::optional<double> mean;
      if (!per_threshold.empty() && per_threshold.front()) {
        double s = 0.0;
        for (const auto& v : per_threshold) s += *v;
        mean = s / static_cast<double>(per_threshold.size());
      }
      switch (bucket) {
        case AreaBucketName::all:
          row.values[kAp] = mean;
          for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
            if (std::abs(cfg.iou_thresholds[t] - 0.5) < 1e-9) row.values[kAp50] = per_threshold[t];
            if (std::abs(cfg.iou_thresholds[t] - 0.75) < 1e-9) row.values[kAp75] = per_threshold[t];
          }
          break;
        case AreaBucketName::small:
          row.values[kApS] = mean;
          break;
        case AreaBucketName::medium:
          row.values[kApM] = mean;
          break;
        case AreaBucketName::large:
          row.values[kApL] = mean;
          break;
      }
    }
    result.classes.push_back(row);
  }

  for (std::size_t c = 0; c < result.overall.size(); ++c) {
    double s = 0.0;
    int n = 0;
    for (const OracleRow& r : result.classes) {
      if (r.values[c]) {
        s += *r.values[c];
        ++n;
      }
    }
    if (n > 0) result.overall[c] = s / n;
  }
  return result;
}

}  // namespace hardhat::synth
