#include "hardhat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "hardhat/error.hpp"

namespace hardhat {

namespace {

using SimMatrix = std::vector<std::vector<double>>;  // [detection][ground truth]

bool score_order(const DetectionRecord& a, const DetectionRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.order < b.order;
}

std::vector<std::size_t> rank_detections(std::span<const Instance> dets, int max_dets) {
  std::vector<std::size_t> ranked(dets.size());
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return *dets[a].score > *dets[b].score;
  });
  if (max_dets >= 0 && ranked.size() > static_cast<std::size_t>(max_dets)) {
    ranked.resize(static_cast<std::size_t>(max_dets));
  }
  return ranked;
}

SimMatrix similarity_matrix(std::span<const Instance> gts, std::span<const Instance> dets,
                            std::span<const std::size_t> ranked, const SimilarityFn& sim) {
  SimMatrix m(dets.size());
  for (std::size_t d : ranked) {
    m[d].resize(gts.size());
    for (std::size_t g = 0; g < gts.size(); ++g) m[d][g] = sim(gts[g], dets[d]);
  }
  return m;
}

MatchResult match_ranked(std::span<const Instance> gts, std::span<const Instance> dets,
                         std::span<const std::size_t> ranked, const SimMatrix& sims, double thr,
                         AreaBucket bucket) {
  MatchResult out;
  std::vector<char> gt_ignored(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_ignored[g] = gts[g].ignore || !bucket.contains(gts[g].bbox.area());
    if (!gt_ignored[g]) ++out.num_gt;
  }
  std::vector<char> taken(gts.size(), 0);

  auto best_among = [&](std::size_t d, bool ignored_pass) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_sim = thr;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || static_cast<bool>(gt_ignored[g]) != ignored_pass) continue;
      const double s = sims[d][g];
      if (s < thr) continue;
      if (!best || s > best_sim) {
        best = g;
        best_sim = s;
      }
    }
    return best;
  };

  for (std::size_t d : ranked) {
    DetectionRecord rec;
    rec.order = d;
    rec.score = *dets[d].score;
    auto g = best_among(d, false);
    if (g) {
      rec.true_positive = true;
    } else if ((g = best_among(d, true))) {
      rec.ignored = true;
    } else if (!bucket.contains(dets[d].bbox.area())) {
      continue;
    }
    if (g) {
      taken[*g] = 1;
      rec.gt_id = gts[*g].id;
    }
    out.records.push_back(rec);
  }
  return out;
}

void check_single_cell(std::span<const Instance> gts, std::span<const Instance> dets) {
  std::optional<std::int64_t> image;
  std::optional<std::int64_t> category;
  auto check = [&](const Instance& inst) {
    if (!image) image = inst.image_id;
    if (!category) category = inst.category.id;
    if (*image != inst.image_id || *category != inst.category.id) {
      throw ValidationError("match: inputs mix images or classes");
    }
  };
  for (const Instance& g : gts) check(g);
  for (const Instance& d : dets) {
    check(d);
    if (!d.score) throw ValidationError("match: detection without score");
  }
}

std::string format_value(std::optional<double> v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string format_exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_number(std::optional<double> v) { return v ? format_exact(*v) : "null"; }

std::string json_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<std::size_t> threshold_index(const std::vector<double>& thresholds, double value) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - value) < 1e-9) return i;
  }
  return std::nullopt;
}

}  // namespace

double oks(std::span<const Keypoint> gt, std::span<const std::optional<Keypoint>> det,
           double gt_area, std::span<const double> sigmas) {
  if (det.size() != gt.size() || sigmas.size() < gt.size()) {
    throw ValidationError("OKS: keypoint and sigma counts differ");
  }
  double num = 0.0;
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt[i].labeled()) continue;
    ++labeled;
    if (!det[i]) continue;
    const double dx = det[i]->x - gt[i].x;
    const double dy = det[i]->y - gt[i].y;
    const double d2 = dx * dx + dy * dy;
    const double k = 2.0 * sigmas[i];
    if (gt_area > 0.0) {
      num += std::exp(-d2 / (2.0 * gt_area * k * k));
    } else if (d2 == 0.0) {
      num += 1.0;
    }
  }
  if (labeled == 0) throw ValidationError("OKS undefined: no labeled keypoints");
  return num / static_cast<double>(labeled);
}

double oks(const Instance& gt, const Instance& det, std::span<const double> sigmas) {
  if (!gt.has_head_keypoint()) throw ValidationError("OKS undefined: no labeled keypoints");
  if (sigmas.empty()) throw ValidationError("OKS: no sigma given");
  const Keypoint g = *gt.head_keypoint;
  const std::optional<Keypoint> d = det.head_keypoint;
  return oks(std::span<const Keypoint>(&g, 1), std::span<const std::optional<Keypoint>>(&d, 1),
             gt.bbox.area(), sigmas.first(1));
}

SimilarityFn iou_similarity() {
  return [](const Instance& g, const Instance& d) { return iou(g.bbox, d.bbox); };
}

SimilarityFn oks_similarity(std::vector<double> sigmas) {
  return [sigmas = std::move(sigmas)](const Instance& g, const Instance& d) {
    if (!g.has_head_keypoint()) return 0.0;
    return oks(g, d, sigmas);
  };
}

MatchResult match(std::span<const Instance> gts, std::span<const Instance> dets,
                  const SimilarityFn& sim, double thr, AreaBucket bucket, int max_dets) {
  check_single_cell(gts, dets);
  const auto ranked = rank_detections(dets, max_dets);
  const SimMatrix sims = similarity_matrix(gts, dets, ranked, sim);
  return match_ranked(gts, dets, ranked, sims, thr, bucket);
}

MatchResult merge(std::vector<MatchResult> parts) {
  MatchResult out;
  for (MatchResult& p : parts) {
    out.num_gt += p.num_gt;
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
  }
  std::stable_sort(out.records.begin(), out.records.end(), score_order);
  return out;
}

PRCurve pr_curve(const MatchResult& match, std::span<const double> recall_thresholds) {
  PRCurve curve;
  curve.recall_thresholds.assign(recall_thresholds.begin(), recall_thresholds.end());
  curve.defined = match.num_gt > 0;
  if (!curve.defined) return curve;

  const double npos = static_cast<double>(match.num_gt);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const DetectionRecord& r : match.records) {
    if (r.ignored) continue;
    (r.true_positive ? tp : fp) += 1;
    curve.points.push_back(PRPoint{static_cast<double>(tp) / npos,
                                   static_cast<double>(tp) / static_cast<double>(tp + fp), r.score});
  }

  // Suffix maximum turns precision into the interpolated envelope; recall is
  // non-decreasing along the ranking, so a lower_bound finds the first point
  // at or beyond each threshold.
  std::vector<double> envelope(curve.points.size());
  std::vector<double> recalls(curve.points.size());
  double running = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    envelope[i] = running;
    recalls[i] = curve.points[i].recall;
  }
  curve.interpolated.reserve(recall_thresholds.size());
  for (double r : recall_thresholds) {
    auto it = std::lower_bound(recalls.begin(), recalls.end(), r);
    curve.interpolated.push_back(it == recalls.end() ? 0.0 : envelope[it - recalls.begin()]);
  }
  return curve;
}

std::optional<double> ap_interpolated(const PRCurve& curve) {
  if (!curve.defined || curve.interpolated.empty()) return std::nullopt;
  const double sum = std::accumulate(curve.interpolated.begin(), curve.interpolated.end(), 0.0);
  return sum / static_cast<double>(curve.interpolated.size());
}

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::ap:
      return "AP";
    case Metric::ap50:
      return "AP50";
    case Metric::ap75:
      return "AP75";
    case Metric::ap_small:
      return "AP_S";
    case Metric::ap_medium:
      return "AP_M";
    case Metric::ap_large:
      return "AP_L";
  }
  return "AP";
}

std::vector<Metric> MetricsReport::columns() const {
  std::vector<Metric> cols = {Metric::ap, Metric::ap50, Metric::ap75};
  if (similarity == Similarity::iou) cols.push_back(Metric::ap_small);
  cols.push_back(Metric::ap_medium);
  cols.push_back(Metric::ap_large);
  return cols;
}

const MetricsRow* MetricsReport::find(std::string_view class_name) const noexcept {
  if (class_name == "overall") return &overall;
  for (const MetricsRow& r : classes) {
    if (r.name == class_name) return &r;
  }
  return nullptr;
}

std::string MetricsReport::to_csv() const {
  const auto cols = columns();
  std::ostringstream os;
  os << "class";
  for (Metric m : cols) os << ',' << metric_name(m);
  os << '\n';
  auto row = [&](const MetricsRow& r) {
    os << r.name;
    for (Metric m : cols) os << ',' << format_value(r.get(m));
    os << '\n';
  };
  row(overall);
  for (const MetricsRow& r : classes) row(r);
  return os.str();
}

std::string MetricsReport::to_json() const {
  const auto cols = columns();
  std::ostringstream os;
  os << "{\"similarity\":" << json_string(similarity == Similarity::iou ? "iou" : "oks")
     << ",\"columns\":[";
  for (std::size_t i = 0; i < cols.size(); ++i) {
    os << (i ? "," : "") << json_string(metric_name(cols[i]));
  }
  os << "],\"rows\":[";
  auto row = [&](const MetricsRow& r, bool first) {
    os << (first ? "" : ",") << "{\"class\":" << json_string(r.name);
    for (Metric m : cols) os << ',' << json_string(metric_name(m)) << ':' << json_number(r.get(m));
    os << '}';
  };
  row(overall, true);
  for (const MetricsRow& r : classes) row(r, false);
  os << "]}\n";
  return os.str();
}

std::string MetricsReport::curves_csv() const {
  std::ostringstream os;
  os << "class,threshold,score,recall,precision,p_int\n";
  for (const ClassCurves& cc : curves) {
    for (std::size_t t = 0; t < cc.curves.size(); ++t) {
      const PRCurve& c = cc.curves[t];
      // Envelope at each point: best precision at this recall or beyond.
      std::vector<double> envelope(c.points.size());
      double running = 0.0;
      for (std::size_t i = c.points.size(); i-- > 0;) {
        running = std::max(running, c.points[i].precision);
        envelope[i] = running;
      }
      for (std::size_t i = 0; i < c.points.size(); ++i) {
        os << cc.name << ',' << format_exact(cc.thresholds[t]) << ','
           << format_exact(c.points[i].score) << ',' << format_exact(c.points[i].recall) << ','
           << format_exact(c.points[i].precision) << ',' << format_exact(envelope[i]) << '\n';
      }
    }
  }
  return os.str();
}

MetricsReport ap_coco(const Dataset& gt, std::span<const Instance> dets, const EvalConfig& cfg,
                      Similarity sim) {
  cfg.validate();
  const SimilarityFn sim_fn =
      sim == Similarity::iou ? iou_similarity() : oks_similarity(cfg.oks_sigmas);

  std::vector<Category> classes;
  if (cfg.category_ids.empty()) {
    classes = gt.categories;
  } else {
    for (std::int64_t id : cfg.category_ids) {
      const Category* c = gt.find_category(id);
      if (c == nullptr) throw IntegrityError("unknown category id " + std::to_string(id));
      classes.push_back(*c);
    }
  }

  struct Cell {
    std::vector<Instance> gts;
    std::vector<Instance> dets;
    std::vector<std::size_t> global;  // position of each det in `dets` argument
  };
  std::map<std::pair<std::int64_t, std::int64_t>, Cell> cells;  // (category, image)
  for (const Instance& g : gt.instances) {
    Instance copy = g;
    if (sim == Similarity::oks && !copy.has_head_keypoint()) copy.ignore = true;
    cells[{g.category.id, g.image_id}].gts.push_back(std::move(copy));
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Instance& d = dets[i];
    if (gt.find_category(d.category.id) == nullptr) {
      throw IntegrityError("detection category " + std::to_string(d.category.id) + " not in ground truth");
    }
    if (!gt.has_image(d.image_id)) {
      throw IntegrityError("detection image " + std::to_string(d.image_id) + " not in ground truth");
    }
    if (!d.score) throw ValidationError("detection without score");
    Cell& cell = cells[{d.category.id, d.image_id}];
    cell.dets.push_back(d);
    cell.global.push_back(i);
  }

  std::vector<AreaBucket> buckets;
  for (AreaBucket b : cfg.area_buckets) {
    if (sim == Similarity::oks && b.name == AreaBucketName::small) continue;
    buckets.push_back(b);
  }
  const auto ap50_index = threshold_index(cfg.iou_thresholds, 0.50);
  const auto ap75_index = threshold_index(cfg.iou_thresholds, 0.75);

  MetricsReport report;
  report.similarity = sim;
  report.overall.name = "overall";

  for (const Category& cat : classes) {
    struct Prepared {
      const Cell* cell;
      std::vector<std::size_t> ranked;
      SimMatrix sims;
    };
    std::vector<Prepared> prepared;
    for (auto it = cells.lower_bound({cat.id, INT64_MIN});
         it != cells.end() && it->first.first == cat.id; ++it) {
      const Cell& cell = it->second;
      Prepared p{&cell, rank_detections(cell.dets, cfg.max_dets_per_image), {}};
      p.sims = similarity_matrix(cell.gts, cell.dets, p.ranked, sim_fn);
      prepared.push_back(std::move(p));
    }

    MetricsRow row;
    row.name = std::string(cat.name());
    row.category_id = cat.id;
    ClassCurves curves{cat.id, row.name, cfg.iou_thresholds, {}};

    for (AreaBucket bucket : buckets) {
      std::vector<std::optional<double>> per_threshold;
      for (double thr : cfg.iou_thresholds) {
        std::vector<MatchResult> parts;
        parts.reserve(prepared.size());
        for (const Prepared& p : prepared) {
          MatchResult m = match_ranked(p.cell->gts, p.cell->dets, p.ranked, p.sims, thr, bucket);
          for (DetectionRecord& r : m.records) r.order = p.cell->global[r.order];
          parts.push_back(std::move(m));
        }
        PRCurve curve = pr_curve(merge(std::move(parts)), cfg.recall_thresholds);
        per_threshold.push_back(ap_interpolated(curve));
        if (bucket.name == AreaBucketName::all) curves.curves.push_back(std::move(curve));
      }

      const std::optional<double> mean = per_threshold.empty() || !per_threshold.front()
                                             ? std::nullopt
                                             : mean_of_defined(per_threshold);
      switch (bucket.name) {
        case AreaBucketName::all:
          row.values[static_cast<std::size_t>(Metric::ap)] = mean;
          if (ap50_index) row.values[static_cast<std::size_t>(Metric::ap50)] = per_threshold[*ap50_index];
          if (ap75_index) row.values[static_cast<std::size_t>(Metric::ap75)] = per_threshold[*ap75_index];
          break;
        case AreaBucketName::small:
          row.values[static_cast<std::size_t>(Metric::ap_small)] = mean;
          break;
        case AreaBucketName::medium:
          row.values[static_cast<std::size_t>(Metric::ap_medium)] = mean;
          break;
        case AreaBucketName::large:
          row.values[static_cast<std::size_t>(Metric::ap_large)] = mean;
          break;
      }
    }
    report.classes.push_back(std::move(row));
    report.curves.push_back(std::move(curves));
  }

  for (std::size_t m = 0; m < kMetricCount; ++m) {
    std::vector<std::optional<double>> column;
    for (const MetricsRow& r : report.classes) column.push_back(r.values[m]);
    report.overall.values[m] = mean_of_defined(column);
  }
  return report;
}

}  // namespace hardhat
