// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hardhat/cart.hpp"
#include "hardhat/coco_io.hpp"
#include "hardhat/compliance.hpp"
#include "hardhat/metrics.hpp"
#include "hardhat/oracle.hpp"
#include "hardhat/synth.hpp"
#include "sweep_oracle.hpp"

using namespace hardhat;

namespace {

constexpr double kOracleTolerance = 1e-9;
constexpr double kOksTolerance = 1e-12;
constexpr int kOracleScenes = 240;
constexpr double kOracleBudgetSeconds = 60.0;
constexpr int kSweepFixtures = 100;
constexpr int kMonotonicitySeeds = 30;
constexpr std::uint64_t kMonotonicitySeedBase = 1000;
constexpr int kRoundTripInstances = 1000;

// Optional paths to the relabeled train/test annotation files.
constexpr const char* kTrainEnv = "HARDHAT_TRAIN_GT";
constexpr const char* kTestEnv = "HARDHAT_TEST_GT";

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 3) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  Outcome outcome(std::string detail) const {
    if (failed_ == 0) return {true, std::move(detail)};
    std::string d = std::to_string(failed_) + " failure(s):";
    for (const auto& f : failures_) d += " [" + f + "]";
    return {false, d};
  }

 private:
  std::vector<std::string> failures_;
  int failed_ = 0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Category cat(std::int64_t id, CategoryKind k) { return Category{id, k}; }

Instance inst(std::int64_t id, std::int64_t image, Category c, BBox box, std::optional<Keypoint> kp = std::nullopt,
              std::optional<double> score = std::nullopt) {
  Instance i;
  i.id = id;
  i.image_id = image;
  i.category = c;
  i.bbox = box;
  i.head_keypoint = kp;
  i.score = score;
  return i;
}

Dataset one_image(std::vector<Instance> instances) {
  Dataset d;
  d.images = {ImageInfo{1, 640, 480, "a.jpg"}};
  d.categories = {cat(1, CategoryKind::person), cat(2, CategoryKind::hard_hat)};
  d.instances = std::move(instances);
  return d;
}

synth::SceneSpec oracle_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  synth::SceneSpec s;
  s.seed = seed;
  s.image_count = 1 + static_cast<int>(seed % 5);
  s.persons_min = 0;
  s.persons_max = 3;
  s.keypoint_probability = 0.75;
  s.person_width = {15.0, 140.0};
  s.person_height = {20.0, 260.0};
  s.box_jitter = 0.3 * unit(rng);
  s.keypoint_jitter = 0.1 * unit(rng);
  s.false_positive_rate = 0.2 * unit(rng);
  s.drop_rate = 0.3 * unit(rng);
  if (seed % 3 == 0) {
    s.score_noise = synth::ScoreNoise::normal;
    s.score_a = 0.8;
    s.score_b = 0.3;
  }
  return s;
}

// 1. ap_coco equals the exhaustive oracle on random small scenes.
Outcome oracle_equivalence() {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  int cells = 0;
  int partial = 0;
  for (int n = 0; n < kOracleScenes; ++n) {
    const synth::Scene scene = synth::generate(oracle_scene(static_cast<std::uint64_t>(n)));
    for (Similarity sim : {Similarity::iou, Similarity::oks}) {
      const MetricsReport r = ap_coco(scene.ground_truth, scene.detections, EvalConfig{}, sim);
      const synth::OracleResult o = synth::oracle_ap(scene.ground_truth, scene.detections, EvalConfig{}, sim);
      auto compare = [&](const std::optional<double>& a, const std::optional<double>& b, const std::string& where) {
        ++cells;
        if (a.has_value() != b.has_value()) {
          c.expect(false, where + " definedness differs");
        } else if (a) {
          partial += (*b > 0.0 && *b < 1.0) ? 1 : 0;
          c.expect(std::abs(*a - *b) <= kOracleTolerance, where + " " + fmt(*a) + " vs " + fmt(*b));
        }
      };
      const std::string tag = "scene " + std::to_string(n) + (sim == Similarity::iou ? " iou" : " oks");
      for (std::size_t m = 0; m < kMetricCount; ++m) compare(r.overall.values[m], o.overall[m], tag + " overall");
      c.expect(r.classes.size() == o.classes.size(), tag + " class count");
      for (std::size_t k = 0; k < std::min(r.classes.size(), o.classes.size()); ++k) {
        for (std::size_t m = 0; m < kMetricCount; ++m) {
          compare(r.classes[k].values[m], o.classes[k].values[m], tag + " " + r.classes[k].name);
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < kOracleBudgetSeconds, "runtime " + fmt(secs) + " s");
  std::ostringstream d;
  d << kOracleScenes << " scenes x {iou, oks}, " << cells << " cells (" << partial
    << " strictly inside (0, 1)) within " << kOracleTolerance << ", " << static_cast<int>(secs * 1000) << " ms";
  return c.outcome(d.str());
}

// 2. Detections identical to ground truth.
Outcome identity_fixture() {
  Check c;
  synth::SceneSpec spec;
  spec.image_count = 12;
  spec.persons_max = 4;
  spec.person_width = {10.0, 150.0};
  spec.person_height = {20.0, 300.0};
  spec.seed = 7;
  const synth::Scene scene = synth::generate(spec);
  std::vector<Instance> dets = scene.detections;
  for (Instance& d : dets) d.score = 1.0;

  int cells = 0;
  for (Similarity sim : {Similarity::iou, Similarity::oks}) {
    const MetricsReport r = ap_coco(scene.ground_truth, dets, EvalConfig{}, sim);
    std::vector<const MetricsRow*> rows = {&r.overall};
    for (const auto& row : r.classes) rows.push_back(&row);
    for (const MetricsRow* row : rows) {
      for (Metric m : r.columns()) {
        if (const auto v = row->get(m)) {
          ++cells;
          c.expect(*v == 1.0, row->name + " " + std::string(metric_name(m)) + " = " + fmt(*v));
        }
      }
    }
  }
  const ThresholdSweepResult sweep = tune_threshold(scene.ground_truth, dets);
  c.expect(sweep.chosen_f1 == 1.0, "overall F1 " + fmt(sweep.chosen_f1));
  c.expect(sweep.chosen == 0.05, "chosen " + fmt(sweep.chosen));
  return c.outcome(std::to_string(cells) + " defined cells = 1.0; sweep F1 1.0 at 0.05");
}

// 3. Hand PR cases with one ground truth.
Outcome hand_pr_cases() {
  Check c;
  const Category person = cat(1, CategoryKind::person);
  const Dataset gt = one_image({inst(1, 1, person, BBox{10, 10, 60, 80})});
  const Instance tp = inst(1, 1, person, BBox{10, 10, 60, 80}, std::nullopt, 0.9);
  const Instance fp = inst(2, 1, person, BBox{300, 300, 60, 80}, std::nullopt, 0.8);
  struct Case {
    std::vector<Instance> dets;
    double expected;
    const char* name;
  };
  Instance tp_low = tp;
  tp_low.score = 0.7;
  const std::vector<Case> cases = {{{tp, fp}, 1.0, "(TP,FP)"}, {{fp, tp_low}, 0.5, "(FP,TP)"}};
  for (const Case& k : cases) {
    const MetricsReport r = ap_coco(gt, k.dets, EvalConfig{}, Similarity::iou);
    const ClassCurves& curves = r.curves.at(0);
    for (std::size_t t = 0; t < curves.thresholds.size(); ++t) {
      const auto ap = ap_interpolated(curves.curves[t]);
      c.expect(ap && *ap == k.expected, std::string(k.name) + " at " + fmt(curves.thresholds[t]));
    }
    c.expect(r.find("person")->get(Metric::ap) == k.expected, std::string(k.name) + " AP");
  }
  return c.outcome("(TP,FP) = 1.0 and (FP,TP) = 0.5 at all 10 IoU thresholds, exact");
}

// 4. OKS point checks.
Outcome oks_points() {
  Check c;
  const std::vector<double> sigma = {0.026};
  const Category person = cat(1, CategoryKind::person);
  const double s = 100.0;
  const double k = 2.0 * 0.026;
  const Instance gt = inst(1, 1, person, BBox{0, 0, s, s}, Keypoint{50, 50, 2});
  const Instance same = inst(2, 1, person, BBox{0, 0, s, s}, Keypoint{50, 50, 2}, 0.9);
  c.expect(oks(gt, same, sigma) == 1.0, "d = 0");
  const double d = std::sqrt(2.0) * s * k;
  for (const auto& [dx, dy] : {std::pair{d, 0.0}, std::pair{0.0, -d}, std::pair{d / std::sqrt(2.0), d / std::sqrt(2.0)}}) {
    const Instance det = inst(3, 1, person, BBox{0, 0, s, s}, Keypoint{50 + dx, 50 + dy, 2}, 0.9);
    const double v = oks(gt, det, sigma);
    c.expect(std::abs(v - std::exp(-1.0)) <= kOksTolerance, "d = sqrt(2) s k gives " + fmt(v));
  }
  return c.outcome("d = 0 -> 1.0 exact; d = sqrt(2)*s*k -> exp(-1) within 1e-12");
}

// 5. Keypoint rule, three branches, scaled.
Outcome rule_conformance() {
  Check c;
  const Category person = cat(1, CategoryKind::person);
  const Category hat = cat(2, CategoryKind::hard_hat);
  struct Row {
    const char* name;
    std::vector<Instance> instances;
    VerdictLabel expected;
  };
  const std::vector<Row> table = {
      {"keypoint in hat box", {inst(1, 1, person, BBox{0, 0, 20, 40}, Keypoint{5, 5, 2}), inst(2, 1, hat, BBox{0, 0, 10, 10})},
       VerdictLabel::wearer},
      {"keypoint on hat edge", {inst(1, 1, person, BBox{0, 0, 20, 40}, Keypoint{10, 5, 2}), inst(2, 1, hat, BBox{0, 0, 10, 10})},
       VerdictLabel::wearer},
      {"keypoint, no hat", {inst(1, 1, person, BBox{0, 0, 20, 40}, Keypoint{5, 5, 2})}, VerdictLabel::nonwearer},
      {"keypoint, hat elsewhere",
       {inst(1, 1, person, BBox{0, 0, 20, 40}, Keypoint{5, 5, 2}), inst(2, 1, hat, BBox{30, 0, 10, 10})},
       VerdictLabel::nonwearer},
      {"no keypoint", {inst(1, 1, person, BBox{0, 0, 20, 40}), inst(2, 1, hat, BBox{0, 0, 10, 10})},
       VerdictLabel::indeterminate},
  };
  int runs = 0;
  for (const Row& row : table) {
    for (double s : {0.1, 1.0, 7.3}) {
      std::vector<Instance> scaled = row.instances;
      for (Instance& i : scaled) {
        i.bbox = BBox{i.bbox.x * s, i.bbox.y * s, i.bbox.w * s, i.bbox.h * s};
        if (i.head_keypoint) i.head_keypoint = Keypoint{i.head_keypoint->x * s, i.head_keypoint->y * s, 2};
      }
      const auto v = classify_rule(scaled);
      ++runs;
      c.expect(v.size() == 1 && v[0].label == row.expected, std::string(row.name) + " at s = " + fmt(s));
      if (!v.empty()) c.expect(v[0].matched_hat.has_value() == (row.expected == VerdictLabel::wearer), row.name);
    }
  }
  return c.outcome(std::to_string(table.size()) + " table rows x scales {0.1, 1, 7.3} = " + std::to_string(runs) + " runs, exact");
}

// 6. CART correctness.
Outcome cart_correctness() {
  using namespace cart;
  Check c;
  c.expect(impurity({9, 0}, Criterion::gini) == 0.0, "pure gini");
  c.expect(impurity({0, 9}, Criterion::entropy) == 0.0, "pure entropy");
  c.expect(impurity({5, 5}, Criterion::gini) == 0.5, "50/50 gini");
  c.expect(impurity({5, 5}, Criterion::entropy) == 1.0, "50/50 entropy");

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<HatFeatures> x;
  std::vector<Wearing> y;
  for (int i = 0; i < 120; ++i) {
    const double cy = i % 2 == 0 ? 0.45 * unit(rng) : 0.55 + 0.45 * unit(rng);
    x.push_back(HatFeatures{0.5, cy, 0.3, 0.1, true});
    y.push_back(cy < 0.5 ? Wearing::wearer : Wearing::nonwearer);
  }
  const DecisionTree stump = fit(x, y, TreeParams{});
  c.expect(stump.depth() == 1 && stump.internal_count() == 1, "stump depth " + std::to_string(stump.depth()));
  const GridSearchResult gs = grid_search(x, y, GridSearchSpec{});
  c.expect(gs.best_accuracy == 1.0, "CV accuracy " + fmt(gs.best_accuracy));
  c.expect(fit(x, y, gs.best).depth() == 1, "best grid point fits a stump");

  std::size_t total_nodes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 r(seed);
    std::vector<HatFeatures> rx;
    std::vector<Wearing> ry;
    for (int i = 0; i < 300; ++i) {
      rx.push_back(HatFeatures{unit(r), unit(r), unit(r), unit(r), true});
      ry.push_back(unit(r) < 0.5 ? Wearing::wearer : Wearing::nonwearer);
    }
    const DecisionTree t = fit(rx, ry, TreeParams{Criterion::gini, std::nullopt, 2});
    total_nodes += t.nodes().size();
    std::size_t ok = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) ok += predict(t, rx[i]) == ry[i] ? 1 : 0;
    c.expect(ok == rx.size(), "training accuracy seed " + std::to_string(seed));
  }
  return c.outcome("impurity spot values exact; stump CV accuracy 1.0; unlimited depth fits 10 random sets (" +
                   std::to_string(total_nodes) + " nodes)");
}

// 7. tune_threshold against a brute-force sweep.
Outcome threshold_sweep() {
  Check c;
  std::mt19937_64 rng(77);
  int distinct = 0;
  double last = -1.0;
  for (int n = 0; n < kSweepFixtures; ++n) {
    std::vector<Instance> dets;
    const Dataset gt = sweep_oracle::random_scored_scene(rng, dets);
    for (double iou_thr : {0.5, 0.75}) {
      const ThresholdSweepResult r = tune_threshold(gt, dets, iou_thr);
      const sweep_oracle::Result o = sweep_oracle::brute_force_sweep(gt, dets, iou_thr);
      c.expect(r.grid.size() == 95, "grid size");
      c.expect(r.chosen == o.chosen, "fixture " + std::to_string(n) + ": " + fmt(r.chosen) + " vs " + fmt(o.chosen));
      if (r.chosen != last) ++distinct;
      last = r.chosen;
    }
  }
  return c.outcome(std::to_string(kSweepFixtures) + " fixtures x IoU {0.5, 0.75}, chosen threshold exact (" +
                   std::to_string(distinct) + " changes of argmax)");
}

// 8. Mean AP does not rise with the drop rate.
Outcome noise_monotonicity() {
  Check c;
  const double drops[] = {0.0, 0.2, 0.4};
  double mean[3] = {0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    for (int n = 0; n < kMonotonicitySeeds; ++n) {
      synth::SceneSpec s;
      s.seed = kMonotonicitySeedBase + static_cast<std::uint64_t>(n);
      s.image_count = 8;
      s.persons_max = 4;
      s.box_jitter = 0.1;
      s.false_positive_rate = 0.1;
      s.drop_rate = drops[k];
      const synth::Scene scene = synth::generate(s);
      mean[k] += *ap_coco(scene.ground_truth, scene.detections, EvalConfig{}, Similarity::iou).overall.get(Metric::ap);
    }
    mean[k] /= kMonotonicitySeeds;
  }
  c.expect(mean[1] <= mean[0], "drop 0.2 above drop 0");
  c.expect(mean[2] <= mean[1], "drop 0.4 above drop 0.2");
  return c.outcome("mean AP over 30 seeds: " + fmt(mean[0]).substr(0, 6) + " >= " + fmt(mean[1]).substr(0, 6) +
                   " >= " + fmt(mean[2]).substr(0, 6));
}

struct TableRow {
  const char* category;
  const char* subgroup;
  std::array<std::int64_t, 4> counts;
};

void check_table(Check& c, const char* env, const std::vector<TableRow>& expected, std::string& detail) {
  const char* path = std::getenv(env);
  if (!path || !std::filesystem::exists(path)) return;
  const StatsReport r = dataset_stats(load_ground_truth(path));
  for (const TableRow& row : expected) {
    const StatsRow* got = r.find(row.category, row.subgroup);
    c.expect(got && got->counts == row.counts, std::string(env) + " " + row.category + "/" + row.subgroup);
  }
  detail += std::string("; ") + env + " counts checked";
}

// 9. Format round trip and stats.
Outcome format_round_trip() {
  Check c;
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset ds;
  for (int i = 1; i <= 20; ++i) ds.images.push_back(ImageInfo{i, 1920, 1080, "f" + std::to_string(i) + ".jpg"});
  ds.categories = {cat(1, CategoryKind::person), cat(2, CategoryKind::hard_hat)};
  std::vector<Instance> dets;
  for (int i = 1; i <= kRoundTripInstances; ++i) {
    const bool is_person = unit(rng) < 0.5;
    Instance a = inst(i, 1 + static_cast<std::int64_t>(unit(rng) * 20), ds.categories[is_person ? 0 : 1],
                      BBox{unit(rng) * 1900, unit(rng) * 1000, unit(rng) * 300, unit(rng) * 300});
    if (is_person && unit(rng) < 0.8) a.head_keypoint = Keypoint{unit(rng) * 1920, unit(rng) * 1080, 2};
    a.ignore = unit(rng) < 0.05;
    ds.instances.push_back(a);
    a.score = unit(rng);
    dets.push_back(a);
  }
  const Dataset back = parse_ground_truth(serialize_dataset(ds));
  c.expect(back.instances == ds.instances, "ground-truth round trip");
  c.expect(back.images == ds.images && back.categories == ds.categories, "images/categories round trip");
  c.expect(parse_detections(serialize_instances(dets), ds) == dets, "results round trip");

  // Fixture stats: counts worked out by hand.
  const Category person = cat(1, CategoryKind::person);
  const Category hat = cat(2, CategoryKind::hard_hat);
  Instance crowd = inst(9, 1, person, BBox{0, 0, 5, 5});
  crowd.ignore = true;
  const Dataset fixture = one_image({
      inst(1, 1, person, BBox{0, 0, 20, 40}, Keypoint{10, 5, 2}),        // small, wearing
      inst(2, 1, hat, BBox{5, 0, 10, 10}),                                // small
      inst(3, 1, person, BBox{100, 0, 50, 100}, Keypoint{125, 10, 2}),   // medium, not wearing
      inst(4, 1, person, BBox{200, 0, 100, 200}, Keypoint{250, 20, 2}),  // large, wearing
      inst(5, 1, hat, BBox{230, 0, 40, 40}),                              // medium
      inst(6, 1, person, BBox{400, 0, 32, 32}),                           // medium, no keypoint
      crowd,
  });
  const StatsReport stats = dataset_stats(fixture);
  const std::vector<TableRow> expected = {
      {"hard_hat", "all", {2, 1, 1, 0}},
      {"person", "all", {4, 1, 2, 1}},
      {"person", "with_head_keypoint", {3, 1, 1, 1}},
      {"person", "with_head_keypoint_wearing", {2, 1, 0, 1}},
  };
  for (const TableRow& row : expected) {
    const StatsRow* got = stats.find(row.category, row.subgroup);
    c.expect(got && got->counts == row.counts, std::string("fixture ") + row.category + "/" + row.subgroup);
  }

  std::string detail = std::to_string(kRoundTripInstances) + " instances field-identical; fixture stats exact";
  const std::vector<TableRow> train = {
      {"hard_hat", "all", {17741, 11340, 5922, 479}},
      {"person", "all", {23882, 2805, 9729, 11348}},
      {"person", "with_head_keypoint", {22983, 2602, 9232, 11149}},
      {"person", "with_head_keypoint_wearing", {16700, 1715, 6459, 8526}},
  };
  const std::vector<TableRow> test = {
      {"hard_hat", "all", {5746, 3727, 1841, 178}},
      {"person", "all", {7992, 1077, 3200, 3715}},
      {"person", "with_head_keypoint", {7775, 1036, 3065, 3674}},
      {"person", "with_head_keypoint_wearing", {5353, 509, 2071, 2773}},
  };
  const std::size_t before = detail.size();
  check_table(c, kTrainEnv, train, detail);
  check_table(c, kTestEnv, test, detail);
  if (detail.size() == before) detail += "; relabeled dataset not present, fixture substitutes";
  return c.outcome(detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"identity fixture", identity_fixture},
      {"hand PR cases", hand_pr_cases},
      {"OKS point checks", oks_points},
      {"keypoint rule conformance", rule_conformance},
      {"CART correctness", cart_correctness},
      {"threshold sweep", threshold_sweep},
      {"noise monotonicity", noise_monotonicity},
      {"format round trip", format_round_trip},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %-26s %s  %s\n", index++, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
