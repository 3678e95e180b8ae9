#include "hardhat/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hardhat/cart.hpp"
#include "hardhat/coco_io.hpp"
#include "hardhat/compliance.hpp"
#include "hardhat/error.hpp"
#include "hardhat/file_util.hpp"
#include "hardhat/metrics.hpp"
#include "hardhat/pipeline.hpp"
#include "hardhat/synth.hpp"

namespace hardhat::cli {

namespace {

constexpr int kSchemaVersion = 1;

struct Options {
  std::string config;
  int verbosity = 1;
  bool schema = false;

  std::string gt;
  std::string det;
  std::string tree;
  std::string out;
  bool json = false;

  double threshold = 0.0;
  bool threshold_given = false;
  double f1_iou = 0.5;
  bool keep_indeterminate = false;
  std::string classifier = "rule";
  std::string sim = "iou";
  bool pipeline = false;
  int max_dets = 100;
  bool max_dets_given = false;

  std::string scene;
  std::string gt_out;
  std::string det_out;
  std::string tree_out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int folds = 5;
  std::vector<int> min_splits;

  EvalConfig eval;
};

class Progress {
 public:
  Progress(std::ostream& err, int verbosity) : err_(err), verbosity_(verbosity) {}

  template <typename... Fields>
  void operator()(std::string_view event, const Fields&... fields) const {
    if (verbosity_ < 1) return;
    err_ << "hardhat: event=" << event;
    ((err_ << ' ' << fields), ...);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  int verbosity_;
};

template <typename T>
std::string kv(std::string_view key, const T& value) {
  std::ostringstream os;
  os << key << '=' << value;
  return os.str();
}

void require_input(const std::string& path, const char* flag) {
  if (path.empty()) throw ValidationError(std::string(flag) + " is required");
  if (!std::filesystem::exists(path)) throw IoError("input file not found: " + path);
}

void emit(const Options& opt, std::ostream& out, const std::string& content) {
  if (opt.out.empty()) {
    out << content;
  } else {
    write_file_atomic(opt.out, content);
  }
}

// Applies a JSON config file's evaluation settings; flags parsed later win.
void apply_config(Options& opt, const Progress& log) {
  std::string path = opt.config;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv)) path = env;
  }
  if (path.empty()) return;
  require_input(path, "--config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    if (j.value("version", 1) != 1) throw ParseError("config: unsupported version");
    if (j.contains("iou_thresholds")) opt.eval.iou_thresholds = j.at("iou_thresholds").get<std::vector<double>>();
    if (j.contains("recall_thresholds")) {
      opt.eval.recall_thresholds = j.at("recall_thresholds").get<std::vector<double>>();
    }
    if (j.contains("max_dets_per_image")) opt.eval.max_dets_per_image = j.at("max_dets_per_image").get<int>();
    if (j.contains("oks_sigmas")) opt.eval.oks_sigmas = j.at("oks_sigmas").get<std::vector<double>>();
    if (j.contains("f1_iou")) opt.f1_iou = j.at("f1_iou").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  log("config", kv("path", path));
}

std::string schema_text() {
  nlohmann::ordered_json s;
  s["schema_version"] = kSchemaVersion;
  s["ground_truth"] = {
      {"format", "COCO annotation JSON"},
      {"root", {"images", "categories", "annotations"}},
      {"images[]", {{"id", "int"}, {"width", "int"}, {"height", "int"}, {"file_name", "string"}}},
      {"categories[]",
       {{"id", "int"}, {"name", "person | hard_hat | hard_hat_wearer | hard_hat_nonwearer"}}},
      {"annotations[]",
       {{"id", "int, unique"},
        {"image_id", "int"},
        {"category_id", "int"},
        {"bbox", "[x, y, w, h] pixels, w and h >= 0"},
        {"keypoints", "optional [x, y, v]; the first triplet is the head, v in {0, 1, 2}"},
        {"iscrowd", "optional 0/1; 1 loads as an ignored region"}}},
      {"notes", "hard_hat_wearer present means wearer labels are taken verbatim"}};
  s["detections"] = {
      {"format", "COCO results JSON list"},
      {"record",
       {{"id", "optional int; defaults to 1-based position"},
        {"image_id", "int"},
        {"category_id", "int"},
        {"bbox", "[x, y, w, h]"},
        {"score", "real in [0, 1]"},
        {"keypoints", "optional [x, y, v]; v = 1 kept, anything else read as 2"},
        {"iscrowd", "optional 0/1"}}}};
  s["decision_tree"] = {{"format", "hardhat-decision-tree"},
                        {"version", 1},
                        {"fields",
                         {"criterion", "max_depth", "min_samples_split", "features", "no_hat_label",
                          "depth", "internal_nodes", "leaves", "nodes"}},
                        {"nodes[]", "internal {feature, threshold, left, right} or leaf {label, counts}; "
                                    "root is nodes[0]; value <= threshold goes left"}};
  s["scene_spec"] = {{"version", 1},
                     {"fields",
                      {"image_count", "persons_min", "persons_max", "wearer_probability",
                       "keypoint_probability", "person_width", "person_height", "head_fraction",
                       "hat_width_fraction", "hat_height_fraction", "image_width", "image_height",
                       "box_jitter", "keypoint_jitter", "score_noise", "score_a", "score_b",
                       "false_positive_rate", "drop_rate", "seed"}}};
  s["config"] = {{"version", 1},
                 {"fields", {"iou_thresholds", "recall_thresholds", "max_dets_per_image", "oks_sigmas", "f1_iou"}},
                 {"env", kConfigEnv}};
  s["stats_csv"] = {"category", "subgroup", "all", "small", "medium", "large"};
  s["metrics_csv"] = {"class", "AP", "AP50", "AP75", "AP_S (box only)", "AP_M", "AP_L"};
  s["pr_curve_csv"] = {"class", "threshold", "score", "recall", "precision", "p_int"};
  s["threshold_sweep_csv"] = {"threshold", "wearer_f1", "nonwearer_f1", "overall_f1"};
  s["cv_table_csv"] = {"criterion", "max_depth", "min_samples_split", "fold1..k", "mean_accuracy"};
  return s.dump(2) + "\n";
}

std::optional<cart::DecisionTree> load_classifier(const Options& opt, const Progress& log) {
  if (opt.classifier == "rule") return std::nullopt;
  require_input(opt.tree, "--tree");
  auto tree = cart::load_tree(opt.tree);
  log("load", kv("kind", "tree"), kv("path", opt.tree), kv("depth", tree.depth()),
      kv("nodes", tree.nodes().size()));
  return tree;
}

struct Inputs {
  Dataset gt;
  std::vector<Instance> dets;
};

Inputs load_inputs(const Options& opt, const Progress& log, bool need_dets) {
  Inputs in;
  in.gt = load_ground_truth(opt.gt);
  log("load", kv("kind", "ground_truth"), kv("path", opt.gt), kv("images", in.gt.images.size()),
      kv("instances", in.gt.instances.size()));
  if (need_dets) {
    Dataset with_derived = in.gt;
    ensure_derived_categories(with_derived);
    in.dets = load_detections(opt.det, with_derived);
    log("load", kv("kind", "detections"), kv("path", opt.det), kv("instances", in.dets.size()));
  }
  return in;
}

EvalConfig eval_config(const Options& opt) {
  EvalConfig cfg = opt.eval;
  if (opt.max_dets_given) cfg.max_dets_per_image = opt.max_dets;
  return cfg;
}

MetricsReport evaluate_report(const Options& opt, const Progress& log) {
  const Inputs in = load_inputs(opt, log, true);
  if (opt.pipeline) {
    const auto tree = load_classifier(opt, log);
    PipelineOptions po;
    if (opt.threshold_given) po.threshold = opt.threshold;
    po.f1_iou = opt.f1_iou;
    po.tree = tree ? &*tree : nullptr;
    po.eval = eval_config(opt);
    PipelineResult r = pipeline_classify_then_evaluate(in.gt, in.dets, po);
    log("pipeline", kv("classifier", opt.classifier), kv("threshold", r.threshold),
        kv("derived_detections", r.derived_detections.size()));
    return std::move(r.report);
  }
  const Similarity sim = opt.sim == "oks" ? Similarity::oks : Similarity::iou;
  return ap_coco(in.gt, in.dets, eval_config(opt), sim);
}

int cmd_stats(const Options& opt, std::ostream& out, const Progress& log) {
  require_input(opt.gt, "--gt");
  const Dataset gt = load_ground_truth(opt.gt);
  log("load", kv("kind", "ground_truth"), kv("path", opt.gt), kv("instances", gt.instances.size()));
  const StatsReport stats = dataset_stats(gt);
  if (!opt.json) {
    emit(opt, out, stats.to_csv());
    return kExitOk;
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const StatsRow& r : stats.rows) {
    rows.push_back({{"category", r.category}, {"subgroup", r.subgroup}, {"all", r.counts[0]},
                    {"small", r.counts[1]}, {"medium", r.counts[2]}, {"large", r.counts[3]}});
  }
  emit(opt, out, rows.dump(2) + "\n");
  return kExitOk;
}

int cmd_classify(const Options& opt, std::ostream& out, const Progress& log) {
  require_input(opt.gt, "--gt");
  require_input(opt.det, "--det");
  const auto tree = load_classifier(opt, log);
  Inputs in = load_inputs(opt, log, true);
  const DerivedCategories cats = ensure_derived_categories(in.gt);
  const auto kept = filter_by_threshold(in.dets, opt.threshold_given ? opt.threshold : 0.0);
  const auto verdicts = classify_by_image(kept, tree ? &*tree : nullptr);
  std::size_t counts[3] = {0, 0, 0};
  for (const Verdict& v : verdicts) ++counts[static_cast<int>(v.label)];
  log("classify", kv("classifier", opt.classifier), kv("kept", kept.size()), kv("wearer", counts[0]),
      kv("nonwearer", counts[1]), kv("indeterminate", counts[2]));
  emit(opt, out, serialize_instances(verdicts_to_instances(verdicts, opt.keep_indeterminate, cats)));
  return kExitOk;
}

int cmd_evaluate(const Options& opt, std::ostream& out, const Progress& log) {
  require_input(opt.gt, "--gt");
  require_input(opt.det, "--det");
  const MetricsReport report = evaluate_report(opt, log);
  emit(opt, out, opt.json ? report.to_json() : report.to_csv());
  return kExitOk;
}

int cmd_pr_export(const Options& opt, std::ostream& out, const Progress& log) {
  require_input(opt.gt, "--gt");
  require_input(opt.det, "--det");
  emit(opt, out, evaluate_report(opt, log).curves_csv());
  return kExitOk;
}

int cmd_tune(const Options& opt, std::ostream& out, const Progress& log) {
  require_input(opt.gt, "--gt");
  require_input(opt.det, "--det");
  const Inputs in = load_inputs(opt, log, true);
  const ThresholdSweepResult sweep = tune_threshold(in.gt, in.dets, opt.f1_iou);
  log("chosen", kv("threshold", sweep.chosen), kv("overall_f1", sweep.chosen_f1));
  if (!opt.json) {
    emit(opt, out, sweep.to_csv());
    return kExitOk;
  }
  nlohmann::ordered_json j;
  j["f1_iou"] = opt.f1_iou;
  j["chosen"] = sweep.chosen;
  j["chosen_overall_f1"] = sweep.chosen_f1;
  auto& grid = j["grid"] = nlohmann::ordered_json::array();
  auto f1 = [](const ClassF1& c) {
    auto v = c.f1();
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  for (const SweepPoint& p : sweep.grid) {
    grid.push_back({{"threshold", p.threshold},
                    {"wearer_f1", f1(p.wearer)},
                    {"nonwearer_f1", f1(p.nonwearer)},
                    {"overall_f1", p.overall_f1}});
  }
  emit(opt, out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_fit_dt(const Options& opt, std::ostream& out, const Progress& log) {
  require_input(opt.gt, "--gt");
  if (opt.tree_out.empty()) throw ValidationError("--tree-out is required");
  const Dataset gt = load_ground_truth(opt.gt);
  const TrainingSet train = training_samples(gt);
  log("features", kv("samples", train.features.size()));

  cart::GridSearchSpec spec;
  spec.folds = opt.folds;
  spec.seed = opt.seed;
  if (!opt.min_splits.empty()) spec.min_splits = opt.min_splits;
  const cart::GridSearchResult gs = cart::grid_search(train.features, train.labels, spec);
  const cart::DecisionTree tree = cart::fit(train.features, train.labels, gs.best);
  cart::save_tree(tree, opt.tree_out);
  log("fit", kv("criterion", cart::to_string(gs.best.criterion)),
      kv("max_depth", gs.best.max_depth ? std::to_string(*gs.best.max_depth) : std::string("none")),
      kv("min_samples_split", gs.best.min_samples_split), kv("cv_accuracy", gs.best_accuracy),
      kv("depth", tree.depth()), kv("internal_nodes", tree.internal_count()), kv("leaves", tree.leaf_count()),
      kv("seed", opt.seed));
  emit(opt, out, gs.table_csv());
  return kExitOk;
}

int cmd_generate(const Options& opt, std::ostream& out, const Progress& log) {
  if (opt.gt_out.empty() || opt.det_out.empty()) throw ValidationError("--gt-out and --det-out are required");
  synth::SceneSpec spec;
  if (!opt.scene.empty()) {
    require_input(opt.scene, "--scene");
    spec = synth::load_scene_spec(opt.scene);
  }
  if (opt.seed_given) spec.seed = opt.seed;
  const synth::Scene scene = synth::generate(spec);
  write_dataset(scene.ground_truth, opt.gt_out);
  write_instances(scene.detections, opt.det_out);
  log("generate", kv("seed", spec.seed), kv("images", scene.ground_truth.images.size()),
      kv("ground_truth", scene.ground_truth.instances.size()), kv("detections", scene.detections.size()));
  nlohmann::ordered_json summary;
  summary["seed"] = spec.seed;
  summary["images"] = scene.ground_truth.images.size();
  summary["ground_truth_instances"] = scene.ground_truth.instances.size();
  summary["detections"] = scene.detections.size();
  emit(opt, out, summary.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Hard-hat compliance classification and COCO-style evaluation", "hardhat"};
  app.set_version_flag("--version", "hardhat 1.0.0");
  app.add_flag("--schema", opt.schema, "Print the versioned schema of every file format and exit");
  app.add_option("--config", opt.config,
                 std::string("Evaluation config JSON (default: $") + kConfigEnv + ")");
  app.add_flag_function("-v,--verbose", [&](std::int64_t n) { opt.verbosity = 1 + static_cast<int>(n); },
                        "More progress output on stderr");
  app.add_flag_function("-q,--quiet", [&](std::int64_t) { opt.verbosity = 0; }, "No progress output");
  app.require_subcommand(0, 1);
  app.fallthrough();

  auto add_gt = [&](CLI::App* sub) { sub->add_option("--gt", opt.gt, "Ground-truth COCO annotation file"); };
  auto add_det = [&](CLI::App* sub) { sub->add_option("--det", opt.det, "COCO results file"); };
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("-o,--out", opt.out, "Write the report here instead of stdout");
  };
  auto add_json = [&](CLI::App* sub) { sub->add_flag("--json", opt.json, "JSON report instead of CSV"); };
  auto add_threshold = [&](CLI::App* sub) {
    sub->add_option_function<double>(
           "--threshold",
           [&](double t) {
             opt.threshold = t;
             opt.threshold_given = true;
           },
           "Detection score cutoff in [0, 1]")
        ->check(CLI::Range(0.0, 1.0));
  };
  auto add_f1_iou = [&](CLI::App* sub) {
    sub->add_option("--f1-iou", opt.f1_iou, "IoU for F1 matching")->check(CLI::Range(0.0, 1.0));
  };
  auto add_classifier = [&](CLI::App* sub) {
    sub->add_option("--classifier", opt.classifier, "rule or dt")->check(CLI::IsMember({"rule", "dt"}));
    sub->add_option("--tree", opt.tree, "Decision tree JSON for --classifier dt");
  };
  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--sim", opt.sim, "Similarity: iou (boxes) or oks (head keypoint)")
        ->check(CLI::IsMember({"iou", "oks"}));
    sub->add_flag("--pipeline", opt.pipeline,
                  "Classify persons into wearer/non-wearer first and score those classes");
    sub->add_option_function<int>(
           "--max-dets",
           [&](int n) {
             opt.max_dets = n;
             opt.max_dets_given = true;
           },
           "Detections kept per image and class")
        ->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t s) {
          opt.seed = s;
          opt.seed_given = true;
        },
        "Root seed for all randomness");
  };

  CLI::App* stats = app.add_subcommand("stats", "Instance counts per category and area bucket");
  add_gt(stats);
  add_out(stats);
  add_json(stats);

  CLI::App* classify = app.add_subcommand("classify", "Label detected persons as wearers/non-wearers");
  add_gt(classify);
  add_det(classify);
  add_out(classify);
  add_threshold(classify);
  add_classifier(classify);
  classify->add_flag("--keep-indeterminate", opt.keep_indeterminate,
                     "Keep persons without a head keypoint (category person)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "COCO-style AP report");
  add_gt(evaluate);
  add_det(evaluate);
  add_out(evaluate);
  add_json(evaluate);
  add_eval(evaluate);
  add_threshold(evaluate);
  add_f1_iou(evaluate);
  add_classifier(evaluate);

  CLI::App* tune = app.add_subcommand("tune-threshold", "F1-maximizing score threshold sweep");
  add_gt(tune);
  add_det(tune);
  add_out(tune);
  add_json(tune);
  add_f1_iou(tune);

  CLI::App* fit_dt = app.add_subcommand("fit-dt", "Grid-search and fit the decision-tree baseline");
  add_gt(fit_dt);
  add_out(fit_dt);
  add_seed(fit_dt);
  fit_dt->add_option("--tree-out", opt.tree_out, "Where to write the fitted tree");
  fit_dt->add_option("--folds", opt.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  fit_dt->add_option("--min-splits", opt.min_splits, "min_samples_split grid");

  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic scene and its detections");
  generate->add_option("--scene", opt.scene, "Scene spec JSON");
  generate->add_option("--gt-out", opt.gt_out, "Ground-truth output path");
  generate->add_option("--det-out", opt.det_out, "Detections output path");
  add_seed(generate);
  add_out(generate);

  CLI::App* pr_export = app.add_subcommand("pr-export", "Per-class precision/recall curves as CSV");
  add_gt(pr_export);
  add_det(pr_export);
  add_out(pr_export);
  add_eval(pr_export);
  add_threshold(pr_export);
  add_f1_iou(pr_export);
  add_classifier(pr_export);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  if (opt.schema) {
    out << schema_text();
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return kExitInvalid;
  }

  const Progress log(err, opt.verbosity);
  try {
    const double f1_flag = opt.f1_iou;
    const bool f1_from_flag = (evaluate->count("--f1-iou") + tune->count("--f1-iou") + pr_export->count("--f1-iou")) > 0;
    apply_config(opt, log);
    if (f1_from_flag) opt.f1_iou = f1_flag;
    opt.eval.validate();

    if (*stats) return cmd_stats(opt, out, log);
    if (*classify) return cmd_classify(opt, out, log);
    if (*evaluate) return cmd_evaluate(opt, out, log);
    if (*tune) return cmd_tune(opt, out, log);
    if (*fit_dt) return cmd_fit_dt(opt, out, log);
    if (*generate) return cmd_generate(opt, out, log);
    if (*pr_export) return cmd_pr_export(opt, out, log);
  } catch (const IoError& e) {
    err << "hardhat: error=io message=\"" << e.what() << "\"\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "hardhat: error=invalid message=\"" << e.what() << "\"\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace hardhat::cli
