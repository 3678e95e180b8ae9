#include "hardhat/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hardhat/error.hpp"
#include "hardhat/file_util.hpp"

namespace hardhat::cart {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "hardhat-decision-tree";
constexpr std::array<const char*, HatFeatures::kDimension> kFeatureNames = {"cx", "cy", "rw", "rh"};

// Splits whose gain is below this are rounding noise between children that
// share the parent's class mix.
constexpr double kMinGain = 1e-12;

Wearing majority(const ClassCounts& c) {
  return c[1] > c[0] ? Wearing::wearer : Wearing::nonwearer;
}

ClassCounts count_labels(std::span<const std::size_t> idx, std::span<const Wearing> labels) {
  ClassCounts c{};
  for (std::size_t i : idx) c[static_cast<std::size_t>(labels[i])] += 1;
  return c;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

Split best_split(std::vector<std::size_t>& idx, std::span<const HatFeatures> features,
                 std::span<const Wearing> labels, const ClassCounts& parent, Criterion criterion) {
  const double n = static_cast<double>(idx.size());
  const double parent_impurity = impurity(parent, criterion);
  Split best;
  best.gain = kMinGain;
  for (int f = 0; f < static_cast<int>(HatFeatures::kDimension); ++f) {
    auto value = [&](std::size_t i) { return features[i].values()[static_cast<std::size_t>(f)]; };
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    ClassCounts left{};
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      left[static_cast<std::size_t>(labels[idx[k]])] += 1;
      const double lo = value(idx[k]);
      const double hi = value(idx[k + 1]);
      if (!(lo < hi)) continue;
      const ClassCounts right{parent[0] - left[0], parent[1] - left[1]};
      const double nl = static_cast<double>(k + 1);
      const double nr = n - nl;
      const double child = (nl * impurity(left, criterion) + nr * impurity(right, criterion)) / n;
      const double gain = parent_impurity - child;
      if (gain > best.gain) {
        double mid = lo + (hi - lo) / 2.0;
        if (!(mid < hi)) mid = lo;
        best = Split{f, mid, gain};
      }
    }
  }
  return best;
}

std::vector<Node> build(std::vector<std::size_t> root_idx, std::span<const HatFeatures> features,
                        std::span<const Wearing> labels, const TreeParams& params) {
  struct Pending {
    int node;
    int depth;
    std::vector<std::size_t> idx;
  };
  std::vector<Node> nodes(1);
  std::vector<Pending> stack;
  stack.push_back({0, 0, std::move(root_idx)});
  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    const ClassCounts counts = count_labels(p.idx, labels);
    Node leaf;
    leaf.label = majority(counts);
    leaf.counts = counts;

    const bool pure = counts[0] == 0 || counts[1] == 0;
    const bool at_depth = params.max_depth && p.depth >= *params.max_depth;
    const bool too_small = static_cast<int>(p.idx.size()) < params.min_samples_split;
    if (pure || at_depth || too_small) {
      nodes[static_cast<std::size_t>(p.node)] = leaf;
      continue;
    }
    const Split split = best_split(p.idx, features, labels, counts, params.criterion);
    if (split.feature < 0) {
      nodes[static_cast<std::size_t>(p.node)] = leaf;
      continue;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    std::sort(p.idx.begin(), p.idx.end());
    for (std::size_t i : p.idx) {
      (features[i].values()[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right)
          .push_back(i);
    }
    Node internal;
    internal.feature = split.feature;
    internal.threshold = split.threshold;
    internal.counts = counts;
    internal.label = leaf.label;
    internal.left = static_cast<int>(nodes.size());
    internal.right = internal.left + 1;
    nodes.resize(nodes.size() + 2);
    nodes[static_cast<std::size_t>(p.node)] = internal;
    // Right first so the left subtree is expanded first.
    stack.push_back({internal.right, p.depth + 1, std::move(right)});
    stack.push_back({internal.left, p.depth + 1, std::move(left)});
  }
  return nodes;
}

Wearing parse_label(const nlohmann::json& v) {
  if (!v.is_string()) throw ParseError("tree: label must be a string");
  const auto s = v.get<std::string>();
  if (s == "wearer") return Wearing::wearer;
  if (s == "nonwearer") return Wearing::nonwearer;
  throw ParseError("tree: unknown label '" + s + "'");
}

}  // namespace

std::string_view to_string(Wearing w) noexcept {
  return w == Wearing::wearer ? "wearer" : "nonwearer";
}

std::string_view to_string(Criterion c) noexcept {
  return c == Criterion::gini ? "gini" : "entropy";
}

double impurity(const ClassCounts& counts, Criterion criterion) {
  const std::int64_t total = counts[0] + counts[1];
  if (total <= 0) throw ValidationError("impurity of an empty node");
  double acc = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    acc += criterion == Criterion::gini ? p * p : -p * std::log2(p);
  }
  return criterion == Criterion::gini ? 1.0 - acc : acc;
}

DecisionTree::DecisionTree(TreeParams params, Wearing no_hat_label, std::vector<Node> nodes)
    : params_(params), no_hat_label_(no_hat_label), nodes_(std::move(nodes)) {
  validate();
}

void DecisionTree::validate() const {
  if (nodes_.empty()) throw ValidationError("tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (int i = 0; i < n; ++i) {
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.is_leaf()) continue;
    if (node.feature >= static_cast<int>(HatFeatures::kDimension)) {
      throw ValidationError("tree node " + std::to_string(i) + ": feature index out of range");
    }
    if (node.left <= i || node.right <= i || node.left >= n || node.right >= n) {
      throw ValidationError("tree node " + std::to_string(i) + ": children must follow their parent");
    }
  }
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    deepest = std::max(deepest, d[i]);
    if (node.is_leaf()) continue;
    d[static_cast<std::size_t>(node.left)] = d[i] + 1;
    d[static_cast<std::size_t>(node.right)] = d[i] + 1;
  }
  return deepest;
}

std::size_t DecisionTree::internal_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return !n.is_leaf(); }));
}

std::size_t DecisionTree::leaf_count() const { return nodes_.size() - internal_count(); }

DecisionTree fit(std::span<const HatFeatures> features, std::span<const Wearing> labels,
                 const TreeParams& params) {
  if (features.size() != labels.size()) throw ValidationError("fit: features and labels differ in length");
  if (features.empty()) throw ValidationError("fit: empty training set");
  if (params.min_samples_split < 2) throw ValidationError("fit: min_samples_split must be >= 2");
  if (params.max_depth && *params.max_depth < 0) throw ValidationError("fit: negative max_depth");

  std::vector<std::size_t> all(features.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Wearing overall = majority(count_labels(all, labels));

  std::vector<std::size_t> with_hat;
  std::vector<std::size_t> without_hat;
  for (std::size_t i : all) (features[i].has_hat ? with_hat : without_hat).push_back(i);

  const Wearing no_hat_label =
      without_hat.empty() ? overall : majority(count_labels(without_hat, labels));
  std::vector<Node> nodes;
  if (with_hat.empty()) {
    Node leaf;
    leaf.label = overall;
    nodes.push_back(leaf);
  } else {
    nodes = build(std::move(with_hat), features, labels, params);
  }
  return DecisionTree(params, no_hat_label, std::move(nodes));
}

Wearing predict(const DecisionTree& tree, std::span<const double> values) {
  if (values.size() != HatFeatures::kDimension) {
    throw ValidationError("predict: expected " + std::to_string(HatFeatures::kDimension) +
                          " features, got " + std::to_string(values.size()));
  }
  const auto& nodes = tree.nodes();
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const Node& n = nodes[i];
    i = static_cast<std::size_t>(values[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                            : n.right);
  }
  return nodes[i].label;
}

Wearing predict(const DecisionTree& tree, const HatFeatures& f) {
  if (!f.has_hat) return tree.no_hat_label();
  const auto v = f.values();
  return predict(tree, std::span<const double>(v));
}

std::vector<std::optional<int>> GridSearchSpec::default_depths() {
  std::vector<std::optional<int>> d;
  for (int i = 2; i <= 15; ++i) d.emplace_back(i);
  d.emplace_back(std::nullopt);
  return d;
}

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("need at least 2 folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    fold[perm[pos]] = static_cast<int>(pos * static_cast<std::size_t>(folds) / n);
  }
  return fold;
}

namespace {

// True when a is preferred over b at equal accuracy.
bool simpler(const TreeParams& a, const TreeParams& b) {
  const int da = a.max_depth.value_or(INT32_MAX);
  const int db = b.max_depth.value_or(INT32_MAX);
  if (da != db) return da < db;
  if (a.min_samples_split != b.min_samples_split) return a.min_samples_split > b.min_samples_split;
  return a.criterion == Criterion::gini && b.criterion != Criterion::gini;
}

}  // namespace

GridSearchResult grid_search(std::span<const HatFeatures> features, std::span<const Wearing> labels,
                             const GridSearchSpec& spec) {
  if (features.size() != labels.size()) throw ValidationError("grid_search: length mismatch");
  if (spec.folds < 2) throw ValidationError("grid_search: need at least 2 folds");
  if (features.size() < static_cast<std::size_t>(spec.folds)) {
    throw ValidationError("grid_search: fewer samples than folds");
  }
  if (spec.criteria.empty() || spec.depths.empty() || spec.min_splits.empty()) {
    throw ValidationError("grid_search: empty grid");
  }

  GridSearchResult result;
  result.fold_of_sample = assign_folds(features.size(), spec.folds, spec.seed);

  struct FoldData {
    std::vector<HatFeatures> train_x;
    std::vector<Wearing> train_y;
    std::vector<HatFeatures> test_x;
    std::vector<Wearing> test_y;
  };
  std::vector<FoldData> folds(static_cast<std::size_t>(spec.folds));
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int k = 0; k < spec.folds; ++k) {
      FoldData& fd = folds[static_cast<std::size_t>(k)];
      if (result.fold_of_sample[i] == k) {
        fd.test_x.push_back(features[i]);
        fd.test_y.push_back(labels[i]);
      } else {
        fd.train_x.push_back(features[i]);
        fd.train_y.push_back(labels[i]);
      }
    }
  }

  bool have_best = false;
  for (Criterion criterion : spec.criteria) {
    for (const auto& depth : spec.depths) {
      for (int min_split : spec.min_splits) {
        CvRow row;
        row.params = TreeParams{criterion, depth, min_split};
        double sum = 0.0;
        for (const FoldData& fd : folds) {
          const DecisionTree tree = fit(fd.train_x, fd.train_y, row.params);
          std::size_t correct = 0;
          for (std::size_t i = 0; i < fd.test_x.size(); ++i) {
            if (predict(tree, fd.test_x[i]) == fd.test_y[i]) ++correct;
          }
          const double acc = static_cast<double>(correct) / static_cast<double>(fd.test_x.size());
          row.fold_accuracy.push_back(acc);
          sum += acc;
        }
        row.mean_accuracy = sum / static_cast<double>(spec.folds);
        if (!have_best || row.mean_accuracy > result.best_accuracy ||
            (row.mean_accuracy == result.best_accuracy && simpler(row.params, result.best))) {
          result.best = row.params;
          result.best_accuracy = row.mean_accuracy;
          have_best = true;
        }
        result.table.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::string GridSearchResult::table_csv() const {
  std::ostringstream os;
  os << "criterion,max_depth,min_samples_split";
  const std::size_t k = table.empty() ? 0 : table.front().fold_accuracy.size();
  for (std::size_t i = 0; i < k; ++i) os << ",fold" << (i + 1);
  os << ",mean_accuracy\n";
  char buf[32];
  for (const CvRow& r : table) {
    os << to_string(r.params.criterion) << ','
       << (r.params.max_depth ? std::to_string(*r.params.max_depth) : std::string("none")) << ','
       << r.params.min_samples_split;
    for (double a : r.fold_accuracy) {
      std::snprintf(buf, sizeof buf, "%.6f", a);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.6f", r.mean_accuracy);
    os << ',' << buf << '\n';
  }
  return os.str();
}

std::string to_json(const DecisionTree& tree) {
  nlohmann::ordered_json j;
  j["format"] = kFormatName;
  j["version"] = kFormatVersion;
  j["criterion"] = std::string(to_string(tree.params().criterion));
  j["max_depth"] = tree.params().max_depth ? nlohmann::ordered_json(*tree.params().max_depth)
                                           : nlohmann::ordered_json(nullptr);
  j["min_samples_split"] = tree.params().min_samples_split;
  j["features"] = kFeatureNames;
  j["no_hat_label"] = std::string(to_string(tree.no_hat_label()));
  j["depth"] = tree.depth();
  j["internal_nodes"] = tree.internal_count();
  j["leaves"] = tree.leaf_count();
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const Node& n : tree.nodes()) {
    nlohmann::ordered_json rec;
    if (n.is_leaf()) {
      rec["label"] = std::string(to_string(n.label));
      rec["counts"] = {n.counts[0], n.counts[1]};
    } else {
      rec["feature"] = n.feature;
      rec["threshold"] = n.threshold;
      rec["left"] = n.left;
      rec["right"] = n.right;
    }
    nodes.push_back(std::move(rec));
  }
  return j.dump(2) + "\n";
}

DecisionTree tree_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("tree: malformed JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != kFormatName) throw ParseError("tree: not a decision-tree file");
    if (j.at("version").get<int>() != kFormatVersion) throw ParseError("tree: unsupported version");
    TreeParams params;
    const auto crit = j.at("criterion").get<std::string>();
    if (crit == "gini") {
      params.criterion = Criterion::gini;
    } else if (crit == "entropy") {
      params.criterion = Criterion::entropy;
    } else {
      throw ParseError("tree: unknown criterion '" + crit + "'");
    }
    if (!j.at("max_depth").is_null()) params.max_depth = j.at("max_depth").get<int>();
    params.min_samples_split = j.at("min_samples_split").get<int>();
    std::vector<Node> nodes;
    for (const auto& rec : j.at("nodes")) {
      Node n;
      if (rec.contains("feature")) {
        n.feature = rec.at("feature").get<int>();
        n.threshold = rec.at("threshold").get<double>();
        n.left = rec.at("left").get<int>();
        n.right = rec.at("right").get<int>();
        if (n.feature < 0) throw ValidationError("tree: negative feature index");
      } else {
        n.label = parse_label(rec.at("label"));
        if (rec.contains("counts")) {
          n.counts = {rec.at("counts").at(0).get<std::int64_t>(), rec.at("counts").at(1).get<std::int64_t>()};
        }
      }
      nodes.push_back(n);
    }
    return DecisionTree(params, parse_label(j.at("no_hat_label")), std::move(nodes));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tree: ") + e.what());
  }
}

void save_tree(const DecisionTree& tree, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(tree));
}

DecisionTree load_tree(const std::filesystem::path& path) { return tree_from_json(read_file(path)); }

}  // namespace hardhat::cart
