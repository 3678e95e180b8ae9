#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardhat/features.hpp"

namespace hardhat::cart {

enum class Wearing { nonwearer = 0, wearer = 1 };
enum class Criterion { gini, entropy };

std::string_view to_string(Wearing w) noexcept;
std::string_view to_string(Criterion c) noexcept;

using ClassCounts = std::array<std::int64_t, 2>;  // indexed by Wearing

// Gini: 1 - sum p_i^2. Entropy: -sum p_i log2 p_i with 0 log 0 = 0.
// Throws ValidationError for an empty node.
double impurity(const ClassCounts& counts, Criterion criterion);

struct TreeParams {
  Criterion criterion = Criterion::gini;
  std::optional<int> max_depth;  // nullopt = unlimited
  int min_samples_split = 2;     // a node smaller than this becomes a leaf

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct Node {
  // Internal nodes: samples with value <= threshold go left.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Leaves.
  Wearing label = Wearing::nonwearer;
  ClassCounts counts{};

  bool is_leaf() const noexcept { return feature < 0; }
};

// Binary classifier over HatFeatures. Every prediction first branches on
// has_hat: persons without a candidate hat land on a dedicated leaf, all
// others descend a CART tree over (cx, cy, rw, rh) rooted at nodes[0].
// Depth and node counts describe that CART part.
class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(TreeParams params, Wearing no_hat_label, std::vector<Node> nodes);

  const TreeParams& params() const noexcept { return params_; }
  Wearing no_hat_label() const noexcept { return no_hat_label_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  int depth() const;
  std::size_t internal_count() const;
  std::size_t leaf_count() const;

  // Throws ValidationError on a malformed node array (dangling child, bad
  // feature index, cycles).
  void validate() const;

 private:
  TreeParams params_;
  Wearing no_hat_label_ = Wearing::nonwearer;
  std::vector<Node> nodes_ = {Node{}};
};

// Greedy CART. Candidate thresholds are midpoints between consecutive
// distinct values; a split is accepted only if it lowers impurity. Ties in
// gain keep the earlier feature and the smaller threshold. Leaves take the
// majority label, ties going to nonwearer. Throws ValidationError for empty
// or mismatched input.
DecisionTree fit(std::span<const HatFeatures> features, std::span<const Wearing> labels,
                 const TreeParams& params);

Wearing predict(const DecisionTree& tree, const HatFeatures& f);
// Raw-vector form: values are (cx, cy, rw, rh) for a person with a hat.
// Throws ValidationError when the dimension does not match.
Wearing predict(const DecisionTree& tree, std::span<const double> values);

struct GridSearchSpec {
  std::vector<Criterion> criteria = {Criterion::gini, Criterion::entropy};
  std::vector<std::optional<int>> depths = default_depths();
  std::vector<int> min_splits = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  int folds = 5;
  std::uint64_t seed = 0;

  // {2, ..., 15} followed by unlimited.
  static std::vector<std::optional<int>> default_depths();
};

struct CvRow {
  TreeParams params;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

struct GridSearchResult {
  TreeParams best;
  double best_accuracy = 0.0;
  std::vector<CvRow> table;
  std::vector<int> fold_of_sample;  // seeded shuffle, for reproducibility

  std::string table_csv() const;
};

// Fold assignment: a seeded shuffle cut into `folds` contiguous parts whose
// sizes differ by at most one.
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

// Mean k-fold accuracy for every grid point; the best mean wins, ties going
// to the smaller depth, then the larger min_samples_split, then gini.
// Throws ValidationError when there are fewer samples than folds.
GridSearchResult grid_search(std::span<const HatFeatures> features, std::span<const Wearing> labels,
                             const GridSearchSpec& spec);

// Versioned JSON form.
std::string to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const std::string& text);
void save_tree(const DecisionTree& tree, const std::filesystem::path& path);
DecisionTree load_tree(const std::filesystem::path& path);

}  // namespace hardhat::cart
