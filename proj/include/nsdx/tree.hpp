#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsdx/core_data.hpp"

namespace nsdx {

// Tree input space: the 14 symptom probabilities followed by the three
// morphology indicators (ASO, GGO, missing) from encode_morphology.
inline constexpr std::size_t kNumTreeFeatures = kNumSymptoms + 3;
using TreeRow = std::array<double, kNumTreeFeatures>;

inline constexpr std::string_view kAsoFeature = "ASO";
inline constexpr std::string_view kGgoFeature = "GGO";
inline constexpr std::string_view kMissingFeature = "Missing GGO/ASO";

const std::vector<std::string>& tree_feature_names();
std::optional<std::size_t> tree_feature_index(std::string_view name);

TreeRow project(const FeatureVector& x);

class DecisionTree {
 public:
  struct Node {
    bool leaf = true;
    // internal nodes: value <= threshold goes left, otherwise right
    std::string feature;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    // leaves
    Diagnosis label = Diagnosis::Negative;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
  };

  /// `nodes[0]` is the root. Throws CorruptModelError when the node graph
  /// is not a binary tree, a split feature is missing from
  /// `feature_names`, or the constraints are violated.
  DecisionTree(std::vector<Node> nodes, std::vector<std::string> feature_names, int max_depth,
               int max_leaves);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  int max_depth() const noexcept { return max_depth_; }
  int max_leaves() const noexcept { return max_leaves_; }

  std::size_t leaf_count() const;
  int depth() const;

  /// Node ids from the root to the leaf reached by `row`. Throws
  /// CorruptModelError on a split feature outside the tree input space.
  std::vector<int> route(const TreeRow& row) const;

  Diagnosis predict(const TreeRow& row) const;
  Diagnosis predict(const FeatureVector& x) const { return predict(project(x)); }

 private:
  std::vector<Node> nodes_;
  std::vector<std::string> feature_names_;
  std::vector<int> feature_index_;  // per node; -1 when unresolvable
  int max_depth_;
  int max_leaves_;
};

/// Majority label with ties going to COV-.
Diagnosis majority_label(std::size_t n_pos, std::size_t n_neg);

struct FitOptions {
  int max_depth = 5;
  int max_leaves = 8;
  std::uint64_t seed = 0;
  // Off: equal-gain candidates resolve to the lowest feature index, then
  // the lowest threshold. On: one of them is drawn from the seeded PRNG.
  bool random_tie_break = false;
};

/// Best-first CART with Gini impurity; candidate thresholds are midpoints of
/// consecutive distinct feature values.
DecisionTree fit_rows(std::span<const TreeRow> rows, std::span<const Diagnosis> labels, const FitOptions& opts);
DecisionTree fit(std::span<const LabeledFeatures> data, const FitOptions& opts);

enum class SweepParam { MaxLeaves, MaxDepth };

std::string_view to_string(SweepParam p);  // "leaves" / "depth"
SweepParam parse_sweep_param(std::string_view s);

struct SweepPoint {
  int value = 0;
  double accuracy = 0.0;
};

/// Fits one tree per value on a fixed train part and scores it on the
/// held-out `eval_split` fraction. The free constraint is left unbounded.
std::vector<SweepPoint> sweep(std::span<const TreeRow> rows, std::span<const Diagnosis> labels, SweepParam param,
                              std::span<const int> values, double eval_split, std::uint64_t seed);
std::vector<SweepPoint> sweep(std::span<const LabeledFeatures> data, SweepParam param, std::span<const int> values,
                              double eval_split, std::uint64_t seed);

/// `param,value,accuracy` with a header row.
std::string sweep_csv(SweepParam param, std::span<const SweepPoint> points);

std::string to_json(const DecisionTree& tree);
DecisionTree tree_from_json(std::string_view text);
DecisionTree load_tree(const std::string& path);

}  // namespace nsdx
