#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nsdx/core_data.hpp"
#include "nsdx/toy_neural.hpp"
#include "nsdx/tree.hpp"

namespace nsdx {

enum class Comparator { LessEqual, Greater };

std::string_view to_string(Comparator c);  // "<=" / ">"

struct Condition {
  std::string feature;
  Comparator op = Comparator::LessEqual;
  double threshold = 0.0;

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// One root-to-leaf path of a tree.
struct Rule {
  std::size_t id = 0;  // leaf order, left subtree first
  int leaf = -1;       // node id of the leaf in the source tree
  Diagnosis label = Diagnosis::Negative;
  std::vector<Condition> conditions;

  bool fires(const TreeRow& row) const;
};

/// Threshold printed with three decimals, trailing zeros trimmed
/// (0.5, 0.406, 0.085).
std::string format_threshold(double t);
/// "P(<feature>) <op> <threshold>"
std::string render(const Condition& c);
/// Conditions joined by " && "; empty string for an empty rule.
std::string render(const std::vector<Condition>& conditions);

std::vector<Rule> extract_rules(const DecisionTree& tree);

struct TextualInductive {
  Diagnosis label = Diagnosis::Negative;
  std::vector<Condition> conditions;  // path conditions minus the missing indicator
  std::size_t rule_id = 0;
  std::string text;  // "COV+ because ..." or "COV- (no conditions)"
};

TextualInductive explain_textual_inductive(const DecisionTree& tree, const FeatureVector& x);

enum class Bin { Low, Medium, High };

std::string_view to_string(Bin b);

/// Low for v <= 0.33, Medium for v <= 0.67, High above.
Bin bin(double v);

struct DescriptiveRow {
  std::string feature;
  double probability = 0.0;
  Bin level = Bin::Low;
};

struct TextualDescriptive {
  std::vector<DescriptiveRow> rows;  // 14 symptoms, then ASO, GGO, Missing
};

TextualDescriptive explain_textual_descriptive(const FeatureVector& x);
/// `feature,probability,bin`
std::string descriptive_csv(const TextualDescriptive& d);

struct ExplanationBundle {
  std::string case_id;
  Diagnosis truth = Diagnosis::Negative;  // never shown to a reviewer
  GrayImage image;
  FeatureVector features;
  SaliencyMap visual_inductive;
  SegmentationMask visual_descriptive;
  TextualInductive textual_inductive;
  TextualDescriptive textual_descriptive;
  Diagnosis prediction = Diagnosis::Negative;
};

/// S-model -> R-model -> tree, then all four explanations. Pure.
ExplanationBundle bundle(const CaseRecord& c, const ToyModel& s_model, const ToyModel& r_model,
                         const DecisionTree& tree, double tau = kDefaultSegmentThreshold);

/// Writes `<dir>/<case_id>/` with saliency.pgm, mask.pgm, inductive.txt,
/// descriptive.csv and prediction.txt, plus image.pgm and truth.txt for
/// the review service. Returns the case directory.
std::string write_bundle(const std::string& dir, const ExplanationBundle& b);

/// The reference diagnosis tree (seven leaves, depth five).
DecisionTree fixture_tree();

}  // namespace nsdx
