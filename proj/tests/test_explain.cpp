#include <gtest/gtest.h>

#include <filesystem>

#include "nsdx/errors.hpp"
#include "nsdx/evaluation.hpp"
#include "nsdx/explain.hpp"
#include "nsdx/fs_util.hpp"
#include "nsdx/rng.hpp"
#include "nsdx/synth.hpp"
#include "test_util.hpp"

using namespace nsdx;

namespace {

FeatureVector random_features(Rng& rng) {
  std::array<double, kNumSymptoms> s{};
  for (auto& v : s) v = rng.uniform();
  std::array<double, kNumMorphClasses> m{};
  double sum = 0;
  for (auto& v : m) sum += (v = rng.uniform() + 1e-9);
  for (auto& v : m) v /= sum;
  return {SymptomVector{s}, MorphProbs{m}};
}

std::vector<std::string> rendered_positive_rules(const DecisionTree& t) {
  std::vector<std::string> out;
  for (const auto& r : extract_rules(t))
    if (r.label == Diagnosis::Positive) out.push_back(render(r.conditions));
  return out;
}

}  // namespace

TEST(Render, ThresholdFormatting) {
  EXPECT_EQ(format_threshold(0.5), "0.5");
  EXPECT_EQ(format_threshold(0.406), "0.406");
  EXPECT_EQ(format_threshold(0.085), "0.085");
  EXPECT_EQ(format_threshold(0.1234), "0.123");
  EXPECT_EQ(format_threshold(1.0), "1.0");
  EXPECT_EQ(render(Condition{"Edema", Comparator::Greater, 0.085}), "P(Edema) > 0.085");
  EXPECT_EQ(render(std::vector<Condition>{{"ASO", Comparator::LessEqual, 0.5}, {"Infiltration", Comparator::Greater, 0.406}}),
            "P(ASO) <= 0.5 && P(Infiltration) > 0.406");
}

TEST(ExtractRules, SingleLeafTree) {
  std::vector<DecisionTree::Node> nodes(1);
  const DecisionTree t(nodes, tree_feature_names(), 1, 2);
  const auto rules = extract_rules(t);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_TRUE(rules[0].conditions.empty());
  EXPECT_EQ(rules[0].label, Diagnosis::Negative);
}

TEST(ExtractRules, ReferencePositiveRules) {
  const auto pos = rendered_positive_rules(fixture_tree());
  const std::vector<std::string> expected = {
      "P(ASO) <= 0.5 && P(Missing GGO/ASO) <= 0.5 && P(Infiltration) <= 0.406 && P(Emphysema) > 0.127 && "
      "P(Edema) > 0.085",
      "P(ASO) <= 0.5 && P(Missing GGO/ASO) <= 0.5 && P(Infiltration) > 0.406 && P(Emphysema) <= 0.122",
      "P(ASO) > 0.5",
  };
  EXPECT_EQ(pos, expected);
}

TEST(ExtractRules, ExactThresholdsAndComparators) {
  std::vector<std::tuple<std::string, Comparator, double>> seen;
  for (const auto& r : extract_rules(fixture_tree()))
    for (const auto& c : r.conditions) seen.emplace_back(c.feature, c.op, c.threshold);
  auto has = [&](const char* f, Comparator op, double t) {
    return std::find(seen.begin(), seen.end(), std::make_tuple(std::string(f), op, t)) != seen.end();
  };
  EXPECT_TRUE(has("ASO", Comparator::Greater, 0.5));
  EXPECT_TRUE(has("Infiltration", Comparator::Greater, 0.406));
  EXPECT_TRUE(has("Emphysema", Comparator::LessEqual, 0.122));
  EXPECT_TRUE(has("Emphysema", Comparator::Greater, 0.127));
  EXPECT_TRUE(has("Edema", Comparator::Greater, 0.085));
}

TEST(ExtractRules, PartitionProperty) {
  const auto t = fixture_tree();
  const auto rules = extract_rules(t);
  EXPECT_EQ(rules.size(), 7u);
  Rng rng(10000);
  for (int i = 0; i < 10000; ++i) {
    const auto x = random_features(rng);
    const auto row = project(x);
    int fired = 0;
    Diagnosis label{};
    for (const auto& r : rules)
      if (r.fires(row)) ++fired, label = r.label;
    ASSERT_EQ(fired, 1);
    ASSERT_EQ(label, t.predict(x));
  }
}

TEST(ExtractRules, NoContradictoryPairs) {
  for (const auto& r : extract_rules(fixture_tree()))
    for (const auto& a : r.conditions)
      for (const auto& b : r.conditions)
        if (a.feature == b.feature && a.op == Comparator::LessEqual && b.op == Comparator::Greater) {
          EXPECT_LT(b.threshold, a.threshold);
        }
}

TEST(ExtractRules, StableAcrossSerialization) {
  const auto a = extract_rules(fixture_tree());
  const auto b = extract_rules(tree_from_json(to_json(fixture_tree())));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].conditions, b[i].conditions);
  }
}

TEST(TextualInductive, AsoCase) {
  const auto e = explain_textual_inductive(fixture_tree(), {SymptomVector{}, MorphProbs::one_hot(MorphClass::Aso)});
  EXPECT_EQ(e.text, "COV+ because P(ASO) > 0.5");
  EXPECT_EQ(e.label, Diagnosis::Positive);
}

TEST(TextualInductive, MissingConditionIsSuppressed) {
  std::array<double, kNumSymptoms> s{};
  s[*symptom_index("Infiltration")] = 0.6;
  const auto t = fixture_tree();
  const FeatureVector x{SymptomVector{s}, MorphProbs::one_hot(MorphClass::NoAsoGgo)};
  const auto e = explain_textual_inductive(t, x);
  EXPECT_EQ(e.text, "COV+ because P(ASO) <= 0.5 && P(Infiltration) > 0.406 && P(Emphysema) <= 0.122");
  EXPECT_EQ(e.text.find("Missing"), std::string::npos);
  const auto rules = extract_rules(t);
  EXPECT_EQ(rules[e.rule_id].label, e.label);
  EXPECT_TRUE(rules[e.rule_id].fires(project(x)));
}

TEST(TextualInductive, NeverMentionsMissing) {
  Rng rng(3);
  const auto t = fixture_tree();
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_features(rng);
    const auto e = explain_textual_inductive(t, x);
    ASSERT_EQ(e.text.find("Missing"), std::string::npos);
    ASSERT_EQ(e.label, t.predict(x));
  }
}

TEST(TextualInductive, SingleLeafTree) {
  std::vector<DecisionTree::Node> nodes(1);
  const DecisionTree t(nodes, tree_feature_names(), 1, 2);
  EXPECT_EQ(explain_textual_inductive(t, FeatureVector{}).text, "COV- (no conditions)");
}

TEST(Binning, BoundaryValues) {
  EXPECT_EQ(bin(0.33), Bin::Low);
  EXPECT_EQ(bin(0.67), Bin::Medium);
  EXPECT_EQ(bin(0.671), Bin::High);
  EXPECT_EQ(bin(0.0), Bin::Low);
  EXPECT_EQ(bin(1.0), Bin::High);
}

TEST(Binning, MonotoneThreeBinPartitionOnGrid) {
  int prev = 0;
  std::array<int, 3> seen{};
  for (int k = 0; k <= 1000; ++k) {
    const double v = k / 1000.0;
    const int b = static_cast<int>(bin(v));
    ASSERT_GE(b, prev) << v;
    prev = b;
    ++seen[b];
    const Bin expected = v <= 0.33 ? Bin::Low : v <= 0.67 ? Bin::Medium : Bin::High;
    ASSERT_EQ(bin(v), expected) << v;
  }
  EXPECT_EQ(seen, (std::array<int, 3>{331, 340, 330}));
}

TEST(TextualDescriptive, SeventeenRows) {
  std::array<double, kNumSymptoms> s{};
  s[0] = 0.9;
  const auto d = explain_textual_descriptive({SymptomVector{s}, MorphProbs({0.5, 0.2, 0.1, 0.1, 0.1})});
  ASSERT_EQ(d.rows.size(), 17u);
  EXPECT_EQ(d.rows[0].feature, "Atelectasis");
  EXPECT_EQ(d.rows[0].level, Bin::High);
  EXPECT_EQ(d.rows[14].feature, "ASO");
  EXPECT_DOUBLE_EQ(d.rows[14].probability, 0.5);
  EXPECT_EQ(d.rows[14].level, Bin::Medium);
  EXPECT_EQ(d.rows[15].feature, "GGO");
  EXPECT_EQ(d.rows[16].feature, "Missing");
  const auto csv = descriptive_csv(d);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,probability,bin");
}

TEST(Bundle, ZeroWeightModels) {
  const GrayImage img(8, 8, 0.5);
  const CaseRecord c{"z", img, Diagnosis::Negative, Cohort::Healthy};
  const auto b = bundle(c, ToyModel::zeros(s_model_shape(img)), ToyModel::zeros(r_model_shape(img)), fixture_tree());
  for (std::size_t i = 0; i < kNumSymptoms; ++i) EXPECT_EQ(b.textual_descriptive.rows[i].level, Bin::Medium);
  // Uniform softmax puts 0.2 on each morphology class.
  for (std::size_t i = kNumSymptoms; i < 17; ++i) {
    EXPECT_DOUBLE_EQ(b.textual_descriptive.rows[i].probability, 0.2);
    EXPECT_EQ(b.textual_descriptive.rows[i].level, Bin::Low);
  }
  for (double v : b.visual_inductive.values) EXPECT_EQ(v, 0.0);
  // Uniform morphology ties to ASO, which the tree calls COV+.
  EXPECT_EQ(b.prediction, Diagnosis::Positive);
  EXPECT_EQ(b.prediction, b.textual_inductive.label);
}

TEST(Bundle, PlantedAsoCase) {
  SynthSpec spec;
  spec.covid = 30;
  spec.healthy = spec.tuberculosis = spec.pneumonia = 10;
  spec.seed = 3;
  const auto cases = synth_dataset(spec);
  std::vector<Example> s_ex;
  for (const auto& c : cases) s_ex.push_back(s_example(c));
  const auto& like = cases.front().record.image;
  const auto s = train(ToyModel::zeros(s_model_shape(like)), s_ex, TrainOptions{0.02, 150, 1}).model;
  std::vector<Example> r_ex;
  for (const auto& c : cases) r_ex.push_back(r_example(c, predict_s(s, c.record.image)));
  const auto r = train(ToyModel::zeros(r_model_shape(like)), r_ex, TrainOptions{0.02, 150, 2}).model;
  int checked = 0;
  for (const auto& c : cases) {
    const auto b = bundle(c.record, s, r, fixture_tree());
    const auto x = FeatureVector{predict_s(s, c.record.image), predict_r(r, c.record.image, predict_s(s, c.record.image))};
    EXPECT_EQ(b.prediction, fixture_tree().predict(x));
    EXPECT_EQ(b.prediction, b.textual_inductive.label);
    if (c.morph != MorphClass::Aso) continue;
    EXPECT_EQ(b.prediction, Diagnosis::Positive) << c.record.case_id;
    EXPECT_DOUBLE_EQ(*std::max_element(b.visual_inductive.values.begin(), b.visual_inductive.values.end()), 1.0);
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

TEST(Bundle, WritesAllArtifacts) {
  test::TempDir dir;
  const GrayImage img(8, 8, 0.5);
  const CaseRecord c{"case-1", img, Diagnosis::Negative, Cohort::Healthy};
  const auto b = bundle(c, ToyModel::zeros(s_model_shape(img)), ToyModel::zeros(r_model_shape(img)), fixture_tree());
  const auto root = write_bundle(dir.path().string(), b);
  for (const char* f : {"image.pgm", "saliency.pgm", "mask.pgm", "inductive.txt", "descriptive.csv", "prediction.txt",
                        "truth.txt"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(root) / f)) << f;
  EXPECT_EQ(read_file(root + "/prediction.txt"), "COV+\n");
  EXPECT_EQ(read_file(root + "/inductive.txt"), "COV+ because P(ASO) > 0.5\n");
}

TEST(Segment, BundleMaskUsesTau) {
  const GrayImage img(2, 1, std::vector<double>{0.2, 0.8});
  const CaseRecord c{"m", img, Diagnosis::Negative, Cohort::Healthy};
  const auto s = ToyModel::zeros(s_model_shape(img));
  const auto r = ToyModel::zeros(r_model_shape(img));
  EXPECT_EQ(bundle(c, s, r, fixture_tree(), 0.5).visual_descriptive.values, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_EQ(bundle(c, s, r, fixture_tree(), 0.1).visual_descriptive.values, (std::vector<std::uint8_t>{1, 1}));
}

TEST(FixtureTree, ReproducesReferenceMatrixOnShippedFeatures) {
  // The fixture was labelled by an independent Python evaluation of the tree.
  ConfusionMatrix cm;
  for (const auto& row : load_features_file(test::fixture("features_328.csv")))
    cm.add(row.truth, fixture_tree().predict(row.features));
  EXPECT_EQ(cm, (ConfusionMatrix{26, 4, 1, 297}));
}
