#include <gtest/gtest.h>

#include <cmath>

#include "nsdx/errors.hpp"
#include "nsdx/evaluation.hpp"
#include "nsdx/rng.hpp"
#include "test_util.hpp"

using namespace nsdx;

namespace {

std::vector<FeedbackRecord> fixture_log() { return read_feedback_log_file(test::fixture("feedback_30.jsonl")); }

FeedbackRecord complete_record(const std::string& id, Usefulness all, Sureness sure, Diagnosis rad, Diagnosis model,
                               Diagnosis truth) {
  FeedbackRecord r;
  r.case_id = id;
  r.stage = ReviewStage::Complete;
  r.radiologist_dx = rad;
  r.sure = sure;
  r.model_dx = model;
  r.truth = truth;
  r.quality = Bin::High;
  r.ratings.fill(all);
  r.cmp_visual = r.cmp_textual = r.cmp_overall = Preference::Same;
  return r;
}

}  // namespace

TEST(Accuracy, ReferenceMatrices) {
  const auto a = accuracy(ConfusionMatrix{26, 4, 1, 297});
  const auto b = accuracy(ConfusionMatrix{23, 7, 2, 296});
  EXPECT_NEAR(a.p, 0.985, 0.001);
  EXPECT_NEAR(a.sd, 0.007, 0.001);
  EXPECT_NEAR(b.p, 0.973, 0.001);
  EXPECT_NEAR(b.sd, 0.009, 0.001);
  EXPECT_EQ(format_estimate(a), "0.985 ± 0.007");
  EXPECT_EQ(format_estimate(b), "0.973 ± 0.009");
  EXPECT_FALSE(significant_difference(a, b));
}

TEST(Accuracy, PerfectAndEmpty) {
  const auto p = accuracy(ConfusionMatrix{0, 0, 0, 10});
  EXPECT_DOUBLE_EQ(p.p, 1.0);
  EXPECT_DOUBLE_EQ(p.sd, 0.0);
  EXPECT_THROW(accuracy(ConfusionMatrix{}), EmptyInputError);
}

TEST(Accuracy, SdFormulaOnRandomMatrices) {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), 1 + rng.below(300)};
    const double n = static_cast<double>(cm.n());
    const double p = static_cast<double>(cm.tp + cm.tn) / n;
    const auto e = accuracy(cm);
    ASSERT_DOUBLE_EQ(e.p, p);
    ASSERT_NEAR(e.sd, std::sqrt(p * (1 - p) / n), 1e-15);
  }
}

TEST(Accuracy, SdMaximalAtHalf) {
  const auto half = accuracy(ConfusionMatrix{50, 0, 50, 0});
  for (std::size_t k = 0; k <= 100; ++k) EXPECT_LE(accuracy(ConfusionMatrix{k, 0, 100 - k, 0}).sd, half.sd + 1e-15);
}

TEST(Significance, Examples) {
  EXPECT_FALSE(significant_difference({0.985, 0.007, 328}, {0.973, 0.009, 328}));
  EXPECT_FALSE(significant_difference({0.9, 0.01, 100}, {0.9, 0.01, 100}));
  EXPECT_FALSE(significant_difference({1.0, 0.0, 10}, {1.0, 0.0, 10}));
  EXPECT_TRUE(significant_difference({0.9, 0.01, 100}, {0.5, 0.01, 100}));
  EXPECT_TRUE(significant_difference({0.9, 0.01, 100}, {0.88, 0.005, 100}));
}

TEST(Significance, Symmetric) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const AccuracyEstimate a{rng.uniform(), rng.uniform(0, 0.05), 10};
    const AccuracyEstimate b{rng.uniform(), rng.uniform(0, 0.05), 10};
    ASSERT_EQ(significant_difference(a, b), significant_difference(b, a));
  }
}

TEST(ConfusionJson, RoundTripAndErrors) {
  const ConfusionMatrix cm{26, 4, 1, 297};
  EXPECT_EQ(confusion_from_json(nlohmann::json::parse(to_json(cm).dump())), cm);
  EXPECT_THROW(confusion_from_json(nlohmann::json::parse(R"({"tp":1})")), ValueError);
  EXPECT_THROW(confusion_from_json(nlohmann::json::parse(R"({"tp":-1,"fn":0,"fp":0,"tn":0})")), ValueError);
}

TEST(Usefulness, FixtureColumns) {
  const auto t = usefulness_table(fixture_log());
  EXPECT_EQ(t.column(Representation::VisInd), (std::array<std::size_t, 3>{14, 7, 9}));
  EXPECT_EQ(t.column(Representation::TextInd), (std::array<std::size_t, 3>{17, 1, 12}));
  EXPECT_EQ(t.column(Representation::TextDes), (std::array<std::size_t, 3>{6, 4, 20}));
  for (auto r : {Representation::VisInd, Representation::VisDes, Representation::TextInd, Representation::TextDes}) {
    const auto c = t.column(r);
    EXPECT_EQ(c[0] + c[1] + c[2], 30u);
  }
}

TEST(Usefulness, EmptyAndIncomplete) {
  const auto t = usefulness_table({});
  for (const auto& row : t.counts)
    for (auto v : row) EXPECT_EQ(v, 0u);
  FeedbackRecord partial;
  partial.case_id = "p";
  partial.stage = ReviewStage::AwaitQuality;
  std::vector<FeedbackRecord> recs = {partial};
  EXPECT_THROW(usefulness_table(recs), ValueError);
}

TEST(Conditional, FixtureTables) {
  const auto log = fixture_log();
  const auto v = conditional_comparison(log, Modality::Visual);
  EXPECT_EQ(v.relevant, 21u);
  EXPECT_EQ(v.inductive_better, 5u);
  EXPECT_EQ(v.descriptive_better, 8u);
  EXPECT_EQ(v.same, 8u);
  const auto t = conditional_comparison(log, Modality::Textual);
  EXPECT_EQ(t.relevant, 18u);
  EXPECT_EQ(t.inductive_better, 13u);
  EXPECT_EQ(t.descriptive_better, 0u);
  EXPECT_EQ(t.same, 5u);
}

TEST(Conditional, NothingRelevant) {
  std::vector<FeedbackRecord> recs;
  for (int i = 0; i < 4; ++i)
    recs.push_back(complete_record(std::to_string(i), Usefulness::NotUseful, Sureness::Sure, Diagnosis::Positive,
                                   Diagnosis::Positive, Diagnosis::Positive));
  for (auto m : {Modality::Visual, Modality::Textual}) {
    const auto c = conditional_comparison(recs, m);
    EXPECT_EQ(c.relevant + c.inductive_better + c.descriptive_better + c.same, 0u);
  }
  EXPECT_EQ(relevance_coverage(recs), 0u);
}

TEST(Conditional, TalliesSumToRelevant) {
  Rng rng(2);
  std::vector<FeedbackRecord> recs;
  for (int i = 0; i < 200; ++i) {
    auto r = complete_record(std::to_string(i), static_cast<Usefulness>(rng.below(3)), Sureness::Sure,
                             Diagnosis::Positive, Diagnosis::Positive, Diagnosis::Positive);
    r.ratings[0] = static_cast<Usefulness>(rng.below(3));
    r.ratings[2] = static_cast<Usefulness>(rng.below(3));
    r.cmp_visual = static_cast<Preference>(rng.below(3));
    r.cmp_textual = static_cast<Preference>(rng.below(3));
    recs.push_back(r);
  }
  for (auto m : {Modality::Visual, Modality::Textual}) {
    const auto c = conditional_comparison(recs, m);
    EXPECT_EQ(c.inductive_better + c.descriptive_better + c.same, c.relevant);
  }
}

TEST(Agreement, FixtureTables) {
  const auto a = agreement_tables(fixture_log());
  EXPECT_EQ(a.sure_agree, 19u);
  EXPECT_EQ(a.sure_disagree, 6u);
  EXPECT_EQ(a.unsure_model_correct, 4u);
  EXPECT_EQ(a.unsure_model_incorrect, 1u);
  EXPECT_EQ(a.sure_agree + a.sure_disagree + a.unsure_model_correct + a.unsure_model_incorrect, 30u);
}

TEST(Agreement, AllSureAllAgree) {
  std::vector<FeedbackRecord> recs;
  for (int i = 0; i < 5; ++i)
    recs.push_back(complete_record(std::to_string(i), Usefulness::Useful, Sureness::Sure, Diagnosis::Negative,
                                   Diagnosis::Negative, Diagnosis::Positive));
  const auto a = agreement_tables(recs);
  EXPECT_EQ(a.sure_agree, 5u);
  EXPECT_EQ(a.sure_disagree + a.unsure_model_correct + a.unsure_model_incorrect, 0u);
  EXPECT_EQ(relevance_coverage(recs), 5u);
}

TEST(Coverage, Fixture) { EXPECT_EQ(relevance_coverage(fixture_log()), 29u); }

TEST(Report, SkipsIncompleteRecords) {
  auto log = fixture_log();
  FeedbackRecord partial;
  partial.case_id = "extra";
  partial.stage = ReviewStage::AwaitVisual;
  partial.radiologist_dx = Diagnosis::Positive;
  partial.sure = Sureness::Sure;
  log.push_back(partial);
  const auto r = build_report(log);
  EXPECT_EQ(r.records, 30u);
  EXPECT_EQ(r.coverage, 29u);
  EXPECT_EQ(r.agreement.sure_agree, 19u);
}

TEST(Report, EmptyLogIsZero) {
  const auto r = build_report({});
  EXPECT_EQ(r.records, 0u);
  EXPECT_EQ(r.coverage, 0u);
  const auto j = to_json(r);
  EXPECT_EQ(j["usefulness"]["vis_ind"]["useful"], 0);
  EXPECT_EQ(j["conditional_visual"]["relevant"], 0);
}

TEST(Report, RenderingsCarryTheNumbers) {
  const auto r = build_report(fixture_log());
  const auto text = render_text(r);
  EXPECT_NE(text.find("29/30"), std::string::npos);
  const auto csv = render_csv(r);
  EXPECT_NE(csv.usefulness.find("14"), std::string::npos);
  const auto j = to_json(r);
  EXPECT_EQ(j["usefulness"]["text_des"]["not_useful"], 20);
  EXPECT_EQ(j["conditional_textual"]["inductive_better"], 13);
  EXPECT_EQ(j["agreement_unsure"]["model_incorrect"], 1);
}
