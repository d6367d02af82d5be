#include <gtest/gtest.h>

#include "nsdx/errors.hpp"
#include "nsdx/fs_util.hpp"
#include "nsdx/synth.hpp"
#include "test_util.hpp"

using namespace nsdx;

namespace {

SynthSpec five_each(std::uint64_t seed = 7) {
  SynthSpec s;
  s.covid = s.healthy = s.tuberculosis = s.pneumonia = 5;
  s.seed = seed;
  return s;
}

// Trains on a planted-pattern set and returns the model.
ToyModel train_s(const std::vector<SynthCase>& cases) {
  std::vector<Example> ex;
  for (const auto& c : cases) ex.push_back(s_example(c));
  const auto init = ToyModel::zeros(s_model_shape(cases.front().record.image));
  return train(init, ex, TrainOptions{0.02, 150, 1}).model;
}

}  // namespace

TEST(Synth, FiveEachGivesTwentyReproducibleCases) {
  const auto a = synth_dataset(five_each());
  ASSERT_EQ(a.size(), 20u);
  const auto b = synth_dataset(five_each());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].record.case_id, b[i].record.case_id);
    EXPECT_EQ(to_pgm(a[i].record.image), to_pgm(b[i].record.image));
  }
  EXPECT_NE(to_pgm(synth_dataset(five_each(8))[0].record.image), to_pgm(a[0].record.image));
}

TEST(Synth, AllZeroCountsIsEmpty) { EXPECT_TRUE(synth_dataset(SynthSpec{}).empty()); }

TEST(Synth, CohortOrderTruthAndClasses) {
  const auto cases = synth_dataset(five_each());
  EXPECT_EQ(cases[0].record.case_id, "covid-0000");
  EXPECT_EQ(cases[5].record.case_id, "healthy-0000");
  for (const auto& c : cases) {
    EXPECT_EQ(c.record.truth, truth_for(c.record.cohort));
    switch (c.record.cohort) {
      case Cohort::Healthy: EXPECT_EQ(c.morph, MorphClass::NoAsoGgo); break;
      case Cohort::Tuberculosis:
      case Cohort::Pneumonia: EXPECT_EQ(c.morph, MorphClass::MissingAsoGgo); break;
      case Cohort::Covid:
        EXPECT_TRUE(c.morph == MorphClass::Aso || c.morph == MorphClass::Ggo || c.morph == MorphClass::AsoGgo);
        break;
    }
  }
  EXPECT_EQ(cases[0].morph, MorphClass::Aso);
  EXPECT_EQ(cases[1].morph, MorphClass::Ggo);
  EXPECT_EQ(cases[2].morph, MorphClass::AsoGgo);
}

TEST(Synth, PixelsOnTheEightBitGrid) {
  for (const auto& c : synth_dataset(five_each()))
    for (double p : c.record.image.pixels()) EXPECT_DOUBLE_EQ(std::round(p * 255.0), p * 255.0);
}

TEST(Synth, DirectoryRoundTrip) {
  test::TempDir dir;
  const auto cases = synth_dataset(five_each());
  write_synth_dataset(dir.path().string(), cases);
  const auto back = read_synth_dataset(dir.path().string());
  ASSERT_EQ(back.size(), cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    EXPECT_EQ(back[i].record.case_id, cases[i].record.case_id);
    EXPECT_EQ(back[i].record.image, cases[i].record.image);
    EXPECT_EQ(back[i].morph, cases[i].morph);
    EXPECT_EQ(back[i].symptom_targets, cases[i].symptom_targets);
  }
}

TEST(Synth, SpecParsing) {
  const auto s = parse_synth_spec(R"({"covid":2,"tb":3,"seed":9})");
  EXPECT_EQ(s.covid, 2u);
  EXPECT_EQ(s.tuberculosis, 3u);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.size, 16);
  EXPECT_THROW(parse_synth_spec(R"({"covid":2,"size":4})"), ConfigError);
  EXPECT_THROW(parse_synth_spec("[1]"), ConfigError);
}

TEST(PlantedPatterns, PneumoniaSymptomIsLearned) {
  SynthSpec spec = five_each();
  spec.covid = spec.healthy = spec.tuberculosis = spec.pneumonia = 12;
  const auto cases = synth_dataset(spec);
  const auto s = train_s(cases);
  const auto idx = *symptom_index("Pneumonia");
  for (const auto& c : cases) {
    const double p = predict_s(s, c.record.image)[idx];
    if (c.record.cohort == Cohort::Pneumonia)
      EXPECT_GT(p, 0.5) << c.record.case_id;
    else
      EXPECT_LT(p, 0.5) << c.record.case_id;
  }
}

TEST(PlantedPatterns, GgoArgmaxIsLearned) {
  SynthSpec spec = five_each();
  spec.covid = 30;
  spec.healthy = spec.tuberculosis = spec.pneumonia = 10;
  const auto cases = synth_dataset(spec);
  const auto s = train_s(cases);
  std::vector<Example> ex;
  for (const auto& c : cases) ex.push_back(r_example(c, predict_s(s, c.record.image)));
  const auto r = train(ToyModel::zeros(r_model_shape(cases.front().record.image)), ex, TrainOptions{0.02, 150, 2}).model;
  int checked = 0;
  for (const auto& c : cases) {
    if (c.morph != MorphClass::Ggo) continue;
    EXPECT_EQ(predict_r(r, c.record.image, predict_s(s, c.record.image)).argmax(), MorphClass::Ggo);
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}
