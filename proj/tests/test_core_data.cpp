#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "nsdx/core_data.hpp"
#include "nsdx/csv.hpp"
#include "nsdx/errors.hpp"
#include "test_util.hpp"

using namespace nsdx;

namespace {

const std::string kCovidrHeader = "image_id,cohort,none,ggo,bilat_patchy,bilat_sym,bilat_periph,unilat_rt,unilat_lt\n";

std::vector<CovidrAnnotation> parse(const std::string& body) {
  std::istringstream in(kCovidrHeader + body);
  return parse_covidr(in);
}

}  // namespace

TEST(SymptomNames, FixedAlphabeticalOrder) {
  ASSERT_EQ(kSymptomNames.size(), 14u);
  EXPECT_EQ(kSymptomNames.front(), "Atelectasis");
  EXPECT_EQ(kSymptomNames.back(), "Pneumothorax");
  EXPECT_TRUE(std::is_sorted(kSymptomNames.begin(), kSymptomNames.end()));
  EXPECT_EQ(symptom_index("Infiltration"), 8u);
  EXPECT_FALSE(symptom_index("Covid").has_value());
}

TEST(SymptomVector, RejectsOutOfRange) {
  std::array<double, kNumSymptoms> p{};
  p[3] = 1.2;
  EXPECT_THROW(SymptomVector{p}, ValueError);
  p[3] = -0.1;
  EXPECT_THROW(SymptomVector{p}, ValueError);
  p[3] = 1.0;
  EXPECT_DOUBLE_EQ(SymptomVector{p}.at("Edema"), 1.0);
}

TEST(MorphProbs, SumTolerance) {
  EXPECT_NO_THROW(MorphProbs({0.2, 0.2, 0.2, 0.2, 0.2 + 5e-7}));
  EXPECT_THROW(MorphProbs({0.2, 0.2, 0.2, 0.2, 0.21}), NormalizationError);
  EXPECT_THROW(MorphProbs({1.1, -0.1, 0.0, 0.0, 0.0}), ValueError);
}

TEST(EncodeMorphology, Examples) {
  EXPECT_EQ(encode_morphology(MorphProbs({0.1, 0.7, 0.1, 0.05, 0.05})), (MorphEncoding{0, 1, 0}));
  EXPECT_EQ(encode_morphology(MorphProbs({0.2, 0.2, 0.2, 0.2, 0.2})), (MorphEncoding{1, 0, 0}));
  EXPECT_EQ(encode_morphology(MorphProbs({0.05, 0.05, 0.1, 0.1, 0.7})), (MorphEncoding{0, 0, 1}));
}

TEST(EncodeMorphology, ConversionTableForPureOneHots) {
  const std::array<std::pair<MorphClass, MorphEncoding>, 5> table = {{
      {MorphClass::Aso, {1, 0, 0}},
      {MorphClass::Ggo, {0, 1, 0}},
      {MorphClass::AsoGgo, {1, 1, 0}},
      {MorphClass::NoAsoGgo, {0, 0, 0}},
      {MorphClass::MissingAsoGgo, {0, 0, 1}},
  }};
  for (const auto& [cls, enc] : table) {
    EXPECT_EQ(encode_morphology(MorphProbs::one_hot(cls)), enc) << to_string(cls);
    EXPECT_EQ(MorphProbs::one_hot(cls).argmax(), cls);
  }
}

TEST(EncodeMorphology, MissingExcludesAsoAndGgo) {
  for (auto c : kMorphClasses) {
    const auto e = encode_class(c);
    if (e.missing) {
      EXPECT_TRUE(e.aso == 0 && e.ggo == 0);
    }
  }
}

TEST(MorphClass, NamesRoundTrip) {
  for (auto c : kMorphClasses) EXPECT_EQ(parse_morph_class(to_string(c)), c);
  EXPECT_THROW(parse_morph_class("ASO+GGO"), ValueError);
}

TEST(Cohort, AcceptsTbAlias) {
  EXPECT_EQ(parse_cohort("tb"), Cohort::Tuberculosis);
  EXPECT_EQ(parse_cohort("tuberculosis"), Cohort::Tuberculosis);
  EXPECT_THROW(parse_cohort("flu"), ValueError);
}

TEST(CaseRecord, TruthFollowsCohort) {
  EXPECT_EQ(truth_for(Cohort::Covid), Diagnosis::Positive);
  for (auto c : {Cohort::Healthy, Cohort::Tuberculosis, Cohort::Pneumonia}) EXPECT_EQ(truth_for(c), Diagnosis::Negative);
}

TEST(ParseCovidr, GgoWithPeripheralAso) {
  const auto a = parse("img1,covid,0,1,0,0,1,0,0\n");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_TRUE(a[0].flag(Finding::GroundGlassOpacity));
  EXPECT_TRUE(a[0].flag(Finding::BilateralPeripheralAso));
  EXPECT_EQ(annotation_to_class(a[0]), MorphClass::AsoGgo);
}

TEST(ParseCovidr, HealthyEmptyFlagsAreAbsent) {
  const auto a = parse("img2,healthy,,,,,,,\n");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].cohort, Cohort::Healthy);
  for (const auto& f : a[0].flags) EXPECT_EQ(f, std::optional<bool>(false));
  EXPECT_EQ(annotation_to_class(a[0]), MorphClass::NoAsoGgo);
}

TEST(ParseCovidr, ClassMapping) {
  const auto a = parse(
      "a,covid,1,0,0,0,0,0,0\n"
      "b,covid,0,1,0,0,0,0,0\n"
      "c,covid,0,0,0,0,0,0,1\n"
      "d,pneumonia,,,,,,,\n"
      "e,tb,,,,,,,\n");
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(annotation_to_class(a[0]), MorphClass::NoAsoGgo);
  EXPECT_EQ(annotation_to_class(a[1]), MorphClass::Ggo);
  EXPECT_EQ(annotation_to_class(a[2]), MorphClass::Aso);
  EXPECT_EQ(annotation_to_class(a[3]), MorphClass::MissingAsoGgo);
  EXPECT_EQ(annotation_to_class(a[4]), MorphClass::MissingAsoGgo);
}

TEST(ParseCovidr, WrongColumnCountReportsLine) {
  try {
    parse("a,covid,1,0,0,0,0,0,0\nb,covid,1,0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseCovidr, BadFlagValue) {
  EXPECT_THROW(parse("a,covid,2,0,0,0,0,0,0\n"), ValueError);
  EXPECT_THROW(parse("a,covid,yes,0,0,0,0,0,0\n"), ValueError);
}

TEST(ParseCovidr, CovidNeedsADefinedFlag) { EXPECT_THROW(parse("a,covid,,,,,,,\n"), ValueError); }

TEST(ParseCovidr, FlagsUndefinedForTbAndPneumonia) {
  EXPECT_THROW(parse("a,pneumonia,0,1,0,0,0,0,0\n"), ValueError);
}

TEST(ParseCovidr, BadHeader) {
  std::istringstream in("id,cohort\nx,covid\n");
  EXPECT_THROW(parse_covidr(in), ParseError);
}

TEST(ParseCovidr, ShippedFixtureCounts) {
  const auto a = parse_covidr_file(test::fixture("covidr_245.csv"));
  ASSERT_EQ(a.size(), 245u);
  const auto counts = finding_counts(a);
  const std::array<std::size_t, 7> expected = {44, 145, 30, 18, 54, 36, 28};
  EXPECT_EQ(counts, expected);
}

TEST(ParseCovidr, ClassImageIsClosed) {
  const auto a = parse_covidr_file(test::fixture("covidr_245.csv"));
  std::set<MorphClass> seen;
  for (const auto& x : a) seen.insert(annotation_to_class(x));
  for (auto c : seen) EXPECT_NE(std::find(kMorphClasses.begin(), kMorphClasses.end(), c), kMorphClasses.end());
  // The fixture contains every covid-reachable class.
  EXPECT_EQ(seen.size(), 4u);
}

TEST(LoadFeatures, OnlyNoneSet) {
  std::ostringstream row;
  row << csv::join(feature_csv_header()) << "\nc1";
  for (int i = 0; i < 14; ++i) row << ",0";
  row << ",0,0,0,1,0,COV-\n";
  std::istringstream in(row.str());
  const auto f = load_features(in);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].features.morph.argmax(), MorphClass::NoAsoGgo);
  EXPECT_EQ(f[0].truth, Diagnosis::Negative);
}

TEST(LoadFeatures, OutOfRangeAndNormalization) {
  auto make = [](const std::string& infiltration, const std::string& morph) {
    std::ostringstream row;
    row << csv::join(feature_csv_header()) << "\nc1";
    for (int i = 0; i < 14; ++i) row << ',' << (i == 8 ? infiltration : "0.1");
    row << ',' << morph << ",COV+\n";
    return row.str();
  };
  {
    std::istringstream in(make("1.2", "0,0,0,1,0"));
    EXPECT_THROW(load_features(in), ValueError);
  }
  {
    std::istringstream in(make("0.5", "0.0005,0,0,1,0"));
    const auto f = load_features(in);
    const auto& p = f[0].features.morph.values();
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(p[3], 1.0 / 1.0005, 1e-12);
  }
  {
    std::istringstream in(make("0.5", "0.01,0,0,1,0"));
    EXPECT_THROW(load_features(in), NormalizationError);
  }
}

TEST(LoadFeatures, ShippedFixture) {
  const auto f = load_features_file(test::fixture("features_328.csv"));
  ASSERT_EQ(f.size(), 328u);
  const auto pos = std::count_if(f.begin(), f.end(), [](const auto& r) { return r.truth == Diagnosis::Positive; });
  EXPECT_EQ(pos, 30);
  EXPECT_EQ(static_cast<long>(f.size()) - pos, 298);
}

TEST(LoadFeatures, RoundTrip) {
  const auto f = load_features_file(test::fixture("features_328.csv"));
  std::ostringstream out;
  write_features(out, f);
  std::istringstream in(out.str());
  EXPECT_EQ(load_features(in), f);
}
