#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsdx/image.hpp"

namespace nsdx {

inline constexpr std::size_t kNumSymptoms = 14;
inline constexpr std::size_t kNumMorphClasses = 5;
inline constexpr std::size_t kNumFindings = 7;

// Alphabetical order of the 14 NIH chest X-ray labels. Every symptom
// vector, CSV column block and tree feature index follows this order.
inline constexpr std::array<std::string_view, kNumSymptoms> kSymptomNames = {
    "Atelectasis", "Cardiomegaly", "Consolidation", "Edema",        "Effusion",
    "Emphysema",   "Fibrosis",     "Hernia",        "Infiltration", "Mass",
    "Nodule",      "Pleural_Thickening", "Pneumonia", "Pneumothorax"};

std::optional<std::size_t> symptom_index(std::string_view name);

enum class Diagnosis { Positive, Negative };

std::string_view to_string(Diagnosis d);        // "COV+" / "COV-"
Diagnosis parse_diagnosis(std::string_view s);  // throws ValueError

enum class Cohort { Covid, Healthy, Tuberculosis, Pneumonia };

std::string_view to_string(Cohort c);
Cohort parse_cohort(std::string_view s);  // accepts "tb" as an alias

// Class order matters: it is the R-model output order and the argmax
// tie-break order.
enum class MorphClass { Aso = 0, Ggo = 1, AsoGgo = 2, NoAsoGgo = 3, MissingAsoGgo = 4 };

inline constexpr std::array<MorphClass, kNumMorphClasses> kMorphClasses = {
    MorphClass::Aso, MorphClass::Ggo, MorphClass::AsoGgo, MorphClass::NoAsoGgo,
    MorphClass::MissingAsoGgo};

std::string_view to_string(MorphClass c);  // "ASO", "GGO", "ASO_GGO", ...
MorphClass parse_morph_class(std::string_view s);

class SymptomVector {
 public:
  SymptomVector() { probs_.fill(0.0); }
  explicit SymptomVector(const std::array<double, kNumSymptoms>& probs);

  double operator[](std::size_t i) const { return probs_[i]; }
  double at(std::string_view name) const;
  const std::array<double, kNumSymptoms>& values() const noexcept { return probs_; }

  friend bool operator==(const SymptomVector&, const SymptomVector&) = default;

 private:
  std::array<double, kNumSymptoms> probs_;
};

class MorphProbs {
 public:
  static constexpr double kSumTolerance = 1e-6;

  MorphProbs();  // all mass on No_ASO_GGO
  explicit MorphProbs(const std::array<double, kNumMorphClasses>& probs);

  static MorphProbs one_hot(MorphClass c);

  double operator[](std::size_t i) const { return probs_[i]; }
  double operator[](MorphClass c) const { return probs_[static_cast<std::size_t>(c)]; }
  const std::array<double, kNumMorphClasses>& values() const noexcept { return probs_; }

  // Highest-probability class; ties go to the lowest class index.
  MorphClass argmax() const;

  friend bool operator==(const MorphProbs&, const MorphProbs&) = default;

 private:
  std::array<double, kNumMorphClasses> probs_;
};

struct MorphEncoding {
  int aso = 0;
  int ggo = 0;
  int missing = 0;

  friend bool operator==(const MorphEncoding&, const MorphEncoding&) = default;
};

MorphEncoding encode_class(MorphClass c);
MorphEncoding encode_morphology(const MorphProbs& p);

struct FeatureVector {
  SymptomVector symptoms;
  MorphProbs morph;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Finding flags of a COVIDr annotation, in column order.
enum class Finding {
  None = 0,
  GroundGlassOpacity,
  BilateralPatchyAso,
  BilateralSymmetricalAso,
  BilateralPeripheralAso,
  UnilateralAsoRight,
  UnilateralAsoLeft
};

inline constexpr std::array<std::string_view, kNumFindings> kFindingColumns = {
    "none", "ggo", "bilat_patchy", "bilat_sym", "bilat_periph", "unilat_rt", "unilat_lt"};

struct CovidrAnnotation {
  std::string image_id;
  Cohort cohort = Cohort::Covid;
  // nullopt = undefined (cell left empty)
  std::array<std::optional<bool>, kNumFindings> flags{};

  bool flag(Finding f) const { return flags[static_cast<std::size_t>(f)].value_or(false); }
};

std::vector<CovidrAnnotation> parse_covidr(std::istream& in);
std::vector<CovidrAnnotation> parse_covidr_file(const std::string& path);

MorphClass annotation_to_class(const CovidrAnnotation& a);

// Number of annotations with each finding flag set, in column order.
std::array<std::size_t, kNumFindings> finding_counts(std::span<const CovidrAnnotation> annotations);

struct CaseRecord {
  std::string case_id;
  GrayImage image;
  Diagnosis truth = Diagnosis::Negative;
  Cohort cohort = Cohort::Healthy;
};

Diagnosis truth_for(Cohort c);

struct LabeledFeatures {
  std::string case_id;
  FeatureVector features;
  Diagnosis truth = Diagnosis::Negative;

  friend bool operator==(const LabeledFeatures&, const LabeledFeatures&) = default;
};

std::vector<std::string> feature_csv_header();

std::vector<LabeledFeatures> load_features(std::istream& in);
std::vector<LabeledFeatures> load_features_file(const std::string& path);
void write_features(std::ostream& out, std::span<const LabeledFeatures> rows);

}  // namespace nsdx
