#include "nsdx/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "nsdx/csv.hpp"
#include "nsdx/errors.hpp"

namespace nsdx {

namespace {

constexpr double kRenormTolerance = 1e-3;

constexpr std::array<std::string_view, kNumMorphClasses> kMorphNames = {
    "ASO", "GGO", "ASO_GGO", "No_ASO_GGO", "Missing_ASO_GGO"};

constexpr std::array<std::string_view, kNumMorphClasses> kMorphColumns = {
    "p_aso", "p_ggo", "p_aso_ggo", "p_none", "p_missing"};

void check_prob(double v, std::string_view what) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ValueError(std::string(what) + " probability out of [0,1]: " + std::to_string(v));
}

}  // namespace

std::optional<std::size_t> symptom_index(std::string_view name) {
  auto it = std::find(kSymptomNames.begin(), kSymptomNames.end(), name);
  if (it == kSymptomNames.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kSymptomNames.begin());
}

std::string_view to_string(Diagnosis d) { return d == Diagnosis::Positive ? "COV+" : "COV-"; }

Diagnosis parse_diagnosis(std::string_view s) {
  if (s == "COV+") return Diagnosis::Positive;
  if (s == "COV-") return Diagnosis::Negative;
  throw ValueError("unknown diagnosis '" + std::string(s) + "', expected COV+ or COV-");
}

std::string_view to_string(Cohort c) {
  switch (c) {
    case Cohort::Covid: return "covid";
    case Cohort::Healthy: return "healthy";
    case Cohort::Tuberculosis: return "tuberculosis";
    case Cohort::Pneumonia: return "pneumonia";
  }
  return "?";
}

Cohort parse_cohort(std::string_view s) {
  if (s == "covid") return Cohort::Covid;
  if (s == "healthy") return Cohort::Healthy;
  if (s == "tuberculosis" || s == "tb") return Cohort::Tuberculosis;
  if (s == "pneumonia") return Cohort::Pneumonia;
  throw ValueError("unknown cohort '" + std::string(s) + "'");
}

std::string_view to_string(MorphClass c) { return kMorphNames[static_cast<std::size_t>(c)]; }

MorphClass parse_morph_class(std::string_view s) {
  for (std::size_t i = 0; i < kNumMorphClasses; ++i)
    if (kMorphNames[i] == s) return kMorphClasses[i];
  throw ValueError("unknown morphology class '" + std::string(s) + "'");
}

SymptomVector::SymptomVector(const std::array<double, kNumSymptoms>& probs) : probs_(probs) {
  for (std::size_t i = 0; i < kNumSymptoms; ++i) check_prob(probs_[i], kSymptomNames[i]);
}

double SymptomVector::at(std::string_view name) const {
  auto idx = symptom_index(name);
  if (!idx) throw ValueError("unknown symptom '" + std::string(name) + "'");
  return probs_[*idx];
}

MorphProbs::MorphProbs() : MorphProbs(one_hot(MorphClass::NoAsoGgo)) {}

MorphProbs::MorphProbs(const std::array<double, kNumMorphClasses>& probs) : probs_(probs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumMorphClasses; ++i) {
    check_prob(probs_[i], kMorphNames[i]);
    sum += probs_[i];
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw NormalizationError("morphology probabilities sum to " + std::to_string(sum));
}

MorphProbs MorphProbs::one_hot(MorphClass c) {
  std::array<double, kNumMorphClasses> p{};
  p[static_cast<std::size_t>(c)] = 1.0;
  return MorphProbs(p);
}

MorphClass MorphProbs::argmax() const {
  // max_element returns the first maximum, which is the lowest index.
  auto it = std::max_element(probs_.begin(), probs_.end());
  return kMorphClasses[static_cast<std::size_t>(it - probs_.begin())];
}

MorphEncoding encode_class(MorphClass c) {
  switch (c) {
    case MorphClass::Aso: return {1, 0, 0};
    case MorphClass::Ggo: return {0, 1, 0};
    case MorphClass::AsoGgo: return {1, 1, 0};
    case MorphClass::NoAsoGgo: return {0, 0, 0};
    case MorphClass::MissingAsoGgo: return {0, 0, 1};
  }
  return {};
}

MorphEncoding encode_morphology(const MorphProbs& p) { return encode_class(p.argmax()); }

// ---------------------------------------------------------------- COVIDr

std::vector<CovidrAnnotation> parse_covidr(std::istream& in) {
  auto table = csv::read(in);
  std::vector<std::string> expected = {"image_id", "cohort"};
  expected.insert(expected.end(), kFindingColumns.begin(), kFindingColumns.end());
  if (table.header != expected)
    throw ParseError(1, "annotation header must be '" + csv::join(expected) + "'");

  std::vector<CovidrAnnotation> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != expected.size())
      throw ParseError(row.line, "expected " + std::to_string(expected.size()) + " columns, got " +
                                     std::to_string(row.fields.size()));
    CovidrAnnotation a;
    a.image_id = row.fields[0];
    if (a.image_id.empty()) throw ParseError(row.line, "empty image_id");
    try {
      a.cohort = parse_cohort(row.fields[1]);
    } catch (const ValueError& e) {
      throw ValueError("line " + std::to_string(row.line) + ": " + e.what());
    }
    bool any_defined = false;
    for (std::size_t f = 0; f < kNumFindings; ++f) {
      const auto& cell = row.fields[2 + f];
      if (cell.empty()) continue;
      if (cell != "0" && cell != "1")
        throw ValueError("line " + std::to_string(row.line) + ": flag '" +
                         std::string(kFindingColumns[f]) + "' must be 0, 1 or empty, got '" + cell +
                         "'");
      a.flags[f] = (cell == "1");
      any_defined = true;
    }
    switch (a.cohort) {
      case Cohort::Covid:
        if (!any_defined)
          throw ValueError("line " + std::to_string(row.line) +
                           ": covid annotation has no finding flags defined");
        break;
      case Cohort::Healthy:
        // healthy images carry no findings; empty cells read as absent
        for (auto& f : a.flags)
          if (!f) f = false;
        break;
      case Cohort::Tuberculosis:
      case Cohort::Pneumonia:
        if (any_defined)
          throw ValueError("line " + std::to_string(row.line) +
                           ": finding flags must be empty for the " +
                           std::string(to_string(a.cohort)) + " cohort");
        break;
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<CovidrAnnotation> parse_covidr_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_covidr(in);
}

MorphClass annotation_to_class(const CovidrAnnotation& a) {
  switch (a.cohort) {
    case Cohort::Healthy: return MorphClass::NoAsoGgo;
    case Cohort::Tuberculosis:
    case Cohort::Pneumonia: return MorphClass::MissingAsoGgo;
    case Cohort::Covid: break;
  }
  const bool ggo = a.flag(Finding::GroundGlassOpacity);
  const bool aso = a.flag(Finding::BilateralPatchyAso) || a.flag(Finding::BilateralSymmetricalAso) ||
                   a.flag(Finding::BilateralPeripheralAso) || a.flag(Finding::UnilateralAsoRight) ||
                   a.flag(Finding::UnilateralAsoLeft);
  if (aso && ggo) return MorphClass::AsoGgo;
  if (aso) return MorphClass::Aso;
  if (ggo) return MorphClass::Ggo;
  return MorphClass::NoAsoGgo;
}

std::array<std::size_t, kNumFindings> finding_counts(std::span<const CovidrAnnotation> annotations) {
  std::array<std::size_t, kNumFindings> counts{};
  for (const auto& a : annotations)
    for (std::size_t f = 0; f < kNumFindings; ++f)
      if (a.flags[f].value_or(false)) ++counts[f];
  return counts;
}

Diagnosis truth_for(Cohort c) { return c == Cohort::Covid ? Diagnosis::Positive : Diagnosis::Negative; }

// --------------------------------------------------------------- features

std::vector<std::string> feature_csv_header() {
  std::vector<std::string> h{"case_id"};
  for (auto n : kSymptomNames) h.emplace_back(n);
  for (auto n : kMorphColumns) h.emplace_back(n);
  h.emplace_back("truth");
  return h;
}

std::vector<LabeledFeatures> load_features(std::istream& in) {
  auto table = csv::read(in);
  const auto header = feature_csv_header();
  if (table.header != header) throw ParseError(1, "feature header must be '" + csv::join(header) + "'");

  std::vector<LabeledFeatures> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != header.size())
      throw ParseError(row.line, "expected " + std::to_string(header.size()) + " columns, got " +
                                     std::to_string(row.fields.size()));
    const auto where = "line " + std::to_string(row.line) + ": ";
    std::array<double, kNumSymptoms> sym{};
    for (std::size_t i = 0; i < kNumSymptoms; ++i) {
      sym[i] = csv::parse_real(row.fields[1 + i], row.line);
      if (!(sym[i] >= 0.0 && sym[i] <= 1.0))
        throw ValueError(where + std::string(kSymptomNames[i]) + " out of [0,1]: " + row.fields[1 + i]);
    }
    std::array<double, kNumMorphClasses> morph{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumMorphClasses; ++i) {
      morph[i] = csv::parse_real(row.fields[1 + kNumSymptoms + i], row.line);
      if (!(morph[i] >= 0.0 && morph[i] <= 1.0))
        throw ValueError(where + std::string(kMorphColumns[i]) + " out of [0,1]: " +
                         row.fields[1 + kNumSymptoms + i]);
      sum += morph[i];
    }
    const double dev = std::abs(sum - 1.0);
    if (dev > kRenormTolerance)
      throw NormalizationError(where + "morphology probabilities sum to " + std::to_string(sum));
    // Values already normalized to MorphProbs tolerance are kept verbatim so
    // that a write/read cycle is exact.
    if (dev > MorphProbs::kSumTolerance)
      for (auto& m : morph) m /= sum;

    LabeledFeatures rec;
    rec.case_id = row.fields[0];
    rec.features = FeatureVector{SymptomVector(sym), MorphProbs(morph)};
    try {
      rec.truth = parse_diagnosis(row.fields.back());
    } catch (const ValueError& e) {
      throw ValueError(where + e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LabeledFeatures> load_features_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_features(in);
}

void write_features(std::ostream& out, std::span<const LabeledFeatures> rows) {
  out << csv::join(feature_csv_header()) << '\n';
  for (const auto& r : rows) {
    out << r.case_id;
    for (double v : r.features.symptoms.values()) out << ',' << csv::format_real(v);
    for (double v : r.features.morph.values()) out << ',' << csv::format_real(v);
    out << ',' << to_string(r.truth) << '\n';
  }
}

}  // namespace nsdx
