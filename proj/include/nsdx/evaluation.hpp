#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "json.hpp"
#include "nsdx/core_data.hpp"
#include "nsdx/feedback.hpp"

namespace nsdx {

// COV+ is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;

  std::size_t n() const noexcept { return tp + fn + fp + tn; }
  void add(Diagnosis truth, Diagnosis predicted);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

nlohmann::ordered_json to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const nlohmann::json& j);

// Gaussian approximation to the binomial: sd = sqrt(p (1 - p) / n).
struct AccuracyEstimate {
  double p = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

AccuracyEstimate accuracy(const ConfusionMatrix& cm);

/// True when the accuracies differ by at least two standard deviations,
/// taking the larger of the two.
bool significant_difference(const AccuracyEstimate& a, const AccuracyEstimate& b);

/// "0.985 ± 0.007"
std::string format_estimate(const AccuracyEstimate& e);

// ------------------------------------------------------ feedback analytics

struct UsefulnessTable {
  // [rating: Useful, SomewhatUseful, NotUseful][representation]
  std::array<std::array<std::size_t, 4>, 3> counts{};

  std::array<std::size_t, 3> column(Representation r) const;
};

/// Throws ValueError if any record is incomplete.
UsefulnessTable usefulness_table(std::span<const FeedbackRecord> records);

enum class Modality { Visual, Textual };

struct ConditionalComparison {
  std::size_t inductive_better = 0;
  std::size_t descriptive_better = 0;
  std::size_t same = 0;
  std::size_t relevant = 0;  // inductive rated Useful or SomewhatUseful
};

ConditionalComparison conditional_comparison(std::span<const FeedbackRecord> records, Modality modality);

struct AgreementTables {
  std::size_t sure_agree = 0;
  std::size_t sure_disagree = 0;
  std::size_t unsure_model_correct = 0;
  std::size_t unsure_model_incorrect = 0;
};

AgreementTables agreement_tables(std::span<const FeedbackRecord> records);

/// Records where the visual or the textual inductive explanation is relevant.
std::size_t relevance_coverage(std::span<const FeedbackRecord> records);

bool is_relevant(Usefulness u);

struct FeedbackReport {
  std::size_t records = 0;  // completed records analysed
  UsefulnessTable usefulness;
  ConditionalComparison visual;
  ConditionalComparison textual;
  AgreementTables agreement;
  std::size_t coverage = 0;
};

/// Every table over the completed records; incomplete ones are skipped.
FeedbackReport build_report(std::span<const FeedbackRecord> records);

nlohmann::ordered_json to_json(const FeedbackReport& r);
std::string render_text(const FeedbackReport& r);

struct ReportCsv {
  std::string usefulness;
  std::string conditional_visual;
  std::string conditional_textual;
  std::string agreement_sure;
  std::string agreement_unsure;
};

ReportCsv render_csv(const FeedbackReport& r);

}  // namespace nsdx
