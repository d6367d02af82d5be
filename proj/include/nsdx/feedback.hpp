#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nsdx/core_data.hpp"
#include "nsdx/explain.hpp"

namespace nsdx {

// Review workflow stages, strictly in this order.
enum class ReviewStage { AwaitDiagnosis, AwaitQuality, AwaitVisual, AwaitTextual, AwaitOverall, Complete };

std::string_view to_string(ReviewStage s);
ReviewStage parse_review_stage(std::string_view s);

enum class Sureness { Sure, Unsure };
enum class Usefulness { Useful, SomewhatUseful, NotUseful };
// For a pair (first, second): inductive vs descriptive, or visual vs textual.
enum class Preference { FirstBetter, SecondBetter, Same };

std::string_view to_string(Sureness s);
std::string_view to_string(Usefulness u);
std::string_view to_string(Preference p);
Sureness parse_sureness(std::string_view s);
Usefulness parse_usefulness(std::string_view s);
Preference parse_preference(std::string_view s);
Bin parse_quality(std::string_view s);

// Order of the four explanation representations.
enum class Representation { VisInd = 0, VisDes = 1, TextInd = 2, TextDes = 3 };
inline constexpr std::array<std::string_view, 4> kRepresentationKeys = {"vis_ind", "vis_des", "text_ind",
                                                                       "text_des"};

/// One rater's staged answers for one case. Fields fill in as the review
/// advances; `stage` marks how far it got.
struct FeedbackRecord {
  std::string case_id;
  ReviewStage stage = ReviewStage::AwaitDiagnosis;
  std::optional<Diagnosis> radiologist_dx;
  std::optional<Sureness> sure;
  std::optional<Diagnosis> model_dx;
  std::optional<Diagnosis> truth;
  std::optional<Bin> quality;
  std::array<std::optional<Usefulness>, 4> ratings{};
  std::optional<Preference> cmp_visual;
  std::optional<Preference> cmp_textual;
  std::optional<Preference> cmp_overall;

  bool complete() const;
  std::optional<Usefulness> rating(Representation r) const { return ratings[static_cast<std::size_t>(r)]; }

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

nlohmann::ordered_json to_json(const FeedbackRecord& r);
FeedbackRecord feedback_from_json(const nlohmann::json& j);

/// One JSON object per line. Blank lines are skipped; a malformed line
/// raises ParseError with its line number.
std::vector<FeedbackRecord> read_feedback_log(std::istream& in);
std::vector<FeedbackRecord> read_feedback_log_file(const std::string& path);
std::string to_jsonl_line(const FeedbackRecord& r);

}  // namespace nsdx
