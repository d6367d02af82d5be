#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsdx/evaluation.hpp"
#include "nsdx/feedback.hpp"

namespace nsdx {

struct CaseSummary {
  std::string case_id;
  ReviewStage stage = ReviewStage::AwaitDiagnosis;
  bool complete() const { return stage == ReviewStage::Complete; }
};

/// Staged review over a directory of explanation bundles, one session per
/// case. Completed sessions are appended to a JSONL log and restored from
/// it on startup. Ground truth never leaves the server.
///
/// All public methods are safe to call concurrently.
class ReviewService {
 public:
  /// Throws StartupError if `bundles_dir` is missing or the log is unreadable.
  ReviewService(std::string bundles_dir, std::string log_path);

  std::vector<CaseSummary> list_cases() const;

  /// Before the diagnosis stage only the image and stage are returned.
  /// Afterwards the model diagnosis and all four explanations are added.
  nlohmann::ordered_json get_case(const std::string& case_id) const;

  /// Payload: {"stage": "diagnosis"|"quality"|"visual"|"textual"|"overall", ...}.
  /// Throws NotFoundError, StateError (wrong stage) or PayloadError.
  nlohmann::ordered_json submit_stage(const std::string& case_id, const nlohmann::json& payload);

  /// Tables over the completed records in the log.
  FeedbackReport report() const;

  ReviewStage stage_of(const std::string& case_id) const;
  const std::string& log_path() const { return log_path_; }

 private:
  struct CaseData {
    std::string dir;
    Diagnosis prediction = Diagnosis::Negative;
    Diagnosis truth = Diagnosis::Negative;
    FeedbackRecord session;
  };

  const CaseData& find(const std::string& case_id) const;
  CaseData& find(const std::string& case_id);
  void append_log(const FeedbackRecord& r);

  std::string bundles_dir_;
  std::string log_path_;
  std::map<std::string, CaseData> cases_;
  mutable std::mutex mu_;
};

/// Submission name expected at a stage ("diagnosis" at AwaitDiagnosis, ...).
std::string_view stage_payload_name(ReviewStage s);

}  // namespace nsdx
