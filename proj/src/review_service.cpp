#include "nsdx/review_service.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsdx/csv.hpp"
#include "nsdx/digest.hpp"
#include "nsdx/errors.hpp"
#include "nsdx/fs_util.hpp"

namespace fs = std::filesystem;

namespace nsdx {

namespace {

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

std::string field(const nlohmann::json& payload, const char* key) {
  if (!payload.contains(key)) throw PayloadError(std::string("missing field '") + key + "'");
  const auto& v = payload.at(key);
  if (!v.is_string()) throw PayloadError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

template <typename T, typename Parse>
T parse_field(const nlohmann::json& payload, const char* key, Parse parse) {
  const auto text = field(payload, key);
  try {
    return parse(text);
  } catch (const ValidationFailure& e) {
    throw PayloadError(std::string("field '") + key + "': " + e.what());
  }
}

void require_only(const nlohmann::json& payload, std::initializer_list<const char*> keys) {
  for (const auto& [k, _] : payload.items()) {
    bool ok = k == "stage";
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw PayloadError("unexpected field '" + k + "'");
  }
}

ReviewStage next(ReviewStage s) { return static_cast<ReviewStage>(static_cast<int>(s) + 1); }

}  // namespace

std::string_view stage_payload_name(ReviewStage s) {
  switch (s) {
    case ReviewStage::AwaitDiagnosis: return "diagnosis";
    case ReviewStage::AwaitQuality: return "quality";
    case ReviewStage::AwaitVisual: return "visual";
    case ReviewStage::AwaitTextual: return "textual";
    case ReviewStage::AwaitOverall: return "overall";
    case ReviewStage::Complete: return "complete";
  }
  return "?";
}

ReviewService::ReviewService(std::string bundles_dir, std::string log_path)
    : bundles_dir_(std::move(bundles_dir)), log_path_(std::move(log_path)) {
  std::error_code ec;
  if (!fs::is_directory(bundles_dir_, ec)) throw StartupError("bundle directory not found: " + bundles_dir_);
  for (const auto& entry : fs::directory_iterator(bundles_dir_)) {
    if (!entry.is_directory()) continue;
    CaseData c;
    c.dir = entry.path().string();
    const auto id = entry.path().filename().string();
    try {
      c.prediction = parse_diagnosis(trim(read_file((entry.path() / "prediction.txt").string())));
      c.truth = parse_diagnosis(trim(read_file((entry.path() / "truth.txt").string())));
    } catch (const std::exception& e) {
      throw StartupError("bad bundle '" + id + "': " + e.what());
    }
    c.session.case_id = id;
    cases_.emplace(id, std::move(c));
  }
  if (fs::exists(log_path_)) {
    std::vector<FeedbackRecord> log;
    try {
      log = read_feedback_log_file(log_path_);
    } catch (const std::exception& e) {
      throw StartupError("cannot replay feedback log: " + std::string(e.what()));
    }
    for (const auto& r : log) {
      auto it = cases_.find(r.case_id);
      if (it != cases_.end() && r.complete()) it->second.session = r;
    }
  }
}

const ReviewService::CaseData& ReviewService::find(const std::string& case_id) const {
  auto it = cases_.find(case_id);
  if (it == cases_.end()) throw NotFoundError("unknown case '" + case_id + "'");
  return it->second;
}

ReviewService::CaseData& ReviewService::find(const std::string& case_id) {
  return const_cast<CaseData&>(std::as_const(*this).find(case_id));
}

std::vector<CaseSummary> ReviewService::list_cases() const {
  std::lock_guard lock(mu_);
  std::vector<CaseSummary> out;
  out.reserve(cases_.size());
  for (const auto& [id, c] : cases_) out.push_back({id, c.session.stage});
  return out;
}

ReviewStage ReviewService::stage_of(const std::string& case_id) const {
  std::lock_guard lock(mu_);
  return find(case_id).session.stage;
}

nlohmann::ordered_json ReviewService::get_case(const std::string& case_id) const {
  std::lock_guard lock(mu_);
  const auto& c = find(case_id);
  const fs::path dir(c.dir);
  auto b64 = [&](const char* name) { return base64_encode(read_file((dir / name).string())); };

  nlohmann::ordered_json j;
  j["case_id"] = case_id;
  j["stage"] = std::string(to_string(c.session.stage));
  j["next_submission"] = std::string(stage_payload_name(c.session.stage));
  j["image"] = b64("image.pgm");
  if (c.session.stage == ReviewStage::AwaitDiagnosis) return j;

  j["model_dx"] = std::string(to_string(c.prediction));
  j["visual_inductive"] = b64("saliency.pgm");
  j["visual_descriptive"] = b64("mask.pgm");
  j["textual_inductive"] = trim(read_file((dir / "inductive.txt").string()));
  std::istringstream desc(read_file((dir / "descriptive.csv").string()));
  const auto table = csv::read(desc);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    if (row.fields.size() != 3) throw IoError("bad descriptive.csv in bundle '" + case_id + "'");
    rows.push_back({{"feature", row.fields[0]}, {"probability", csv::parse_real(row.fields[1], row.line)}, {"bin", row.fields[2]}});
  }
  j["textual_descriptive"] = rows;
  return j;
}

nlohmann::ordered_json ReviewService::submit_stage(const std::string& case_id, const nlohmann::json& payload) {
  if (!payload.is_object()) throw PayloadError("payload must be a JSON object");
  const auto name = field(payload, "stage");
  static const std::array<std::string_view, 5> names = {"diagnosis", "quality", "visual", "textual", "overall"};
  if (std::find(names.begin(), names.end(), name) == names.end()) throw PayloadError("unknown stage '" + name + "'");

  std::lock_guard lock(mu_);
  auto& c = find(case_id);
  auto& s = c.session;
  if (s.stage == ReviewStage::Complete) throw StateError("case '" + case_id + "' is already complete");
  if (name != stage_payload_name(s.stage))
    throw StateError("expected '" + std::string(stage_payload_name(s.stage)) + "' submission, got '" + name + "'");

  // Validate fully before mutating.
  FeedbackRecord r = s;
  switch (s.stage) {
    case ReviewStage::AwaitDiagnosis:
      require_only(payload, {"diagnosis", "sure"});
      r.radiologist_dx = parse_field<Diagnosis>(payload, "diagnosis", parse_diagnosis);
      r.sure = parse_field<Sureness>(payload, "sure", parse_sureness);
      r.model_dx = c.prediction;
      break;
    case ReviewStage::AwaitQuality:
      require_only(payload, {"quality"});
      r.quality = parse_field<Bin>(payload, "quality", parse_quality);
      break;
    case ReviewStage::AwaitVisual:
    case ReviewStage::AwaitTextual: {
      require_only(payload, {"inductive", "descriptive", "comparison"});
      const bool visual = s.stage == ReviewStage::AwaitVisual;
      const auto ind = visual ? Representation::VisInd : Representation::TextInd;
      const auto des = visual ? Representation::VisDes : Representation::TextDes;
      r.ratings[static_cast<std::size_t>(ind)] = parse_field<Usefulness>(payload, "inductive", parse_usefulness);
      r.ratings[static_cast<std::size_t>(des)] = parse_field<Usefulness>(payload, "descriptive", parse_usefulness);
      (visual ? r.cmp_visual : r.cmp_textual) = parse_field<Preference>(payload, "comparison", parse_preference);
      break;
    }
    case ReviewStage::AwaitOverall:
      require_only(payload, {"comparison"});
      r.cmp_overall = parse_field<Preference>(payload, "comparison", parse_preference);
      r.truth = c.truth;
      break;
    case ReviewStage::Complete:
      break;
  }
  r.stage = next(s.stage);
  if (r.stage == ReviewStage::Complete) append_log(r);
  s = r;

  nlohmann::ordered_json out;
  out["case_id"] = case_id;
  out["stage"] = std::string(to_string(s.stage));
  out["next_submission"] = std::string(stage_payload_name(s.stage));
  out["model_dx"] = std::string(to_string(c.prediction));
  return out;
}

void ReviewService::append_log(const FeedbackRecord& r) {
  const fs::path p(log_path_);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(log_path_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot open feedback log " + log_path_);
  const auto line = to_jsonl_line(r);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw IoError("cannot append to feedback log " + log_path_);
}

FeedbackReport ReviewService::report() const {
  std::lock_guard lock(mu_);
  if (!fs::exists(log_path_)) return build_report({});
  return build_report(read_feedback_log_file(log_path_));
}

}  // namespace nsdx
