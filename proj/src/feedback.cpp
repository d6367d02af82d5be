#include "nsdx/feedback.hpp"

#include <fstream>
#include <istream>

#include "nsdx/errors.hpp"

namespace nsdx {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table)
    if (name == s) return value;
  throw ValueError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, ReviewStage>, 6> kStages = {{
    {"AwaitDiagnosis", ReviewStage::AwaitDiagnosis},
    {"AwaitQuality", ReviewStage::AwaitQuality},
    {"AwaitVisual", ReviewStage::AwaitVisual},
    {"AwaitTextual", ReviewStage::AwaitTextual},
    {"AwaitOverall", ReviewStage::AwaitOverall},
    {"Complete", ReviewStage::Complete},
}};
constexpr std::array<std::pair<std::string_view, Sureness>, 2> kSure = {{{"sure", Sureness::Sure},
                                                                         {"unsure", Sureness::Unsure}}};
constexpr std::array<std::pair<std::string_view, Usefulness>, 3> kUseful = {{
    {"Useful", Usefulness::Useful},
    {"SomewhatUseful", Usefulness::SomewhatUseful},
    {"NotUseful", Usefulness::NotUseful},
}};
constexpr std::array<std::pair<std::string_view, Preference>, 3> kPref = {{
    {"first-better", Preference::FirstBetter},
    {"second-better", Preference::SecondBetter},
    {"same", Preference::Same},
}};
constexpr std::array<std::pair<std::string_view, Bin>, 3> kQuality = {{
    {"Low", Bin::Low},
    {"Medium", Bin::Medium},
    {"High", Bin::High},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table)
    if (value == v) return name;
  return "?";
}

template <typename T, typename F>
void put(nlohmann::ordered_json& j, const char* key, const std::optional<T>& v, F&& fmt) {
  if (v) j[key] = std::string(fmt(*v));
}

template <typename T, typename F>
std::optional<T> get(const nlohmann::json& j, const char* key, F&& parse) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return parse(j.at(key).get<std::string>());
}

}  // namespace

std::string_view to_string(ReviewStage s) { return name_of(s, kStages); }
ReviewStage parse_review_stage(std::string_view s) { return parse_enum(s, kStages, "stage"); }
std::string_view to_string(Sureness s) { return name_of(s, kSure); }
std::string_view to_string(Usefulness u) { return name_of(u, kUseful); }
std::string_view to_string(Preference p) { return name_of(p, kPref); }
Sureness parse_sureness(std::string_view s) { return parse_enum(s, kSure, "sureness"); }
Usefulness parse_usefulness(std::string_view s) { return parse_enum(s, kUseful, "usefulness rating"); }
Preference parse_preference(std::string_view s) { return parse_enum(s, kPref, "comparison"); }
Bin parse_quality(std::string_view s) { return parse_enum(s, kQuality, "quality"); }

bool FeedbackRecord::complete() const {
  if (stage != ReviewStage::Complete) return false;
  if (!radiologist_dx || !sure || !model_dx || !truth || !quality) return false;
  for (const auto& r : ratings)
    if (!r) return false;
  return cmp_visual && cmp_textual && cmp_overall;
}

nlohmann::ordered_json to_json(const FeedbackRecord& r) {
  nlohmann::ordered_json j;
  j["case_id"] = r.case_id;
  j["stage"] = std::string(to_string(r.stage));
  auto dx = [](Diagnosis d) { return to_string(d); };
  put(j, "radiologist_dx", r.radiologist_dx, dx);
  put(j, "sure", r.sure, [](Sureness s) { return to_string(s); });
  put(j, "model_dx", r.model_dx, dx);
  put(j, "truth", r.truth, dx);
  put(j, "quality", r.quality, [](Bin b) { return to_string(b); });
  nlohmann::ordered_json ratings = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.ratings.size(); ++i)
    if (r.ratings[i]) ratings[std::string(kRepresentationKeys[i])] = std::string(to_string(*r.ratings[i]));
  j["ratings"] = ratings;
  auto pref = [](Preference p) { return to_string(p); };
  put(j, "cmp_visual", r.cmp_visual, pref);
  put(j, "cmp_textual", r.cmp_textual, pref);
  put(j, "cmp_overall", r.cmp_overall, pref);
  return j;
}

FeedbackRecord feedback_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValueError("feedback record must be a JSON object");
  try {
    FeedbackRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    r.stage = j.contains("stage") ? parse_review_stage(j.at("stage").get<std::string>()) : ReviewStage::Complete;
    r.radiologist_dx = get<Diagnosis>(j, "radiologist_dx", parse_diagnosis);
    r.sure = get<Sureness>(j, "sure", parse_sureness);
    r.model_dx = get<Diagnosis>(j, "model_dx", parse_diagnosis);
    r.truth = get<Diagnosis>(j, "truth", parse_diagnosis);
    r.quality = get<Bin>(j, "quality", parse_quality);
    if (j.contains("ratings")) {
      const auto& rt = j.at("ratings");
      for (std::size_t i = 0; i < kRepresentationKeys.size(); ++i)
        r.ratings[i] = get<Usefulness>(rt, std::string(kRepresentationKeys[i]).c_str(), parse_usefulness);
    }
    r.cmp_visual = get<Preference>(j, "cmp_visual", parse_preference);
    r.cmp_textual = get<Preference>(j, "cmp_textual", parse_preference);
    r.cmp_overall = get<Preference>(j, "cmp_overall", parse_preference);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(std::string("bad feedback record: ") + e.what());
  }
}

std::vector<FeedbackRecord> read_feedback_log(std::istream& in) {
  std::vector<FeedbackRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(feedback_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    } catch (const ValueError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

std::vector<FeedbackRecord> read_feedback_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_feedback_log(in);
}

std::string to_jsonl_line(const FeedbackRecord& r) { return to_json(r).dump() + "\n"; }

}  // namespace nsdx
