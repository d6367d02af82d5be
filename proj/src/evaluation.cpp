#include "nsdx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nsdx/errors.hpp"

namespace nsdx {

namespace {

constexpr std::array<std::string_view, 3> kRatingRows = {"Useful", "Somewhat Useful", "Not Useful"};
constexpr std::array<std::string_view, 4> kColumnTitles = {"Vis-Ind", "Vis-Des", "Text-Ind", "Text-Des"};

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string comparison_csv(const ConditionalComparison& c) {
  std::ostringstream os;
  os << "comparison,count\n"
     << "I>D," << c.inductive_better << '\n'
     << "I<D," << c.descriptive_better << '\n'
     << "I=D," << c.same << '\n'
     << "relevant," << c.relevant << '\n';
  return os.str();
}

}  // namespace

void ConfusionMatrix::add(Diagnosis truth, Diagnosis predicted) {
  if (truth == Diagnosis::Positive)
    ++(predicted == Diagnosis::Positive ? tp : fn);
  else
    ++(predicted == Diagnosis::Positive ? fp : tn);
}

nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json j;
  j["tp"] = cm.tp;
  j["fn"] = cm.fn;
  j["fp"] = cm.fp;
  j["tn"] = cm.tn;
  return j;
}

ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  try {
    ConfusionMatrix cm;
    for (auto [key, field] : {std::pair{"tp", &cm.tp}, std::pair{"fn", &cm.fn}, std::pair{"fp", &cm.fp},
                              std::pair{"tn", &cm.tn}}) {
      const auto v = j.at(key).get<long long>();
      if (v < 0) throw ValueError(std::string("negative count '") + key + "'");
      *field = static_cast<std::size_t>(v);
    }
    return cm;
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(std::string("bad confusion matrix: ") + e.what());
  }
}

AccuracyEstimate accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.n();
  if (n == 0) throw EmptyInputError("accuracy of an empty confusion matrix");
  AccuracyEstimate e;
  e.n = n;
  e.p = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);
  e.sd = std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(n));
  return e;
}

bool significant_difference(const AccuracyEstimate& a, const AccuracyEstimate& b) {
  const double diff = std::abs(a.p - b.p);
  return diff > 0.0 && diff >= 2.0 * std::max(a.sd, b.sd);
}

std::string format_estimate(const AccuracyEstimate& e) { return fixed3(e.p) + " ± " + fixed3(e.sd); }

// ------------------------------------------------------------- analytics

bool is_relevant(Usefulness u) { return u == Usefulness::Useful || u == Usefulness::SomewhatUseful; }

std::array<std::size_t, 3> UsefulnessTable::column(Representation r) const {
  const auto c = static_cast<std::size_t>(r);
  return {counts[0][c], counts[1][c], counts[2][c]};
}

UsefulnessTable usefulness_table(std::span<const FeedbackRecord> records) {
  UsefulnessTable t;
  for (const auto& r : records) {
    if (!r.complete()) throw ValueError("incomplete feedback record for case '" + r.case_id + "'");
    for (std::size_t c = 0; c < 4; ++c) ++t.counts[static_cast<std::size_t>(*r.ratings[c])][c];
  }
  return t;
}

ConditionalComparison conditional_comparison(std::span<const FeedbackRecord> records, Modality modality) {
  ConditionalComparison out;
  const auto rep = modality == Modality::Visual ? Representation::VisInd : Representation::TextInd;
  for (const auto& r : records) {
    const auto rating = r.rating(rep);
    if (!rating || !is_relevant(*rating)) continue;
    const auto& cmp = modality == Modality::Visual ? r.cmp_visual : r.cmp_textual;
    if (!cmp) throw ValueError("missing comparison for case '" + r.case_id + "'");
    ++out.relevant;
    switch (*cmp) {
      case Preference::FirstBetter: ++out.inductive_better; break;
      case Preference::SecondBetter: ++out.descriptive_better; break;
      case Preference::Same: ++out.same; break;
    }
  }
  return out;
}

AgreementTables agreement_tables(std::span<const FeedbackRecord> records) {
  AgreementTables t;
  for (const auto& r : records) {
    if (!r.sure || !r.radiologist_dx || !r.model_dx || !r.truth)
      throw ValueError("incomplete diagnosis fields for case '" + r.case_id + "'");
    if (*r.sure == Sureness::Sure)
      ++(*r.radiologist_dx == *r.model_dx ? t.sure_agree : t.sure_disagree);
    else
      ++(*r.model_dx == *r.truth ? t.unsure_model_correct : t.unsure_model_incorrect);
  }
  return t;
}

std::size_t relevance_coverage(std::span<const FeedbackRecord> records) {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const FeedbackRecord& r) {
    const auto v = r.rating(Representation::VisInd);
    const auto t = r.rating(Representation::TextInd);
    return (v && is_relevant(*v)) || (t && is_relevant(*t));
  }));
}

FeedbackReport build_report(std::span<const FeedbackRecord> records) {
  std::vector<FeedbackRecord> done;
  std::copy_if(records.begin(), records.end(), std::back_inserter(done),
               [](const FeedbackRecord& r) { return r.complete(); });
  FeedbackReport rep;
  rep.records = done.size();
  rep.usefulness = usefulness_table(done);
  rep.visual = conditional_comparison(done, Modality::Visual);
  rep.textual = conditional_comparison(done, Modality::Textual);
  rep.agreement = agreement_tables(done);
  rep.coverage = relevance_coverage(done);
  return rep;
}

nlohmann::ordered_json to_json(const FeedbackReport& r) {
  nlohmann::ordered_json j;
  j["records"] = r.records;
  nlohmann::ordered_json use;
  for (std::size_t c = 0; c < 4; ++c) {
    const auto col = r.usefulness.column(static_cast<Representation>(c));
    use[std::string(kRepresentationKeys[c])] = {{"useful", col[0]}, {"somewhat_useful", col[1]}, {"not_useful", col[2]}};
  }
  j["usefulness"] = use;
  auto cmp = [](const ConditionalComparison& c) {
    nlohmann::ordered_json o;
    o["inductive_better"] = c.inductive_better;
    o["descriptive_better"] = c.descriptive_better;
    o["same"] = c.same;
    o["relevant"] = c.relevant;
    return o;
  };
  j["conditional_visual"] = cmp(r.visual);
  j["conditional_textual"] = cmp(r.textual);
  j["agreement_sure"] = {{"agree", r.agreement.sure_agree}, {"disagree", r.agreement.sure_disagree}};
  j["agreement_unsure"] = {{"model_correct", r.agreement.unsure_model_correct},
                           {"model_incorrect", r.agreement.unsure_model_incorrect}};
  j["relevance_coverage"] = r.coverage;
  return j;
}

std::string render_text(const FeedbackReport& r) {
  std::ostringstream os;
  char line[160];
  os << "Usefulness of explanations (" << r.records << " completed reviews)\n";
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s\n", "", "Vis-Ind", "Vis-Des", "Text-Ind", "Text-Des");
  os << line;
  for (std::size_t row = 0; row < 3; ++row) {
    const auto& c = r.usefulness.counts[row];
    std::snprintf(line, sizeof line, "%-16s %8zu %8zu %8zu %8zu\n", std::string(kRatingRows[row]).c_str(), c[0], c[1],
                  c[2], c[3]);
    os << line;
  }
  auto cmp = [&](const char* title, const ConditionalComparison& c) {
    os << '\n' << title << " (relevant " << c.relevant << '/' << r.records << ")\n"
       << "  I > D  " << c.inductive_better << "\n  I < D  " << c.descriptive_better << "\n  I = D  " << c.same
       << '\n';
  };
  cmp("Comparison given visual explanations are relevant", r.visual);
  cmp("Comparison given textual explanations are relevant", r.textual);
  os << "\nAgreement when the rater is sure\n  Agree " << r.agreement.sure_agree << "  Disagree "
     << r.agreement.sure_disagree << '\n'
     << "\nModel predictions when the rater is unsure\n  Correct " << r.agreement.unsure_model_correct
     << "  Incorrect " << r.agreement.unsure_model_incorrect << '\n'
     << "\nVisual or textual explanation relevant: " << r.coverage << '/' << r.records << '\n';
  return os.str();
}

ReportCsv render_csv(const FeedbackReport& r) {
  ReportCsv out;
  std::ostringstream use;
  use << "rating";
  for (auto t : kColumnTitles) use << ',' << t;
  use << '\n';
  for (std::size_t row = 0; row < 3; ++row) {
    use << kRatingRows[row];
    for (auto v : r.usefulness.counts[row]) use << ',' << v;
    use << '\n';
  }
  out.usefulness = use.str();
  out.conditional_visual = comparison_csv(r.visual);
  out.conditional_textual = comparison_csv(r.textual);
  out.agreement_sure = "agree,disagree\n" + std::to_string(r.agreement.sure_agree) + "," +
                       std::to_string(r.agreement.sure_disagree) + "\n";
  out.agreement_unsure = "model_correct,model_incorrect\n" + std::to_string(r.agreement.unsure_model_correct) +
                         "," + std::to_string(r.agreement.unsure_model_incorrect) + "\n";
  return out;
}

}  // namespace nsdx
