#include "nsdx/explain.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "nsdx/errors.hpp"
#include "nsdx/fs_util.hpp"

namespace fs = std::filesystem;

namespace nsdx {

namespace {

constexpr double kLowUpper = 0.33;
constexpr double kMediumUpper = 0.67;

void collect(const DecisionTree& tree, int id, std::vector<Condition>& path, std::vector<Rule>& out) {
  const auto& n = tree.node(id);
  if (n.leaf) {
    out.push_back(Rule{out.size(), id, n.label, path});
    return;
  }
  path.push_back({n.feature, Comparator::LessEqual, n.threshold});
  collect(tree, n.left, path, out);
  path.back().op = Comparator::Greater;
  collect(tree, n.right, path, out);
  path.pop_back();
}

}  // namespace

std::string_view to_string(Comparator c) { return c == Comparator::LessEqual ? "<=" : ">"; }

bool Rule::fires(const TreeRow& row) const {
  for (const auto& c : conditions) {
    const auto idx = tree_feature_index(c.feature);
    if (!idx) throw CorruptModelError("unknown feature '" + c.feature + "' in rule");
    const double v = row[*idx];
    if ((c.op == Comparator::LessEqual) != (v <= c.threshold)) return false;
  }
  return true;
}

std::string format_threshold(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", t);
  std::string s(buf);
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

std::string render(const Condition& c) {
  return "P(" + c.feature + ") " + std::string(to_string(c.op)) + " " + format_threshold(c.threshold);
}

std::string render(const std::vector<Condition>& conditions) {
  std::string out;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (i) out += " && ";
    out += render(conditions[i]);
  }
  return out;
}

std::vector<Rule> extract_rules(const DecisionTree& tree) {
  std::vector<Rule> rules;
  std::vector<Condition> path;
  collect(tree, 0, path, rules);
  return rules;
}

TextualInductive explain_textual_inductive(const DecisionTree& tree, const FeatureVector& x) {
  const auto path = tree.route(project(x));
  TextualInductive out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto& n = tree.node(path[i]);
    if (n.feature == kMissingFeature) continue;
    out.conditions.push_back(
        {n.feature, path[i + 1] == n.left ? Comparator::LessEqual : Comparator::Greater, n.threshold});
  }
  const int leaf = path.back();
  out.label = tree.node(leaf).label;
  for (const auto& r : extract_rules(tree))
    if (r.leaf == leaf) out.rule_id = r.id;
  out.text = std::string(to_string(out.label)) +
             (out.conditions.empty() ? " (no conditions)" : " because " + render(out.conditions));
  return out;
}

std::string_view to_string(Bin b) {
  switch (b) {
    case Bin::Low: return "Low";
    case Bin::Medium: return "Medium";
    case Bin::High: return "High";
  }
  return "?";
}

Bin bin(double v) {
  if (v <= kLowUpper) return Bin::Low;
  if (v <= kMediumUpper) return Bin::Medium;
  return Bin::High;
}

TextualDescriptive explain_textual_descriptive(const FeatureVector& x) {
  TextualDescriptive d;
  for (std::size_t i = 0; i < kNumSymptoms; ++i) {
    const double v = x.symptoms[i];
    d.rows.push_back({std::string(kSymptomNames[i]), v, bin(v)});
  }
  for (auto [name, cls] : {std::pair{"ASO", MorphClass::Aso}, std::pair{"GGO", MorphClass::Ggo},
                           std::pair{"Missing", MorphClass::MissingAsoGgo}}) {
    const double v = x.morph[cls];
    d.rows.push_back({name, v, bin(v)});
  }
  return d;
}

std::string descriptive_csv(const TextualDescriptive& d) {
  std::ostringstream os;
  os << "feature,probability,bin\n";
  for (const auto& r : d.rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.probability);
    os << r.feature << ',' << buf << ',' << to_string(r.level) << '\n';
  }
  return os.str();
}

ExplanationBundle bundle(const CaseRecord& c, const ToyModel& s_model, const ToyModel& r_model,
                         const DecisionTree& tree, double tau) {
  ExplanationBundle b;
  b.case_id = c.case_id;
  b.truth = c.truth;
  b.image = c.image;
  const auto symptoms = predict_s(s_model, c.image);
  const auto morph = predict_r(r_model, c.image, symptoms);
  b.features = FeatureVector{symptoms, morph};
  b.prediction = tree.predict(b.features);
  b.visual_inductive = saliency(r_model, c.image, symptoms);
  b.visual_descriptive = segment(c.image, tau);
  b.textual_inductive = explain_textual_inductive(tree, b.features);
  b.textual_descriptive = explain_textual_descriptive(b.features);
  return b;
}

std::string write_bundle(const std::string& dir, const ExplanationBundle& b) {
  const fs::path root = fs::path(dir) / b.case_id;
  auto put = [&](const char* name, const std::string& data) { write_file_atomic((root / name).string(), data); };
  std::ostringstream sal, mask;
  write_pgm(sal, b.visual_inductive);
  write_pgm(mask, b.visual_descriptive);
  put("image.pgm", to_pgm(b.image));
  put("saliency.pgm", sal.str());
  put("mask.pgm", mask.str());
  put("inductive.txt", b.textual_inductive.text + "\n");
  put("descriptive.csv", descriptive_csv(b.textual_descriptive));
  put("prediction.txt", std::string(to_string(b.prediction)) + "\n");
  put("truth.txt", std::string(to_string(b.truth)) + "\n");
  return root.string();
}

DecisionTree fixture_tree() {
  using Node = DecisionTree::Node;
  // Leaf counts are unknown; each leaf carries one nominal case of
  // its label so the majority rule reproduces the label.
  auto leaf = [](Diagnosis d) {
    Node n;
    n.leaf = true;
    n.label = d;
    (d == Diagnosis::Positive ? n.n_pos : n.n_neg) = 1;
    return n;
  };
  auto split = [](std::string_view feature, double thr, int l, int r) {
    Node n;
    n.leaf = false;
    n.feature = std::string(feature);
    n.threshold = thr;
    n.left = l;
    n.right = r;
    return n;
  };
  constexpr auto P = Diagnosis::Positive;
  constexpr auto N = Diagnosis::Negative;
  std::vector<Node> nodes = {
      split(kAsoFeature, 0.5, 1, 2),        // 0
      split(kMissingFeature, 0.5, 3, 4),    // 1
      leaf(P),                              // 2  P(ASO) > 0.5
      split("Infiltration", 0.406, 5, 6),   // 3
      leaf(N),                              // 4  missing morphology
      split("Emphysema", 0.127, 7, 8),      // 5
      split("Emphysema", 0.122, 9, 10),     // 6
      leaf(N),                              // 7
      split("Edema", 0.085, 11, 12),        // 8
      leaf(P),                              // 9
      leaf(N),                              // 10
      leaf(N),                              // 11
      leaf(P),                              // 12
  };
  return DecisionTree(std::move(nodes), tree_feature_names(), 5, 7);
}

}  // namespace nsdx
