#include "nsdx/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "nsdx/errors.hpp"
#include "nsdx/fs_util.hpp"
#include "nsdx/rng.hpp"

namespace nsdx {

namespace {

constexpr double kGainEpsilon = 1e-12;
constexpr int kUnboundedDepth = 64;
constexpr int kUnboundedLeaves = 1 << 20;

struct Split {
  double gain = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  bool valid = false;
};

// n * gini for a two-class count pair
double weighted_gini(double pos, double neg) {
  const double n = pos + neg;
  if (n == 0.0) return 0.0;
  return n - (pos * pos + neg * neg) / n;
}

struct Frontier {
  int node;
  std::vector<std::size_t> members;
  int depth;
  Split split;
};

class Builder {
 public:
  Builder(std::span<const TreeRow> rows, std::span<const Diagnosis> labels, const FitOptions& opts)
      : rows_(rows), labels_(labels), opts_(opts), rng_(opts.seed) {}

  DecisionTree build() {
    std::vector<std::size_t> all(rows_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    nodes_.emplace_back();
    std::vector<Frontier> frontier;
    frontier.push_back(make_leaf(0, std::move(all), 0));
    std::size_t leaves = 1;

    while (leaves < static_cast<std::size_t>(opts_.max_leaves)) {
      // best-first: largest impurity decrease, earliest node on ties
      std::size_t pick = frontier.size();
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        if (!frontier[i].split.valid) continue;
        if (pick == frontier.size() || frontier[i].split.gain > frontier[pick].split.gain + kGainEpsilon)
          pick = i;
      }
      if (pick == frontier.size()) break;

      Frontier f = std::move(frontier[pick]);
      frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));

      std::vector<std::size_t> left, right;
      for (auto idx : f.members)
        (rows_[idx][f.split.feature] <= f.split.threshold ? left : right).push_back(idx);

      const int l = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      const int r = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      auto& parent = nodes_[static_cast<std::size_t>(f.node)];
      parent.leaf = false;
      parent.feature = tree_feature_names()[f.split.feature];
      parent.threshold = f.split.threshold;
      parent.left = l;
      parent.right = r;
      frontier.push_back(make_leaf(l, std::move(left), f.depth + 1));
      frontier.push_back(make_leaf(r, std::move(right), f.depth + 1));
      ++leaves;
    }
    return DecisionTree(std::move(nodes_), tree_feature_names(), opts_.max_depth, opts_.max_leaves);
  }

 private:
  Frontier make_leaf(int id, std::vector<std::size_t> members, int depth) {
    std::size_t pos = 0;
    for (auto idx : members) pos += labels_[idx] == Diagnosis::Positive;
    auto& n = nodes_[static_cast<std::size_t>(id)];
    n.leaf = true;
    n.n_pos = pos;
    n.n_neg = members.size() - pos;
    n.label = majority_label(n.n_pos, n.n_neg);
    Frontier f{id, std::move(members), depth, {}};
    if (depth < opts_.max_depth && pos != 0 && pos != f.members.size()) f.split = best_split(f.members);
    return f;
  }

  Split best_split(const std::vector<std::size_t>& members) {
    double total_pos = 0.0;
    for (auto idx : members) total_pos += labels_[idx] == Diagnosis::Positive;
    const double total_neg = static_cast<double>(members.size()) - total_pos;
    const double parent = weighted_gini(total_pos, total_neg);

    Split best;
    std::vector<Split> ties;
    std::vector<std::size_t> order(members);
    for (std::size_t f = 0; f < kNumTreeFeatures; ++f) {
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return rows_[a][f] < rows_[b][f]; });
      double lpos = 0.0, lneg = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        (labels_[order[i]] == Diagnosis::Positive ? lpos : lneg) += 1.0;
        const double v = rows_[order[i]][f];
        const double next = rows_[order[i + 1]][f];
        if (!(v < next)) continue;
        double thr = v + (next - v) / 2.0;
        if (!(thr < next)) thr = v;
        const double gain =
            parent - weighted_gini(lpos, lneg) - weighted_gini(total_pos - lpos, total_neg - lneg);
        if (gain <= kGainEpsilon) continue;
        if (!best.valid || gain > best.gain + kGainEpsilon) {
          best = {gain, f, thr, true};
          ties.assign(1, best);
        } else if (std::abs(gain - best.gain) <= kGainEpsilon) {
          ties.push_back({gain, f, thr, true});
        }
      }
    }
    if (opts_.random_tie_break && ties.size() > 1) return ties[rng_.below(ties.size())];
    return best;
  }

  std::span<const TreeRow> rows_;
  std::span<const Diagnosis> labels_;
  FitOptions opts_;
  Rng rng_;
  std::vector<DecisionTree::Node> nodes_;
};

nlohmann::ordered_json node_to_json(const DecisionTree& t, int id) {
  const auto& n = t.node(id);
  nlohmann::ordered_json j;
  if (n.leaf) {
    j["label"] = std::string(to_string(n.label));
    j["counts"] = {n.n_pos, n.n_neg};
  } else {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(t, n.left);
    j["right"] = node_to_json(t, n.right);
  }
  return j;
}

int node_from_json(const nlohmann::json& j, std::vector<DecisionTree::Node>& nodes, int depth) {
  if (depth > 1000) throw CorruptModelError("tree JSON nested too deeply");
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  DecisionTree::Node n;
  if (j.contains("label")) {
    n.leaf = true;
    n.label = parse_diagnosis(j.at("label").get<std::string>());
    const auto counts = j.at("counts").get<std::vector<long long>>();
    if (counts.size() != 2 || counts[0] < 0 || counts[1] < 0)
      throw CorruptModelError("leaf counts must be two nonnegative integers");
    n.n_pos = static_cast<std::size_t>(counts[0]);
    n.n_neg = static_cast<std::size_t>(counts[1]);
  } else {
    n.leaf = false;
    n.feature = j.at("feature").get<std::string>();
    n.threshold = j.at("threshold").get<double>();
    n.left = node_from_json(j.at("left"), nodes, depth + 1);
    n.right = node_from_json(j.at("right"), nodes, depth + 1);
  }
  nodes[static_cast<std::size_t>(id)] = std::move(n);
  return id;
}

void check_constraints(int max_depth, int max_leaves) {
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (max_leaves < 2) throw ConfigError("max_leaves must be at least 2");
}

}  // namespace

const std::vector<std::string>& tree_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v(kSymptomNames.begin(), kSymptomNames.end());
    v.emplace_back(kAsoFeature);
    v.emplace_back(kGgoFeature);
    v.emplace_back(kMissingFeature);
    return v;
  }();
  return names;
}

std::optional<std::size_t> tree_feature_index(std::string_view name) {
  const auto& names = tree_feature_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

TreeRow project(const FeatureVector& x) {
  TreeRow row{};
  std::copy(x.symptoms.values().begin(), x.symptoms.values().end(), row.begin());
  const auto enc = encode_morphology(x.morph);
  row[kNumSymptoms] = enc.aso;
  row[kNumSymptoms + 1] = enc.ggo;
  row[kNumSymptoms + 2] = enc.missing;
  return row;
}

Diagnosis majority_label(std::size_t n_pos, std::size_t n_neg) {
  return n_pos > n_neg ? Diagnosis::Positive : Diagnosis::Negative;
}

// ------------------------------------------------------------ DecisionTree

DecisionTree::DecisionTree(std::vector<Node> nodes, std::vector<std::string> feature_names, int max_depth,
                           int max_leaves)
    : nodes_(std::move(nodes)), feature_names_(std::move(feature_names)), max_depth_(max_depth),
      max_leaves_(max_leaves) {
  if (nodes_.empty()) throw CorruptModelError("tree has no nodes");
  std::vector<int> seen(nodes_.size(), 0);
  std::function<void(int, int)> visit = [&](int id, int depth) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) throw CorruptModelError("child index out of range");
    if (seen[static_cast<std::size_t>(id)]++) throw CorruptModelError("node reachable twice");
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.leaf) return;
    if (std::find(feature_names_.begin(), feature_names_.end(), n.feature) == feature_names_.end())
      throw CorruptModelError("split feature '" + n.feature + "' not in feature_names");
    if (!std::isfinite(n.threshold)) throw CorruptModelError("non-finite threshold");
    visit(n.left, depth + 1);
    visit(n.right, depth + 1);
  };
  visit(0, 0);
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw CorruptModelError("unreachable node");
  if (depth() > max_depth_) throw CorruptModelError("tree deeper than its max_depth");
  if (leaf_count() > static_cast<std::size_t>(std::max(max_leaves_, 1)))
    throw CorruptModelError("tree has more leaves than its max_leaves");

  feature_index_.resize(nodes_.size(), -1);
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].leaf)
      if (auto idx = tree_feature_index(nodes_[i].feature)) feature_index_[i] = static_cast<int>(*idx);
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
}

int DecisionTree::depth() const {
  std::function<int(int)> d = [&](int id) -> int {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    return n.leaf ? 0 : 1 + std::max(d(n.left), d(n.right));
  };
  return d(0);
}

std::vector<int> DecisionTree::route(const TreeRow& row) const {
  std::vector<int> path{0};
  int id = 0;
  while (!nodes_[static_cast<std::size_t>(id)].leaf) {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    const int f = feature_index_[static_cast<std::size_t>(id)];
    if (f < 0) throw CorruptModelError("unknown feature '" + n.feature + "' in tree");
    id = row[static_cast<std::size_t>(f)] <= n.threshold ? n.left : n.right;
    path.push_back(id);
  }
  return path;
}

Diagnosis DecisionTree::predict(const TreeRow& row) const {
  return nodes_[static_cast<std::size_t>(route(row).back())].label;
}

// --------------------------------------------------------------- fitting

DecisionTree fit_rows(std::span<const TreeRow> rows, std::span<const Diagnosis> labels, const FitOptions& opts) {
  check_constraints(opts.max_depth, opts.max_leaves);
  if (rows.empty()) throw ConfigError("cannot fit a tree on an empty dataset");
  if (rows.size() != labels.size()) throw ConfigError("row and label counts differ");
  return Builder(rows, labels, opts).build();
}

DecisionTree fit(std::span<const LabeledFeatures> data, const FitOptions& opts) {
  std::vector<TreeRow> rows;
  std::vector<Diagnosis> labels;
  rows.reserve(data.size());
  labels.reserve(data.size());
  for (const auto& d : data) {
    rows.push_back(project(d.features));
    labels.push_back(d.truth);
  }
  return fit_rows(rows, labels, opts);
}

std::string_view to_string(SweepParam p) { return p == SweepParam::MaxLeaves ? "leaves" : "depth"; }

SweepParam parse_sweep_param(std::string_view s) {
  if (s == "leaves") return SweepParam::MaxLeaves;
  if (s == "depth") return SweepParam::MaxDepth;
  throw ConfigError("sweep parameter must be 'leaves' or 'depth'");
}

std::vector<SweepPoint> sweep(std::span<const TreeRow> rows, std::span<const Diagnosis> labels, SweepParam param,
                              std::span<const int> values, double eval_split, std::uint64_t seed) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (int v : values) {
    if (param == SweepParam::MaxLeaves && v < 2) throw ConfigError("max_leaves values must be at least 2");
    if (param == SweepParam::MaxDepth && v < 1) throw ConfigError("max_depth values must be at least 1");
  }
  if (!(eval_split > 0.0 && eval_split < 1.0)) throw ConfigError("eval split must lie in (0,1)");
  if (rows.size() != labels.size()) throw ConfigError("row and label counts differ");
  if (rows.size() < 2) throw ConfigError("sweep needs at least two rows");

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  auto n_eval = static_cast<std::size_t>(std::llround(eval_split * static_cast<double>(rows.size())));
  n_eval = std::clamp<std::size_t>(n_eval, 1, rows.size() - 1);

  std::vector<TreeRow> train_rows, eval_rows;
  std::vector<Diagnosis> train_labels, eval_labels;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool held_out = i < n_eval;
    (held_out ? eval_rows : train_rows).push_back(rows[order[i]]);
    (held_out ? eval_labels : train_labels).push_back(labels[order[i]]);
  }

  std::vector<SweepPoint> out;
  for (int v : values) {
    FitOptions opts;
    opts.seed = seed;
    opts.max_depth = param == SweepParam::MaxDepth ? v : kUnboundedDepth;
    opts.max_leaves = param == SweepParam::MaxLeaves ? v : kUnboundedLeaves;
    const auto tree = fit_rows(train_rows, train_labels, opts);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < eval_rows.size(); ++i) hits += tree.predict(eval_rows[i]) == eval_labels[i];
    out.push_back({v, static_cast<double>(hits) / static_cast<double>(eval_rows.size())});
  }
  return out;
}

std::vector<SweepPoint> sweep(std::span<const LabeledFeatures> data, SweepParam param, std::span<const int> values,
                              double eval_split, std::uint64_t seed) {
  std::vector<TreeRow> rows;
  std::vector<Diagnosis> labels;
  for (const auto& d : data) {
    rows.push_back(project(d.features));
    labels.push_back(d.truth);
  }
  return sweep(rows, labels, param, values, eval_split, seed);
}

std::string sweep_csv(SweepParam param, std::span<const SweepPoint> points) {
  std::ostringstream os;
  os << "param,value,accuracy\n";
  for (const auto& p : points) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", p.accuracy);
    os << to_string(param) << ',' << p.value << ',' << buf << '\n';
  }
  return os.str();
}

// ----------------------------------------------------------------- JSON

std::string to_json(const DecisionTree& tree) {
  nlohmann::ordered_json j;
  j["feature_names"] = tree.feature_names();
  j["max_depth"] = tree.max_depth();
  j["max_leaves"] = tree.max_leaves();
  j["root"] = node_to_json(tree, 0);
  return j.dump(2) + "\n";
}

DecisionTree tree_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<DecisionTree::Node> nodes;
    node_from_json(j.at("root"), nodes, 0);
    return DecisionTree(std::move(nodes), j.at("feature_names").get<std::vector<std::string>>(),
                        j.at("max_depth").get<int>(), j.at("max_leaves").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModelError(std::string("bad tree JSON: ") + e.what());
  } catch (const ValueError& e) {
    throw CorruptModelError(std::string("bad tree JSON: ") + e.what());
  }
}

DecisionTree load_tree(const std::string& path) { return tree_from_json(read_file(path)); }

}  // namespace nsdx
