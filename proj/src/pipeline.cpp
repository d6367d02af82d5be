#include "nsdx/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <unistd.h>

#include "nsdx/csv.hpp"
#include "nsdx/digest.hpp"
#include "nsdx/errors.hpp"
#include "nsdx/explain.hpp"
#include "nsdx/fs_util.hpp"
#include "nsdx/rng.hpp"

namespace fs = std::filesystem;

namespace nsdx {

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string metrics_csv(const ConfusionMatrix& tree, const std::optional<ConfusionMatrix>& e2e) {
  std::ostringstream os;
  os << "model,tp,fn,fp,tn,n,accuracy,sd\n";
  auto row = [&](const char* name, const ConfusionMatrix& cm) {
    const auto a = accuracy(cm);
    os << name << ',' << cm.tp << ',' << cm.fn << ',' << cm.fp << ',' << cm.tn << ',' << cm.n() << ','
       << fixed6(a.p) << ',' << fixed6(a.sd) << '\n';
  };
  row("tree", tree);
  if (e2e) row("end_to_end", *e2e);
  return os.str();
}

std::vector<LabeledFeatures> derive_features(std::span<const SynthCase> cases, std::span<const std::size_t> idx,
                                             const ToyModel& s, const ToyModel& r) {
  std::vector<LabeledFeatures> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    const auto& c = cases[i].record;
    const auto sym = predict_s(s, c.image);
    out.push_back({c.case_id, FeatureVector{sym, predict_r(r, c.image, sym)}, c.truth});
  }
  return out;
}

void assert_disjoint(const std::vector<std::string>& fitted, const std::vector<std::string>& evaluated) {
  std::set<std::string> seen(fitted.begin(), fitted.end());
  for (const auto& id : evaluated)
    if (seen.count(id)) throw Error("case '" + id + "' appears in both tree training and evaluation sets");
}

}  // namespace

// ------------------------------------------------------------------ config

void PipelineConfig::validate() const {
  if (synthetic.has_value() == features_csv.has_value())
    throw ConfigError("exactly one data source (synthetic or features_csv) is required");
  auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_open_unit(test_fraction)) throw ConfigError("test_fraction must lie in (0,1)");
  if (!in_open_unit(train_fraction) || !in_open_unit(val_fraction))
    throw ConfigError("train/val fractions must lie in (0,1)");
  if (std::abs(train_fraction + val_fraction - 1.0) > 1e-9) throw ConfigError("train/val fractions must sum to 1");
  if (lr_grid.empty() || epoch_grid.empty()) throw ConfigError("lr and epoch grids must be nonempty");
  for (double lr : lr_grid)
    if (!(lr > 0.0)) throw ConfigError("grid learning rates must be positive");
  for (int e : epoch_grid)
    if (e <= 0) throw ConfigError("grid epochs must be positive");
  if (!(s_lr > 0.0) || !(e2e_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (s_epochs <= 0 || e2e_epochs <= 0) throw ConfigError("epochs must be positive");
  if (arch == Arch::Mlp1 && hidden == 0) throw ConfigError("mlp1 needs hidden > 0");
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (max_leaves < 2) throw ConfigError("max_leaves must be at least 2");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0,1]");
  if (out_dir.empty()) throw ConfigError("output directory must be set");
}

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  SynthSpec s;
  s.covid = s.healthy = s.tuberculosis = s.pneumonia = 60;
  s.seed = cfg.seed;
  cfg.synthetic = s;
  return cfg;
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  PipelineConfig cfg;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    static const std::set<std::string> known = {
        "seed",     "out",        "data",   "test_fraction", "train_fraction", "val_fraction",
        "lr_grid",  "epoch_grid", "arch",   "hidden",        "s_lr",           "s_epochs",
        "e2e_lr",   "e2e_epochs", "max_depth", "max_leaves", "tau",            "max_bundles"};
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.lr_grid = j.value("lr_grid", cfg.lr_grid);
    cfg.epoch_grid = j.value("epoch_grid", cfg.epoch_grid);
    if (j.contains("arch")) cfg.arch = parse_arch(j.at("arch").get<std::string>());
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.s_lr = j.value("s_lr", cfg.s_lr);
    cfg.s_epochs = j.value("s_epochs", cfg.s_epochs);
    cfg.e2e_lr = j.value("e2e_lr", cfg.e2e_lr);
    cfg.e2e_epochs = j.value("e2e_epochs", cfg.e2e_epochs);
    cfg.max_depth = j.value("max_depth", cfg.max_depth);
    cfg.max_leaves = j.value("max_leaves", cfg.max_leaves);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.max_bundles = j.value("max_bundles", cfg.max_bundles);

    if (!j.contains("data")) {
      cfg.synthetic = default_pipeline_config().synthetic;
      cfg.synthetic->seed = cfg.seed;
    } else {
      const auto& d = j.at("data");
      if (d.contains("synthetic")) {
        const auto& sj = d.at("synthetic");
        cfg.synthetic = parse_synth_spec(sj.dump());
        if (!sj.contains("seed")) cfg.synthetic->seed = cfg.seed;
      }
      if (d.contains("features_csv")) cfg.features_csv = d.at("features_csv").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  nlohmann::ordered_json data;
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    data["synthetic"] = {{"covid", s.covid}, {"healthy", s.healthy}, {"tuberculosis", s.tuberculosis},
                         {"pneumonia", s.pneumonia}, {"seed", s.seed}, {"size", s.size}};
  }
  if (cfg.features_csv) data["features_csv"] = *cfg.features_csv;
  j["data"] = data;
  j["test_fraction"] = cfg.test_fraction;
  j["train_fraction"] = cfg.train_fraction;
  j["val_fraction"] = cfg.val_fraction;
  j["lr_grid"] = cfg.lr_grid;
  j["epoch_grid"] = cfg.epoch_grid;
  j["arch"] = std::string(to_string(cfg.arch));
  j["hidden"] = cfg.hidden;
  j["s_lr"] = cfg.s_lr;
  j["s_epochs"] = cfg.s_epochs;
  j["e2e_lr"] = cfg.e2e_lr;
  j["e2e_epochs"] = cfg.e2e_epochs;
  j["max_depth"] = cfg.max_depth;
  j["max_leaves"] = cfg.max_leaves;
  j["tau"] = cfg.tau;
  j["max_bundles"] = cfg.max_bundles;
  return j;
}

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_hash"] = m.config_hash;
  j["checksums"] = m.checksums;
  j["tree"] = m.tree_path;
  j["split"] = {{"train", m.n_train}, {"val", m.n_val}, {"test", m.n_test}};
  auto est = [](const AccuracyEstimate& e) {
    nlohmann::ordered_json o;
    o["p"] = e.p;
    o["sd"] = e.sd;
    o["n"] = e.n;
    return o;
  };
  nlohmann::ordered_json metrics;
  metrics["tree"] = {{"confusion", to_json(m.tree_matrix)}, {"accuracy", est(m.tree_accuracy)}};
  if (m.e2e_matrix)
    metrics["end_to_end"] = {{"confusion", to_json(*m.e2e_matrix)}, {"accuracy", est(*m.e2e_accuracy)}};
  if (m.significant) metrics["significant_difference"] = *m.significant;
  j["metrics"] = metrics;
  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  for (const auto& g : m.r_grid)
    grid.push_back({{"lr", g.lr}, {"epochs", g.epochs}, {"val_accuracy", g.val_accuracy}, {"final_loss", g.final_loss}});
  j["r_grid"] = grid;
  if (!m.r_grid.empty()) j["selected_r"] = m.selected_r;
  j["bundles"] = m.bundles;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  return j;
}

// -------------------------------------------------------------- evaluation

std::pair<ConfusionMatrix, ConfusionMatrix> evaluate_split(const DecisionTree& tree, const ToyModel& s_model,
                                                           const ToyModel& r_model, const ToyModel& e2e_model,
                                                           std::span<const CaseRecord> test) {
  if (test.empty()) throw EmptyInputError("evaluation set is empty");
  ConfusionMatrix tree_cm, e2e_cm;
  for (const auto& c : test) {
    const auto sym = predict_s(s_model, c.image);
    const FeatureVector x{sym, predict_r(r_model, c.image, sym)};
    tree_cm.add(c.truth, tree.predict(x));
    e2e_cm.add(c.truth, predict_e2e(e2e_model, c.image) > 0.5 ? Diagnosis::Positive : Diagnosis::Negative);
  }
  return {tree_cm, e2e_cm};
}

CaseSplit split_cases(std::span<const SynthCase> cases, const PipelineConfig& cfg) {
  CaseSplit split;
  Rng rng = Rng::stream(cfg.seed, 0x5117);
  for (auto cohort : {Cohort::Covid, Cohort::Healthy, Cohort::Tuberculosis, Cohort::Pneumonia}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cases.size(); ++i)
      if (cases[i].record.cohort == cohort) idx.push_back(i);
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(idx.size())));
    const auto rest = idx.size() - n_test;
    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(rest)));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k < n_test)
        split.test.push_back(idx[k]);
      else if (k < n_test + n_val)
        split.val.push_back(idx[k]);
      else
        split.train.push_back(idx[k]);
    }
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

// ---------------------------------------------------------------- pipeline

namespace {

RunManifest run_features_mode(const PipelineConfig& cfg, const fs::path& work, RunManifest m) {
  auto data = stage("load", [&] { return load_features_file(*cfg.features_csv); });
  std::vector<LabeledFeatures> fit_set, test_set;
  stage("split", [&] {
    Rng rng = Rng::stream(cfg.seed, 0x5117);
    for (auto truth : {Diagnosis::Positive, Diagnosis::Negative}) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i].truth == truth) idx.push_back(i);
      rng.shuffle(std::span<std::size_t>(idx));
      const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(idx.size())));
      for (std::size_t k = 0; k < idx.size(); ++k) (k < n_test ? test_set : fit_set).push_back(data[idx[k]]);
    }
    if (fit_set.empty() || test_set.empty()) throw EmptyInputError("feature file too small to split");
  });
  m.n_train = fit_set.size();
  m.n_test = test_set.size();

  const auto tree = stage("fit-tree", [&] {
    FitOptions opts;
    opts.max_depth = cfg.max_depth;
    opts.max_leaves = cfg.max_leaves;
    opts.seed = cfg.seed;
    return fit(fit_set, opts);
  });
  stage("evaluate", [&] {
    std::vector<std::string> a, b;
    for (const auto& f : fit_set) a.push_back(f.case_id);
    for (const auto& f : test_set) b.push_back(f.case_id);
    assert_disjoint(a, b);
    for (const auto& f : test_set) m.tree_matrix.add(f.truth, tree.predict(f.features));
    m.tree_accuracy = accuracy(m.tree_matrix);
  });
  stage("write", [&] {
    write_file_atomic((work / "tree.json").string(), to_json(tree));
    write_file_atomic((work / "metrics.csv").string(), metrics_csv(m.tree_matrix, std::nullopt));
  });
  return m;
}

RunManifest run_synthetic_mode(const PipelineConfig& cfg, const fs::path& work, RunManifest m) {
  const auto cases = stage("synth", [&] { return synth_dataset(*cfg.synthetic); });
  if (cases.empty()) throw StageError("synth", "dataset is empty");
  const auto split = stage("split", [&] {
    auto s = split_cases(cases, cfg);
    if (s.train.empty() || s.val.empty() || s.test.empty())
      throw EmptyInputError("dataset too small for a train/val/test split");
    return s;
  });
  m.n_train = split.train.size();
  m.n_val = split.val.size();
  m.n_test = split.test.size();
  std::vector<std::size_t> fit_idx(split.train);
  fit_idx.insert(fit_idx.end(), split.val.begin(), split.val.end());
  std::sort(fit_idx.begin(), fit_idx.end());

  const auto& like = cases.front().record.image;
  const std::size_t hidden = cfg.arch == Arch::Mlp1 ? cfg.hidden : 0;

  const auto s_model = stage("train-s", [&] {
    std::vector<Example> ex;
    for (auto i : fit_idx) ex.push_back(s_example(cases[i]));
    TrainOptions o{cfg.s_lr, cfg.s_epochs, Rng::stream(cfg.seed, 1).next()};
    return train(ToyModel::random(s_model_shape(like, cfg.arch, hidden), Rng::stream(cfg.seed, 2).next()), ex, o)
        .model;
  });

  const auto grid = stage("train-r-grid", [&] {
    auto to_examples = [&](const std::vector<std::size_t>& idx) {
      std::vector<Example> ex;
      for (auto i : idx) ex.push_back(r_example(cases[i], predict_s(s_model, cases[i].record.image)));
      return ex;
    };
    const auto tr = to_examples(split.train);
    const auto va = to_examples(split.val);
    const auto init = ToyModel::random(r_model_shape(like, cfg.arch, hidden), Rng::stream(cfg.seed, 3).next());
    return grid_search(init, tr, va, cfg.lr_grid, cfg.epoch_grid, Rng::stream(cfg.seed, 4).next());
  });
  for (const auto& run : grid.runs) m.r_grid.push_back({run.lr, run.epochs, run.val_accuracy, run.final_loss});
  m.selected_r = grid.best;
  const auto& r_model = grid.runs[grid.best].model;

  const auto e2e_model = stage("train-e2e", [&] {
    std::vector<Example> ex;
    for (auto i : fit_idx) ex.push_back(e2e_example(cases[i]));
    TrainOptions o{cfg.e2e_lr, cfg.e2e_epochs, Rng::stream(cfg.seed, 5).next()};
    return train(ToyModel::random(e2e_model_shape(like, cfg.arch, hidden), Rng::stream(cfg.seed, 6).next()), ex, o)
        .model;
  });

  const auto train_features = stage("features", [&] { return derive_features(cases, fit_idx, s_model, r_model); });
  const auto test_features = stage("features", [&] { return derive_features(cases, split.test, s_model, r_model); });

  const auto tree = stage("fit-tree", [&] {
    FitOptions opts;
    opts.max_depth = cfg.max_depth;
    opts.max_leaves = cfg.max_leaves;
    opts.seed = cfg.seed;
    return fit(train_features, opts);
  });

  std::vector<CaseRecord> test_records;
  for (auto i : split.test) test_records.push_back(cases[i].record);
  stage("evaluate", [&] {
    std::vector<std::string> a, b;
    for (const auto& f : train_features) a.push_back(f.case_id);
    for (const auto& r : test_records) b.push_back(r.case_id);
    assert_disjoint(a, b);
    auto [tree_cm, e2e_cm] = evaluate_split(tree, s_model, r_model, e2e_model, test_records);
    m.tree_matrix = tree_cm;
    m.tree_accuracy = accuracy(tree_cm);
    m.e2e_matrix = e2e_cm;
    m.e2e_accuracy = accuracy(e2e_cm);
    m.significant = significant_difference(m.tree_accuracy, *m.e2e_accuracy);
  });

  stage("write", [&] {
    write_file_atomic((work / "models" / "s.json").string(), to_checkpoint(s_model));
    write_file_atomic((work / "models" / "r.json").string(), to_checkpoint(r_model));
    write_file_atomic((work / "models" / "e2e.json").string(), to_checkpoint(e2e_model));
    std::ostringstream grid_csv;
    grid_csv << "index,lr,epochs,val_accuracy,final_loss\n";
    for (std::size_t i = 0; i < m.r_grid.size(); ++i)
      grid_csv << i << ',' << csv::format_real(m.r_grid[i].lr) << ',' << m.r_grid[i].epochs << ','
               << fixed6(m.r_grid[i].val_accuracy) << ',' << fixed6(m.r_grid[i].final_loss) << '\n';
    write_file_atomic((work / "r_grid.csv").string(), grid_csv.str());
    write_file_atomic((work / "tree.json").string(), to_json(tree));
    std::ostringstream ftr, fte;
    write_features(ftr, train_features);
    write_features(fte, test_features);
    write_file_atomic((work / "features_train.csv").string(), ftr.str());
    write_file_atomic((work / "features_test.csv").string(), fte.str());
    write_file_atomic((work / "metrics.csv").string(), metrics_csv(m.tree_matrix, m.e2e_matrix));
  });

  stage("bundles", [&] {
    // Synthetic ids name the cohort, so reviewers see shuffled opaque ids;
    // bundles.csv (outside bundles/) maps them back.
    std::vector<std::size_t> order(test_records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::stream(cfg.seed, 7);
    rng.shuffle(std::span<std::size_t>(order));
    const std::size_t limit = cfg.max_bundles == 0 ? order.size() : std::min(cfg.max_bundles, order.size());
    std::ostringstream index;
    index << "review_id,case_id\n";
    for (std::size_t k = 0; k < limit; ++k) {
      CaseRecord c = test_records[order[k]];
      char id[32];
      std::snprintf(id, sizeof id, "review-%04zu", k + 1);
      index << id << ',' << c.case_id << '\n';
      c.case_id = id;
      write_bundle((work / "bundles").string(), bundle(c, s_model, r_model, tree, cfg.tau));
      m.bundles.push_back(id);
    }
    write_file_atomic((work / "bundles.csv").string(), index.str());
  });
  return m;
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  RunManifest m;
  m.started_at = utc_now();
  m.config_hash = sha256_hex(to_json(cfg).dump());
  m.tree_path = "tree.json";

  const fs::path out(cfg.out_dir);
  const fs::path work = out.string() + ".partial-" + std::to_string(::getpid());
  fs::remove_all(work);
  fs::create_directories(work);
  try {
    m = cfg.features_csv ? run_features_mode(cfg, work, std::move(m)) : run_synthetic_mode(cfg, work, std::move(m));
    for (const char* f : {"models/s.json", "models/r.json", "models/e2e.json", "tree.json", "metrics.csv"})
      if (fs::exists(work / f)) m.checksums[f] = sha256_hex(read_file((work / f).string()));
    m.finished_at = utc_now();
    stage("write", [&] { write_file_atomic((work / "manifest.json").string(), to_json(m).dump(2) + "\n"); });
    stage("publish", [&] {
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      fs::remove_all(out);
      fs::rename(work, out);
    });
  } catch (...) {
    std::error_code ec;
    fs::remove_all(work, ec);
    throw;
  }
  return m;
}

}  // namespace nsdx
