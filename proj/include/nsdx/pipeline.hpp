#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nsdx/evaluation.hpp"
#include "nsdx/synth.hpp"
#include "nsdx/toy_neural.hpp"
#include "nsdx/tree.hpp"

namespace nsdx {

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "run";

  // Exactly one data source: synthetic cases or a feature CSV.
  std::optional<SynthSpec> synthetic;
  std::optional<std::string> features_csv;

  double test_fraction = 0.3;    // held out per cohort
  double train_fraction = 0.85;  // of the remainder, for the R-model grid
  double val_fraction = 0.15;

  std::vector<double> lr_grid = {1e-3, 1e-4, 1e-5};
  std::vector<int> epoch_grid = {100, 250, 500};

  Arch arch = Arch::Linear;
  std::size_t hidden = 8;
  double s_lr = 1e-2;
  int s_epochs = 150;
  double e2e_lr = 1e-2;
  int e2e_epochs = 150;

  int max_depth = 5;
  int max_leaves = 8;
  double tau = kDefaultSegmentThreshold;
  std::size_t max_bundles = 0;  // 0 = one per test case

  void validate() const;
};

/// The synthetic default: 60 cases per cohort with seed 7.
PipelineConfig default_pipeline_config();

/// Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig parse_pipeline_config(const std::string& json_text);
nlohmann::ordered_json to_json(const PipelineConfig& cfg);

struct GridLogEntry {
  double lr = 0.0;
  int epochs = 0;
  double val_accuracy = 0.0;
  double final_loss = 0.0;
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::string> checksums;  // file -> sha256
  std::string tree_path;
  ConfusionMatrix tree_matrix;
  AccuracyEstimate tree_accuracy;
  std::optional<ConfusionMatrix> e2e_matrix;
  std::optional<AccuracyEstimate> e2e_accuracy;
  std::optional<bool> significant;
  std::vector<GridLogEntry> r_grid;
  std::size_t selected_r = 0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  std::vector<std::string> bundles;
  std::string started_at, finished_at;
};

nlohmann::ordered_json to_json(const RunManifest& m);

/// Both matrices are computed over the same ordered case list.
std::pair<ConfusionMatrix, ConfusionMatrix> evaluate_split(const DecisionTree& tree, const ToyModel& s_model,
                                                           const ToyModel& r_model, const ToyModel& e2e_model,
                                                           std::span<const CaseRecord> test);

struct CaseSplit {
  std::vector<std::size_t> train, val, test;
};

/// Per-cohort shuffle: a test_fraction share of each cohort is held out,
/// and the rest is divided train/val.
CaseSplit split_cases(std::span<const SynthCase> cases, const PipelineConfig& cfg);

/// Runs every stage into a scratch directory that replaces cfg.out_dir
/// only on success. Layout: models/{s,r,e2e}.json, r_grid.csv, tree.json,
/// features_train.csv, features_test.csv, metrics.csv, bundles/<case_id>/,
/// manifest.json. Stage failures surface as StageError.
RunManifest run_pipeline(const PipelineConfig& cfg);

}  // namespace nsdx
