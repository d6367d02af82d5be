// nsdx: command-line driver for every pipeline stage.
//
// Exit codes: 0 ok, 1 invalid input or usage, 2 runtime failure.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsdx/core_data.hpp"
#include "nsdx/csv.hpp"
#include "nsdx/errors.hpp"
#include "nsdx/evaluation.hpp"
#include "nsdx/explain.hpp"
#include "nsdx/feedback.hpp"
#include "nsdx/fs_util.hpp"
#include "nsdx/pipeline.hpp"
#include "nsdx/review_http.hpp"
#include "nsdx/review_service.hpp"
#include "nsdx/synth.hpp"
#include "nsdx/toy_neural.hpp"
#include "nsdx/tree.hpp"

namespace fs = std::filesystem;
using namespace nsdx;

namespace {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("DX_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(env, &pos);
    if (pos != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("DX_SEED is not an unsigned integer: ") + env);
  }
}

std::vector<SynthCase> select_cases(const std::vector<SynthCase>& all, const std::vector<std::string>& ids) {
  if (ids.empty()) return all;
  std::vector<SynthCase> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const SynthCase& c) { return c.record.case_id == id; });
    if (it == all.end()) throw ValueError("unknown case '" + id + "'");
    out.push_back(*it);
  }
  return out;
}

ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-symbolic diagnosis pipeline"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed_flag;
  std::function<void()> action;

  // parse-covidr
  std::string covidr_in, covidr_out;
  auto* parse_cmd = app.add_subcommand("parse-covidr", "Map COVIDr annotations to morphology classes");
  parse_cmd->add_option("--in", covidr_in, "Annotation CSV")->required();
  parse_cmd->add_option("--out", covidr_out, "Output labels CSV")->required();
  parse_cmd->callback([&] {
    action = [&] {
      const auto ann = parse_covidr_file(covidr_in);
      std::ostringstream os;
      os << "image_id,cohort,class\n";
      for (const auto& a : ann)
        os << csv::join({a.image_id, std::string(to_string(a.cohort)), std::string(to_string(annotation_to_class(a)))})
           << '\n';
      write_file_atomic(covidr_out, os.str());
      const auto counts = finding_counts(ann);
      for (std::size_t i = 0; i < counts.size(); ++i) std::cout << kFindingColumns[i] << ' ' << counts[i] << '\n';
    };
  });

  // synth
  std::string synth_spec, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic case set");
  synth_cmd->add_option("--spec", synth_spec, "Dataset spec JSON")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", seed_flag, "Overrides the spec seed");
  synth_cmd->callback([&] {
    action = [&] {
      auto spec = parse_synth_spec(read_file(synth_spec));
      if (seed_flag || std::getenv("DX_SEED")) spec.seed = resolve_seed(seed_flag);
      const auto cases = synth_dataset(spec);
      write_synth_dataset(synth_out, cases);
      std::cout << cases.size() << " cases written to " << synth_out << '\n';
    };
  });

  // train-stub
  std::string ts_kind, ts_data, ts_out, ts_s, ts_init, ts_arch = "linear";
  double ts_lr = 1e-2;
  int ts_epochs = 100;
  std::size_t ts_hidden = 8;
  auto* train_cmd = app.add_subcommand("train-stub", "Train a toy S, R or end-to-end model");
  train_cmd->add_option("--kind", ts_kind, "s | r | e2e")->required()->check(CLI::IsMember({"s", "r", "e2e"}));
  train_cmd->add_option("--data", ts_data, "Synthetic case directory")->required();
  train_cmd->add_option("--lr", ts_lr, "Learning rate");
  train_cmd->add_option("--epochs", ts_epochs, "Epochs");
  train_cmd->add_option("--seed", seed_flag, "Seed");
  train_cmd->add_option("--out", ts_out, "Checkpoint path")->required();
  train_cmd->add_option("--s", ts_s, "S-model checkpoint (required for --kind r)");
  train_cmd->add_option("--init", ts_init, "Warm-start checkpoint");
  train_cmd->add_option("--arch", ts_arch, "linear | mlp1");
  train_cmd->add_option("--hidden", ts_hidden, "Hidden width for mlp1");
  train_cmd->callback([&] {
    action = [&] {
      const auto seed = resolve_seed(seed_flag);
      const auto cases = read_synth_dataset(ts_data);
      if (cases.empty()) throw EmptyInputError("no cases in " + ts_data);
      const auto arch = parse_arch(ts_arch);
      const std::size_t hidden = arch == Arch::Mlp1 ? ts_hidden : 0;
      const auto& like = cases.front().record.image;
      std::vector<Example> ex;
      ToyModel::Shape shape;
      if (ts_kind == "s") {
        shape = s_model_shape(like, arch, hidden);
        for (const auto& c : cases) ex.push_back(s_example(c));
      } else if (ts_kind == "e2e") {
        shape = e2e_model_shape(like, arch, hidden);
        for (const auto& c : cases) ex.push_back(e2e_example(c));
      } else {
        if (ts_s.empty()) throw ConfigError("--kind r needs --s");
        const auto s_model = load_checkpoint(ts_s);
        shape = r_model_shape(like, arch, hidden);
        for (const auto& c : cases) ex.push_back(r_example(c, predict_s(s_model, c.record.image)));
      }
      ToyModel init = ts_init.empty() ? ToyModel::random(shape, seed) : load_checkpoint(ts_init);
      const auto result = train(init, ex, TrainOptions{ts_lr, ts_epochs, seed});
      write_file_atomic(ts_out, to_checkpoint(result.model));
      std::cout << "final_loss " << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << '\n'
                << "train_accuracy " << accuracy(result.model, ex) << '\n';
    };
  });

  // features
  std::string f_s, f_r, f_cases, f_out;
  auto* feat_cmd = app.add_subcommand("features", "Derive tree features from S and R models");
  feat_cmd->add_option("--s", f_s, "S-model checkpoint")->required();
  feat_cmd->add_option("--r", f_r, "R-model checkpoint")->required();
  feat_cmd->add_option("--cases", f_cases, "Synthetic case directory")->required();
  feat_cmd->add_option("--out", f_out, "Feature CSV")->required();
  feat_cmd->callback([&] {
    action = [&] {
      const auto s = load_checkpoint(f_s);
      const auto r = load_checkpoint(f_r);
      std::vector<LabeledFeatures> rows;
      for (const auto& c : read_synth_dataset(f_cases)) {
        const auto sym = predict_s(s, c.record.image);
        rows.push_back({c.record.case_id, FeatureVector{sym, predict_r(r, c.record.image, sym)}, c.record.truth});
      }
      std::ostringstream os;
      write_features(os, rows);
      write_file_atomic(f_out, os.str());
      std::cout << rows.size() << " feature rows\n";
    };
  });

  // fit-tree
  std::string ft_data, ft_out;
  int ft_depth = 5, ft_leaves = 8;
  bool ft_random_ties = false;
  auto* fit_cmd = app.add_subcommand("fit-tree", "Fit the diagnosis tree");
  fit_cmd->add_option("--data", ft_data, "Feature CSV")->required();
  fit_cmd->add_option("--max-depth", ft_depth, "Maximum depth");
  fit_cmd->add_option("--max-leaves", ft_leaves, "Maximum leaves");
  fit_cmd->add_option("--seed", seed_flag, "Seed for random tie-breaking");
  fit_cmd->add_flag("--random-tie-break", ft_random_ties, "Break equal-gain splits at random");
  fit_cmd->add_option("--out", ft_out, "Tree JSON")->required();
  fit_cmd->callback([&] {
    action = [&] {
      FitOptions opts;
      opts.max_depth = ft_depth;
      opts.max_leaves = ft_leaves;
      opts.seed = resolve_seed(seed_flag);
      opts.random_tie_break = ft_random_ties;
      const auto data = load_features_file(ft_data);
      const auto tree = fit(data, opts);
      write_file_atomic(ft_out, to_json(tree));
      ConfusionMatrix cm;
      for (const auto& d : data) cm.add(d.truth, tree.predict(d.features));
      std::cout << "leaves " << tree.leaf_count() << "\ndepth " << tree.depth() << "\ntrain_accuracy "
                << format_estimate(accuracy(cm)) << '\n';
    };
  });

  // sweep
  std::string sw_data, sw_param, sw_out;
  std::vector<int> sw_values;
  double sw_eval = 0.3;
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy over a leaf or depth limit");
  sweep_cmd->add_option("--data", sw_data, "Feature CSV")->required();
  sweep_cmd->add_option("--param", sw_param, "leaves | depth")->required();
  sweep_cmd->add_option("--values", sw_values, "Comma-separated values")->required()->delimiter(',');
  sweep_cmd->add_option("--eval-split", sw_eval, "Held-out fraction");
  sweep_cmd->add_option("--seed", seed_flag, "Split seed");
  sweep_cmd->add_option("--out", sw_out, "Curve CSV")->required();
  sweep_cmd->callback([&] {
    action = [&] {
      const auto param = parse_sweep_param(sw_param);
      const auto points = sweep(load_features_file(sw_data), param, sw_values, sw_eval, resolve_seed(seed_flag));
      const auto text = sweep_csv(param, points);
      write_file_atomic(sw_out, text);
      std::cout << text;
    };
  });

  // explain
  std::string ex_tree, ex_s, ex_r, ex_cases, ex_out;
  std::vector<std::string> ex_ids;
  double ex_tau = kDefaultSegmentThreshold;
  auto* explain_cmd = app.add_subcommand("explain", "Write explanation bundles");
  explain_cmd->add_option("--tree", ex_tree, "Tree JSON")->required();
  explain_cmd->add_option("--s", ex_s, "S-model checkpoint")->required();
  explain_cmd->add_option("--r", ex_r, "R-model checkpoint")->required();
  explain_cmd->add_option("--cases", ex_cases, "Synthetic case directory")->required();
  explain_cmd->add_option("--case", ex_ids, "Case id (repeatable; default all)");
  explain_cmd->add_option("--tau", ex_tau, "Segmentation threshold");
  explain_cmd->add_option("--out", ex_out, "Bundle directory")->required();
  explain_cmd->callback([&] {
    action = [&] {
      const auto tree = load_tree(ex_tree);
      const auto s = load_checkpoint(ex_s);
      const auto r = load_checkpoint(ex_r);
      for (const auto& c : select_cases(read_synth_dataset(ex_cases), ex_ids)) {
        const auto b = bundle(c.record, s, r, tree, ex_tau);
        write_bundle(ex_out, b);
        std::cout << b.case_id << ' ' << b.textual_inductive.text << '\n';
      }
    };
  });

  // eval
  std::string ev_a, ev_b;
  bool ev_json = false;
  auto* eval_cmd = app.add_subcommand("eval", "Compare two confusion matrices");
  eval_cmd->add_option("--pred-a", ev_a, "Confusion matrix JSON")->required();
  eval_cmd->add_option("--pred-b", ev_b, "Confusion matrix JSON")->required();
  eval_cmd->add_flag("--json", ev_json, "Machine-readable output");
  eval_cmd->callback([&] {
    action = [&] {
      auto load = [](const std::string& path) {
        try {
          return confusion_from_json(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::exception& e) {
          throw ValueError(path + ": " + e.what());
        }
      };
      const auto a = accuracy(load(ev_a));
      const auto b = accuracy(load(ev_b));
      const bool sig = significant_difference(a, b);
      if (ev_json) {
        nlohmann::ordered_json j;
        j["a"] = {{"p", a.p}, {"sd", a.sd}, {"n", a.n}};
        j["b"] = {{"p", b.p}, {"sd", b.sd}, {"n", b.n}};
        j["significant"] = sig;
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "a: " << format_estimate(a) << '\n'
                  << "b: " << format_estimate(b) << '\n'
                  << "difference: " << (sig ? "significant" : "not significant") << '\n';
      }
    };
  });

  // report
  std::string rp_log, rp_out;
  bool rp_json = false;
  auto* report_cmd = app.add_subcommand("report", "Feedback tables from a review log");
  report_cmd->add_option("--log", rp_log, "Feedback JSONL")->required();
  report_cmd->add_option("--out", rp_out, "Report directory");
  report_cmd->add_flag("--json", rp_json, "Machine-readable output");
  report_cmd->callback([&] {
    action = [&] {
      const auto report = build_report(read_feedback_log_file(rp_log));
      const auto json = to_json(report).dump(2) + "\n";
      const auto text = render_text(report);
      if (!rp_out.empty()) {
        const fs::path dir(rp_out);
        const auto csvs = render_csv(report);
        write_file_atomic((dir / "report.json").string(), json);
        write_file_atomic((dir / "report.txt").string(), text);
        write_file_atomic((dir / "usefulness.csv").string(), csvs.usefulness);
        write_file_atomic((dir / "conditional_visual.csv").string(), csvs.conditional_visual);
        write_file_atomic((dir / "conditional_textual.csv").string(), csvs.conditional_textual);
        write_file_atomic((dir / "agreement_sure.csv").string(), csvs.agreement_sure);
        write_file_atomic((dir / "agreement_unsure.csv").string(), csvs.agreement_unsure);
      }
      std::cout << (rp_json ? json : text);
    };
  });

  // serve
  std::string sv_bundles, sv_log, sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the review service");
  serve_cmd->add_option("--bundles", sv_bundles, "Bundle directory")->required();
  serve_cmd->add_option("--log", sv_log, "Feedback JSONL")->required();
  serve_cmd->add_option("--port", sv_port, "Port (0 = any)");
  serve_cmd->add_option("--host", sv_host, "Bind address");
  serve_cmd->callback([&] {
    action = [&] {
      ReviewService service(sv_bundles, sv_log);
      ReviewServer server(service);
      const int port = server.bind(sv_host, sv_port);
      std::cout << "listening on http://" << sv_host << ':' << port << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
    };
  });

  // run
  std::string run_config, run_out;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline");
  run_cmd->add_option("--config", run_config, "Pipeline config JSON (default: built-in synthetic run)");
  run_cmd->add_option("--out", run_out, "Output directory (overrides config)");
  run_cmd->add_option("--seed", seed_flag, "Overrides the config seed");
  run_cmd->callback([&] {
    action = [&] {
      auto cfg = run_config.empty() ? default_pipeline_config() : parse_pipeline_config(read_file(run_config));
      if (seed_flag || std::getenv("DX_SEED")) {
        const auto seed = resolve_seed(seed_flag);
        if (cfg.synthetic && cfg.synthetic->seed == cfg.seed) cfg.synthetic->seed = seed;
        cfg.seed = seed;
      }
      if (!run_out.empty()) cfg.out_dir = run_out;
      const auto m = run_pipeline(cfg);
      std::cout << "tree: " << format_estimate(m.tree_accuracy) << '\n';
      if (m.e2e_accuracy)
        std::cout << "end_to_end: " << format_estimate(*m.e2e_accuracy) << '\n'
                  << "difference: " << (m.significant.value_or(false) ? "significant" : "not significant") << '\n';
      std::cout << "output: " << cfg.out_dir << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    action();
    return 0;
  } catch (const StageError& e) {
    std::cerr << "error: stage " << e.stage() << ": " << e.what() << '\n';
    return 2;
  } catch (const ValidationFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
