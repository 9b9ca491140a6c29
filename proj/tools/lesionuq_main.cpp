#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lesionuq/baselines.hpp"
#include "lesionuq/config.hpp"
#include "lesionuq/error.hpp"
#include "lesionuq/evaluation.hpp"
#include "lesionuq/gcnn.hpp"
#include "lesionuq/graph.hpp"
#include "lesionuq/pipeline.hpp"
#include "lesionuq/synth.hpp"

namespace fs = std::filesystem;
using namespace lesionuq;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Format:
    case ErrorKind::Shape:
    case ErrorKind::Data:
    case ErrorKind::Input:
    case ErrorKind::Io:
    case ErrorKind::Generation:
      return 3;
    case ErrorKind::Model:
    case ErrorKind::Training:
    case ErrorKind::Fit:
    case ErrorKind::Evaluation:
      return 4;
  }
  return 4;
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::string log_level = "info";
};

// Overrides shared by several subcommands; unset ones keep the config value.
struct Overrides {
  std::optional<double> threshold;
  std::optional<double> epsilon;
  std::optional<int> dilation;
  std::optional<int> epochs;
  std::optional<int> folds;
  std::optional<int> scenes;
  bool keep_volumes = false;
};

PipelineConfig effective_config(const Globals& g, const Overrides& o) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out_dir = *g.out;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (o.threshold) cfg.threshold = *o.threshold;
  if (o.epsilon) cfg.epsilon = *o.epsilon;
  if (o.dilation) cfg.dilation_iters = *o.dilation;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.folds) cfg.folds = *o.folds;
  if (o.scenes) cfg.synth.n_scenes = *o.scenes;
  if (o.keep_volumes) cfg.keep_volumes = true;
  cfg.sync();
  return cfg;
}

GraphDataset load_graphs(const std::vector<std::string>& files) {
  std::vector<GraphDataset> parts;
  for (const auto& f : files) {
    auto d = read_graph_dataset(f);
    if (!d.graphs.empty()) parts.push_back(std::move(d));
  }
  if (parts.empty()) throw InputError("no graphs in the given dataset files");
  return merge_datasets(parts);
}

void print_report(const EvalReport& report) {
  std::printf("%-18s %10s %10s\n", "method", "AUC(%)", "rho");
  for (const auto& m : report.methods) {
    std::printf("%-18s %10.2f %10.2f\n", m.method.c_str(), m.auc_percent, m.spearman_rho);
  }
  std::printf("lesions: %zu TP, %zu FP\n", report.tp_total, report.fp_total);
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("lesionuq");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    throw ConfigError("unknown log level '" + level + "'");
  }
  spdlog::set_level(lvl);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lesion-level uncertainty from Monte-Carlo segmentation ensembles"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  Overrides o;
  app.add_option("--config", g.config, "TOML configuration file");
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--out", g.out, "Output directory (file for score and baselines)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes");
  synth->add_option("--scenes", o.scenes, "Number of scenes");

  std::string data_dir;
  auto* maps = app.add_subcommand("maps", "Uncertainty maps from sample_XX.npy");
  maps->add_option("--data", data_dir, "Directory of scene folders")->required();

  auto* extract = app.add_subcommand("extract", "Binarize, label and match lesions");
  extract->add_option("--data", data_dir, "Directory of scene folders")->required();
  extract->add_option("--threshold", o.threshold, "Binarization threshold");
  extract->add_option("--epsilon", o.epsilon, "IoU_adj threshold for TP lesions");

  auto* graphs = app.add_subcommand("graphs", "Build lesion graphs (JSONL)");
  graphs->add_option("--data", data_dir, "Directory of scene folders")->required();
  graphs->add_option("--epsilon", o.epsilon, "IoU_adj threshold for TP lesions");
  graphs->add_option("--dilation", o.dilation, "Dilation iterations");

  std::vector<std::string> data_files, train_files, score_files;
  std::string variant_text = "classification", model_path, method_name, metaseg_dir;
  auto* train_cmd = app.add_subcommand("train", "Train a GCNN on graph datasets");
  train_cmd->add_option("--data", data_files, "Graph dataset files")->required();
  train_cmd->add_option("--variant", variant_text, "classification or regression");
  train_cmd->add_option("--model", model_path, "Model output path");
  train_cmd->add_option("--epochs", o.epochs, "Training epochs");

  auto* score = app.add_subcommand("score", "Score graphs with a trained GCNN");
  score->add_option("--model", model_path, "Model file")->required();
  score->add_option("--data", data_files, "Graph dataset files")->required();
  score->add_option("--method", method_name, "Score column name");

  auto* baselines = app.add_subcommand("baselines", "Score graphs with the nine baselines");
  baselines->add_option("--train", train_files, "Graph datasets for fitting MetaSeg")->required();
  baselines->add_option("--data", data_files, "Graph datasets to score")->required();
  baselines->add_option("--save-metaseg", metaseg_dir, "Directory for the fitted MetaSeg models");

  bool svg = false;
  auto* eval = app.add_subcommand("eval", "AUC and Spearman report from score tables");
  eval->add_option("--scores", score_files, "Score CSV files (joined on lesion)")->required();
  eval->add_flag("--svg", svg, "Also write curves.svg");

  auto* run = app.add_subcommand("run", "Full cross-validated experiment");
  run->add_option("--folds", o.folds, "Fold count");
  run->add_option("--scenes", o.scenes, "Number of scenes");
  run->add_option("--epochs", o.epochs, "Training epochs");
  run->add_flag("--keep-volumes", o.keep_volumes, "Also write NPY volumes per scene");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    setup_logging(g.log_level);
    const PipelineConfig cfg = effective_config(g, o);
    const ScanOptions scan{cfg.threshold, cfg.epsilon, cfg.dilation_iters};
    const fs::path out = cfg.out_dir;

    if (synth->parsed()) {
      cfg.synth.validate();
      write_synthetic_dataset(cfg.synth, out, cfg.jobs);
      spdlog::info("wrote {} scenes to {}", cfg.synth.n_scenes, out.string());
    } else if (maps->parsed()) {
      stage_maps(data_dir, g.out ? out : fs::path(data_dir), cfg.jobs);
    } else if (extract->parsed()) {
      stage_extract(data_dir, g.out ? out : fs::path(data_dir), scan, cfg.jobs);
    } else if (graphs->parsed()) {
      stage_graphs(data_dir, g.out ? out : fs::path(data_dir), scan, cfg.jobs);
    } else if (train_cmd->parsed()) {
      TrainConfig tc = cfg.train;
      tc.variant = parse_variant(variant_text);
      const auto result = train(load_graphs(data_files), tc);
      const fs::path path =
          model_path.empty() ? out / (std::string("gcnn_") + to_string(tc.variant) + ".model")
                             : fs::path(model_path);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      save_model(result.model, path);
      spdlog::info("best epoch {} of {}, model written to {}", result.best_epoch, tc.epochs,
                   path.string());
    } else if (score->parsed()) {
      const auto model = load_model(model_path);
      if (method_name.empty()) {
        method_name = model.variant == Variant::Classification ? "GCNN_Classif" : "GCNN_Reg";
      }
      auto table = score_gcnn(load_graphs(data_files), model, method_name);
      sort_rows(table);
      const fs::path path = g.out ? out : fs::path("scores_" + method_name + ".csv");
      write_score_table(table, path);
    } else if (baselines->parsed()) {
      const auto fit_set = load_graphs(train_files);
      auto table = score_baseline_methods(fit_set, load_graphs(data_files));
      sort_rows(table);
      write_score_table(table, g.out ? out : fs::path("scores_baselines.csv"));
      if (!metaseg_dir.empty()) {
        std::vector<LesionFeatures> f;
        std::vector<int> tp;
        std::vector<double> iou;
        for (const auto& gr : fit_set.graphs) {
          f.push_back(lesion_features(gr));
          tp.push_back(gr.tp ? 1 : 0);
          iou.push_back(gr.iou_adj);
        }
        fs::create_directories(metaseg_dir);
        save_metaseg(fit_metaseg(f, tp, iou, MetaSegKind::Classification),
                     fs::path(metaseg_dir) / "metaseg_classif.json");
        save_metaseg(fit_metaseg(f, tp, iou, MetaSegKind::Regression),
                     fs::path(metaseg_dir) / "metaseg_reg.json");
      }
    } else if (eval->parsed()) {
      std::vector<ScoreTable> tables;
      for (const auto& f : score_files) tables.push_back(read_score_table(f));
      const auto report = build_report(join_tables(tables));
      fs::create_directories(out);
      write_report_csv(report, out / "report.csv");
      fs::create_directories(out / "curves");
      for (const auto& m : report.methods) write_curve_csv(m.curve, out / "curves" / (m.method + ".csv"));
      if (svg) write_curves_svg(report, out / "curves.svg");
      print_report(report);
    } else if (run->parsed()) {
      const auto result = run_pipeline(cfg);
      print_report(result.report);
      spdlog::info("report written to {}", (out / "report.csv").string());
    }
    return 0;
  } catch (const Error& e) {
    spdlog::error("{} error: {}", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("io error: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
}
