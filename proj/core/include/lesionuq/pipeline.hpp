#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lesionuq/baselines.hpp"
#include "lesionuq/config.hpp"
#include "lesionuq/evaluation.hpp"
#include "lesionuq/gcnn.hpp"
#include "lesionuq/graph.hpp"
#include "lesionuq/lesions.hpp"
#include "lesionuq/uncertainty_maps.hpp"

namespace lesionuq {

struct ScanOptions {
  double threshold = 0.5;
  double epsilon = 0.1;
  int dilation_iters = 1;
};

/// Everything derived from one scan's ensemble.
struct ScanResult {
  std::string scan_id;
  UncertaintyMaps maps;
  LabelVolume seg;
  std::vector<Lesion> lesions;
  GraphDataset graphs;
  ScanSummary summary;
};

/// maps -> binarize -> extract + match -> graphs. The ground truth may hold
/// any non-zero labels; it is binarized first.
ScanResult process_scan(const std::string& scan_id, const McEnsemble& ensemble,
                        std::span<const Volume> intensities, const LabelVolume& gt,
                        const ScanOptions& options);

/// Score tables built from graph datasets, one row per graph.
ScoreTable score_gcnn(const GraphDataset& data, const GcnnModel& model, const std::string& method);
/// The nine non-GCNN methods. MetaSeg is fitted on `train`.
ScoreTable score_baseline_methods(const GraphDataset& train, const GraphDataset& data);

/// Scene indices of one fold. Test is a quarter-style chunk of a seeded
/// permutation; validation is the first 20% of the remainder.
struct FoldSplit {
  std::vector<int> test;
  std::vector<int> validation;
  std::vector<int> train;
};
std::vector<FoldSplit> make_folds(int n_scenes, int folds, std::uint64_t seed);

struct PipelineResult {
  EvalReport report;               ///< fold-averaged
  std::vector<EvalReport> folds;
};

/// Full experiment under cfg.out_dir. Stages whose stamp matches the current
/// configuration are skipped, so an interrupted run resumes where it stopped.
/// Failures are rethrown with the stage name prefixed to the message.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Directory-level stages used by the CLI. Each scene lives in
/// <root>/<scan_id>/; inputs are looked up under `out` first, then `data`.
std::vector<std::string> list_scenes(const std::filesystem::path& data);
void stage_maps(const std::filesystem::path& data, const std::filesystem::path& out, int jobs);
void stage_extract(const std::filesystem::path& data, const std::filesystem::path& out,
                   const ScanOptions& options, int jobs);
void stage_graphs(const std::filesystem::path& data, const std::filesystem::path& out,
                  const ScanOptions& options, int jobs);

}  // namespace lesionuq
