#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesionuq/lesions.hpp"
#include "lesionuq/uncertainty_maps.hpp"
#include "lesionuq/volume.hpp"

namespace lesionuq {

inline constexpr int kGraphFormatVersion = 1;

/// Column names for n intensity channels followed by the four fixed columns
/// label, entropy, variance, pcs_uncertainty.
std::vector<std::string> feature_names(int n_channels);

/// A dilated lesion as a featured graph.
///
/// Nodes are ordered with the lesion's own voxels first (ascending linear
/// index), then the dilation ring (ascending linear index). `size` counts the
/// leading lesion nodes. Edges are stored once with first < second; the GCN
/// layer adds self-loops itself.
struct LesionGraph {
  std::string scan_id;
  std::uint32_t lesion_id = 0;
  std::size_t n_features = 0;
  std::vector<double> features;  ///< row-major n_nodes x n_features
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::size_t size = 0;
  double iou_adj = 0.0;
  bool tp = false;

  std::size_t n_nodes() const noexcept {
    return n_features == 0 ? 0 : features.size() / n_features;
  }
  std::span<const double> row(std::size_t node) const noexcept {
    return std::span<const double>(features).subspan(node * n_features, n_features);
  }
  double feature(std::size_t node, std::size_t column) const noexcept {
    return features[node * n_features + column];
  }

  friend bool operator==(const LesionGraph&, const LesionGraph&) = default;
};

/// Builds the graph of one lesion.
///
/// Nodes are the lesion dilated `dilation_iters` times with the 3x3x3 cube.
/// Per node: the intensity of every channel, the binarized segmentation label,
/// entropy, variance and pcs_uncertainty. Every pair of 26-adjacent nodes is
/// joined by an edge.
LesionGraph build_graph(const Lesion& lesion, std::span<const Volume> intensities,
                        const LabelVolume& seg, const UncertaintyMaps& maps,
                        int dilation_iters = 1, std::string scan_id = {});

/// Per-column standardisation fitted on pooled training nodes.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t width() const noexcept { return mean.size(); }
};

/// Columns with zero variance keep mean 0 and stddev 1, so they pass through
/// unchanged. Throws InputError on an empty set or inconsistent widths.
FeatureScaler fit_scaler(std::span<const LesionGraph> graphs);

/// z-scores every feature. Applying twice is not the same as applying once.
LesionGraph apply_scaler(LesionGraph g, const FeatureScaler& scaler);

struct GraphDataset {
  int n_channels = 0;
  std::vector<std::string> feature_names;
  std::vector<LesionGraph> graphs;
};

/// JSON Lines. First line is a header {format_version, n_channels,
/// feature_names}; then one graph per line. Reals use 17 significant digits.
/// An empty dataset produces an empty file.
void write_graph_dataset(const GraphDataset& dataset, const std::filesystem::path& path);

/// Throws FormatError naming the offending line.
GraphDataset read_graph_dataset(const std::filesystem::path& path);

/// Concatenates datasets that share the same feature layout.
GraphDataset merge_datasets(std::span<const GraphDataset> parts);

}  // namespace lesionuq
