#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lesionuq/gcnn.hpp"
#include "lesionuq/graph.hpp"
#include "lesionuq/lesions.hpp"
#include "lesionuq/uncertainty_maps.hpp"

namespace lesionuq {

inline constexpr double kLogsumDelta = 1e-12;

/// Method names in report order.
inline const std::array<std::string, 11> kMethodNames = {
    "GCNN_Classif",   "GCNN_Reg",        "Entropy_mean",   "Entropy_logsum",
    "Variance_mean",  "Variance_logsum", "PCS_mean",       "PCS_logsum",
    "Size",           "MetaSeg_Classif", "MetaSeg_Reg"};

/// Mean of `map` over the (undilated) lesion voxels. InputError if empty.
double aggregate_mean(const Lesion& lesion, const Volume& map);

/// sum ln(u + 1e-12) over the lesion voxels. Larger (closer to 0) means more
/// uncertain. InputError if empty.
double aggregate_logsum(const Lesion& lesion, const Volume& map);

/// 1 / S.
double size_uncertainty(std::size_t size);
inline double size_uncertainty(const Lesion& lesion) { return size_uncertainty(lesion.size()); }

/// Per-lesion aggregates the baselines and MetaSeg consume.
struct LesionFeatures {
  double mean_entropy = 0.0;
  double mean_variance = 0.0;
  double mean_pcs = 0.0;
  double logsum_entropy = 0.0;
  double logsum_variance = 0.0;
  double logsum_pcs = 0.0;
  std::size_t size = 0;

  /// The four MetaSeg inputs: mean entropy, variance, pcs, size.
  std::array<double, 4> metaseg_inputs() const noexcept {
    return {mean_entropy, mean_variance, mean_pcs, static_cast<double>(size)};
  }
};

LesionFeatures lesion_features(const Lesion& lesion, const UncertaintyMaps& maps);

/// Same aggregates read from the leading `size` nodes of an unscaled graph.
LesionFeatures lesion_features(const LesionGraph& graph);

/// y ~ X w + b.
struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;

  double decision(std::span<const double> x) const;
};

/// Normal equations with a ridge term for conditioning. Needs more rows than
/// coefficients; throws FitError when the system cannot be solved.
LinearModel linear_regression_fit(const Matrix& x, std::span<const double> y,
                                  double ridge = 1e-8);

struct LogisticOptions {
  double gradient_tolerance = 1e-8;
  long max_iterations = 100000;
};

/// Full-batch gradient descent on mean log-loss. labels[i] != 0 marks the
/// positive class.
LinearModel logistic_regression_fit(const Matrix& x, std::span<const int> labels,
                                    const LogisticOptions& options = {});

enum class MetaSegKind { Classification, Regression };

struct MetaSegModel {
  MetaSegKind kind = MetaSegKind::Classification;
  std::array<double, 4> mean{};
  std::array<double, 4> stddev{1.0, 1.0, 1.0, 1.0};
  LinearModel fit;
};

/// Classification learns P(FP) from the tp flags; regression learns iou_adj.
MetaSegModel fit_metaseg(std::span<const LesionFeatures> features, std::span<const int> tp,
                         std::span<const double> iou_adj, MetaSegKind kind);

/// P(FP) for classification, clamp(1 - predicted IoU, 0, 1) for regression.
double metaseg_predict(const LesionFeatures& features, const MetaSegModel& model);

void save_metaseg(const MetaSegModel& model, const std::filesystem::path& path);
MetaSegModel load_metaseg(const std::filesystem::path& path);

/// The nine non-GCNN scores of one lesion, keyed like kMethodNames.
struct BaselineScores {
  double entropy_mean, entropy_logsum, variance_mean, variance_logsum, pcs_mean, pcs_logsum,
      size, metaseg_classif, metaseg_reg;
};

BaselineScores score_baselines(const LesionFeatures& f, const MetaSegModel& classif,
                               const MetaSegModel& reg);

}  // namespace lesionuq
