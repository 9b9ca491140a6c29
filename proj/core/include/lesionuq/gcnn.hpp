#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lesionuq/graph.hpp"
#include "lesionuq/rng.hpp"

namespace lesionuq {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Variant { Classification, Regression };

const char* to_string(Variant v) noexcept;
Variant parse_variant(std::string_view text);

/// Output column holding P(FP) in the classification head.
inline constexpr int kFpClass = 1;
inline constexpr int kDefaultHidden = 64;

/// Two graph-convolution layers and a linear head.
struct GcnnParams {
  Matrix w1;     // F x h
  RowVector b1;  // h
  Matrix w2;     // h x h
  RowVector b2;  // h
  Matrix w3;     // h x out
  RowVector b3;  // out

  static GcnnParams zeros(Eigen::Index features, Eigen::Index hidden, Variant variant);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights, zero biases.
  static GcnnParams glorot(Eigen::Index features, Eigen::Index hidden, Variant variant, Rng& rng);

  Eigen::Index features() const noexcept { return w1.rows(); }
  Eigen::Index hidden() const noexcept { return w1.cols(); }
  Eigen::Index outputs() const noexcept { return w3.cols(); }
  std::size_t parameter_count() const noexcept;

  /// Visits (name, tensor) in serialisation order w1 b1 w2 b2 w3 b3. Vectors
  /// are passed as 1 x n matrices views through their data pointer.
  void for_each(const std::function<void(const char*, double*, Eigen::Index, Eigen::Index)>& fn);
  void for_each(
      const std::function<void(const char*, const double*, Eigen::Index, Eigen::Index)>& fn) const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  void set_zero();
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  GcnnParams m;
  GcnnParams v;

  static AdamState for_params(const GcnnParams& p);
};

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
SparseMatrix normalized_adjacency(const LesionGraph& g);

/// A graph ready for the network: scaled features and cached propagation.
struct PreparedGraph {
  SparseMatrix adjacency;
  Matrix x;   // N x F, scaled
  Matrix ax;  // adjacency * x
  double iou_adj = 0.0;
  bool tp = false;

  Eigen::Index nodes() const noexcept { return x.rows(); }
};

/// Applies `scaler` (if not null) and precomputes the adjacency products.
PreparedGraph prepare_graph(const LesionGraph& g, const FeatureScaler* scaler);

struct ForwardCache {
  Matrix z1, h1, ah1, z2, h2;
  RowVector readout;
  RowVector head;  // pre-activation output
};

/// Classification: softmax over (TP, FP). Regression: sigmoid IoU estimate.
/// Throws ModelError on a feature-width mismatch.
RowVector forward(const PreparedGraph& g, const GcnnParams& params, Variant variant,
                  ForwardCache* cache = nullptr);

/// Mean loss over the batch (cross-entropy or squared error) and, when
/// `grads` is not null, its exact gradient with respect to every parameter.
double loss_and_gradients(std::span<const PreparedGraph* const> batch, const GcnnParams& params,
                          Variant variant, GcnnParams* grads);

/// Bias-corrected Adam update.
void adam_step(GcnnParams& params, const GcnnParams& grads, AdamState& state, double lr);

struct TrainConfig {
  Variant variant = Variant::Classification;
  double lr_start = 1e-2;
  double lr_end = 1e-5;
  int epochs = 200;
  int batch_size = 10;
  int hidden = kDefaultHidden;
  double epsilon = 0.1;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Geometric decay from lr_start (epoch 0) to lr_end (last epoch).
double learning_rate(int epoch, const TrainConfig& cfg);

struct GcnnModel {
  Variant variant = Variant::Classification;
  GcnnParams params;
  FeatureScaler scaler;
  std::vector<std::string> feature_names;
  int n_channels = 1;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
};

struct TrainResult {
  GcnnModel model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

/// Seeded, single-threaded, bit-reproducible training. Throws TrainingError on
/// a degenerate dataset or a non-finite loss.
TrainResult train(const GraphDataset& dataset, const TrainConfig& cfg);

/// Raw network output for an unscaled graph: (P(TP), P(FP)) or (IoU estimate).
RowVector predict(const LesionGraph& g, const GcnnModel& model);

/// P(FP) for classification, 1 - IoU estimate for regression.
double predict_uncertainty(const LesionGraph& g, const GcnnModel& model);

/// Header line of JSON, then the flat little-endian float64 payload.
void save_model(const GcnnModel& model, const std::filesystem::path& path);
GcnnModel load_model(const std::filesystem::path& path);

}  // namespace lesionuq
