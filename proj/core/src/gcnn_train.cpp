#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lesionuq/gcnn.hpp"

namespace lesionuq {

void TrainConfig::validate() const {
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) {
    throw ConfigError("learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

double learning_rate(int epoch, const TrainConfig& cfg) {
  if (cfg.epochs <= 1) return cfg.lr_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, t);
}

namespace {

double mean_loss(const std::vector<const PreparedGraph*>& graphs, const GcnnParams& params,
                 Variant variant) {
  return loss_and_gradients(graphs, params, variant, nullptr);
}

}  // namespace

TrainResult train(const GraphDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  const auto& graphs = dataset.graphs;
  if (cfg.variant == Variant::Classification) {
    std::size_t tp = 0;
    for (const auto& g : graphs) tp += g.tp;
    const std::size_t fp = graphs.size() - tp;
    if (tp < 2 || fp < 2) {
      throw TrainingError("classification training needs >= 2 graphs per class, got " +
                          std::to_string(tp) + " TP and " + std::to_string(fp) + " FP");
    }
  } else if (graphs.size() < 2) {
    throw TrainingError("regression training needs >= 2 graphs");
  }
  const std::size_t width = graphs.front().n_features;
  for (const auto& g : graphs) {
    if (g.n_features != width) throw TrainingError("graphs disagree on feature width");
  }

  Rng rng(derive_seed(cfg.seed, 0, "gcnn-train"));
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  std::size_t n_val = 0;
  if (cfg.validation_fraction > 0.0) {
    n_val = static_cast<std::size_t>(
        std::llround(cfg.validation_fraction * static_cast<double>(graphs.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, graphs.size() - 1);
  }
  std::vector<LesionGraph> train_raw;
  for (std::size_t i = n_val; i < order.size(); ++i) train_raw.push_back(graphs[order[i]]);

  TrainResult result;
  GcnnModel& model = result.model;
  model.variant = cfg.variant;
  model.scaler = fit_scaler(train_raw);
  model.feature_names = dataset.feature_names;
  model.n_channels = dataset.n_channels;
  model.seed = cfg.seed;

  std::vector<PreparedGraph> prepared;
  prepared.reserve(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    prepared.push_back(prepare_graph(graphs[order[i]], &model.scaler));
  }
  std::vector<const PreparedGraph*> val_set, train_set;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    (i < n_val ? val_set : train_set).push_back(&prepared[i]);
  }

  GcnnParams params = GcnnParams::glorot(static_cast<Eigen::Index>(width), cfg.hidden,
                                         cfg.variant, rng);
  AdamState adam = AdamState::for_params(params);
  GcnnParams grads = GcnnParams::zeros(params.features(), params.hidden(), cfg.variant);

  double best = std::numeric_limits<double>::infinity();
  GcnnParams best_params = params;
  std::vector<const PreparedGraph*> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(epoch, cfg);
    rng.shuffle(std::span<const PreparedGraph*>(train_set));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_set.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(train_set.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.assign(train_set.begin() + static_cast<std::ptrdiff_t>(start),
                   train_set.begin() + static_cast<std::ptrdiff_t>(end));
      const double loss = loss_and_gradients(batch, params, cfg.variant, &grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += loss * static_cast<double>(batch.size());
      adam_step(params, grads, adam, lr);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = loss_sum / static_cast<double>(train_set.size());
    entry.val_loss = std::numeric_limits<double>::quiet_NaN();
    if (!val_set.empty()) {
      entry.val_loss = mean_loss(val_set, params, cfg.variant);
      if (!std::isfinite(entry.val_loss)) {
        throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
      }
      if (entry.val_loss < best) {
        best = entry.val_loss;
        best_params = params;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(entry);
  }

  if (val_set.empty()) {
    best_params = params;
    result.best_epoch = cfg.epochs - 1;
  }
  model.params = std::move(best_params);
  return result;
}

}  // namespace lesionuq
