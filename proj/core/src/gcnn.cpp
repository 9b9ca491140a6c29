#include <algorithm>
#include <cmath>
#include <string>

#include "lesionuq/gcnn.hpp"

namespace lesionuq {
namespace {

Eigen::Index output_width(Variant v) { return v == Variant::Classification ? 2 : 1; }

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const char* to_string(Variant v) noexcept {
  return v == Variant::Classification ? "classification" : "regression";
}

Variant parse_variant(std::string_view text) {
  if (text == "classification" || text == "classif") return Variant::Classification;
  if (text == "regression" || text == "reg") return Variant::Regression;
  throw InputError("unknown model variant '" + std::string(text) + "'");
}

GcnnParams GcnnParams::zeros(Eigen::Index features, Eigen::Index hidden, Variant variant) {
  const auto out = output_width(variant);
  GcnnParams p;
  p.w1 = Matrix::Zero(features, hidden);
  p.b1 = RowVector::Zero(hidden);
  p.w2 = Matrix::Zero(hidden, hidden);
  p.b2 = RowVector::Zero(hidden);
  p.w3 = Matrix::Zero(hidden, out);
  p.b3 = RowVector::Zero(out);
  return p;
}

GcnnParams GcnnParams::glorot(Eigen::Index features, Eigen::Index hidden, Variant variant,
                              Rng& rng) {
  GcnnParams p = zeros(features, hidden, variant);
  auto bound = [](Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  };
  fill_uniform(p.w1, bound(p.w1.rows(), p.w1.cols()), rng);
  fill_uniform(p.w2, bound(p.w2.rows(), p.w2.cols()), rng);
  fill_uniform(p.w3, bound(p.w3.rows(), p.w3.cols()), rng);
  return p;
}

std::size_t GcnnParams::parameter_count() const noexcept {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
                                  b3.size());
}

void GcnnParams::for_each(
    const std::function<void(const char*, double*, Eigen::Index, Eigen::Index)>& fn) {
  fn("w1", w1.data(), w1.rows(), w1.cols());
  fn("b1", b1.data(), 1, b1.size());
  fn("w2", w2.data(), w2.rows(), w2.cols());
  fn("b2", b2.data(), 1, b2.size());
  fn("w3", w3.data(), w3.rows(), w3.cols());
  fn("b3", b3.data(), 1, b3.size());
}

void GcnnParams::for_each(
    const std::function<void(const char*, const double*, Eigen::Index, Eigen::Index)>& fn) const {
  fn("w1", w1.data(), w1.rows(), w1.cols());
  fn("b1", b1.data(), 1, b1.size());
  fn("w2", w2.data(), w2.rows(), w2.cols());
  fn("b2", b2.data(), 1, b2.size());
  fn("w3", w3.data(), w3.rows(), w3.cols());
  fn("b3", b3.data(), 1, b3.size());
}

std::vector<double> GcnnParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each([&](const char*, const double* d, Eigen::Index r, Eigen::Index c) {
    out.insert(out.end(), d, d + r * c);
  });
  return out;
}

void GcnnParams::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ModelError("parameter payload has " + std::to_string(values.size()) +
                     " values, expected " + std::to_string(parameter_count()));
  }
  std::size_t at = 0;
  for_each([&](const char*, double* d, Eigen::Index r, Eigen::Index c) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(at), r * c, d);
    at += static_cast<std::size_t>(r * c);
  });
}

void GcnnParams::set_zero() {
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
  w3.setZero();
  b3.setZero();
}

AdamState AdamState::for_params(const GcnnParams& p) {
  AdamState s;
  s.m = GcnnParams::zeros(p.features(), p.hidden(),
                          p.outputs() == 2 ? Variant::Classification : Variant::Regression);
  s.v = s.m;
  return s;
}

SparseMatrix normalized_adjacency(const LesionGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.n_nodes());
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);
  for (const auto& [a, b] : g.edges) {
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  std::vector<double> inv_sqrt(degree.size());
  for (std::size_t i = 0; i < degree.size(); ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) + 2 * g.edges.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, 1.0 / degree[static_cast<std::size_t>(i)]);
  }
  for (const auto& [a, b] : g.edges) {
    const double w = inv_sqrt[a] * inv_sqrt[b];
    triplets.emplace_back(a, b, w);
    triplets.emplace_back(b, a, w);
  }
  SparseMatrix adj(n, n);
  adj.setFromTriplets(triplets.begin(), triplets.end());
  return adj;
}

PreparedGraph prepare_graph(const LesionGraph& g, const FeatureScaler* scaler) {
  if (scaler && scaler->width() != g.n_features) {
    throw ModelError("graph has " + std::to_string(g.n_features) +
                     " features, model expects " + std::to_string(scaler->width()));
  }
  PreparedGraph p;
  p.adjacency = normalized_adjacency(g);
  const auto n = static_cast<Eigen::Index>(g.n_nodes());
  const auto f = static_cast<Eigen::Index>(g.n_features);
  p.x = Eigen::Map<const Matrix>(g.features.data(), n, f);
  if (scaler) {
    for (Eigen::Index c = 0; c < f; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      p.x.col(c) = (p.x.col(c).array() - scaler->mean[cc]) / scaler->stddev[cc];
    }
  }
  p.ax = p.adjacency * p.x;
  p.iou_adj = g.iou_adj;
  p.tp = g.tp;
  return p;
}

RowVector forward(const PreparedGraph& g, const GcnnParams& params, Variant variant,
                  ForwardCache* cache) {
  if (g.x.cols() != params.features()) {
    throw ModelError("graph has " + std::to_string(g.x.cols()) + " features, model expects " +
                     std::to_string(params.features()));
  }
  if (params.outputs() != output_width(variant)) {
    throw ModelError("parameter head width does not match the model variant");
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  c.z1.noalias() = g.ax * params.w1;
  c.z1.rowwise() += params.b1;
  c.h1 = c.z1.cwiseMax(0.0);
  c.ah1 = g.adjacency * c.h1;
  c.z2.noalias() = c.ah1 * params.w2;
  c.z2.rowwise() += params.b2;
  c.h2 = c.z2.cwiseMax(0.0);
  c.readout = c.h2.colwise().mean();
  c.head = c.readout * params.w3 + params.b3;

  RowVector out(c.head.size());
  if (variant == Variant::Classification) {
    const double m = c.head.maxCoeff();
    const RowVector e = (c.head.array() - m).exp().matrix();
    out = e / e.sum();
  } else {
    out(0) = sigmoid(c.head(0));
  }
  return out;
}

double loss_and_gradients(std::span<const PreparedGraph* const> batch, const GcnnParams& params,
                          Variant variant, GcnnParams* grads) {
  if (batch.empty()) throw InputError("loss over an empty batch");
  if (grads) {
    if (grads->w1.rows() != params.w1.rows() || grads->w1.cols() != params.w1.cols() ||
        grads->outputs() != params.outputs()) {
      *grads = GcnnParams::zeros(params.features(), params.hidden(), variant);
    } else {
      grads->set_zero();
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  ForwardCache c;
  RowVector d_head;
  Matrix d_z2, d_ah1, d_z1;

  for (const PreparedGraph* g : batch) {
    const RowVector out = forward(*g, params, variant, &c);
    if (variant == Variant::Classification) {
      const int label = g->tp ? 1 - kFpClass : kFpClass;
      // log-softmax computed from the logits for stability.
      const double m = c.head.maxCoeff();
      const double lse = m + std::log((c.head.array() - m).exp().sum());
      total += lse - c.head(label);
      d_head = out;
      d_head(label) -= 1.0;
    } else {
      const double err = out(0) - g->iou_adj;
      total += err * err;
      d_head.resize(1);
      d_head(0) = 2.0 * err * out(0) * (1.0 - out(0));
    }
    if (!grads) continue;
    d_head *= scale;

    grads->w3.noalias() += c.readout.transpose() * d_head;
    grads->b3 += d_head;
    const RowVector d_readout = d_head * params.w3.transpose();

    const double inv_n = 1.0 / static_cast<double>(g->nodes());
    d_z2 = (c.z2.array() > 0.0).cast<double>();
    d_z2.array().rowwise() *= (d_readout * inv_n).array();
    grads->b2 += d_z2.colwise().sum();
    grads->w2.noalias() += c.ah1.transpose() * d_z2;

    d_ah1.noalias() = d_z2 * params.w2.transpose();
    // The normalised adjacency is symmetric, so A^T = A.
    d_z1 = g->adjacency * d_ah1;
    d_z1.array() *= (c.z1.array() > 0.0).cast<double>();
    grads->b1 += d_z1.colwise().sum();
    grads->w1.noalias() += g->ax.transpose() * d_z1;
  }
  return total * scale;
}

void adam_step(GcnnParams& params, const GcnnParams& grads, AdamState& state, double lr) {
  if (state.m.parameter_count() != params.parameter_count()) {
    state = AdamState::for_params(params);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  std::vector<double*> p_ptr, m_ptr, v_ptr;
  std::vector<const double*> g_ptr;
  std::vector<Eigen::Index> sizes;
  params.for_each([&](const char*, double* d, Eigen::Index r, Eigen::Index c) {
    p_ptr.push_back(d);
    sizes.push_back(r * c);
  });
  grads.for_each([&](const char*, const double* d, Eigen::Index, Eigen::Index) { g_ptr.push_back(d); });
  state.m.for_each([&](const char*, double* d, Eigen::Index, Eigen::Index) { m_ptr.push_back(d); });
  state.v.for_each([&](const char*, double* d, Eigen::Index, Eigen::Index) { v_ptr.push_back(d); });

  for (std::size_t t = 0; t < p_ptr.size(); ++t) {
    for (Eigen::Index i = 0; i < sizes[t]; ++i) {
      const double g = g_ptr[t][i];
      double& m = m_ptr[t][i];
      double& v = v_ptr[t][i];
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      p_ptr[t][i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

RowVector predict(const LesionGraph& g, const GcnnModel& model) {
  if (g.n_features != static_cast<std::size_t>(model.params.features())) {
    throw ModelError("graph has " + std::to_string(g.n_features) + " features, model expects " +
                     std::to_string(model.params.features()));
  }
  const PreparedGraph p = prepare_graph(g, &model.scaler);
  return forward(p, model.params, model.variant);
}

double predict_uncertainty(const LesionGraph& g, const GcnnModel& model) {
  const RowVector out = predict(g, model);
  if (model.variant == Variant::Classification) return out(kFpClass);
  return std::clamp(1.0 - out(0), 0.0, 1.0);
}

}  // namespace lesionuq
