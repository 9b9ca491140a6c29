#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lesionuq/gcnn.hpp"
#include "lesionuq/graph.hpp"

namespace lesionuq::oracle {

// Denominator floor for gradient components that are zero up to roundoff.
inline constexpr double kFdFloor = 1e-8;

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

namespace detail {

using Real = long double;

// Dense extended-precision copy of one prepared graph and its forward state.
struct RefGraph {
  Eigen::Index n = 0, f = 0, h = 0, o = 0;
  std::vector<Real> a, ax;        // n x n, n x f
  std::vector<Real> z1, ah1, z2;  // n x h
  std::vector<Real> readout;      // h
  int label = 0;
  Real target = 0;

  Real& at(std::vector<Real>& m, Eigen::Index r, Eigen::Index c, Eigen::Index cols) const {
    return m[static_cast<std::size_t>(r * cols + c)];
  }
};

inline Real relu(Real v) { return v > 0 ? v : Real(0); }

inline RefGraph make_ref(const PreparedGraph& g, const GcnnParams& p, Variant variant) {
  RefGraph r;
  r.n = g.nodes();
  r.f = p.features();
  r.h = p.hidden();
  r.o = p.outputs();
  const Matrix dense = Matrix(g.adjacency);
  r.a.assign(static_cast<std::size_t>(r.n * r.n), 0);
  for (Eigen::Index i = 0; i < r.n; ++i)
    for (Eigen::Index j = 0; j < r.n; ++j) r.at(r.a, i, j, r.n) = dense(i, j);
  r.ax.assign(static_cast<std::size_t>(r.n * r.f), 0);
  for (Eigen::Index i = 0; i < r.n; ++i)
    for (Eigen::Index j = 0; j < r.n; ++j)
      for (Eigen::Index c = 0; c < r.f; ++c) r.at(r.ax, i, c, r.f) += r.at(r.a, i, j, r.n) * Real(g.x(j, c));

  r.z1.assign(static_cast<std::size_t>(r.n * r.h), 0);
  for (Eigen::Index i = 0; i < r.n; ++i)
    for (Eigen::Index k = 0; k < r.h; ++k) {
      Real acc = p.b1(k);
      for (Eigen::Index c = 0; c < r.f; ++c) acc += r.at(r.ax, i, c, r.f) * Real(p.w1(c, k));
      r.at(r.z1, i, k, r.h) = acc;
    }
  r.ah1.assign(static_cast<std::size_t>(r.n * r.h), 0);
  for (Eigen::Index i = 0; i < r.n; ++i)
    for (Eigen::Index j = 0; j < r.n; ++j)
      for (Eigen::Index k = 0; k < r.h; ++k)
        r.at(r.ah1, i, k, r.h) += r.at(r.a, i, j, r.n) * relu(r.at(r.z1, j, k, r.h));
  r.z2.assign(static_cast<std::size_t>(r.n * r.h), 0);
  r.readout.assign(static_cast<std::size_t>(r.h), 0);
  for (Eigen::Index i = 0; i < r.n; ++i)
    for (Eigen::Index k = 0; k < r.h; ++k) {
      Real acc = p.b2(k);
      for (Eigen::Index j = 0; j < r.h; ++j) acc += r.at(r.ah1, i, j, r.h) * Real(p.w2(j, k));
      r.at(r.z2, i, k, r.h) = acc;
      r.readout[static_cast<std::size_t>(k)] += relu(acc) / Real(r.n);
    }
  r.label = variant == Variant::Classification ? (g.tp ? 1 - kFpClass : kFpClass) : 0;
  r.target = g.iou_adj;
  return r;
}

inline std::vector<Real> head_of(const RefGraph& r, const std::vector<Real>& readout, const GcnnParams& p) {
  std::vector<Real> head(static_cast<std::size_t>(r.o));
  for (Eigen::Index o = 0; o < r.o; ++o) {
    Real acc = p.b3(o);
    for (Eigen::Index k = 0; k < r.h; ++k) acc += readout[static_cast<std::size_t>(k)] * Real(p.w3(k, o));
    head[static_cast<std::size_t>(o)] = acc;
  }
  return head;
}

inline Real loss_of(const RefGraph& r, const std::vector<Real>& head, Variant variant) {
  if (variant == Variant::Classification) {
    const Real m = *std::max_element(head.begin(), head.end());
    Real sum = 0;
    for (Real v : head) sum += std::exp(v - m);
    return m + std::log(sum) - head[static_cast<std::size_t>(r.label)];
  }
  const Real s = 1 / (1 + std::exp(-head[0]));
  return (s - r.target) * (s - r.target);
}

// Readout after adding `delta` to column k of z1 (via `dz1`, length n).
inline std::vector<Real> readout_after_layer1(const RefGraph& r, const GcnnParams& p, Eigen::Index k,
                                              const std::vector<Real>& dz1) {
  std::vector<Real> dh(static_cast<std::size_t>(r.n));
  for (Eigen::Index j = 0; j < r.n; ++j) {
    const Real z = r.z1[static_cast<std::size_t>(j * r.h + k)];
    dh[static_cast<std::size_t>(j)] = relu(z + dz1[static_cast<std::size_t>(j)]) - relu(z);
  }
  std::vector<Real> readout(static_cast<std::size_t>(r.h), 0);
  for (Eigen::Index i = 0; i < r.n; ++i) {
    Real dah = 0;
    for (Eigen::Index j = 0; j < r.n; ++j) dah += r.a[static_cast<std::size_t>(i * r.n + j)] * dh[static_cast<std::size_t>(j)];
    for (Eigen::Index c = 0; c < r.h; ++c) {
      const Real z = r.z2[static_cast<std::size_t>(i * r.h + c)] + dah * Real(p.w2(k, c));
      readout[static_cast<std::size_t>(c)] += relu(z) / Real(r.n);
    }
  }
  return readout;
}

// Readout after adding `dz2` to column k of z2.
inline std::vector<Real> readout_after_layer2(const RefGraph& r, Eigen::Index k, const std::vector<Real>& dz2) {
  std::vector<Real> readout = r.readout;
  Real col = 0;
  for (Eigen::Index i = 0; i < r.n; ++i) {
    col += relu(r.z2[static_cast<std::size_t>(i * r.h + k)] + dz2[static_cast<std::size_t>(i)]) / Real(r.n);
  }
  readout[static_cast<std::size_t>(k)] = col;
  return readout;
}

}  // namespace detail

// Batch loss of an independent extended-precision forward pass.
inline long double reference_loss(const std::vector<PreparedGraph>& graphs, const GcnnParams& params,
                                  Variant variant) {
  long double total = 0;
  for (const auto& g : graphs) {
    const auto r = detail::make_ref(g, params, variant);
    total += detail::loss_of(r, detail::head_of(r, r.readout, params), variant);
  }
  return total / static_cast<long double>(graphs.size());
}

// Central differences of an extended-precision reference loss against the analytic
// gradient, for every parameter component. Each probe updates only the forward
// state downstream of the perturbed entry.
inline FdReport finite_difference_check(const std::vector<PreparedGraph>& graphs,
                                        const GcnnParams& params, Variant variant,
                                        double step = 1e-6) {
  using detail::Real;
  std::vector<const PreparedGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  GcnnParams grads;
  loss_and_gradients(batch, params, variant, &grads);

  std::vector<detail::RefGraph> refs;
  for (const auto& g : graphs) refs.push_back(detail::make_ref(g, params, variant));
  const auto n_graphs = static_cast<Real>(graphs.size());

  FdReport report;
  // `loss_at(delta)` is the batch loss with the probed entry moved by delta.
  auto probe = [&](double value, double analytic, const auto& loss_at) {
    const double up = value + step, down = value - step;
    const Real numeric = (loss_at(Real(up) - Real(value)) - loss_at(Real(down) - Real(value))) /
                         (Real(up) - Real(down));
    const double num = static_cast<double>(numeric);
    const double denom = std::max({std::abs(num), std::abs(analytic), kFdFloor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(num - analytic) / denom);
    ++report.checked;
  };

  const Eigen::Index f = params.features(), h = params.hidden(), o = params.outputs();
  for (Eigen::Index c = -1; c < f; ++c) {  // c = -1 probes b1
    for (Eigen::Index k = 0; k < h; ++k) {
      const double value = c < 0 ? params.b1(k) : params.w1(c, k);
      const double analytic = c < 0 ? grads.b1(k) : grads.w1(c, k);
      probe(value, analytic, [&](Real delta) {
        Real total = 0;
        for (const auto& r : refs) {
          std::vector<Real> dz(static_cast<std::size_t>(r.n), delta);
          if (c >= 0)
            for (Eigen::Index i = 0; i < r.n; ++i) dz[static_cast<std::size_t>(i)] *= r.ax[static_cast<std::size_t>(i * r.f + c)];
          total += detail::loss_of(r, detail::head_of(r, detail::readout_after_layer1(r, params, k, dz), params), variant);
        }
        return total / n_graphs;
      });
    }
  }
  for (Eigen::Index j = -1; j < h; ++j) {  // j = -1 probes b2
    for (Eigen::Index k = 0; k < h; ++k) {
      const double value = j < 0 ? params.b2(k) : params.w2(j, k);
      const double analytic = j < 0 ? grads.b2(k) : grads.w2(j, k);
      probe(value, analytic, [&](Real delta) {
        Real total = 0;
        for (const auto& r : refs) {
          std::vector<Real> dz(static_cast<std::size_t>(r.n), delta);
          if (j >= 0)
            for (Eigen::Index i = 0; i < r.n; ++i) dz[static_cast<std::size_t>(i)] *= r.ah1[static_cast<std::size_t>(i * r.h + j)];
          total += detail::loss_of(r, detail::head_of(r, detail::readout_after_layer2(r, k, dz), params), variant);
        }
        return total / n_graphs;
      });
    }
  }
  for (Eigen::Index k = -1; k < h; ++k) {  // k = -1 probes b3
    for (Eigen::Index out = 0; out < o; ++out) {
      const double value = k < 0 ? params.b3(out) : params.w3(k, out);
      const double analytic = k < 0 ? grads.b3(out) : grads.w3(k, out);
      probe(value, analytic, [&](Real delta) {
        Real total = 0;
        for (const auto& r : refs) {
          auto head = detail::head_of(r, r.readout, params);
          head[static_cast<std::size_t>(out)] += k < 0 ? delta : delta * r.readout[static_cast<std::size_t>(k)];
          total += detail::loss_of(r, head, variant);
        }
        return total / n_graphs;
      });
    }
  }
  return report;
}

// Random connected graph with Gaussian features in `width` columns.
inline LesionGraph random_graph(std::size_t nodes, std::size_t width, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  LesionGraph g;
  g.scan_id = "random";
  g.n_features = width;
  g.size = nodes;
  for (std::size_t i = 0; i < nodes * width; ++i) g.features.push_back(normal(gen));
  for (std::uint32_t i = 1; i < nodes; ++i) g.edges.emplace_back(i - 1, i);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(nodes - 1));
  for (std::size_t k = 0; k < nodes; ++k) {
    auto a = pick(gen), b = pick(gen);
    if (a > b) std::swap(a, b);
    if (b > a + 1) g.edges.emplace_back(a, b);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  g.iou_adj = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
  g.tp = g.iou_adj >= 0.1;
  return g;
}

// Two-class toy set: FP graphs carry pcs_uncertainty = 1 on every node, TP graphs 0.
// The other columns are noise, so the classes are linearly separable through one column.
inline GraphDataset separable_toy_dataset(int per_class, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> nodes(3, 25);
  GraphDataset d;
  d.n_channels = 1;
  d.feature_names = feature_names(1);
  for (int i = 0; i < 2 * per_class; ++i) {
    const bool fp = i % 2 == 1;
    LesionGraph g = random_graph(nodes(gen), 5, gen);
    g.scan_id = "toy";
    g.lesion_id = static_cast<std::uint32_t>(i + 1);
    for (std::size_t n = 0; n < g.n_nodes(); ++n) {
      g.features[n * 5 + 1] = n < g.size ? 1.0 : 0.0;
      g.features[n * 5 + 4] = fp ? 1.0 : 0.0;
    }
    g.tp = !fp;
    g.iou_adj = fp ? 0.0 : 0.8;
    d.graphs.push_back(std::move(g));
  }
  return d;
}

inline double training_accuracy(const GraphDataset& d, const GcnnModel& model) {
  std::size_t correct = 0;
  for (const auto& g : d.graphs) {
    const bool predicted_fp = predict_uncertainty(g, model) > 0.5;
    correct += predicted_fp == !g.tp;
  }
  return static_cast<double>(correct) / static_cast<double>(d.graphs.size());
}

}  // namespace lesionuq::oracle
