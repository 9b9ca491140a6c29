#include "lesionuq/graph.hpp"

#include <algorithm>
#include <cmath>

namespace lesionuq {

std::vector<std::string> feature_names(int n_channels) {
  std::vector<std::string> names;
  for (int c = 0; c < n_channels; ++c) names.push_back("intensity_" + std::to_string(c));
  names.insert(names.end(), {"label", "entropy", "variance", "pcs_uncertainty"});
  return names;
}

LesionGraph build_graph(const Lesion& lesion, std::span<const Volume> intensities,
                        const LabelVolume& seg, const UncertaintyMaps& maps,
                        int dilation_iters, std::string scan_id) {
  if (lesion.voxels.empty()) throw InputError("cannot build a graph from an empty lesion");
  if (intensities.empty()) throw InputError("at least one intensity channel is required");
  const Dims dims = seg.dims();
  if (maps.dims() != dims || maps.entropy.dims() != dims || maps.variance.dims() != dims ||
      maps.pcs_uncertainty.dims() != dims) {
    throw InputError("uncertainty maps and segmentation dims differ");
  }
  for (const auto& v : intensities) {
    if (v.dims() != dims) throw InputError("intensity volume dims differ from segmentation");
  }

  const auto dilated = dilate_26(lesion.voxels, dims, dilation_iters);

  // Lesion voxels first, then the ring; both in ascending linear order.
  std::vector<std::size_t> lesion_idx;
  lesion_idx.reserve(lesion.voxels.size());
  for (const auto& v : lesion.voxels) lesion_idx.push_back(dims.linear(v));
  std::sort(lesion_idx.begin(), lesion_idx.end());
  lesion_idx.erase(std::unique(lesion_idx.begin(), lesion_idx.end()), lesion_idx.end());

  std::vector<Voxel> nodes;
  nodes.reserve(dilated.size());
  for (auto i : lesion_idx) nodes.push_back(dims.to_xyz(i));
  for (const auto& v : dilated) {
    if (!std::binary_search(lesion_idx.begin(), lesion_idx.end(), dims.linear(v))) {
      nodes.push_back(v);
    }
  }

  LesionGraph g;
  g.scan_id = std::move(scan_id);
  g.lesion_id = lesion.id;
  g.size = lesion_idx.size();
  g.iou_adj = lesion.iou_adj;
  g.tp = lesion.tp;
  g.n_features = intensities.size() + 4;
  g.features.reserve(nodes.size() * g.n_features);
  for (const auto& v : nodes) {
    const std::size_t i = dims.linear(v);
    for (const auto& channel : intensities) g.features.push_back(channel[i]);
    g.features.push_back(seg[i] != 0 ? 1.0 : 0.0);
    g.features.push_back(maps.entropy[i]);
    g.features.push_back(maps.variance[i]);
    g.features.push_back(maps.pcs_uncertainty[i]);
  }

  // Node lookup over the bounding box of the dilated set.
  Voxel lo = nodes.front(), hi = nodes.front();
  for (const auto& v : nodes) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  const Dims box{static_cast<std::size_t>(hi.x - lo.x + 1), static_cast<std::size_t>(hi.y - lo.y + 1),
                 static_cast<std::size_t>(hi.z - lo.z + 1)};
  std::vector<std::int32_t> node_at(box.voxel_count(), -1);
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const auto& v = nodes[n];
    node_at[box.linear(v.x - lo.x, v.y - lo.y, v.z - lo.z)] = static_cast<std::int32_t>(n);
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const Voxel b{nodes[n].x - lo.x, nodes[n].y - lo.y, nodes[n].z - lo.z};
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          if (!box.contains(b.x + dx, b.y + dy, b.z + dz)) continue;
          const auto m = node_at[box.linear(b.x + dx, b.y + dy, b.z + dz)];
          if (m > static_cast<std::int32_t>(n)) {
            g.edges.emplace_back(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(m));
          }
        }
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

FeatureScaler fit_scaler(std::span<const LesionGraph> graphs) {
  if (graphs.empty()) throw InputError("cannot fit a scaler on an empty graph set");
  const std::size_t width = graphs.front().n_features;
  std::vector<double> sum(width, 0.0);
  std::size_t count = 0;
  for (const auto& g : graphs) {
    if (g.n_features != width) throw InputError("graphs disagree on feature width");
    for (std::size_t n = 0; n < g.n_nodes(); ++n) {
      for (std::size_t c = 0; c < width; ++c) sum[c] += g.feature(n, c);
    }
    count += g.n_nodes();
  }
  if (count == 0) throw InputError("cannot fit a scaler on graphs without nodes");

  FeatureScaler s;
  s.mean.resize(width);
  s.stddev.resize(width);
  for (std::size_t c = 0; c < width; ++c) s.mean[c] = sum[c] / static_cast<double>(count);
  std::vector<double> sq(width, 0.0);
  for (const auto& g : graphs) {
    for (std::size_t n = 0; n < g.n_nodes(); ++n) {
      for (std::size_t c = 0; c < width; ++c) {
        const double d = g.feature(n, c) - s.mean[c];
        sq[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(count));
    if (sd > 1e-12 * std::max(1.0, std::abs(s.mean[c]))) {
      s.stddev[c] = sd;
    } else {
      s.mean[c] = 0.0;
      s.stddev[c] = 1.0;
    }
  }
  return s;
}

LesionGraph apply_scaler(LesionGraph g, const FeatureScaler& scaler) {
  if (scaler.width() != g.n_features) {
    throw InputError("scaler width " + std::to_string(scaler.width()) +
                     " does not match graph feature width " + std::to_string(g.n_features));
  }
  for (std::size_t n = 0; n < g.n_nodes(); ++n) {
    for (std::size_t c = 0; c < g.n_features; ++c) {
      auto& f = g.features[n * g.n_features + c];
      f = (f - scaler.mean[c]) / scaler.stddev[c];
    }
  }
  return g;
}

GraphDataset merge_datasets(std::span<const GraphDataset> parts) {
  GraphDataset out;
  for (const auto& p : parts) {
    if (p.graphs.empty() && p.feature_names.empty()) continue;
    if (out.feature_names.empty()) {
      out.n_channels = p.n_channels;
      out.feature_names = p.feature_names;
    } else if (p.feature_names != out.feature_names) {
      throw InputError("cannot merge graph datasets with different feature layouts");
    }
    out.graphs.insert(out.graphs.end(), p.graphs.begin(), p.graphs.end());
  }
  return out;
}

}  // namespace lesionuq
