#include "lesionuq/lesions.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace lesionuq {
namespace {

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": dims mismatch");
}

}  // namespace

ComponentLabeling connected_components_26(const LabelVolume& mask) {
  if (!is_binary(mask)) throw InputError("connected_components_26 needs a binary mask");
  const Dims d = mask.dims();
  const int nx = static_cast<int>(d.nx), ny = static_cast<int>(d.ny), nz = static_cast<int>(d.nz);

  // Provisional labels are 1-based; slot 0 of the disjoint set is unused.
  std::vector<std::uint32_t> provisional(d.voxel_count(), 0);
  DisjointSet sets;
  sets.make();

  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        const std::size_t i = d.linear(x, y, z);
        if (mask[i] == 0) continue;
        std::uint32_t label = 0;
        // The 13 neighbours already visited in raster order.
        for (int dz = -1; dz <= 0; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
              const int xx = x + dx, yy = y + dy, zz = z + dz;
              if (!d.contains(xx, yy, zz)) continue;
              const std::uint32_t n = provisional[d.linear(xx, yy, zz)];
              if (n == 0) continue;
              if (label == 0) {
                label = n;
              } else if (n != label) {
                sets.unite(label, n);
              }
            }
          }
        }
        provisional[i] = label != 0 ? label : sets.make();
      }
    }
  }

  ComponentLabeling out{LabelVolume(d), 0};
  std::vector<std::uint32_t> final_label;
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] == 0) continue;
    const std::uint32_t root = sets.find(provisional[i]);
    if (root >= final_label.size()) final_label.resize(root + 1, 0);
    if (final_label[root] == 0) final_label[root] = ++out.count;
    out.labels[i] = final_label[root];
  }
  return out;
}

std::vector<Lesion> extract_lesions(const ComponentLabeling& labeling) {
  std::vector<Lesion> lesions(labeling.count);
  for (std::uint32_t k = 0; k < labeling.count; ++k) lesions[k].id = k + 1;
  const Dims& d = labeling.labels.dims();
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    const auto l = labeling.labels[i];
    if (l == 0) continue;
    if (l > labeling.count) throw InputError("labeling holds a label above its count");
    lesions[l - 1].voxels.push_back(d.to_xyz(i));
  }
  return lesions;
}

std::vector<double> adjusted_ious(const ComponentLabeling& pred, const ComponentLabeling& gt) {
  require_same_dims(pred.labels.dims(), gt.labels.dims(), "adjusted_iou");
  const std::size_t n = pred.labels.size();

  // Per GT component: voxels not covered by any prediction (G \ A \ k for
  // every k, since k's own voxels are predicted).
  std::vector<std::size_t> gt_uncovered(gt.count + 1, 0);
  // Per predicted component: overlap with GT and the set of GT labels touched.
  std::vector<std::size_t> overlap(pred.count + 1, 0);
  std::vector<std::size_t> size(pred.count + 1, 0);
  std::vector<std::vector<std::uint32_t>> touched(pred.count + 1);

  for (std::size_t i = 0; i < n; ++i) {
    const auto p = pred.labels[i];
    const auto g = gt.labels[i];
    if (p == 0) {
      if (g != 0) ++gt_uncovered[g];
      continue;
    }
    ++size[p];
    if (g != 0) {
      ++overlap[p];
      touched[p].push_back(g);
    }
  }

  std::vector<double> result(pred.count, 0.0);
  for (std::uint32_t k = 1; k <= pred.count; ++k) {
    if (overlap[k] == 0) continue;
    auto& labels = touched[k];
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    std::size_t denom = size[k];
    for (auto g : labels) denom += gt_uncovered[g];
    result[k - 1] = static_cast<double>(overlap[k]) / static_cast<double>(denom);
  }
  return result;
}

double adjusted_iou(const Lesion& k, const ComponentLabeling& pred, const ComponentLabeling& gt) {
  require_same_dims(pred.labels.dims(), gt.labels.dims(), "adjusted_iou");
  if (k.id == 0 || k.id > pred.count) throw InputError("lesion does not belong to the labeling");
  for (const auto& v : k.voxels) {
    if (!pred.labels.dims().contains(v) || pred.labels.at(v) != k.id) {
      throw InputError("lesion voxels disagree with the predicted labeling");
    }
  }
  return adjusted_ious(pred, gt)[k.id - 1];
}

double plain_iou(const Lesion& k, const ComponentLabeling& gt) {
  const Dims& d = gt.labels.dims();
  std::vector<bool> in_g(gt.count + 1, false);
  std::size_t inter = 0;
  for (const auto& v : k.voxels) {
    if (!d.contains(v)) throw InputError("lesion voxel outside the ground-truth grid");
    const auto g = gt.labels.at(v);
    if (g != 0) {
      in_g[g] = true;
      ++inter;
    }
  }
  if (inter == 0) return 0.0;
  std::size_t g_size = 0;
  for (auto g : gt.labels.values()) {
    if (g != 0 && in_g[g]) ++g_size;
  }
  return static_cast<double>(inter) / static_cast<double>(k.size() + g_size - inter);
}

std::vector<Lesion> label_tp_fp(std::vector<Lesion> lesions, double epsilon) {
  for (auto& l : lesions) l.tp = l.iou_adj >= epsilon;
  return lesions;
}

std::vector<Lesion> match_lesions(const LabelVolume& pred_mask, const LabelVolume& gt_mask,
                                  double epsilon) {
  require_same_dims(pred_mask.dims(), gt_mask.dims(), "match_lesions");
  const auto pred = connected_components_26(pred_mask);
  const auto gt = connected_components_26(gt_mask);
  auto lesions = extract_lesions(pred);
  const auto ious = adjusted_ious(pred, gt);
  for (std::size_t i = 0; i < lesions.size(); ++i) lesions[i].iou_adj = ious[i];
  return label_tp_fp(std::move(lesions), epsilon);
}

double dice(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_dims(pred.dims(), gt.dims(), "dice");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] != 0, b = gt[i] != 0;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<Voxel> dilate_26(std::span<const Voxel> voxels, const Dims& dims, int iterations) {
  if (iterations < 0) throw InputError("dilation iterations must be >= 0");
  if (voxels.empty()) return {};

  Voxel lo = voxels.front(), hi = voxels.front();
  for (const auto& v : voxels) {
    if (!dims.contains(v)) throw InputError("voxel outside volume in dilate_26");
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  const int r = iterations;
  lo = {std::max(0, lo.x - r), std::max(0, lo.y - r), std::max(0, lo.z - r)};
  hi = {std::min(static_cast<int>(dims.nx) - 1, hi.x + r),
        std::min(static_cast<int>(dims.ny) - 1, hi.y + r),
        std::min(static_cast<int>(dims.nz) - 1, hi.z + r)};
  const Dims box{static_cast<std::size_t>(hi.x - lo.x + 1),
                 static_cast<std::size_t>(hi.y - lo.y + 1),
                 static_cast<std::size_t>(hi.z - lo.z + 1)};

  std::vector<std::uint8_t> grid(box.voxel_count(), 0);
  for (const auto& v : voxels) grid[box.linear(v.x - lo.x, v.y - lo.y, v.z - lo.z)] = 1;

  // Dilation by an r-cube is separable into three 1D running maxima; the
  // result equals r repeated 3x3x3 dilations with clipping.
  if (r > 0) {
    std::vector<std::uint8_t> tmp(grid.size());
    const int ext[3] = {static_cast<int>(box.nx), static_cast<int>(box.ny),
                        static_cast<int>(box.nz)};
    for (int axis = 0; axis < 3; ++axis) {
      std::fill(tmp.begin(), tmp.end(), 0);
      for (int z = 0; z < ext[2]; ++z) {
        for (int y = 0; y < ext[1]; ++y) {
          for (int x = 0; x < ext[0]; ++x) {
            if (!grid[box.linear(x, y, z)]) continue;
            int c[3] = {x, y, z};
            const int from = std::max(0, c[axis] - r);
            const int to = std::min(ext[axis] - 1, c[axis] + r);
            for (int t = from; t <= to; ++t) {
              c[axis] = t;
              tmp[box.linear(c[0], c[1], c[2])] = 1;
            }
          }
        }
      }
      grid.swap(tmp);
    }
  }

  std::vector<Voxel> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid[i]) continue;
    const Voxel b = box.to_xyz(i);
    out.push_back({b.x + lo.x, b.y + lo.y, b.z + lo.z});
  }
  return out;
}

}  // namespace lesionuq
