#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lesionuq/volume.hpp"

namespace lesionuq {

/// One 26-connected predicted component.
struct Lesion {
  std::uint32_t id = 0;       ///< label in the predicted ComponentLabeling
  std::vector<Voxel> voxels;  ///< ascending linear-index order
  double iou_adj = 0.0;
  bool tp = false;

  std::size_t size() const noexcept { return voxels.size(); }
};

struct ComponentLabeling {
  LabelVolume labels;       ///< 0 background, components 1..count
  std::uint32_t count = 0;
};

/// Two-pass union-find labeling with the full 3x3x3 neighbourhood. Labels are
/// dense and ordered by the linear index of each component's first voxel.
/// Throws InputError if the mask holds values other than 0 and 1.
ComponentLabeling connected_components_26(const LabelVolume& mask);

/// Voxel lists for components 1..count, in label order.
std::vector<Lesion> extract_lesions(const ComponentLabeling& labeling);

/// Adjusted IoU of predicted component k. G is the union of ground-truth
/// components touching k and A the union of the other predicted components:
/// |k ∩ G| / |k ∪ (G \ A)|, or 0 when k touches no ground truth.
double adjusted_iou(const Lesion& k, const ComponentLabeling& pred,
                    const ComponentLabeling& gt);

/// Adjusted IoU for every predicted component in one sweep; entry i belongs
/// to label i + 1.
std::vector<double> adjusted_ious(const ComponentLabeling& pred, const ComponentLabeling& gt);

/// Plain IoU between k and G (the ground-truth components it touches).
double plain_iou(const Lesion& k, const ComponentLabeling& gt);

/// tp = iou_adj >= epsilon.
std::vector<Lesion> label_tp_fp(std::vector<Lesion> lesions, double epsilon);

/// Extracts, matches and labels all predicted lesions of one scan.
std::vector<Lesion> match_lesions(const LabelVolume& pred_mask, const LabelVolume& gt_mask,
                                  double epsilon);

/// 2|P ∩ G| / (|P| + |G|); 1 when both masks are empty.
double dice(const LabelVolume& pred, const LabelVolume& gt);

/// Dilation by the 3x3x3 cube, repeated `iterations` times, clipped to dims.
/// Output is sorted by linear index.
std::vector<Voxel> dilate_26(std::span<const Voxel> voxels, const Dims& dims, int iterations = 1);

}  // namespace lesionuq
