#pragma once

#include "lesionuq/volume.hpp"

namespace lesionuq {

/// Voxel-wise summaries of a binary Monte-Carlo ensemble.
struct UncertaintyMaps {
  Volume mean_prob;        ///< mean foreground probability, in [0, 1]
  Volume entropy;          ///< binary entropy of mean_prob in bits, in [0, 1]
  Volume variance;         ///< population variance of the T samples, in [0, 0.25]
  Volume pcs_uncertainty;  ///< 1 - |2 p - 1|, in [0, 1]

  const Dims& dims() const noexcept { return mean_prob.dims(); }
};

/// Binary entropy in bits with 0 log 0 = 0.
double binary_entropy_bits(double p) noexcept;

/// 1 minus the gap between the two class probabilities.
double pcs_uncertainty(double p) noexcept;

/// Throws InputError for fewer than two samples or mismatched dims.
UncertaintyMaps compute_maps(const McEnsemble& ensemble);

/// 1 where mean_prob > threshold (strict), else 0. threshold must lie in (0, 1).
LabelVolume binarize(const Volume& mean_prob, double threshold = 0.5);

}  // namespace lesionuq
