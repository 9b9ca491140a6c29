#include "lesionuq/uncertainty_maps.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lesionuq {

double binary_entropy_bits(double p) noexcept {
  p = std::clamp(p, 0.0, 1.0);
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return std::clamp(h, 0.0, 1.0);
}

double pcs_uncertainty(double p) noexcept {
  return std::clamp(1.0 - std::abs(2.0 * p - 1.0), 0.0, 1.0);
}

UncertaintyMaps compute_maps(const McEnsemble& ensemble) {
  if (ensemble.samples.empty()) throw InputError("empty ensemble");
  if (ensemble.samples.size() < 2) throw InputError("ensemble needs at least 2 samples");
  const Dims dims = ensemble.samples.front().dims();
  for (const auto& s : ensemble.samples) {
    if (s.dims() != dims) throw InputError("ensemble samples have mismatched dims");
  }

  UncertaintyMaps maps{Volume(dims), Volume(dims), Volume(dims), Volume(dims)};
  const auto t_count = static_cast<double>(ensemble.samples.size());
  const std::size_t n = dims.voxel_count();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& s : ensemble.samples) sum += s[i];
    const double mean = std::clamp(sum / t_count, 0.0, 1.0);
    double sq = 0.0;
    for (const auto& s : ensemble.samples) {
      const double d = s[i] - mean;
      sq += d * d;
    }
    maps.mean_prob[i] = mean;
    maps.entropy[i] = binary_entropy_bits(mean);
    maps.variance[i] = std::clamp(sq / t_count, 0.0, 0.25);
    maps.pcs_uncertainty[i] = pcs_uncertainty(mean);
  }
  return maps;
}

LabelVolume binarize(const Volume& mean_prob, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InputError("binarization threshold must lie in (0, 1), got " +
                     std::to_string(threshold));
  }
  LabelVolume mask(mean_prob.dims());
  for (std::size_t i = 0; i < mean_prob.size(); ++i) {
    mask[i] = mean_prob[i] > threshold ? 1u : 0u;
  }
  return mask;
}

}  // namespace lesionuq
