#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lesionuq/volume.hpp"

namespace lesionuq {

/// Seeded desk-scale scene generator standing in for MRI + MC-dropout output.
///
/// True lesions get high, sharply falling logits with little per-pass noise
/// and a bright intensity signature. False blobs sit close to the decision
/// threshold, carry large spatially smooth per-pass noise and a weaker
/// intensity signature. Both draw radii from the same range.
struct SynthConfig {
  Dims dims{64, 64, 64};
  int n_scenes = 60;
  int n_true_lesions = 12;
  int n_false_lesions = 8;
  double radius_min = 1.5;
  double radius_max = 4.0;
  int samples = 20;  ///< T, Monte-Carlo passes

  double detect_sharpness = 6.0;    ///< logit slope of true lesions
  double confidence_min = 0.25;     ///< per-lesion slope factor drawn in [confidence_min, 1]
  double boundary_logit = 0.25;     ///< logit added at the true-lesion surface
  double tp_noise = 0.6;            ///< per-pass logit offset sd, true lesions
  double fp_noise = 1.2;            ///< per-pass logit offset sd, false blobs
  double noise_spread = 0.75;       ///< per-blob noise sd factor drawn in 1 +- spread
  double fp_level_min = 0.5;        ///< false-blob centre logit range
  double fp_level_max = 5.0;
  double voxel_noise = 0.3;         ///< white per-pass logit noise
  double background_logit = -7.0;

  double intensity_noise = 0.6;
  double lesion_contrast_min = 0.8;
  double lesion_contrast_max = 2.5;
  double fp_contrast_min = 0.0;
  double fp_contrast_max = 1.5;

  int gap = 3;                      ///< minimum voxel gap between blob bounding spheres
  int max_placement_attempts = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BlobInfo {
  bool is_lesion = true;  ///< false for a planted false-positive blob
  std::array<double, 3> center{};
  std::array<double, 3> radii{};
  double level = 0.0;     ///< slope (true) or centre logit (false)
  double noise = 0.0;     ///< per-pass logit offset sd
  double contrast = 0.0;
};

struct Scene {
  std::string scan_id;
  int index = 0;
  LabelVolume gt;
  Volume intensity;
  McEnsemble ensemble;
  std::vector<BlobInfo> blobs;
};

std::string scene_id(int index);

/// Fully determined by (cfg.seed, index). Throws GenerationError when blobs
/// cannot be placed within the attempt budget.
Scene generate_scene(const SynthConfig& cfg, int index);

/// Writes gt.npy, intensity.npy and sample_XX.npy under dir/<scan_id>/.
void write_scene(const Scene& scene, const std::filesystem::path& dir);

/// Generates cfg.n_scenes scenes into dir plus dir/manifest.json.
void write_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& dir, int jobs = 1);

}  // namespace lesionuq
