#include "lesionuq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "lesionuq/npy.hpp"
#include "lesionuq/rng.hpp"
#include "parallel.hpp"

namespace lesionuq {
namespace {

constexpr double kExtent = 2.5;        // blob influence, in normalised radii
constexpr double kOutsideSlope = 6.0;  // logit fall-off outside false blobs

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Box {
  int x0, x1, y0, y1, z0, z1;
};

Box influence_box(const BlobInfo& b, const Dims& dims) {
  auto lo = [](double c, double r) { return std::max(0, static_cast<int>(std::floor(c - kExtent * r))); };
  auto hi = [](double c, double r, std::size_t n) {
    return std::min(static_cast<int>(n) - 1, static_cast<int>(std::ceil(c + kExtent * r)));
  };
  return {lo(b.center[0], b.radii[0]), hi(b.center[0], b.radii[0], dims.nx),
          lo(b.center[1], b.radii[1]), hi(b.center[1], b.radii[1], dims.ny),
          lo(b.center[2], b.radii[2]), hi(b.center[2], b.radii[2], dims.nz)};
}

double normalised_distance(const BlobInfo& b, int x, int y, int z) {
  const double dx = (x - b.center[0]) / b.radii[0];
  const double dy = (y - b.center[1]) / b.radii[1];
  const double dz = (z - b.center[2]) / b.radii[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double base_logit(const BlobInfo& b, double d, const SynthConfig& cfg) {
  if (b.is_lesion) {
    return cfg.boundary_logit + b.level * (1.0 - d);
  }
  return d <= 1.0 ? b.level * (1.0 - d) : -kOutsideSlope * (d - 1.0);
}

std::vector<BlobInfo> place_blobs(const SynthConfig& cfg, Rng& rng) {
  std::vector<BlobInfo> blobs;
  const int total = cfg.n_true_lesions + cfg.n_false_lesions;
  const std::size_t extents[3] = {cfg.dims.nx, cfg.dims.ny, cfg.dims.nz};
  for (int i = 0; i < total; ++i) {
    BlobInfo b;
    b.is_lesion = i < cfg.n_true_lesions;
    for (auto& r : b.radii) r = rng.uniform(cfg.radius_min, cfg.radius_max);
    const double rmax = *std::max_element(b.radii.begin(), b.radii.end());
    const double margin = std::ceil(rmax) + 2.0;
    for (std::size_t a = 0; a < 3; ++a) {
      if (2.0 * margin >= static_cast<double>(extents[a]) - 1.0) {
        throw GenerationError("volume too small for the configured lesion radii");
      }
    }
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_placement_attempts && !placed; ++attempt) {
      for (std::size_t a = 0; a < 3; ++a) {
        b.center[a] = rng.uniform(margin, static_cast<double>(extents[a]) - 1.0 - margin);
      }
      placed = std::all_of(blobs.begin(), blobs.end(), [&](const BlobInfo& o) {
        const double omax = *std::max_element(o.radii.begin(), o.radii.end());
        const double dx = b.center[0] - o.center[0], dy = b.center[1] - o.center[1],
                     dz = b.center[2] - o.center[2];
        return std::sqrt(dx * dx + dy * dy + dz * dz) > rmax + omax + cfg.gap;
      });
    }
    if (!placed) {
      throw GenerationError("could not place blob " + std::to_string(i) + " within " +
                            std::to_string(cfg.max_placement_attempts) + " attempts");
    }
    if (b.is_lesion) {
      b.level = cfg.detect_sharpness * rng.uniform(cfg.confidence_min, 1.0);
      b.contrast = rng.uniform(cfg.lesion_contrast_min, cfg.lesion_contrast_max);
      b.noise = cfg.tp_noise * rng.uniform(1.0 - cfg.noise_spread, 1.0 + cfg.noise_spread);
    } else {
      b.level = rng.uniform(cfg.fp_level_min, cfg.fp_level_max);
      b.contrast = rng.uniform(cfg.fp_contrast_min, cfg.fp_contrast_max);
      b.noise = cfg.fp_noise * rng.uniform(1.0 - cfg.noise_spread, 1.0 + cfg.noise_spread);
    }
    blobs.push_back(b);
  }
  return blobs;
}

nlohmann::json blob_json(const BlobInfo& b) {
  return {{"kind", b.is_lesion ? "lesion" : "false_positive"},
          {"center", b.center},
          {"radii", b.radii},
          {"level", b.level},
          {"noise", b.noise},
          {"contrast", b.contrast}};
}

nlohmann::json scene_json(const Scene& scene) {
  nlohmann::json j;
  j["scan_id"] = scene.scan_id;
  j["index"] = scene.index;
  j["files"]["gt"] = scene.scan_id + "/gt.npy";
  j["files"]["intensity"] = scene.scan_id + "/intensity.npy";
  auto samples = nlohmann::json::array();
  for (std::size_t t = 0; t < scene.ensemble.samples.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "/sample_%02zu.npy", t);
    samples.push_back(scene.scan_id + name);
  }
  j["files"]["samples"] = samples;
  auto blobs = nlohmann::json::array();
  for (const auto& b : scene.blobs) blobs.push_back(blob_json(b));
  j["blobs"] = blobs;
  return j;
}

}  // namespace

void SynthConfig::validate() const {
  dims.validate();
  if (n_scenes < 0 || n_true_lesions < 0 || n_false_lesions < 0) {
    throw ConfigError("synth counts must be >= 0");
  }
  if (!(radius_min >= 1.0) || !(radius_max >= radius_min)) {
    throw ConfigError("synth radii must satisfy 1 <= radius_min <= radius_max");
  }
  if (samples < 2) throw ConfigError("synth samples (T) must be >= 2");
  if (!(detect_sharpness > 0.0) || !(confidence_min > 0.0 && confidence_min <= 1.0)) {
    throw ConfigError("synth detect_sharpness must be > 0 and confidence_min in (0, 1]");
  }
  if (!(tp_noise >= 0.0) || !(fp_noise >= 0.0) || !(voxel_noise >= 0.0) ||
      !(intensity_noise >= 0.0)) {
    throw ConfigError("synth noise scales must be >= 0");
  }
  if (!(noise_spread >= 0.0 && noise_spread <= 1.0)) {
    throw ConfigError("synth noise_spread must lie in [0, 1]");
  }
  if (!(fp_level_max >= fp_level_min) || !(lesion_contrast_max >= lesion_contrast_min) ||
      !(fp_contrast_max >= fp_contrast_min)) {
    throw ConfigError("synth ranges must satisfy min <= max");
  }
  if (gap < 0 || max_placement_attempts < 1) throw ConfigError("synth gap/attempts out of range");
}

std::string scene_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", index);
  return buf;
}

Scene generate_scene(const SynthConfig& cfg, int index) {
  cfg.validate();
  const Dims dims = cfg.dims;
  Scene scene;
  scene.scan_id = scene_id(index);
  scene.index = index;
  const auto scene_seed = static_cast<std::uint64_t>(index);

  Rng layout(derive_seed(cfg.seed, scene_seed, "layout"));
  scene.blobs = place_blobs(cfg, layout);

  // Ground truth, base logits and the owning blob of every voxel.
  scene.gt = LabelVolume(dims);
  Volume base(dims, cfg.background_logit);
  std::vector<std::int32_t> owner(dims.voxel_count(), -1);
  for (std::size_t bi = 0; bi < scene.blobs.size(); ++bi) {
    const auto& b = scene.blobs[bi];
    const Box box = influence_box(b, dims);
    for (int z = box.z0; z <= box.z1; ++z) {
      for (int y = box.y0; y <= box.y1; ++y) {
        for (int x = box.x0; x <= box.x1; ++x) {
          const double d = normalised_distance(b, x, y, z);
          if (d > kExtent) continue;
          const std::size_t i = dims.linear(x, y, z);
          if (b.is_lesion && d <= 1.0) scene.gt[i] = 1;
          const double logit = base_logit(b, d, cfg);
          if (logit > base[i]) {
            base[i] = logit;
            owner[i] = static_cast<std::int32_t>(bi);
          }
        }
      }
    }
  }

  // Monte-Carlo passes.
  Rng noise(derive_seed(cfg.seed, scene_seed, "ensemble"));
  const std::size_t n_blobs = scene.blobs.size();
  std::vector<double> offset(n_blobs);
  std::vector<std::array<double, 3>> gradient(n_blobs);
  scene.ensemble.samples.reserve(static_cast<std::size_t>(cfg.samples));
  for (int t = 0; t < cfg.samples; ++t) {
    for (std::size_t bi = 0; bi < n_blobs; ++bi) {
      const auto& b = scene.blobs[bi];
      if (b.is_lesion) {
        offset[bi] = noise.normal(0.0, b.noise);
        gradient[bi] = {0.0, 0.0, 0.0};
      } else {
        offset[bi] = noise.normal(0.0, b.noise);
        for (auto& g : gradient[bi]) g = noise.normal(0.0, 0.5 * b.noise);
      }
    }
    Volume sample(dims);
    for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
      double logit = base[i] + noise.normal(0.0, cfg.voxel_noise);
      if (owner[i] >= 0) {
        const auto bi = static_cast<std::size_t>(owner[i]);
        const auto& b = scene.blobs[bi];
        const Voxel v = dims.to_xyz(i);
        logit += offset[bi] + gradient[bi][0] * (v.x - b.center[0]) / b.radii[0] +
                 gradient[bi][1] * (v.y - b.center[1]) / b.radii[1] +
                 gradient[bi][2] * (v.z - b.center[2]) / b.radii[2];
      }
      sample[i] = sigmoid(logit);
    }
    scene.ensemble.samples.push_back(std::move(sample));
  }

  // Intensity: smooth blob bumps over white background noise.
  Rng image(derive_seed(cfg.seed, scene_seed, "intensity"));
  scene.intensity = Volume(dims);
  for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
    scene.intensity[i] = image.normal(0.0, cfg.intensity_noise);
  }
  for (const auto& b : scene.blobs) {
    const Box box = influence_box(b, dims);
    for (int z = box.z0; z <= box.z1; ++z) {
      for (int y = box.y0; y <= box.y1; ++y) {
        for (int x = box.x0; x <= box.x1; ++x) {
          const double d = normalised_distance(b, x, y, z);
          if (d > kExtent) continue;
          scene.intensity.at(x, y, z) += b.contrast * std::exp(-d * d);
        }
      }
    }
  }
  return scene;
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  const auto scene_dir = dir / scene.scan_id;
  std::error_code ec;
  std::filesystem::create_directories(scene_dir, ec);
  if (ec) throw IoError("cannot create " + scene_dir.string() + ": " + ec.message());
  save_labels(scene.gt, scene_dir / "gt.npy");
  save_volume(scene.intensity, scene_dir / "intensity.npy");
  for (std::size_t t = 0; t < scene.ensemble.samples.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%02zu.npy", t);
    save_volume(scene.ensemble.samples[t], scene_dir / name);
  }
}

void write_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& dir, int jobs) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<nlohmann::json> entries(static_cast<std::size_t>(cfg.n_scenes));
  detail::parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const Scene scene = generate_scene(cfg, static_cast<int>(i));
    write_scene(scene, dir);
    entries[i] = scene_json(scene);
  });

  nlohmann::json manifest;
  manifest["format"] = "lesionuq-synth";
  manifest["format_version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["dims"] = {cfg.dims.nx, cfg.dims.ny, cfg.dims.nz};
  manifest["samples"] = cfg.samples;
  manifest["rng"] = "mt19937_64 seeded by splitmix64(seed, scene_index, tag)";
  manifest["scenes"] = entries;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failure on manifest in " + dir.string());
}

}  // namespace lesionuq
