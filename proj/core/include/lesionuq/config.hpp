#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "lesionuq/gcnn.hpp"
#include "lesionuq/synth.hpp"

namespace lesionuq {

inline constexpr int kConfigSchemaVersion = 1;

/// Everything one experiment needs. The global seed drives the synthetic
/// scenes, the fold split and every training run.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "lesionuq-out";
  int jobs = 1;
  SynthConfig synth;
  TrainConfig train;
  int dilation_iters = 1;
  double threshold = 0.5;
  double epsilon = 0.1;
  int folds = 4;
  bool keep_volumes = false;

  /// Pushes the global seed and epsilon into the nested configs.
  void sync();
  /// Throws ConfigError.
  void validate() const;
};

/// Parses a TOML document. Unknown keys and a schema_version other than
/// kConfigSchemaVersion are ConfigErrors; missing keys keep their defaults.
PipelineConfig parse_config(std::string_view toml_text, std::string_view source = "<string>");
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical TOML of the effective configuration. Round-trips through
/// parse_config.
std::string to_toml(const PipelineConfig& cfg);

}  // namespace lesionuq
