#include "lesionuq/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "lesionuq/error.hpp"
#include "toml.hpp"

namespace lesionuq {
namespace {

// Reads keys from one TOML table and rejects the ones nobody asked for.
class TableReader {
 public:
  TableReader(const toml::table* table, std::string prefix)
      : table_(table), prefix_(std::move(prefix)) {}

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      const auto v = node->value_exact<bool>();
      if (!v) fail(key, "expected a boolean");
      out = *v;
    } else if constexpr (std::is_integral_v<T>) {
      const auto v = node->value_exact<std::int64_t>();
      if (!v) fail(key, "expected an integer");
      if (!std::in_range<T>(*v)) fail(key, "out of range");
      out = static_cast<T>(*v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (const auto d = node->value_exact<double>()) {
        out = *d;
      } else if (const auto i = node->value_exact<std::int64_t>()) {
        out = static_cast<double>(*i);
      } else {
        fail(key, "expected a number");
      }
    } else {
      const auto v = node->value_exact<std::string>();
      if (!v) fail(key, "expected a string");
      out = T(*v);
    }
  }

  void get_dims(const char* key, Dims& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    const toml::array* arr = node->as_array();
    if (!arr || arr->size() != 3) fail(key, "expected [nx, ny, nz]");
    std::size_t v[3];
    for (std::size_t i = 0; i < 3; ++i) {
      const auto e = (*arr)[i].value_exact<std::int64_t>();
      if (!e || *e < 1) fail(key, "entries must be positive integers");
      v[i] = static_cast<std::size_t>(*e);
    }
    out = Dims{v[0], v[1], v[2]};
  }

  void finish(const std::set<std::string>& sub_tables = {}) const {
    if (!table_) return;
    for (const auto& [k, node] : *table_) {
      const std::string key(k.str());
      if (!seen_.count(key) && !sub_tables.count(key)) {
        throw ConfigError("unknown config key '" + prefix_ + key + "'");
      }
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("config key '" + prefix_ + key + "': " + what);
  }

  const toml::table* table_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::string toml_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void PipelineConfig::sync() {
  synth.seed = seed;
  train.seed = seed;
  train.epsilon = epsilon;
}

void PipelineConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (dilation_iters < 0) throw ConfigError("dilation_iters must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (out_dir.empty()) throw ConfigError("out must not be empty");
  synth.validate();
  train.validate();
  if (synth.n_scenes < 2 * folds) {
    throw ConfigError("synth.n_scenes must be at least twice the fold count");
  }
}

PipelineConfig parse_config(std::string_view toml_text, std::string_view source) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "cannot parse " << source << ": " << e.description() << " (line "
        << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }

  PipelineConfig cfg;
  TableReader top(&doc, "");
  std::int64_t version = kConfigSchemaVersion;
  top.get("schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
  top.get("seed", cfg.seed);
  std::string out = cfg.out_dir.string();
  top.get("out", out);
  cfg.out_dir = out;
  top.get("jobs", cfg.jobs);
  top.get("dilation_iters", cfg.dilation_iters);
  top.get("threshold", cfg.threshold);
  top.get("epsilon", cfg.epsilon);
  top.get("folds", cfg.folds);
  top.get("keep_volumes", cfg.keep_volumes);
  for (const char* section : {"synth", "train"}) {
    const toml::node* n = doc.get(section);
    if (n && !n->is_table()) throw ConfigError(std::string("config key '") + section + "' must be a table");
  }
  top.finish({"synth", "train"});

  auto& s = cfg.synth;
  TableReader synth(doc["synth"].as_table(), "synth.");
  synth.get_dims("dims", s.dims);
  synth.get("n_scenes", s.n_scenes);
  synth.get("n_true_lesions", s.n_true_lesions);
  synth.get("n_false_lesions", s.n_false_lesions);
  synth.get("radius_min", s.radius_min);
  synth.get("radius_max", s.radius_max);
  synth.get("samples", s.samples);
  synth.get("detect_sharpness", s.detect_sharpness);
  synth.get("confidence_min", s.confidence_min);
  synth.get("boundary_logit", s.boundary_logit);
  synth.get("tp_noise", s.tp_noise);
  synth.get("fp_noise", s.fp_noise);
  synth.get("noise_spread", s.noise_spread);
  synth.get("fp_level_min", s.fp_level_min);
  synth.get("fp_level_max", s.fp_level_max);
  synth.get("voxel_noise", s.voxel_noise);
  synth.get("background_logit", s.background_logit);
  synth.get("intensity_noise", s.intensity_noise);
  synth.get("lesion_contrast_min", s.lesion_contrast_min);
  synth.get("lesion_contrast_max", s.lesion_contrast_max);
  synth.get("fp_contrast_min", s.fp_contrast_min);
  synth.get("fp_contrast_max", s.fp_contrast_max);
  synth.get("gap", s.gap);
  synth.get("max_placement_attempts", s.max_placement_attempts);
  synth.finish();

  auto& t = cfg.train;
  TableReader train(doc["train"].as_table(), "train.");
  train.get("lr_start", t.lr_start);
  train.get("lr_end", t.lr_end);
  train.get("epochs", t.epochs);
  train.get("batch_size", t.batch_size);
  train.get("hidden", t.hidden);
  train.get("validation_fraction", t.validation_fraction);
  train.finish();

  cfg.sync();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string to_toml(const PipelineConfig& cfg) {
  std::ostringstream o;
  o << "schema_version = " << kConfigSchemaVersion << '\n'
    << "seed = " << cfg.seed << '\n'
    << "out = " << toml_string(cfg.out_dir.generic_string()) << '\n'
    << "jobs = " << cfg.jobs << '\n'
    << "dilation_iters = " << cfg.dilation_iters << '\n'
    << "threshold = " << toml_real(cfg.threshold) << '\n'
    << "epsilon = " << toml_real(cfg.epsilon) << '\n'
    << "folds = " << cfg.folds << '\n'
    << "keep_volumes = " << (cfg.keep_volumes ? "true" : "false") << '\n';
  const auto& s = cfg.synth;
  o << "\n[synth]\n"
    << "dims = [" << s.dims.nx << ", " << s.dims.ny << ", " << s.dims.nz << "]\n"
    << "n_scenes = " << s.n_scenes << '\n'
    << "n_true_lesions = " << s.n_true_lesions << '\n'
    << "n_false_lesions = " << s.n_false_lesions << '\n'
    << "radius_min = " << toml_real(s.radius_min) << '\n'
    << "radius_max = " << toml_real(s.radius_max) << '\n'
    << "samples = " << s.samples << '\n'
    << "detect_sharpness = " << toml_real(s.detect_sharpness) << '\n'
    << "confidence_min = " << toml_real(s.confidence_min) << '\n'
    << "boundary_logit = " << toml_real(s.boundary_logit) << '\n'
    << "tp_noise = " << toml_real(s.tp_noise) << '\n'
    << "fp_noise = " << toml_real(s.fp_noise) << '\n'
    << "noise_spread = " << toml_real(s.noise_spread) << '\n'
    << "fp_level_min = " << toml_real(s.fp_level_min) << '\n'
    << "fp_level_max = " << toml_real(s.fp_level_max) << '\n'
    << "voxel_noise = " << toml_real(s.voxel_noise) << '\n'
    << "background_logit = " << toml_real(s.background_logit) << '\n'
    << "intensity_noise = " << toml_real(s.intensity_noise) << '\n'
    << "lesion_contrast_min = " << toml_real(s.lesion_contrast_min) << '\n'
    << "lesion_contrast_max = " << toml_real(s.lesion_contrast_max) << '\n'
    << "fp_contrast_min = " << toml_real(s.fp_contrast_min) << '\n'
    << "fp_contrast_max = " << toml_real(s.fp_contrast_max) << '\n'
    << "gap = " << s.gap << '\n'
    << "max_placement_attempts = " << s.max_placement_attempts << '\n';
  const auto& t = cfg.train;
  o << "\n[train]\n"
    << "lr_start = " << toml_real(t.lr_start) << '\n'
    << "lr_end = " << toml_real(t.lr_end) << '\n'
    << "epochs = " << t.epochs << '\n'
    << "batch_size = " << t.batch_size << '\n'
    << "hidden = " << t.hidden << '\n'
    << "validation_fraction = " << toml_real(t.validation_fraction) << '\n';
  return o.str();
}

}  // namespace lesionuq
