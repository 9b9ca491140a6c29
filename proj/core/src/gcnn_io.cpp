#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"
#include "lesionuq/gcnn.hpp"

namespace lesionuq {

namespace {
using nlohmann::json;
constexpr const char* kModelFormat = "lesionuq-gcnn";
constexpr int kModelVersion = 1;
}  // namespace

void save_model(const GcnnModel& model, const std::filesystem::path& path) {
  json header;
  header["format"] = kModelFormat;
  header["format_version"] = kModelVersion;
  header["variant"] = to_string(model.variant);
  header["n_channels"] = model.n_channels;
  header["n_features"] = model.params.features();
  header["hidden"] = model.params.hidden();
  header["outputs"] = model.params.outputs();
  header["feature_names"] = model.feature_names;
  header["scaler"] = {{"mean", model.scaler.mean}, {"stddev", model.scaler.stddev}};
  header["seed"] = model.seed;
  json tensors = json::array();
  model.params.for_each([&](const char* name, const double*, Eigen::Index r, Eigen::Index c) {
    tensors.push_back({{"name", name}, {"shape", {r, c}}});
  });
  header["tensors"] = tensors;
  header["payload"] = {{"dtype", "<f8"}, {"count", model.params.parameter_count()},
                       {"order", "row-major"}};

  const std::vector<double> payload = model.params.flatten();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

GcnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("model file is empty: " + path.string());

  GcnnModel model;
  std::size_t count = 0;
  try {
    const json header = json::parse(line);
    if (header.at("format").get<std::string>() != kModelFormat ||
        header.at("format_version").get<int>() != kModelVersion) {
      throw FormatError("unsupported model format in " + path.string());
    }
    model.variant = parse_variant(header.at("variant").get<std::string>());
    model.n_channels = header.at("n_channels").get<int>();
    model.feature_names = header.at("feature_names").get<std::vector<std::string>>();
    model.scaler.mean = header.at("scaler").at("mean").get<std::vector<double>>();
    model.scaler.stddev = header.at("scaler").at("stddev").get<std::vector<double>>();
    model.seed = header.at("seed").get<std::uint64_t>();
    const auto features = header.at("n_features").get<Eigen::Index>();
    const auto hidden = header.at("hidden").get<Eigen::Index>();
    model.params = GcnnParams::zeros(features, hidden, model.variant);
    if (header.at("outputs").get<Eigen::Index>() != model.params.outputs()) {
      throw FormatError("model head width disagrees with its variant");
    }
    count = header.at("payload").at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError("bad model header in " + path.string() + ": " + e.what());
  }
  if (model.scaler.width() != static_cast<std::size_t>(model.params.features()) ||
      model.scaler.stddev.size() != model.scaler.width()) {
    throw FormatError("scaler width disagrees with model input width");
  }
  if (count != model.params.parameter_count()) {
    throw FormatError("payload count disagrees with tensor shapes");
  }
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() != count * sizeof(double)) {
    throw FormatError("model payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(count * sizeof(double)));
  }
  std::vector<double> values(count);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("non-finite weight in " + path.string());
  }
  model.params.unflatten(values);
  return model;
}

}  // namespace lesionuq
