#include "lesionuq/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lesionuq {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Input: return "input error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Generation: return "generation error";
    case ErrorKind::Model: return "model error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Fit: return "fit error";
    case ErrorKind::Evaluation: return "evaluation error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::Format: throw FormatError(what);
    case ErrorKind::Shape: throw ShapeError(what);
    case ErrorKind::Data: throw DataError(what);
    case ErrorKind::Input: throw InputError(what);
    case ErrorKind::Io: throw IoError(what);
    case ErrorKind::Generation: throw GenerationError(what);
    case ErrorKind::Model: throw ModelError(what);
    case ErrorKind::Training: throw TrainingError(what);
    case ErrorKind::Fit: throw FitError(what);
    case ErrorKind::Evaluation: throw EvaluationError(what);
    case ErrorKind::Config: throw ConfigError(what);
  }
  throw Error(kind, what);
}

void Dims::validate(std::size_t max_extent) const {
  if (nx == 0 || ny == 0 || nz == 0) {
    throw ShapeError("dims must be positive, got " + std::to_string(nx) + "x" +
                     std::to_string(ny) + "x" + std::to_string(nz));
  }
  if (nx > max_extent || ny > max_extent || nz > max_extent) {
    throw ShapeError("dims exceed the maximum extent of " + std::to_string(max_extent));
  }
}

void require_finite(const Volume& v) {
  const auto values = v.values();
  const auto it = std::find_if(values.begin(), values.end(),
                               [](double d) { return !std::isfinite(d); });
  if (it != values.end()) {
    throw DataError("non-finite value at linear index " +
                    std::to_string(std::distance(values.begin(), it)));
  }
}

bool is_binary(const LabelVolume& labels) noexcept {
  return std::all_of(labels.values().begin(), labels.values().end(),
                     [](std::uint32_t l) { return l <= 1; });
}

std::uint32_t max_label(const LabelVolume& labels) noexcept {
  const auto values = labels.values();
  if (values.empty()) return 0;
  return *std::max_element(values.begin(), values.end());
}

void McEnsemble::validate() const {
  if (samples.size() < 2) {
    throw InputError("ensemble needs at least 2 samples, got " +
                     std::to_string(samples.size()));
  }
  const Dims& dims = samples.front().dims();
  for (std::size_t t = 0; t < samples.size(); ++t) {
    if (samples[t].dims() != dims) {
      throw InputError("ensemble sample " + std::to_string(t) + " has mismatched dims");
    }
    for (double p : samples[t].values()) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InputError("ensemble sample " + std::to_string(t) +
                         " holds a value outside [0, 1]");
      }
    }
  }
}

}  // namespace lesionuq
