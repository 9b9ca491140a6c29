#pragma once

#include <stdexcept>
#include <string>

namespace lesionuq {

/// Coarse error families. The CLI maps them to exit codes.
enum class ErrorKind {
  Format,      // malformed file content
  Shape,       // wrong rank / dims
  Data,        // non-finite or out-of-range values
  Input,       // violated precondition on a call
  Io,          // filesystem failure
  Generation,  // synthetic scene could not be generated
  Model,       // weights incompatible with input
  Training,    // degenerate dataset or diverged optimisation
  Fit,         // MetaSeg fit failed
  Evaluation,  // metric undefined for the given records
  Config,      // bad configuration file or flag
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LESIONUQ_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

LESIONUQ_DEFINE_ERROR(FormatError, Format)
LESIONUQ_DEFINE_ERROR(ShapeError, Shape)
LESIONUQ_DEFINE_ERROR(DataError, Data)
LESIONUQ_DEFINE_ERROR(InputError, Input)
LESIONUQ_DEFINE_ERROR(IoError, Io)
LESIONUQ_DEFINE_ERROR(GenerationError, Generation)
LESIONUQ_DEFINE_ERROR(ModelError, Model)
LESIONUQ_DEFINE_ERROR(TrainingError, Training)
LESIONUQ_DEFINE_ERROR(FitError, Fit)
LESIONUQ_DEFINE_ERROR(EvaluationError, Evaluation)
LESIONUQ_DEFINE_ERROR(ConfigError, Config)

#undef LESIONUQ_DEFINE_ERROR

/// Throws the concrete exception type for `kind`.
[[noreturn]] void throw_error(ErrorKind kind, const std::string& what);

}  // namespace lesionuq
