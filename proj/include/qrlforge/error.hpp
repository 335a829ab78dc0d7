#pragma once

#include <stdexcept>
#include <string>

namespace qrlforge {

enum class ErrorCode {
  Capacity,
  Index,
  Argument,
  UnsupportedBinding,
  Protocol,
  InvalidAction,
  Config,
  Io,
  Monotonicity,
  Runtime,
};

// Base class for every error raised by the library. The C API maps the code
// onto its status enum; everything else just catches Error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define QRLFORGE_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  };

QRLFORGE_DEFINE_ERROR(CapacityError, Capacity)
QRLFORGE_DEFINE_ERROR(IndexError, Index)
QRLFORGE_DEFINE_ERROR(ArgumentError, Argument)
QRLFORGE_DEFINE_ERROR(UnsupportedBindingError, UnsupportedBinding)
QRLFORGE_DEFINE_ERROR(ProtocolError, Protocol)
QRLFORGE_DEFINE_ERROR(InvalidActionError, InvalidAction)
QRLFORGE_DEFINE_ERROR(ConfigError, Config)
QRLFORGE_DEFINE_ERROR(IoError, Io)
QRLFORGE_DEFINE_ERROR(MonotonicityError, Monotonicity)
QRLFORGE_DEFINE_ERROR(RuntimeError, Runtime)

#undef QRLFORGE_DEFINE_ERROR

}  // namespace qrlforge
