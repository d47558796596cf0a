#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sarco {

enum class ErrorKind {
  kFormat,
  kTruncation,
  kPrecondition,
  kDomain,
  kDimension,
  kLabel,
  kDegenerateBatch,
  kUnsupportedVersion,
  kPayloadLength,
  kInsufficientData,
  kUndefinedMeasure,
  kArgument,
  kNumeric,
  kIo,
  kUsage,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `kind()` lets callers (the CLI in particular)
/// map failures onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sarco
