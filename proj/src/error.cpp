#include "sarco/error.hpp"

namespace sarco {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kTruncation: return "truncation";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kLabel: return "label";
    case ErrorKind::kDegenerateBatch: return "degenerate-batch";
    case ErrorKind::kUnsupportedVersion: return "unsupported-version";
    case ErrorKind::kPayloadLength: return "payload-length";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kUndefinedMeasure: return "undefined-measure";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kUsage: return "usage";
  }
  return "unknown";
}

}  // namespace sarco
