#include "scrubkit/errors.hpp"

namespace scrubkit {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic:
      return "bad magic";
    case FormatErrorKind::kUnsupportedVersion:
      return "unsupported version";
    case FormatErrorKind::kTruncated:
      return "truncated";
    case FormatErrorKind::kNonFinite:
      return "non-finite value";
    case FormatErrorKind::kCountMismatch:
      return "count mismatch";
    case FormatErrorKind::kMalformed:
      return "malformed";
    case FormatErrorKind::kIo:
      return "i/o error";
  }
  return "unknown";
}

}  // namespace scrubkit
