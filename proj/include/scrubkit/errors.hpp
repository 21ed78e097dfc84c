#pragma once

#include <stdexcept>
#include <string>

namespace scrubkit {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions disagree (H, k, T or matrix shapes).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input contains NaN or infinity.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples or classes to carry out the request.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A symmetric input had a clearly negative eigenvalue.
class NotPsdError : public Error {
 public:
  using Error::Error;
};

/// The same speaker appears in the train and the test split.
class DataLeakError : public Error {
 public:
  using Error::Error;
};

/// Requested layer, utterance or file is not available.
class MissingDataError : public Error {
 public:
  using Error::Error;
};

/// A layer stack produced different outputs for the same input.
class NondeterminismError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kNonFinite,
  kCountMismatch,
  kMalformed,
  kIo,
};

const char* to_string(FormatErrorKind kind);

/// Failure while reading or writing one of the on-disk formats.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace scrubkit
