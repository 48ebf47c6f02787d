#pragma once

#include <stdexcept>
#include <string>

namespace mca {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed an argument outside the operation's domain
/// (wrong channel count, probability outside [0,1], mismatched shapes).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its contents are not what the reader expects.
class FormatError : public IoError {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kDigestMismatch, kMalformed };

  FormatError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Non-finite loss or gradient during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mca
