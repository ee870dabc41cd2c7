#pragma once

#include <stdexcept>
#include <string>

namespace alignkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extent or rank mismatch. The message names the offending axis.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A parameter outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File-system or stream failure; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Dataset directory or archive that cannot be parsed.
class CorruptDataset : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

}  // namespace alignkit
