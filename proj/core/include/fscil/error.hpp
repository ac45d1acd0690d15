#pragma once

#include <stdexcept>
#include <string>

namespace fscil {

// Base of every exception thrown by the library. The CLI maps subclasses to
// exit codes: usage/config/io problems exit 2, everything else exits 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input files that cannot be opened or created.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad magic, truncated payloads, dimension or key-count mismatches.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Zero-extent clouds, zero-norm features.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnknownShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite inputs or empty pools where data is required.
class DataError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

// Session ordering or label-set violations.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class StaleCacheError : public Error {
 public:
  using Error::Error;
};

}  // namespace fscil
