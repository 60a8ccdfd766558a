#pragma once

#include <stdexcept>
#include <string>

namespace ice_search {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: ragged CSV rows, bad target column, too few rows.
class DataError : public Error {
 public:
  using Error::Error;
};

// A model could not be fit (single-class labels, empty feature restriction).
class ModelError : public Error {
 public:
  using Error::Error;
};

// The language-model operator could not be reached after all retries.
class OperatorUnavailable : public Error {
 public:
  using Error::Error;
};

// The operator answered, but the body did not have the expected shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// The operator's text mentioned no known feature.
class UnparseableResponse : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Requested work exceeds a hard cap (e.g. exhaustive enumeration size).
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ice_search
