#pragma once

#include <stdexcept>
#include <string>

namespace shipsr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or size disagreement between inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Non-finite activations, non-PSD covariances and similar.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Empty or degenerate data sets, unreadable corpora, malformed files.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran before the artifact it needs was produced.
class DependencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace shipsr
