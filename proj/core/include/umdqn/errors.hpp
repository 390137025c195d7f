#pragma once

#include <stdexcept>
#include <string>

namespace umdqn {

/// Shape or width disagreement between tensors, layers or views.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Non-finite values, failed quadrature, aborted optimiser steps.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Argument outside its mathematical domain (e.g. a quantile fraction
/// outside [0, 1], a negative probability).
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// API misuse: backward without a record, stepping a terminal state, ...
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

/// Invalid user-supplied configuration. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A computation would exceed a configured resource cap.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace umdqn
