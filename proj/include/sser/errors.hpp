#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sser {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: catalog, trace file, configuration, scenario.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector shapes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A metric whose denominator is zero.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Search or enumeration exceeded its configured budget.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, std::size_t nodes_explored)
      : Error(what), nodes_explored_(nodes_explored) {}

  std::size_t nodes_explored() const noexcept { return nodes_explored_; }

 private:
  std::size_t nodes_explored_;
};

/// No column of an epoch admits a feasible state.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::size_t first_bad_column)
      : Error(what), first_bad_column_(first_bad_column) {}

  /// 1-based time index of the first column without a feasible state.
  std::size_t first_bad_column() const noexcept { return first_bad_column_; }

 private:
  std::size_t first_bad_column_;
};

}  // namespace sser
