#pragma once

#include <stdexcept>
#include <string>

namespace gcsntk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An index or label is outside its valid range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A degree-normalization hit a zero row sum.
class DegenerateDegreeError : public Error {
 public:
  using Error::Error;
};

/// A neighborhood aggregation produced a zero feature vector, so its
/// normalization coefficient is undefined.
class DegenerateAggregationError : public Error {
 public:
  using Error::Error;
};

/// A regularized solve failed even after the jitter retry.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& msg, double smallest_pivot)
      : Error(msg), smallest_pivot(smallest_pivot) {}
  double smallest_pivot;
};

/// A non-finite value appeared in the forward/backward pipeline.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& stage, const std::string& msg)
      : Error("numerical overflow at stage '" + stage + "': " + msg), stage(stage) {}
  std::string stage;
};

/// Accuracy over an empty prediction set is undefined.
class UndefinedAccuracyError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Not enough training nodes to honor a sampling budget.
class InsufficientNodesError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Bundle I/O errors. Each names the offending file.
// ---------------------------------------------------------------------------

class BundleError : public Error {
 public:
  BundleError(const std::string& file, const std::string& msg)
      : Error(file + ": " + msg), file(file) {}
  std::string file;
};

class BundleMagicError : public BundleError {
 public:
  using BundleError::BundleError;
};

class BundleCountError : public BundleError {
 public:
  using BundleError::BundleError;
};

class BundleIndexError : public BundleError {
 public:
  using BundleError::BundleError;
};

}  // namespace gcsntk
