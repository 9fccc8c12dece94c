#pragma once

#include <stdexcept>
#include <string>

namespace attrikit {

enum class ErrorKind {
  shape_mismatch,
  invalid_geometry,
  invalid_argument,
  non_finite,
  cyclic_graph,
  missing_weight,
  unknown_op,
  version_mismatch,
  unfoldable_batchnorm,
  unsupported_node,
  numerical_degeneracy,
  undefined_metric,
  invalid_target,
  format_error,
  io_error,
  divergence,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::invalid_geometry: return "invalid_geometry";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::cyclic_graph: return "cyclic_graph";
    case ErrorKind::missing_weight: return "missing_weight";
    case ErrorKind::unknown_op: return "unknown_op";
    case ErrorKind::version_mismatch: return "version_mismatch";
    case ErrorKind::unfoldable_batchnorm: return "unfoldable_batchnorm";
    case ErrorKind::unsupported_node: return "unsupported_node";
    case ErrorKind::numerical_degeneracy: return "numerical_degeneracy";
    case ErrorKind::undefined_metric: return "undefined_metric";
    case ErrorKind::invalid_target: return "invalid_target";
    case ErrorKind::format_error: return "format_error";
    case ErrorKind::io_error: return "io_error";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

/// Single exception type; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace attrikit
