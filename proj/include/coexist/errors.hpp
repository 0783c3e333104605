#pragma once

#include <stdexcept>
#include <string>

namespace coexist {

/// Failure categories surfaced by the library. Each maps to one of the
/// documented error conditions of the public operations.
enum class errc {
  invalid_spec,
  bounds_violation,
  hypothesis_not_met,
  non_unique_system,
  not_constant_coefficients,
  chemotaxis_not_zero,
  step_unstable,
  cfl_violated,
  singular_system,
  non_positive_component,
  grid_mismatch,
  file_not_found,
  parse_error,
  validation_error,
  io_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_spec: return "InvalidSpec";
    case errc::bounds_violation: return "BoundsViolation";
    case errc::hypothesis_not_met: return "HypothesisNotMet";
    case errc::non_unique_system: return "NonUniqueSystem";
    case errc::not_constant_coefficients: return "NotConstantCoefficients";
    case errc::chemotaxis_not_zero: return "ChemotaxisNotZero";
    case errc::step_unstable: return "StepUnstable";
    case errc::cfl_violated: return "CflViolated";
    case errc::singular_system: return "SingularSystem";
    case errc::non_positive_component: return "NonPositiveComponent";
    case errc::grid_mismatch: return "GridMismatch";
    case errc::file_not_found: return "FileNotFound";
    case errc::parse_error: return "ParseError";
    case errc::validation_error: return "ValidationError";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace coexist
