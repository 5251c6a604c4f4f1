#pragma once

#include <stdexcept>
#include <string>

namespace isac {

enum class ErrorCode {
  degenerate_constellation,
  insufficient_resources,
  singular_geometry,
  out_of_field,
  invalid_bistatic_range,
  undefined_heading,
  nuisance_block_singular,
  no_information,
  no_feasible_subset,
  oracle_domain,
  invalid_argument,
  parse_error,
  io_error,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::degenerate_constellation: return "degenerate-constellation";
    case ErrorCode::insufficient_resources: return "insufficient-resources";
    case ErrorCode::singular_geometry: return "singular-geometry";
    case ErrorCode::out_of_field: return "out-of-field";
    case ErrorCode::invalid_bistatic_range: return "invalid-bistatic-range";
    case ErrorCode::undefined_heading: return "undefined-heading";
    case ErrorCode::nuisance_block_singular: return "nuisance-block-singular";
    case ErrorCode::no_information: return "no-information";
    case ErrorCode::no_feasible_subset: return "no-feasible-subset";
    case ErrorCode::oracle_domain: return "oracle-domain";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` says which failure class it is.
class BoundsError : public std::runtime_error {
 public:
  BoundsError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace isac
