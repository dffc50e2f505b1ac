#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlgaudit {

enum class ErrorKind {
  io,
  parse,
  validation,
  undefined_measure,
  degenerate_sample,
  unstable_statistic,
  degenerate_fit,
  insufficient_systems,
  missing_field,
  distribution_label,
  divergence,
  precondition,
  dimension_mismatch,
};

std::string_view to_string(ErrorKind kind);

// All library failures surface as this exception; `kind()` lets callers map
// them onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nlgaudit
