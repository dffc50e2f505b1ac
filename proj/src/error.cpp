#include "nlgaudit/error.hpp"

namespace nlgaudit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::undefined_measure: return "undefined-measure";
    case ErrorKind::degenerate_sample: return "degenerate-sample";
    case ErrorKind::unstable_statistic: return "unstable-statistic";
    case ErrorKind::degenerate_fit: return "degenerate-fit";
    case ErrorKind::insufficient_systems: return "insufficient-systems";
    case ErrorKind::missing_field: return "missing-field";
    case ErrorKind::distribution_label: return "distribution-label";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
  }
  return "unknown";
}

}  // namespace nlgaudit
