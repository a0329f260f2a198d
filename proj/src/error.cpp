#include "fedq/error.hpp"

namespace fedq {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DegenerateMdp: return "DegenerateMdp";
    case ErrorKind::InconsistentReports: return "InconsistentReports";
    case ErrorKind::NegativeVariance: return "NegativeVariance";
    case ErrorKind::NotGmdp: return "NotGmdp";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace fedq
