#include "vesd/errors.hpp"

namespace vesd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::BranchViolation: return "BranchViolation";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::EdgeDegeneracy: return "EdgeDegeneracy";
    case ErrorKind::OutsideDomain: return "OutsideDomain";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::PositivityViolation: return "PositivityViolation";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::NearSingular: return "NearSingular";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ResolventDegenerate: return "ResolventDegenerate";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace vesd
