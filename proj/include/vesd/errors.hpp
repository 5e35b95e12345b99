#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vesd {

enum class ErrorKind {
  InvalidArgument,
  NonConvergence,
  BranchViolation,
  DegenerateDenominator,
  EdgeDegeneracy,
  OutsideDomain,
  QuadratureFailure,
  PositivityViolation,
  EigenFailure,
  NearSingular,
  DegenerateVariance,
  BudgetExceeded,
  ResolventDegenerate,
  DegenerateData,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace vesd
