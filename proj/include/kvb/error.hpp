#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kvb {

enum class ErrorCode {
  MixedDimensions,
  NotHermitian,
  NotOrthonormal,
  Singular,
  NotSelfAdjoint,
  NotSymmetric,
  NotExtension,
  NotInvertibleSD,
  DecompositionMismatch,
  NotInAdjointDomain,
  NotInGap,
  ParameterNotInKernel,
  NotUnital,
  DeficiencyExhausted,
  IllConditionedGram,
  FormNotHermitian,
  GapMismatch,
  EmptyIntersection,
  ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace kvb
