#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chaos_tails {

enum class ErrorCode {
  InvalidArgument,
  Divergent,
  Unbounded,
  NonMonotoneMoments,
  MissingMoments,
  AllProjectionsZero,
  NonSummable,
  DimensionMismatch,
  TooLarge,
  AssumptionViolated,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::InvalidArgument, message);
}

}  // namespace chaos_tails
