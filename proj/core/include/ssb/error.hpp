#pragma once

#include <stdexcept>
#include <string>

namespace ssb {

enum class ErrorCode {
  InvalidArgument,
  UnsupportedOrder,
  NotHurwitz,
  NotPsd,
  ParseError,
  InconsistentDimension,
  DuplicatePoint,
  IoError,
  DegenerateVariance,
  SingularLambda,
  AllNegInfMessage,
  ZeroMarginalMass,
  SizeCapExceeded,
  SingularGram,
  StartNotInSupport,
  MissingGroundTruth,
  EmptyCloud,
  UnequalSupportSizes,
  InvalidHoldOut,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ssb
