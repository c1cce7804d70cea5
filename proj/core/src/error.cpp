#include "ssb/error.hpp"

namespace ssb {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InconsistentDimension: return "InconsistentDimension";
    case ErrorCode::DuplicatePoint: return "DuplicatePoint";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SingularLambda: return "SingularLambda";
    case ErrorCode::AllNegInfMessage: return "AllNegInfMessage";
    case ErrorCode::ZeroMarginalMass: return "ZeroMarginalMass";
    case ErrorCode::SizeCapExceeded: return "SizeCapExceeded";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::StartNotInSupport: return "StartNotInSupport";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::UnequalSupportSizes: return "UnequalSupportSizes";
    case ErrorCode::InvalidHoldOut: return "InvalidHoldOut";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ssb
