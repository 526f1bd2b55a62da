#pragma once

#include <stdexcept>
#include <string>

namespace tlab {

// Error categories. The numeric values double as CLI exit codes and as the
// status codes of the C API, so they must stay stable.
enum class ErrorCode : int {
  kOk = 0,
  kInternal = 1,
  kInvalidArgument = 2,
  kQuery = 3,
  kUndefinedConditional = 4,
  kInvalidIntervention = 5,
  kTooLarge = 6,
  kStructure = 7,
  kDomain = 8,
  kPool = 9,
  kBudgetExhausted = 10,
  kStructurallyIdentifiable = 11,
  kShape = 12,
  kNumeric = 13,
  kTraining = 14,
  kClassCoverage = 15,
  kSpec = 16,
  kIo = 17,
  kCorruptFile = 18,
  kVersion = 19,
  kConfig = 20,
  kParse = 21,
  kVerification = 22,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tlab
