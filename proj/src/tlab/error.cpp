#include "tlab/error.hpp"

namespace tlab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInternal: return "internal";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kQuery: return "query";
    case ErrorCode::kUndefinedConditional: return "undefined-conditional";
    case ErrorCode::kInvalidIntervention: return "invalid-intervention";
    case ErrorCode::kTooLarge: return "too-large";
    case ErrorCode::kStructure: return "structure";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kPool: return "pool";
    case ErrorCode::kBudgetExhausted: return "budget-exhausted";
    case ErrorCode::kStructurallyIdentifiable: return "structurally-identifiable";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kClassCoverage: return "class-coverage";
    case ErrorCode::kSpec: return "spec";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kCorruptFile: return "corrupt-file";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kVerification: return "verification";
  }
  return "unknown";
}

}  // namespace tlab
