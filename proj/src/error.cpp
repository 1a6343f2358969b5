#include "fedsysid/error.hpp"

namespace fedsysid {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContractViolation: return "contract violation";
    case ErrorCode::kOverflow: return "overflow";
    case ErrorCode::kSingularTransform: return "singular transform";
    case ErrorCode::kUncontrollableModel: return "uncontrollable model";
    case ErrorCode::kInvalidMu: return "invalid mu";
    case ErrorCode::kDegeneratePseudoData: return "degenerate pseudo data";
    case ErrorCode::kNumeric: return "numeric failure";
    case ErrorCode::kUndefinedBfr: return "undefined BFR";
    case ErrorCode::kDegenerateChannel: return "degenerate channel";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kBounds: return "bounds error";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kEmptySummary: return "empty summary";
    case ErrorCode::kUnstableTruth: return "unstable truth model";
  }
  return "unknown error";
}

SimulationOverflow::SimulationOverflow(std::size_t step)
    : Error(ErrorCode::kOverflow,
            "simulation produced a non-finite value at step " +
                std::to_string(step)),
      step_(step) {}

void throw_error(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fedsysid
