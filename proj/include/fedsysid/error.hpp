#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedsysid {

enum class ErrorCode {
  kContractViolation,
  kOverflow,
  kSingularTransform,
  kUncontrollableModel,
  kInvalidMu,
  kDegeneratePseudoData,
  kNumeric,
  kUndefinedBfr,
  kDegenerateChannel,
  kParse,
  kSchema,
  kBounds,
  kIo,
  kConfig,
  kEmptySummary,
  kUnstableTruth,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Thrown by simulate() when a state or output entry becomes non-finite.
class SimulationOverflow : public Error {
 public:
  explicit SimulationOverflow(std::size_t step);
  // 0-based sample index at which the non-finite value appeared.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

[[noreturn]] void throw_error(ErrorCode code, const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) throw_error(ErrorCode::kContractViolation, what);
}

}  // namespace fedsysid
