#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace storyreel {

enum class Errc {
  Validation,
  BackendUnavailable,
  MockScriptMiss,
  ContractViolation,
  InvalidRequest,
  StageFailed,
  ParseFailed,
  MissingCasting,
  StyleTrainingFailed,
  PackagingRefused,
  NotFound,
  StageOrderViolation,
  DegenerateEmbedding,
  InsufficientFrames,
  ImageTooSmall,
  DegenerateDistribution,
  InvalidVerdict,
  NoOverlap,
  DuplicateId,
  Config,
  Io,
  Interrupted,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures are reported through this one exception type; `code()`
// identifies the failure class and `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace storyreel
