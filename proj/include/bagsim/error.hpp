#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bagsim {

enum class ErrorCode {
  MalformedInput,
  UnknownNodeKind,
  ValidationError,
  CycleError,
  UnknownNode,
  DomainError,
  NoAcceptedSamples,
  ZeroTotalWeight,
  ZeroNormalization,
  TooManyParents,
  TooManyLeaves,
  ImpossibleEvidence,
  InvalidSpec,
};

std::string_view to_string(ErrorCode code);

/// Exception type used throughout the library. `details` carries itemised
/// diagnostics (e.g. one entry per validation violation).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace bagsim
