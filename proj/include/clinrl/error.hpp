#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clinrl {

enum class Errc {
  InvalidInput,
  InvalidWeight,
  EmptyRubricSet,
  MissingDecision,
  DuplicateDecision,
  UnknownClause,
  JudgeUnavailable,
  JudgeMalformedOutput,
  ExtractorUnavailable,
  ExtractorMalformedOutput,
  EmptyReference,
  VerifierUnavailable,
  EmbeddingDimensionMismatch,
  InvalidThresholds,
  ZeroClaims,
  UnknownViolation,
  GroupTooSmall,
  LengthMismatch,
  EmptyMask,
  PolicyUnavailable,
  MissingInstruction,
  GateViolation,
  SnippetMissing,
  EmptyChecklist,
  InvalidCode,
  ConfigInvalid,
  BackendUnreachable,
  PortUnavailable,
};

std::string_view to_string(Errc code) noexcept;

/// Error raised by every module. `subject` names the offending entity
/// (clause id, claim text, stage, ...) when there is one.
class Error : public std::runtime_error {
 public:
  explicit Error(Errc code, std::string subject = {}, std::string detail = {});

  Errc code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string subject_;
  std::string detail_;
};

}  // namespace clinrl
