#include "clinrl/error.hpp"

namespace clinrl {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::InvalidWeight: return "InvalidWeight";
    case Errc::EmptyRubricSet: return "EmptyRubricSet";
    case Errc::MissingDecision: return "MissingDecision";
    case Errc::DuplicateDecision: return "DuplicateDecision";
    case Errc::UnknownClause: return "UnknownClause";
    case Errc::JudgeUnavailable: return "JudgeUnavailable";
    case Errc::JudgeMalformedOutput: return "JudgeMalformedOutput";
    case Errc::ExtractorUnavailable: return "ExtractorUnavailable";
    case Errc::ExtractorMalformedOutput: return "ExtractorMalformedOutput";
    case Errc::EmptyReference: return "EmptyReference";
    case Errc::VerifierUnavailable: return "VerifierUnavailable";
    case Errc::EmbeddingDimensionMismatch: return "EmbeddingDimensionMismatch";
    case Errc::InvalidThresholds: return "InvalidThresholds";
    case Errc::ZeroClaims: return "ZeroClaims";
    case Errc::UnknownViolation: return "UnknownViolation";
    case Errc::GroupTooSmall: return "GroupTooSmall";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::PolicyUnavailable: return "PolicyUnavailable";
    case Errc::MissingInstruction: return "MissingInstruction";
    case Errc::GateViolation: return "GateViolation";
    case Errc::SnippetMissing: return "SnippetMissing";
    case Errc::EmptyChecklist: return "EmptyChecklist";
    case Errc::InvalidCode: return "InvalidCode";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::BackendUnreachable: return "BackendUnreachable";
    case Errc::PortUnavailable: return "PortUnavailable";
  }
  return "Unknown";
}

namespace {

std::string format_message(Errc code, const std::string& subject, const std::string& detail) {
  std::string msg(to_string(code));
  if (!subject.empty()) msg += "(" + subject + ")";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

}  // namespace

Error::Error(Errc code, std::string subject, std::string detail)
    : std::runtime_error(format_message(code, subject, detail)),
      code_(code),
      subject_(std::move(subject)),
      detail_(std::move(detail)) {}

}  // namespace clinrl
