#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinrl/case.hpp"
#include "clinrl/rubric.hpp"
#include "clinrl/verify_cache.hpp"

namespace clinrl {

// ---------------------------------------------------------------------------
// Inquiry coverage

enum class ScanDimension { SafetyStratification, InformationClarification, AssociativeQuestioning, NormativeOutput };

constexpr ScanDimension kScanDimensions[] = {ScanDimension::SafetyStratification,
                                             ScanDimension::InformationClarification,
                                             ScanDimension::AssociativeQuestioning, ScanDimension::NormativeOutput};

std::string_view to_string(ScanDimension d) noexcept;

struct CoverageWeights {
  double l2 = 2.0;
  double l1 = 1.0;
};

/// Decides whether a transcript covers a checklist item.
class CoverageMatcher {
 public:
  virtual ~CoverageMatcher() = default;
  virtual bool covered(const ChecklistItem& item, std::span<const Utterance> transcript) const = 0;
};

/// Templated self-introductions and demographic restatements carry no
/// diagnostic content and never count toward coverage.
bool is_excluded_utterance(const Utterance& u, const PatientCase& c);

/// Exact tracing: an item is covered when a simulator (non-snippet) patient
/// utterance discloses the profile fact bound to that item.
class FactTraceMatcher final : public CoverageMatcher {
 public:
  explicit FactTraceMatcher(const PatientCase& c);
  bool covered(const ChecklistItem& item, std::span<const Utterance> transcript) const override;

 private:
  const PatientCase& case_;
  std::unordered_map<std::string, std::string> fact_to_item_;
};

/// Text matching: an item is covered when a non-excluded patient utterance
/// contains the value of the item's profile fact.
class ValueMatcher final : public CoverageMatcher {
 public:
  explicit ValueMatcher(const PatientCase& c) : case_(c) {}
  bool covered(const ChecklistItem& item, std::span<const Utterance> transcript) const override;

 private:
  const PatientCase& case_;
};

/// Scores SCAN dimensions as rubric-set aggregates over a transcript.
class ScanScorer {
 public:
  ScanScorer(std::map<ScanDimension, RubricSet> rubrics, JudgeBackend& judge, EvaluateOptions options = {});

  /// Key-phrase rubric sets usable with KeyPhraseJudge.
  static std::map<ScanDimension, RubricSet> default_rubrics();

  std::map<ScanDimension, double> score(std::string_view transcript) const;

 private:
  std::map<ScanDimension, RubricSet> rubrics_;
  JudgeBackend& judge_;
  EvaluateOptions options_;
};

struct CoverageReport {
  double total = 0.0;
  std::size_t covered = 0;
  std::size_t items = 0;
  std::map<ChecklistCategory, double> by_category;
  std::map<ScanDimension, double> scan;
};

/// Weighted covered fraction with L2 items weighted w2 and L1 items w1.
/// SCAN dimensions are filled in when a scorer is supplied.
CoverageReport inquiry_coverage(std::span<const ChecklistItem> items, std::span<const Utterance> transcript,
                                const CoverageMatcher& matcher, CoverageWeights weights = {},
                                const ScanScorer* scan = nullptr);

// ---------------------------------------------------------------------------
// Lab selection

struct LabSelection {
  std::set<std::string> essential;
  std::set<std::string> optional_tests;
  std::set<std::string> selected;

  /// Throws InvalidInput when essential and optional overlap or a selection
  /// falls outside the universe.
  void validate(std::span<const std::string> universe) const;
};

struct LabWeights {
  double essential = 2.0;
  double optional = 1.0;
};

struct LabScore {
  double weighted_recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

LabScore lab_f1(const LabSelection& sel, LabWeights weights = {});

/// Universe entries mentioned in free text, matched case-insensitively.
std::set<std::string> parse_lab_selection(std::string_view text, std::span<const std::string> universe);

// ---------------------------------------------------------------------------
// Diagnosis

/// ICD-10 code: chapter letter, two category digits, optional '.' and one
/// or two alphanumerics.
class DiagnosisCode {
 public:
  /// Throws InvalidCode on a malformed code. Letters are upper-cased.
  explicit DiagnosisCode(std::string_view code);

  const std::string& code() const noexcept { return code_; }
  char chapter() const noexcept { return code_[0]; }
  std::string_view category() const noexcept { return std::string_view(code_).substr(0, 3); }

 private:
  std::string code_;
};

/// Hierarchical match: 1.0 exact, 0.5 same category, 0.25 same chapter, 0.
double diagnosis_match(const DiagnosisCode& pred, const DiagnosisCode& truth) noexcept;

/// First ICD-10-shaped token in free text.
std::optional<DiagnosisCode> find_icd10(std::string_view text);

// ---------------------------------------------------------------------------
// Hallucination rate

/// Refuted 1.0, Uncertain 0.5, Supported 0.
double hallucination_weight(Label label) noexcept;

/// Sum of verdict weights over the claim count. Throws ZeroClaims.
double hallucination_rate(std::span<const Label> labels);
double hallucination_rate(std::span<const ClaimVerdict> verdicts);

// ---------------------------------------------------------------------------
// Turn bins

struct SessionScores {
  std::size_t turns = 0;
  std::map<std::string, double> scores;
};

struct TurnBin {
  std::size_t turns = 0;
  std::size_t count = 0;
  std::map<std::string, double> means;
};

struct TurnBinReport {
  std::size_t total = 0;
  std::vector<TurnBin> retained;
  std::vector<TurnBin> dropped;
};

/// Groups sessions by turn count (binned to `bin_width`), drops bins with
/// fewer than 10% of sessions, and averages each dimension per bin. Needs
/// at least 10 sessions.
TurnBinReport turn_bin_report(std::span<const SessionScores> sessions, std::size_t bin_width = 1);

}  // namespace clinrl
