#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "clinrl/case.hpp"
#include "clinrl/claims.hpp"
#include "clinrl/config.hpp"
#include "clinrl/eval.hpp"
#include "clinrl/io.hpp"
#include "clinrl/patient_sim.hpp"
#include "clinrl/pipeline.hpp"
#include "clinrl/verify_cache.hpp"

namespace clinrl {

/// Seeded stand-in for the trained policy. Inq runs a scripted session
/// against the patient simulator; later stages emit templated text with
/// seeded mistakes.
class ScriptedPolicy final : public PolicyBackend {
 public:
  ScriptedPolicy(const std::vector<PatientCase>& cases, std::uint64_t seed);

  std::string generate(const StageContext& context) override;

  /// Session produced by the Inq stage, if it ran.
  std::optional<SessionView> session(const std::string& case_id) const;

 private:
  const PatientCase& find(const std::string& case_id) const;

  std::unordered_map<std::string, const PatientCase*> cases_;
  std::vector<const PatientCase*> ordered_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, SessionView> sessions_;
};

/// Key-phrase rubric sets for each stage, matched against the rendered
/// context plus the response.
std::map<StageType, RubricSet> default_stage_rubrics();

/// Table verifier entries built from every case's known claims.
std::unordered_map<std::string, Label> knowledge_table(const std::vector<PatientCase>& cases);

struct StageRecord {
  StageType stage = StageType::Inq;
  std::string response;
  double score = 0.0;
};

struct CaseTranscript {
  std::string case_id;
  CaseOutcome::Status status = CaseOutcome::Status::Discarded;
  StageType last_stage = StageType::Inq;
  std::vector<Utterance> dialogue;
  std::vector<StageRecord> stages;
  std::vector<ClaimVerdict> verdicts;

  const StageRecord* stage(StageType s) const;
};

io::Json to_json(const CaseTranscript& t);
CaseTranscript transcript_from_json(const io::Json& j, std::string_view path = {});

struct PipelineRunDeps {
  PolicyBackend* policy = nullptr;
  StageVerifier* verifier = nullptr;
  ExtractorBackend* extractor = nullptr;
  ClaimCache* cache = nullptr;
  /// Supplies the inquiry dialogue per case; optional.
  const ScriptedPolicy* sessions = nullptr;
};

/// Injects every case, drains the stage pools, and verifies the claims of
/// each differential-diagnosis response. Transcripts come back in case order.
std::vector<CaseTranscript> run_pipeline(const std::vector<PatientCase>& cases, const EngineConfig& config,
                                         const PipelineRunDeps& deps);

struct CaseEvaluation {
  std::string case_id;
  std::string department;
  std::string status;
  std::size_t turns = 0;
  CoverageReport coverage;
  LabScore lab;
  double diagnosis = 0.0;
  std::string predicted_icd10;
  std::size_t claims = 0;
  std::optional<double> hallucination;
};

struct EvaluationReport {
  std::vector<CaseEvaluation> cases;
  /// Per-case scores averaged over cases.
  double inquiry = 0.0;
  double lab = 0.0;
  double diagnosis = 0.0;
  std::map<ScanDimension, double> scan;
  /// Pooled over every verified claim.
  std::optional<double> hallucination;
  std::size_t claims = 0;
  std::optional<TurnBinReport> turn_bins;
};

struct EvaluationSettings {
  CoverageWeights coverage;
  LabWeights lab;
  std::size_t turn_bin_width = 5;
};

EvaluationReport evaluate_transcripts(const std::vector<PatientCase>& cases,
                                      const std::vector<CaseTranscript>& transcripts, JudgeBackend& judge,
                                      const EvaluationSettings& options = {});

io::Json to_json(const EvaluationReport& r);
std::string report_summary(const EvaluationReport& r);

}  // namespace clinrl
