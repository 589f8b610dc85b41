#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinrl/rubric.hpp"

namespace clinrl {

enum class StageType : int { Inq = 0, DDX = 1, Lab = 2, Diag = 3 };

constexpr std::size_t kStageCount = 4;
constexpr std::array<StageType, kStageCount> kStages = {StageType::Inq, StageType::DDX, StageType::Lab,
                                                        StageType::Diag};

std::string_view to_string(StageType stage) noexcept;
StageType stage_from_string(std::string_view s);
std::optional<StageType> next_stage(StageType stage) noexcept;
inline std::size_t stage_index(StageType s) noexcept { return static_cast<std::size_t>(s); }

enum class Origin { Input, Generated, Instruction };

std::string_view to_string(Origin origin) noexcept;
Origin origin_from_string(std::string_view s);

struct Segment {
  std::string text;
  Origin origin = Origin::Input;

  bool operator==(const Segment&) const = default;
};

/// Accumulated context of one case. The next stage's context is this one
/// plus the generated response and the next instruction; history only grows.
struct StageContext {
  std::string case_id;
  StageType stage = StageType::Inq;
  std::vector<Segment> history;
  /// Verifier score of the stage that produced this context.
  std::optional<double> quality_score;
  /// Scores of every completed stage, in order.
  std::vector<double> stage_scores;

  std::string render() const;
};

/// Fixed prompt p_k per stage.
class StageInstructions {
 public:
  static StageInstructions defaults();

  void set(StageType stage, std::string text) { text_[stage] = std::move(text); }
  const std::string& at(StageType stage) const;
  bool contains(StageType stage) const { return text_.count(stage) != 0; }

 private:
  std::map<StageType, std::string> text_;
};

inline const std::string& stage_instruction(StageType stage, const StageInstructions& instructions) {
  return instructions.at(stage);
}

/// Acceptance threshold per stage, 0.7 unless overridden.
struct GateThresholds {
  double default_tau = 0.7;
  std::map<StageType, double> overrides;

  double at(StageType stage) const {
    const auto it = overrides.find(stage);
    return it == overrides.end() ? default_tau : it->second;
  }
};

StageContext initial_context(std::string case_id, std::string input, const StageInstructions& instructions);

class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  virtual std::string generate(const StageContext& context) = 0;
};

/// Stage-k quality verifier.
class StageVerifier {
 public:
  virtual ~StageVerifier() = default;
  virtual double score(const StageContext& context, std::string_view response) = 0;
};

/// Scores a stage response with that stage's rubric set over the rendered
/// context followed by the response.
class RubricStageVerifier final : public StageVerifier {
 public:
  RubricStageVerifier(std::map<StageType, RubricSet> rubrics, JudgeBackend& judge, EvaluateOptions options = {});
  double score(const StageContext& context, std::string_view response) override;

 private:
  std::map<StageType, RubricSet> rubrics_;
  JudgeBackend& judge_;
  EvaluateOptions options_;
};

class FunctionStageVerifier final : public StageVerifier {
 public:
  using Fn = std::function<double(const StageContext&, std::string_view)>;
  explicit FunctionStageVerifier(Fn fn) : fn_(std::move(fn)) {}
  double score(const StageContext& c, std::string_view r) override { return fn_(c, r); }

 private:
  Fn fn_;
};

class FunctionPolicy final : public PolicyBackend {
 public:
  using Fn = std::function<std::string(const StageContext&)>;
  explicit FunctionPolicy(Fn fn) : fn_(std::move(fn)) {}
  std::string generate(const StageContext& c) override { return fn_(c); }

 private:
  Fn fn_;
};

struct AdvanceResult {
  enum class Kind { Extended, Discarded, Completed };

  Kind kind = Kind::Discarded;
  /// Extended: the next-stage context. Otherwise the input context with the
  /// response appended, kept for audit.
  StageContext context;
  double score = 0.0;
  std::string response;
};

/// Generates the stage response, scores it, and extends the context when score >= tau. The
/// Diag stage is terminal and always completes.
AdvanceResult advance(const StageContext& context, PolicyBackend& policy, StageVerifier& verifier, double tau,
                      const StageInstructions& instructions);

/// Per-stage FIFO queues. Enqueueing into a stage after Inq requires the
/// context's quality score to meet the previous stage's threshold.
class StagePool {
 public:
  explicit StagePool(GateThresholds thresholds = {});

  void enqueue(StageContext context);

  /// Round-robin across non-empty stages starting at the rotation cursor,
  /// FIFO within a stage. Returns fewer than `slots` items only when the pool
  /// drains; an empty pool yields an empty batch.
  std::vector<StageContext> schedule_batch(std::size_t slots);

  std::size_t size(StageType stage) const;
  std::size_t total() const;
  /// Minimum quality score currently held in a stage's queue.
  std::optional<double> min_score(StageType stage) const;

 private:
  GateThresholds thresholds_;
  mutable std::mutex mutex_;
  std::array<std::deque<StageContext>, kStageCount> queues_;
  std::size_t rotation_ = 0;
};

struct PipelineConfig {
  StageInstructions instructions = StageInstructions::defaults();
  GateThresholds thresholds;
  std::size_t slots = 4;
  /// Regenerations allowed per stage before a case is abandoned.
  std::size_t max_retries = 0;
  std::size_t parallelism = 1;
};

struct CaseOutcome {
  enum class Status { Completed, Discarded };

  std::string case_id;
  Status status = Status::Discarded;
  StageType last_stage = StageType::Inq;
  StageContext context;
  std::size_t advance_calls = 0;
};

/// Asynchronous multi-stage scheduler: each step draws one batch across stage
/// pools, advances every item, and routes results back into the pools.
class PipelineRunner {
 public:
  PipelineRunner(PipelineConfig config, PolicyBackend& policy, StageVerifier& verifier);

  void inject(std::string case_id, std::string input);

  /// One scheduling round. Returns the batch that was processed. When an
  /// advance fails, the other results are still routed, the failed context
  /// goes back to its pool and the first error is rethrown.
  std::vector<StageContext> step();
  void run_to_completion();

  std::size_t injected() const noexcept { return injected_; }
  std::size_t completed() const noexcept { return completed_; }
  std::size_t discarded() const noexcept { return discarded_; }
  std::size_t in_flight() const { return pool_.total(); }

  /// Finished cases (completed and discarded) in finishing order.
  const std::vector<CaseOutcome>& outcomes() const noexcept { return outcomes_; }
  const StagePool& pool() const noexcept { return pool_; }

 private:
  PipelineConfig config_;
  PolicyBackend& policy_;
  StageVerifier& verifier_;
  StagePool pool_;
  std::unordered_map<std::string, std::size_t> calls_;
  std::unordered_map<std::string, std::size_t> retries_;
  std::vector<CaseOutcome> outcomes_;
  std::size_t injected_ = 0;
  std::size_t completed_ = 0;
  std::size_t discarded_ = 0;
};

}  // namespace clinrl
