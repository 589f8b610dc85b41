#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinrl/error.hpp"

namespace clinrl {

enum class ClauseKind { Core, Dynamic };
enum class Lifecycle { Candidate, Active, Retired };

std::string_view to_string(ClauseKind kind) noexcept;
std::string_view to_string(Lifecycle state) noexcept;

/// A signed-weight verifiable criterion. Weights lie in [-10, 10] \ {0};
/// positive weights reward satisfaction, negative weights penalize it.
/// Core clauses are always Active.
class RubricClause {
 public:
  RubricClause(std::string id, std::string text, int weight, ClauseKind kind = ClauseKind::Core,
               Lifecycle state = Lifecycle::Active);

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  int weight() const noexcept { return weight_; }
  ClauseKind kind() const noexcept { return kind_; }
  Lifecycle lifecycle() const noexcept { return state_; }
  bool active() const noexcept { return state_ == Lifecycle::Active; }

 private:
  friend class RubricSet;

  std::string id_;
  std::string text_;
  int weight_;
  ClauseKind kind_;
  Lifecycle state_;
};

struct JudgeDecision {
  std::string clause_id;
  bool satisfied = false;
  std::string judge_id;
};

struct WeightedDecision {
  int weight;
  bool satisfied;
};

/// (sum w_i a_i - sum_{w_i<0} w_i) / sum |w_i|, evaluated in integer
/// arithmetic with a single final division, so the result is exact up to
/// that division and independent of order.
double normalized_reward(std::span<const WeightedDecision> items);

/// Min-max normalized task reward. Every clause needs exactly one decision.
double score_rubrics(std::span<const RubricClause> clauses, std::span<const JudgeDecision> decisions);

/// A clause is violated when a reward clause is unmet or a penalty clause fires.
inline bool is_violation(int weight, bool satisfied) noexcept {
  return weight > 0 ? !satisfied : satisfied;
}

class RubricSet {
 public:
  RubricSet() = default;
  explicit RubricSet(std::vector<RubricClause> clauses);

  void add(RubricClause clause);
  const std::vector<RubricClause>& clauses() const noexcept { return clauses_; }
  std::vector<RubricClause> active() const;
  const RubricClause* find(std::string_view id) const;
  std::size_t size() const noexcept { return clauses_.size(); }

  /// Only Dynamic clauses move; attempts on Core clauses are ignored.
  bool transition(std::string_view id, Lifecycle to);

 private:
  std::vector<RubricClause> clauses_;
};

// ---------------------------------------------------------------------------
// Judge dispatch

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string id() const = 0;
  /// Returns the raw verdict text for one clause.
  virtual std::string judge(std::string_view prefix, std::string_view suffix) = 0;
};

/// Shared prefix: system constraints, output schema and dialogue context.
std::string judge_prefix(std::string_view sample);
/// Clause-specific suffix.
std::string judge_suffix(const RubricClause& clause);

/// Parses "1"/"0" after whitespace trim; anything else is JudgeMalformedOutput.
bool parse_verdict(std::string_view reply, const std::string& clause_id);

struct JudgeRequest {
  std::string clause_id;
  std::string prefix;
  std::string suffix;
};

struct DispatchGroup {
  std::string prefix;
  std::vector<std::size_t> requests;
};

/// Groups requests by byte-identical prefix, in first-appearance order.
std::vector<DispatchGroup> plan_dispatch(std::span<const JudgeRequest> requests);

/// Runs every request through the judge with at most `parallelism` calls in
/// flight. Same-prefix requests are issued back to back. Replies come back in
/// request order.
std::vector<std::string> dispatch_judge(std::span<const JudgeRequest> requests, JudgeBackend& judge,
                                        std::size_t parallelism);

struct EvaluateOptions {
  std::size_t parallelism = 8;
  /// Also judge Candidate clauses so their violation rate can be measured.
  /// Shadow decisions never enter the reward.
  bool shadow_candidates = false;
};

struct SampleEvaluation {
  std::vector<JudgeDecision> decisions;
  std::vector<JudgeDecision> shadow_decisions;
  double task_reward = 0.0;
};

/// Judges every Active clause of `rubric_set` independently against `sample`
/// and aggregates with score_rubrics. Retired clauses are never dispatched;
/// Candidate clauses only in shadow mode.
SampleEvaluation evaluate_sample(std::string_view sample, const RubricSet& rubric_set, JudgeBackend& judge,
                                 const EvaluateOptions& options = {});

/// Deterministic judge: a clause holds when its key phrase (the first
/// double-quoted span of the clause text, or the whole text) occurs in the
/// dialogue, case-insensitively.
class KeyPhraseJudge final : public JudgeBackend {
 public:
  std::string id() const override { return "keyphrase"; }
  std::string judge(std::string_view prefix, std::string_view suffix) override;

  static std::string key_phrase(std::string_view clause_text);
};

class FunctionJudge final : public JudgeBackend {
 public:
  using Fn = std::function<std::string(std::string_view prefix, std::string_view suffix)>;
  FunctionJudge(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::string judge(std::string_view prefix, std::string_view suffix) override { return fn_(prefix, suffix); }

 private:
  std::string id_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Dynamic rubric lifecycle

struct EpochCounts {
  std::uint32_t evaluations = 0;
  std::uint32_t violations = 0;

  double rate() const noexcept {
    return evaluations == 0 ? 0.0 : static_cast<double>(violations) / evaluations;
  }
};

struct LifecyclePolicy {
  double admission_threshold = 0.30;
  double exit_threshold = 0.02;
  int clean_epochs = 3;
  std::size_t window = 8;

  void validate() const;
};

/// Per-clause ring of closed epochs. An epoch with zero evaluations carries no
/// evidence: it neither counts as clean nor resets the clean streak.
class ViolationStats {
 public:
  explicit ViolationStats(std::string clause_id, std::size_t window = 8);

  void close_epoch(EpochCounts counts, double exit_threshold);

  const std::string& clause_id() const noexcept { return clause_id_; }
  const std::deque<EpochCounts>& window() const noexcept { return window_; }
  std::optional<EpochCounts> current() const;
  int epochs_clean() const noexcept { return epochs_clean_; }

 private:
  std::string clause_id_;
  std::size_t capacity_;
  std::deque<EpochCounts> window_;
  int epochs_clean_ = 0;
};

struct Transition {
  std::string clause_id;
  Lifecycle from;
  Lifecycle to;

  bool operator==(const Transition&) const = default;
};

/// Candidate -> Active when the latest epoch's violation rate reaches the
/// admission threshold; Active -> Retired after `clean_epochs` consecutive
/// clean epochs. Core clauses never move. Applies the transitions to `set`
/// and returns them in rubric order.
std::vector<Transition> lifecycle_tick(RubricSet& set, std::span<const ViolationStats> stats,
                                       const LifecyclePolicy& policy);

/// Rubric set plus violation bookkeeping, safe to share between judge workers
/// and the trainer. Readers take snapshots; only close_epoch mutates lifecycle.
class RubricRegistry {
 public:
  RubricRegistry(RubricSet set, LifecyclePolicy policy);

  RubricSet snapshot() const;
  std::vector<ViolationStats> stats_snapshot() const;

  /// Accumulates decisions for Dynamic clauses into the open epoch.
  void record(std::span<const JudgeDecision> decisions);

  /// Explicit epoch boundary: folds the open epoch into each Dynamic clause's
  /// stats and runs lifecycle_tick.
  std::vector<Transition> close_epoch();

 private:
  mutable std::shared_mutex mutex_;
  RubricSet set_;
  LifecyclePolicy policy_;
  std::unordered_map<std::string, EpochCounts> open_;
  std::vector<ViolationStats> stats_;
};

}  // namespace clinrl
