#include "clinrl/pipeline.hpp"

#include <thread>

#include "clinrl/error.hpp"
#include "clinrl/text.hpp"

namespace clinrl {

std::string_view to_string(StageType stage) noexcept {
  switch (stage) {
    case StageType::Inq: return "Inq";
    case StageType::DDX: return "DDX";
    case StageType::Lab: return "Lab";
    case StageType::Diag: return "Diag";
  }
  return "Inq";
}

StageType stage_from_string(std::string_view s) {
  for (const auto st : kStages) {
    if (text::to_lower(s) == text::to_lower(to_string(st))) return st;
  }
  throw Error(Errc::InvalidInput, std::string(s), "unknown stage");
}

std::optional<StageType> next_stage(StageType stage) noexcept {
  if (stage == StageType::Diag) return std::nullopt;
  return static_cast<StageType>(static_cast<int>(stage) + 1);
}

std::string_view to_string(Origin origin) noexcept {
  switch (origin) {
    case Origin::Input: return "input";
    case Origin::Generated: return "generated";
    case Origin::Instruction: return "instruction";
  }
  return "input";
}

Origin origin_from_string(std::string_view s) {
  if (s == "input") return Origin::Input;
  if (s == "generated") return Origin::Generated;
  if (s == "instruction") return Origin::Instruction;
  throw Error(Errc::InvalidInput, std::string(s), "unknown segment origin");
}

std::string StageContext::render() const {
  std::string out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) out += "\n\n";
    out += history[i].text;
  }
  return out;
}

StageInstructions StageInstructions::defaults() {
  StageInstructions s;
  s.set(StageType::Inq, "Begin the consultation: ask focused questions to gather the patient's history.");
  s.set(StageType::DDX, "Based on the above, list the differential diagnoses.");
  s.set(StageType::Lab, "Based on the above, suggest lab tests.");
  s.set(StageType::Diag, "Based on the above, give the final diagnosis with its ICD-10 code.");
  return s;
}

const std::string& StageInstructions::at(StageType stage) const {
  const auto it = text_.find(stage);
  if (it == text_.end()) throw Error(Errc::MissingInstruction, std::string(to_string(stage)));
  return it->second;
}

StageContext initial_context(std::string case_id, std::string input, const StageInstructions& instructions) {
  StageContext c;
  c.case_id = std::move(case_id);
  c.stage = StageType::Inq;
  c.history.push_back({std::move(input), Origin::Input});
  c.history.push_back({instructions.at(StageType::Inq), Origin::Instruction});
  return c;
}

RubricStageVerifier::RubricStageVerifier(std::map<StageType, RubricSet> rubrics, JudgeBackend& judge,
                                         EvaluateOptions options)
    : rubrics_(std::move(rubrics)), judge_(judge), options_(options) {}

double RubricStageVerifier::score(const StageContext& context, std::string_view response) {
  const auto it = rubrics_.find(context.stage);
  if (it == rubrics_.end()) throw Error(Errc::EmptyRubricSet, std::string(to_string(context.stage)));
  std::string sample = context.render();
  sample += "\n\n";
  sample += response;
  return evaluate_sample(sample, it->second, judge_, options_).task_reward;
}

AdvanceResult advance(const StageContext& context, PolicyBackend& policy, StageVerifier& verifier, double tau,
                      const StageInstructions& instructions) {
  const auto next = next_stage(context.stage);
  if (next) instructions.at(*next);

  AdvanceResult out;
  try {
    out.response = policy.generate(context);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::PolicyUnavailable, context.case_id, e.what());
  }
  try {
    out.score = verifier.score(context, out.response);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::VerifierUnavailable, context.case_id, e.what());
  }

  out.context = context;
  out.context.history.push_back({out.response, Origin::Generated});
  out.context.stage_scores.push_back(out.score);
  if (!next) {
    out.kind = AdvanceResult::Kind::Completed;
    return out;
  }
  if (out.score >= tau) {
    out.kind = AdvanceResult::Kind::Extended;
    out.context.history.push_back({instructions.at(*next), Origin::Instruction});
    out.context.stage = *next;
    out.context.quality_score = out.score;
  } else {
    out.kind = AdvanceResult::Kind::Discarded;
  }
  return out;
}

// ---------------------------------------------------------------------------

StagePool::StagePool(GateThresholds thresholds) : thresholds_(std::move(thresholds)) {}

void StagePool::enqueue(StageContext context) {
  if (context.stage != StageType::Inq) {
    const auto prev = static_cast<StageType>(static_cast<int>(context.stage) - 1);
    if (!context.quality_score || *context.quality_score < thresholds_.at(prev)) {
      throw Error(Errc::GateViolation, context.case_id,
                  "quality score below threshold for " + std::string(to_string(context.stage)));
    }
  }
  std::lock_guard lock(mutex_);
  queues_[stage_index(context.stage)].push_back(std::move(context));
}

std::vector<StageContext> StagePool::schedule_batch(std::size_t slots) {
  if (slots == 0) throw Error(Errc::InvalidInput, "slots", "must be at least 1");
  std::lock_guard lock(mutex_);
  std::vector<StageContext> batch;
  std::size_t remaining = 0;
  for (const auto& q : queues_) remaining += q.size();
  std::size_t cursor = rotation_;
  while (batch.size() < slots && remaining > 0) {
    auto& q = queues_[cursor];
    if (!q.empty()) {
      batch.push_back(std::move(q.front()));
      q.pop_front();
      --remaining;
    }
    cursor = (cursor + 1) % kStageCount;
  }
  rotation_ = cursor;
  return batch;
}

std::size_t StagePool::size(StageType stage) const {
  std::lock_guard lock(mutex_);
  return queues_[stage_index(stage)].size();
}

std::size_t StagePool::total() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& q : queues_) n += q.size();
  return n;
}

std::optional<double> StagePool::min_score(StageType stage) const {
  std::lock_guard lock(mutex_);
  std::optional<double> m;
  for (const auto& c : queues_[stage_index(stage)]) {
    if (c.quality_score && (!m || *c.quality_score < *m)) m = c.quality_score;
  }
  return m;
}

// ---------------------------------------------------------------------------

PipelineRunner::PipelineRunner(PipelineConfig config, PolicyBackend& policy, StageVerifier& verifier)
    : config_(std::move(config)), policy_(policy), verifier_(verifier), pool_(config_.thresholds) {
  if (config_.slots == 0) throw Error(Errc::ConfigInvalid, "slots", "must be at least 1");
}

void PipelineRunner::inject(std::string case_id, std::string input) {
  pool_.enqueue(initial_context(std::move(case_id), std::move(input), config_.instructions));
  ++injected_;
}

std::vector<StageContext> PipelineRunner::step() {
  auto batch = pool_.schedule_batch(config_.slots);
  std::vector<AdvanceResult> results(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
  auto run = [&](std::size_t i) {
    try {
      results[i] = advance(batch[i], policy_, verifier_, config_.thresholds.at(batch[i].stage), config_.instructions);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (config_.parallelism <= 1 || batch.size() <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) run(i);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < batch.size(); ++i) workers.emplace_back(run, i);
  }

  std::exception_ptr first_error;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (errors[i]) {
      // Return the untouched context so accounting stays balanced.
      pool_.enqueue(batch[i]);
      if (!first_error) first_error = errors[i];
      continue;
    }
    auto& r = results[i];
    const std::string& id = batch[i].case_id;
    const std::size_t calls = ++calls_[id];
    switch (r.kind) {
      case AdvanceResult::Kind::Extended:
        pool_.enqueue(std::move(r.context));
        break;
      case AdvanceResult::Kind::Completed:
        ++completed_;
        outcomes_.push_back({id, CaseOutcome::Status::Completed, batch[i].stage, std::move(r.context), calls});
        break;
      case AdvanceResult::Kind::Discarded: {
        auto& used = retries_[id + "/" + std::string(to_string(batch[i].stage))];
        if (used < config_.max_retries) {
          ++used;
          pool_.enqueue(batch[i]);
        } else {
          ++discarded_;
          outcomes_.push_back({id, CaseOutcome::Status::Discarded, batch[i].stage, std::move(r.context), calls});
        }
        break;
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return batch;
}

void PipelineRunner::run_to_completion() {
  while (pool_.total() > 0) step();
}

}  // namespace clinrl
