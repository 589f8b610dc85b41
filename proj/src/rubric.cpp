#include "clinrl/rubric.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "clinrl/error.hpp"
#include "clinrl/text.hpp"

namespace clinrl {

std::string_view to_string(ClauseKind kind) noexcept {
  return kind == ClauseKind::Core ? "core" : "dynamic";
}

std::string_view to_string(Lifecycle state) noexcept {
  switch (state) {
    case Lifecycle::Candidate: return "candidate";
    case Lifecycle::Active: return "active";
    case Lifecycle::Retired: return "retired";
  }
  return "active";
}

RubricClause::RubricClause(std::string id, std::string text, int weight, ClauseKind kind, Lifecycle state)
    : id_(std::move(id)), text_(std::move(text)), weight_(weight), kind_(kind), state_(state) {
  if (weight == 0 || weight < -10 || weight > 10) {
    throw Error(Errc::InvalidWeight, id_, "weight must be in [-10,10] and nonzero, got " + std::to_string(weight));
  }
  if (kind_ == ClauseKind::Core && state_ != Lifecycle::Active) {
    throw Error(Errc::InvalidInput, id_, "core clauses are always active");
  }
}

double normalized_reward(std::span<const WeightedDecision> items) {
  if (items.empty()) throw Error(Errc::EmptyRubricSet);
  long long achieved = 0;
  long long negative = 0;
  long long total = 0;
  for (const auto& [w, a] : items) {
    if (a) achieved += w;
    if (w < 0) negative += w;
    total += std::llabs(w);
  }
  return static_cast<double>(achieved - negative) / static_cast<double>(total);
}

double score_rubrics(std::span<const RubricClause> clauses, std::span<const JudgeDecision> decisions) {
  if (clauses.empty()) throw Error(Errc::EmptyRubricSet);
  std::unordered_map<std::string_view, const JudgeDecision*> by_id;
  for (const auto& d : decisions) {
    if (!by_id.emplace(d.clause_id, &d).second) throw Error(Errc::DuplicateDecision, d.clause_id);
  }
  std::vector<WeightedDecision> items;
  items.reserve(clauses.size());
  for (const auto& c : clauses) {
    const auto it = by_id.find(c.id());
    if (it == by_id.end()) throw Error(Errc::MissingDecision, c.id());
    items.push_back({c.weight(), it->second->satisfied});
  }
  return normalized_reward(items);
}

RubricSet::RubricSet(std::vector<RubricClause> clauses) {
  for (auto& c : clauses) add(std::move(c));
}

void RubricSet::add(RubricClause clause) {
  if (find(clause.id()) != nullptr) throw Error(Errc::InvalidInput, clause.id(), "duplicate clause id");
  clauses_.push_back(std::move(clause));
}

std::vector<RubricClause> RubricSet::active() const {
  std::vector<RubricClause> out;
  std::copy_if(clauses_.begin(), clauses_.end(), std::back_inserter(out),
               [](const RubricClause& c) { return c.active(); });
  return out;
}

const RubricClause* RubricSet::find(std::string_view id) const {
  const auto it = std::find_if(clauses_.begin(), clauses_.end(), [&](const auto& c) { return c.id() == id; });
  return it == clauses_.end() ? nullptr : &*it;
}

bool RubricSet::transition(std::string_view id, Lifecycle to) {
  const auto it = std::find_if(clauses_.begin(), clauses_.end(), [&](const auto& c) { return c.id() == id; });
  if (it == clauses_.end()) throw Error(Errc::UnknownClause, std::string(id));
  if (it->kind_ == ClauseKind::Core) return false;
  it->state_ = to;
  return true;
}

// ---------------------------------------------------------------------------

std::string judge_prefix(std::string_view sample) {
  std::string p =
      "You are a clinical rubric judge. Decide one criterion at a time, using only the dialogue below.\n"
      "Output schema: reply with the single character 1 if the criterion is met, otherwise 0. "
      "No other text.\n"
      "<dialogue>\n";
  p += sample;
  p += "\n</dialogue>\n";
  return p;
}

std::string judge_suffix(const RubricClause& clause) {
  return "Criterion [" + clause.id() + "]: " + clause.text() + "\nVerdict:";
}

bool parse_verdict(std::string_view reply, const std::string& clause_id) {
  const auto t = text::trim(reply);
  if (t == "1") return true;
  if (t == "0") return false;
  throw Error(Errc::JudgeMalformedOutput, clause_id, "reply '" + std::string(t) + "'");
}

std::vector<DispatchGroup> plan_dispatch(std::span<const JudgeRequest> requests) {
  std::vector<DispatchGroup> groups;
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto [it, inserted] = index.emplace(requests[i].prefix, groups.size());
    if (inserted) groups.push_back({requests[i].prefix, {}});
    groups[it->second].requests.push_back(i);
  }
  return groups;
}

std::vector<std::string> dispatch_judge(std::span<const JudgeRequest> requests, JudgeBackend& judge,
                                        std::size_t parallelism) {
  std::vector<std::size_t> order;
  order.reserve(requests.size());
  for (const auto& g : plan_dispatch(requests)) order.insert(order.end(), g.requests.begin(), g.requests.end());

  std::vector<std::string> replies(requests.size());
  std::vector<std::exception_ptr> failures(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < order.size(); k = next++) {
      const std::size_t i = order[k];
      try {
        replies[i] = judge.judge(requests[i].prefix, requests[i].suffix);
      } catch (const Error&) {
        failures[i] = std::current_exception();
      } catch (const std::exception& e) {
        failures[i] = std::make_exception_ptr(Error(Errc::JudgeUnavailable, requests[i].clause_id, e.what()));
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(1, order.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return replies;
}

SampleEvaluation evaluate_sample(std::string_view sample, const RubricSet& rubric_set, JudgeBackend& judge,
                                 const EvaluateOptions& options) {
  const auto clauses = rubric_set.active();
  if (clauses.empty()) throw Error(Errc::EmptyRubricSet);
  std::vector<RubricClause> shadow;
  if (options.shadow_candidates) {
    for (const auto& c : rubric_set.clauses()) {
      if (c.lifecycle() == Lifecycle::Candidate) shadow.push_back(c);
    }
  }

  const std::string prefix = judge_prefix(sample);
  std::vector<JudgeRequest> requests;
  requests.reserve(clauses.size() + shadow.size());
  for (const auto& c : clauses) requests.push_back({c.id(), prefix, judge_suffix(c)});
  for (const auto& c : shadow) requests.push_back({c.id(), prefix, judge_suffix(c)});

  const auto replies = dispatch_judge(requests, judge, options.parallelism);
  SampleEvaluation out;
  out.decisions.reserve(clauses.size());
  const std::string judge_id = judge.id();
  for (std::size_t i = 0; i < requests.size(); ++i) {
    JudgeDecision d{requests[i].clause_id, parse_verdict(replies[i], requests[i].clause_id), judge_id};
    (i < clauses.size() ? out.decisions : out.shadow_decisions).push_back(std::move(d));
  }
  out.task_reward = score_rubrics(clauses, out.decisions);
  return out;
}

std::string KeyPhraseJudge::key_phrase(std::string_view clause_text) {
  const auto open = clause_text.find('"');
  if (open != std::string_view::npos) {
    const auto close = clause_text.find('"', open + 1);
    if (close != std::string_view::npos) return std::string(clause_text.substr(open + 1, close - open - 1));
  }
  return std::string(text::trim(clause_text));
}

std::string KeyPhraseJudge::judge(std::string_view prefix, std::string_view suffix) {
  constexpr std::string_view kOpen = "<dialogue>\n";
  constexpr std::string_view kClose = "\n</dialogue>";
  const auto b = prefix.find(kOpen);
  const auto e = prefix.rfind(kClose);
  if (b == std::string_view::npos || e == std::string_view::npos || e < b + kOpen.size()) return "malformed prompt";
  const auto dialogue = prefix.substr(b + kOpen.size(), e - b - kOpen.size());

  auto criterion = suffix;
  if (const auto colon = criterion.find("]: "); colon != std::string_view::npos) criterion.remove_prefix(colon + 3);
  if (const auto nl = criterion.find('\n'); nl != std::string_view::npos) criterion = criterion.substr(0, nl);
  return text::contains_icase(dialogue, key_phrase(criterion)) ? "1" : "0";
}

// ---------------------------------------------------------------------------

void LifecyclePolicy::validate() const {
  const bool ok = admission_threshold > 0.0 && admission_threshold <= 1.0 && exit_threshold >= 0.0 &&
                  exit_threshold < admission_threshold && clean_epochs >= 1 && window >= 1;
  if (!ok) throw Error(Errc::ConfigInvalid, "lifecycle", "thresholds or epoch counts out of range");
}

ViolationStats::ViolationStats(std::string clause_id, std::size_t window)
    : clause_id_(std::move(clause_id)), capacity_(std::max<std::size_t>(window, 1)) {}

void ViolationStats::close_epoch(EpochCounts counts, double exit_threshold) {
  if (counts.violations > counts.evaluations) {
    throw Error(Errc::InvalidInput, clause_id_, "violations exceed evaluations");
  }
  window_.push_back(counts);
  if (window_.size() > capacity_) window_.pop_front();
  if (counts.evaluations == 0) return;
  epochs_clean_ = counts.rate() <= exit_threshold ? epochs_clean_ + 1 : 0;
}

std::optional<EpochCounts> ViolationStats::current() const {
  if (window_.empty()) return std::nullopt;
  return window_.back();
}

std::vector<Transition> lifecycle_tick(RubricSet& set, std::span<const ViolationStats> stats,
                                       const LifecyclePolicy& policy) {
  policy.validate();
  std::unordered_map<std::string_view, const ViolationStats*> by_id;
  for (const auto& s : stats) {
    if (set.find(s.clause_id()) == nullptr) throw Error(Errc::UnknownClause, s.clause_id());
    by_id[s.clause_id()] = &s;
  }

  std::vector<Transition> out;
  for (const auto& clause : set.clauses()) {
    if (clause.kind() == ClauseKind::Core) continue;
    const auto it = by_id.find(clause.id());
    if (it == by_id.end()) continue;
    const ViolationStats& s = *it->second;
    if (clause.lifecycle() == Lifecycle::Candidate) {
      const auto cur = s.current();
      if (cur && cur->evaluations > 0 && cur->rate() >= policy.admission_threshold) {
        out.push_back({clause.id(), Lifecycle::Candidate, Lifecycle::Active});
      }
    } else if (clause.lifecycle() == Lifecycle::Active && s.epochs_clean() >= policy.clean_epochs) {
      out.push_back({clause.id(), Lifecycle::Active, Lifecycle::Retired});
    }
  }
  for (const auto& t : out) set.transition(t.clause_id, t.to);
  return out;
}

RubricRegistry::RubricRegistry(RubricSet set, LifecyclePolicy policy) : set_(std::move(set)), policy_(policy) {
  policy_.validate();
  for (const auto& c : set_.clauses()) {
    if (c.kind() == ClauseKind::Dynamic) stats_.emplace_back(c.id(), policy_.window);
  }
}

RubricSet RubricRegistry::snapshot() const {
  std::shared_lock lock(mutex_);
  return set_;
}

std::vector<ViolationStats> RubricRegistry::stats_snapshot() const {
  std::shared_lock lock(mutex_);
  return stats_;
}

void RubricRegistry::record(std::span<const JudgeDecision> decisions) {
  std::unique_lock lock(mutex_);
  for (const auto& d : decisions) {
    const RubricClause* c = set_.find(d.clause_id);
    if (c == nullptr) throw Error(Errc::UnknownClause, d.clause_id);
    if (c->kind() != ClauseKind::Dynamic) continue;
    auto& counts = open_[d.clause_id];
    ++counts.evaluations;
    if (is_violation(c->weight(), d.satisfied)) ++counts.violations;
  }
}

std::vector<Transition> RubricRegistry::close_epoch() {
  std::unique_lock lock(mutex_);
  for (auto& s : stats_) {
    const auto it = open_.find(s.clause_id());
    s.close_epoch(it == open_.end() ? EpochCounts{} : it->second, policy_.exit_threshold);
  }
  open_.clear();
  return lifecycle_tick(set_, stats_, policy_);
}

}  // namespace clinrl
