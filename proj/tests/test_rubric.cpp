#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <random>

#include "clinrl/case.hpp"
#include "clinrl/io.hpp"
#include "clinrl/rubric.hpp"

using namespace clinrl;

namespace {

std::vector<RubricClause> make_clauses(const std::vector<int>& weights) {
  std::vector<RubricClause> out;
  for (std::size_t i = 0; i < weights.size(); ++i) out.emplace_back("c" + std::to_string(i), "clause", weights[i]);
  return out;
}

std::vector<JudgeDecision> make_decisions(const std::vector<bool>& a) {
  std::vector<JudgeDecision> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back({"c" + std::to_string(i), a[i], "test"});
  return out;
}

// Min-max normalization with the extremes found by enumerating every
// decision vector.
double enumerated_oracle(const std::vector<int>& w, const std::vector<bool>& a) {
  const std::size_t n = w.size();
  long lo = 0, hi = 0;
  bool first = true;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    long s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1u) ? w[i] : 0;
    if (first || s < lo) lo = s;
    if (first || s > hi) hi = s;
    first = false;
  }
  long raw = 0;
  for (std::size_t i = 0; i < n; ++i) raw += a[i] ? w[i] : 0;
  return static_cast<double>(raw - lo) / static_cast<double>(hi - lo);
}

struct RandomRubric {
  std::vector<int> weights;
  std::vector<bool> decisions;
};

RandomRubric random_rubric(std::mt19937_64& rng, std::size_t max_size) {
  RandomRubric r;
  const std::size_t n = 1 + index_draw(rng, max_size);
  for (std::size_t i = 0; i < n; ++i) {
    int w = static_cast<int>(index_draw(rng, 20)) - 10;
    if (w >= 0) ++w;
    r.weights.push_back(w);
    r.decisions.push_back(unit_draw(rng) < 0.5);
  }
  return r;
}

}  // namespace

TEST(ScoreRubrics, HandEvaluatedExample) {
  const auto clauses = make_clauses({2, 3, -5});
  EXPECT_DOUBLE_EQ(score_rubrics(clauses, make_decisions({true, false, true})), 0.2);
}

TEST(ScoreRubrics, Extremes) {
  const auto clauses = make_clauses({4, 1, -3, -7});
  EXPECT_EQ(score_rubrics(clauses, make_decisions({true, true, false, false})), 1.0);
  EXPECT_EQ(score_rubrics(clauses, make_decisions({false, false, true, true})), 0.0);
}

TEST(ScoreRubrics, RejectsBadInput) {
  EXPECT_THROW(RubricClause("x", "t", 0), Error);
  EXPECT_THROW(RubricClause("x", "t", 11), Error);
  EXPECT_THROW(RubricClause("x", "t", 3, ClauseKind::Core, Lifecycle::Candidate), Error);
  const auto clauses = make_clauses({1, 2});
  try {
    score_rubrics(clauses, make_decisions({true}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingDecision);
    EXPECT_EQ(e.subject(), "c1");
  }
  auto dup = make_decisions({true, true});
  dup.push_back({"c0", false, "test"});
  try {
    score_rubrics(clauses, dup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateDecision);
  }
  try {
    score_rubrics(std::span<const RubricClause>{}, std::span<const JudgeDecision>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyRubricSet);
  }
}

TEST(ScoreRubrics, MatchesEnumerationOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 2000; ++t) {
    const auto r = random_rubric(rng, 8);
    EXPECT_EQ(score_rubrics(make_clauses(r.weights), make_decisions(r.decisions)),
              enumerated_oracle(r.weights, r.decisions));
  }
}

TEST(ScoreRubricsProperty, BoundedAndPermutationInvariant) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10000; ++t) {
    auto r = random_rubric(rng, 20);
    const double s = score_rubrics(make_clauses(r.weights), make_decisions(r.decisions));
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    auto clauses = make_clauses(r.weights);
    std::shuffle(clauses.begin(), clauses.end(), rng);
    auto decisions = make_decisions(r.decisions);
    std::shuffle(decisions.begin(), decisions.end(), rng);
    ASSERT_EQ(score_rubrics(clauses, decisions), s);
  }
}

TEST(ScoreRubricsProperty, Monotonicity) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 3000; ++t) {
    auto r = random_rubric(rng, 20);
    const auto clauses = make_clauses(r.weights);
    for (std::size_t i = 0; i < r.weights.size(); ++i) {
      auto off = r.decisions, on = r.decisions;
      off[i] = false;
      on[i] = true;
      const double s_off = score_rubrics(clauses, make_decisions(off));
      const double s_on = score_rubrics(clauses, make_decisions(on));
      if (r.weights[i] > 0) {
        ASSERT_GE(s_on, s_off);
      } else {
        ASSERT_LE(s_on, s_off);
      }
    }
  }
}

TEST(ScoreRubricsProperty, ScaleDecoupling) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 3000; ++t) {
    auto r = random_rubric(rng, 20);
    const int k = 1 + static_cast<int>(index_draw(rng, 3));
    std::vector<WeightedDecision> base, scaled;
    for (std::size_t i = 0; i < r.weights.size(); ++i) {
      base.push_back({r.weights[i], r.decisions[i]});
      scaled.push_back({r.weights[i] * k, r.decisions[i]});
    }
    ASSERT_EQ(normalized_reward(base), normalized_reward(scaled));
  }
}

TEST(EvaluateSample, KeyPhraseJudgeThreeClauses) {
  RubricSet set({RubricClause("intro", "Physician says \"I am Dr.\"", 3),
                 RubricClause("allergy", "Asks about \"allergies\"", 2),
                 RubricClause("blame", "Says \"your own fault\"", -5)});
  KeyPhraseJudge judge;
  const auto ev = evaluate_sample("Hello, I am Dr. Reyes. Any allergies?", set, judge);
  ASSERT_EQ(ev.decisions.size(), 3u);
  EXPECT_TRUE(ev.decisions[0].satisfied);
  EXPECT_TRUE(ev.decisions[1].satisfied);
  EXPECT_FALSE(ev.decisions[2].satisfied);
  EXPECT_DOUBLE_EQ(ev.task_reward, 1.0);

  const auto ev2 = evaluate_sample("It is your own fault. Any allergies?", set, judge);
  // (0 + 2 - 5 + 5) / 10
  EXPECT_DOUBLE_EQ(ev2.task_reward, 0.2);
}

TEST(EvaluateSample, EmptyActiveSet) {
  RubricSet set({RubricClause("d", "x", 2, ClauseKind::Dynamic, Lifecycle::Candidate)});
  KeyPhraseJudge judge;
  try {
    evaluate_sample("text", set, judge);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyRubricSet);
  }
}

TEST(EvaluateSample, MalformedJudgeReply) {
  RubricSet set({RubricClause("a", "x", 2)});
  FunctionJudge judge("maybe", [](std::string_view, std::string_view) { return std::string("maybe"); });
  try {
    evaluate_sample("text", set, judge);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::JudgeMalformedOutput);
    EXPECT_EQ(e.subject(), "a");
  }
}

TEST(EvaluateSample, JudgeFailureBecomesUnavailable) {
  RubricSet set({RubricClause("a", "x", 2)});
  FunctionJudge judge("down", [](std::string_view, std::string_view) -> std::string {
    throw std::runtime_error("connection refused");
  });
  try {
    evaluate_sample("text", set, judge);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::JudgeUnavailable);
  }
}

TEST(EvaluateSample, RetiredNeverDispatchedCandidatesOnlyInShadow) {
  RubricSet set({RubricClause("core", "\"a\"", 2), RubricClause("ret", "\"b\"", 2, ClauseKind::Dynamic, Lifecycle::Retired),
                 RubricClause("cand", "\"c\"", 2, ClauseKind::Dynamic, Lifecycle::Candidate)});
  std::vector<std::string> seen;
  std::mutex m;
  FunctionJudge judge("spy", [&](std::string_view, std::string_view suffix) {
    std::lock_guard lock(m);
    seen.emplace_back(suffix);
    return std::string("1");
  });
  auto ev = evaluate_sample("abc", set, judge);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("[core]"), std::string::npos);
  EXPECT_TRUE(ev.shadow_decisions.empty());

  seen.clear();
  EvaluateOptions opt;
  opt.shadow_candidates = true;
  ev = evaluate_sample("abc", set, judge, opt);
  ASSERT_EQ(seen.size(), 2u);
  for (const auto& s : seen) EXPECT_EQ(s.find("[ret]"), std::string::npos);
  ASSERT_EQ(ev.shadow_decisions.size(), 1u);
  EXPECT_EQ(ev.shadow_decisions[0].clause_id, "cand");
  EXPECT_EQ(ev.task_reward, 1.0);
}

TEST(Dispatch, GroupsByPrefixPreservingOrder) {
  std::vector<JudgeRequest> reqs{{"a", "p1", "s"}, {"b", "p2", "s"}, {"c", "p1", "s"}, {"d", "p2", "s"}};
  const auto groups = plan_dispatch(reqs);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].requests, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(groups[1].requests, (std::vector<std::size_t>{1, 3}));
}

TEST(Dispatch, ParallelRepliesStayInRequestOrder) {
  std::vector<JudgeRequest> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back({"c" + std::to_string(i), "p" + std::to_string(i % 3), std::to_string(i)});
  std::atomic<int> calls{0};
  FunctionJudge judge("echo", [&](std::string_view, std::string_view s) {
    ++calls;
    return std::string(s);
  });
  const auto replies = dispatch_judge(reqs, judge, 8);
  EXPECT_EQ(calls.load(), 40);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(replies[i], std::to_string(i));
}

TEST(Lifecycle, CandidatePromotedAtAdmissionRate) {
  RubricSet set({RubricClause("d", "x", 2, ClauseKind::Dynamic, Lifecycle::Candidate)});
  ViolationStats s("d");
  s.close_epoch({100, 35}, 0.02);
  const std::vector<ViolationStats> stats{s};
  const auto t = lifecycle_tick(set, stats, {});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (Transition{"d", Lifecycle::Candidate, Lifecycle::Active}));
  EXPECT_EQ(set.find("d")->lifecycle(), Lifecycle::Active);
}

TEST(Lifecycle, ActiveRetiredAfterCleanEpochs) {
  RubricSet set({RubricClause("d", "x", 2, ClauseKind::Dynamic, Lifecycle::Active)});
  ViolationStats s("d");
  for (int i = 0; i < 2; ++i) s.close_epoch({50, 0}, 0.02);
  std::vector<ViolationStats> stats{s};
  EXPECT_TRUE(lifecycle_tick(set, stats, {}).empty());
  stats[0].close_epoch({50, 0}, 0.02);
  const auto t = lifecycle_tick(set, stats, {});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].to, Lifecycle::Retired);
}

TEST(Lifecycle, CoreExempt) {
  RubricSet set({RubricClause("c", "x", 2)});
  ViolationStats s("c");
  for (int i = 0; i < 5; ++i) s.close_epoch({50, 0}, 0.02);
  const std::vector<ViolationStats> stats{s};
  EXPECT_TRUE(lifecycle_tick(set, stats, {}).empty());
  EXPECT_EQ(set.find("c")->lifecycle(), Lifecycle::Active);
}

TEST(Lifecycle, EmptyEpochIsNeutral) {
  ViolationStats s("d");
  s.close_epoch({10, 0}, 0.02);
  s.close_epoch({0, 0}, 0.02);
  EXPECT_EQ(s.epochs_clean(), 1);
  s.close_epoch({10, 5}, 0.02);
  EXPECT_EQ(s.epochs_clean(), 0);
}

TEST(Lifecycle, RegistryRecordsDynamicClausesOnly) {
  RubricSet set({RubricClause("core", "x", 2), RubricClause("dyn", "y", -3, ClauseKind::Dynamic, Lifecycle::Candidate)});
  RubricRegistry reg(set, {});
  std::vector<JudgeDecision> d{{"core", false, "j"}, {"dyn", true, "j"}};
  reg.record(d);
  const auto t = reg.close_epoch();
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(reg.snapshot().find("dyn")->lifecycle(), Lifecycle::Active);
  ASSERT_EQ(reg.stats_snapshot().size(), 1u);
  EXPECT_EQ(reg.stats_snapshot()[0].current()->violations, 1u);
}

TEST(RubricIo, ClauseRoundTrip) {
  const RubricClause c("d1", "Mentions \"fever\"", -3, ClauseKind::Dynamic, Lifecycle::Candidate);
  const RubricClause back = io::clause_from_json(io::to_json(c));
  EXPECT_EQ(back.id(), "d1");
  EXPECT_EQ(back.weight(), -3);
  EXPECT_EQ(back.kind(), ClauseKind::Dynamic);
  EXPECT_EQ(back.lifecycle(), Lifecycle::Candidate);
  EXPECT_EQ(io::clause_from_json({{"id", "x"}, {"text", "t"}, {"weight", 1}, {"kind", "Core"}}).kind(),
            ClauseKind::Core);
}
