#include "support.hpp"

#include <random>

#include "clinrl/pipeline.hpp"
#include "clinrl/random.hpp"

using namespace clinrl;

namespace {

StageContext ctx(const std::string& id, StageType stage, std::optional<double> q = 1.0) {
  StageContext c;
  c.case_id = id;
  c.stage = stage;
  c.history.push_back({"input " + id, Origin::Input});
  if (stage != StageType::Inq) c.quality_score = q;
  return c;
}

FunctionPolicy echo_policy() {
  return FunctionPolicy([](const StageContext& c) {
    return "response for " + c.case_id + " at " + std::string(to_string(c.stage));
  });
}

}  // namespace

TEST(Instructions, DefaultsAndMissing) {
  const auto s = StageInstructions::defaults();
  EXPECT_EQ(s.at(StageType::Lab), "Based on the above, suggest lab tests.");
  EXPECT_FALSE(s.at(StageType::Inq).empty());
  StageInstructions partial;
  partial.set(StageType::Inq, "start");
  EXPECT_ERRC(partial.at(StageType::DDX), Errc::MissingInstruction);
}

TEST(Advance, ExtendsAboveThreshold) {
  auto policy = echo_policy();
  FunctionStageVerifier verifier([](const StageContext&, std::string_view) { return 0.9; });
  const auto instr = StageInstructions::defaults();
  const auto c = initial_context("c1", "Patient presents with cough.", instr);
  const auto r = advance(c, policy, verifier, 0.7, instr);
  EXPECT_EQ(r.kind, AdvanceResult::Kind::Extended);
  EXPECT_EQ(r.context.stage, StageType::DDX);
  EXPECT_EQ(r.context.history.back().text, instr.at(StageType::DDX));
  EXPECT_EQ(r.context.history.back().origin, Origin::Instruction);
  EXPECT_EQ(r.context.quality_score, 0.9);
  EXPECT_EQ(r.context.render().rfind(c.render(), 0), 0u);
}

TEST(Advance, DiscardsBelowThreshold) {
  auto policy = echo_policy();
  FunctionStageVerifier verifier([](const StageContext&, std::string_view) { return 0.3; });
  const auto instr = StageInstructions::defaults();
  const auto r = advance(initial_context("c1", "x", instr), policy, verifier, 0.7, instr);
  EXPECT_EQ(r.kind, AdvanceResult::Kind::Discarded);
  EXPECT_EQ(r.score, 0.3);
  EXPECT_EQ(r.context.stage, StageType::Inq);
}

TEST(Advance, DiagIsTerminal) {
  auto policy = echo_policy();
  FunctionStageVerifier verifier([](const StageContext&, std::string_view) { return 1.0; });
  const auto r = advance(ctx("c1", StageType::Diag), policy, verifier, 0.7, StageInstructions::defaults());
  EXPECT_EQ(r.kind, AdvanceResult::Kind::Completed);
  EXPECT_EQ(r.context.stage, StageType::Diag);
}

TEST(Advance, BackendFailuresMapped) {
  FunctionPolicy broken([](const StageContext&) -> std::string { throw std::runtime_error("timeout"); });
  FunctionStageVerifier ok([](const StageContext&, std::string_view) { return 1.0; });
  const auto instr = StageInstructions::defaults();
  EXPECT_ERRC(advance(initial_context("c", "x", instr), broken, ok, 0.7, instr), Errc::PolicyUnavailable);
  auto policy = echo_policy();
  FunctionStageVerifier down([](const StageContext&, std::string_view) -> double { throw std::runtime_error("x"); });
  EXPECT_ERRC(advance(initial_context("c", "x", instr), policy, down, 0.7, instr), Errc::VerifierUnavailable);
  StageInstructions partial;
  partial.set(StageType::Inq, "start");
  EXPECT_ERRC(advance(initial_context("c", "x", partial), policy, ok, 0.7, partial), Errc::MissingInstruction);
}

TEST(StagePool, RoundRobinInterleaves) {
  StagePool pool;
  for (const char* id : {"a", "b", "c"}) pool.enqueue(ctx(id, StageType::Inq));
  pool.enqueue(ctx("d", StageType::Lab));
  const auto batch = pool.schedule_batch(4);
  std::vector<std::string> ids;
  for (const auto& c : batch) ids.push_back(c.case_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "d", "b", "c"}));
  EXPECT_EQ(pool.total(), 0u);
  EXPECT_TRUE(pool.schedule_batch(4).empty());
}

TEST(StagePool, LimitedSlotsRotate) {
  StagePool pool;
  for (auto s : kStages) {
    pool.enqueue(ctx(std::string(to_string(s)) + "1", s));
    pool.enqueue(ctx(std::string(to_string(s)) + "2", s));
  }
  auto b1 = pool.schedule_batch(2);
  ASSERT_EQ(b1.size(), 2u);
  EXPECT_EQ(b1[0].stage, StageType::Inq);
  EXPECT_EQ(b1[1].stage, StageType::DDX);
  auto b2 = pool.schedule_batch(2);
  EXPECT_EQ(b2[0].stage, StageType::Lab);
  EXPECT_EQ(b2[1].stage, StageType::Diag);
  EXPECT_ERRC(pool.schedule_batch(0), Errc::InvalidInput);
}

TEST(StagePool, GateRejectsLowScores) {
  StagePool pool;
  EXPECT_ERRC(pool.enqueue(ctx("a", StageType::DDX, 0.5)), Errc::GateViolation);
  EXPECT_ERRC(pool.enqueue(ctx("a", StageType::DDX, std::nullopt)), Errc::GateViolation);
  pool.enqueue(ctx("a", StageType::DDX, 0.7));
  EXPECT_EQ(pool.size(StageType::DDX), 1u);
  GateThresholds t;
  t.overrides[StageType::Inq] = 0.9;
  StagePool strict(t);
  EXPECT_ERRC(strict.enqueue(ctx("a", StageType::DDX, 0.8)), Errc::GateViolation);
}

TEST(PipelineRunner, AlwaysPassReachesDiagInFourCalls) {
  auto policy = echo_policy();
  FunctionStageVerifier pass([](const StageContext&, std::string_view) { return 1.0; });
  PipelineConfig cfg;
  PipelineRunner runner(cfg, policy, pass);
  for (int i = 0; i < 25; ++i) runner.inject("case" + std::to_string(i), "input");
  runner.run_to_completion();
  EXPECT_EQ(runner.completed(), 25u);
  EXPECT_EQ(runner.discarded(), 0u);
  for (const auto& o : runner.outcomes()) {
    EXPECT_EQ(o.status, CaseOutcome::Status::Completed);
    EXPECT_EQ(o.last_stage, StageType::Diag);
    EXPECT_EQ(o.advance_calls, 4u);
    EXPECT_EQ(o.context.stage_scores.size(), 4u);
  }
}

TEST(PipelineRunner, RetriesRegenerateBeforeDiscarding) {
  std::atomic<int> calls{0};
  auto policy = echo_policy();
  FunctionStageVerifier flaky([&](const StageContext& c, std::string_view) {
    return c.stage == StageType::DDX && calls++ == 0 ? 0.1 : 1.0;
  });
  PipelineConfig cfg;
  cfg.max_retries = 1;
  PipelineRunner runner(cfg, policy, flaky);
  runner.inject("c", "x");
  runner.run_to_completion();
  EXPECT_EQ(runner.completed(), 1u);
  EXPECT_EQ(runner.outcomes()[0].advance_calls, 5u);
}

TEST(PipelineRunner, FailedAdvanceReturnsContextToPool) {
  std::atomic<bool> fail{true};
  FunctionPolicy policy([&](const StageContext& c) -> std::string {
    if (c.case_id == "bad" && fail.exchange(false)) throw std::runtime_error("flaky");
    return "ok";
  });
  FunctionStageVerifier pass([](const StageContext&, std::string_view) { return 1.0; });
  PipelineRunner runner(PipelineConfig{}, policy, pass);
  runner.inject("bad", "x");
  runner.inject("good", "x");
  EXPECT_ERRC(runner.step(), Errc::PolicyUnavailable);
  EXPECT_EQ(runner.in_flight(), 2u);
  runner.run_to_completion();
  EXPECT_EQ(runner.completed(), 2u);
}

TEST(PipelineProperty, GateSoundnessAndAccounting) {
  std::mt19937_64 rng(41);
  std::mutex m;
  auto policy = echo_policy();
  FunctionStageVerifier random_scores([&](const StageContext&, std::string_view) {
    std::lock_guard lock(m);
    return unit_draw(rng);
  });
  PipelineConfig cfg;
  cfg.slots = 7;
  cfg.parallelism = 4;
  PipelineRunner runner(cfg, policy, random_scores);
  for (int i = 0; i < 300; ++i) runner.inject("c" + std::to_string(i), "x");
  while (runner.in_flight() > 0) {
    runner.step();
    for (auto s : {StageType::DDX, StageType::Lab, StageType::Diag}) {
      if (const auto q = runner.pool().min_score(s)) {
        ASSERT_GE(*q, 0.7);
      }
    }
    ASSERT_EQ(runner.completed() + runner.discarded() + runner.in_flight(), runner.injected());
  }
  for (const auto& o : runner.outcomes()) {
    for (std::size_t k = 0; k + 1 < o.context.stage_scores.size(); ++k) ASSERT_GE(o.context.stage_scores[k], 0.7);
  }
}
