#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clinrl/cli.hpp"
#include "clinrl/io.hpp"

using namespace clinrl;
using io::Json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("clinrl_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

std::vector<Json> lines(const std::string& body) {
  std::vector<Json> out;
  std::istringstream in(body);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(Json::parse(line));
  }
  return out;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  const auto none = cli({});
  EXPECT_EQ(none.code, 2);
  EXPECT_FALSE(none.err.empty());
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"advantage"}).code, 2);
  EXPECT_EQ(cli({"gen-cases", "--n", "0"}).code, 2);
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = CLINRL_BINARY;
  const int unknown = std::system((bin + " frobnicate >/dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(unknown));
  EXPECT_EQ(WEXITSTATUS(unknown), 2);
  const int ok = std::system((bin + " gen-cases --n 2 >/dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(ok));
  EXPECT_EQ(WEXITSTATUS(ok), 0);
}

TEST(Cli, GenCasesDeterministicPerSeed) {
  const auto dir = scratch("gen");
  ASSERT_EQ(cli({"--seed", "7", "gen-cases", "--n", "5", "--out", (dir / "a.jsonl").string()}).code, 0);
  ASSERT_EQ(cli({"--seed", "7", "gen-cases", "--n", "5", "--out", (dir / "b.jsonl").string()}).code, 0);
  ASSERT_EQ(cli({"--seed", "8", "gen-cases", "--n", "5", "--out", (dir / "c.jsonl").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  EXPECT_NE(slurp(dir / "a.jsonl"), slurp(dir / "c.jsonl"));
  EXPECT_EQ(lines(slurp(dir / "a.jsonl")).size(), 5u);
}

TEST(Cli, ScoreFact) {
  const auto dir = scratch("fact");
  const Json mixed{{"id", "mixed"},
                   {"response", "Aspirin inhibits COX-1. Aspirin cures influenza."},
                   {"r_task", 0.9},
                   {"verdicts", Json::array({{{"claim", "Aspirin inhibits COX-1."}, {"label", "Supported"}},
                                             {{"claim", "Aspirin cures influenza."}, {"label", "Refuted"}}})}};
  const Json clean{{"id", "clean"},
                   {"response", "Aspirin inhibits COX-1."},
                   {"verdicts", Json::array({{{"claim", "Aspirin inhibits COX-1."}, {"label", "Supported"}}})}};
  write(dir / "in.jsonl", mixed.dump() + "\n" + clean.dump() + "\n");
  const auto r = cli({"--test-doubles", "score-fact", "--in", (dir / "in.jsonl").string(), "--r-task", "0.6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].at("id"), "mixed");
  const double r_fact = out[0].at("r_fact").get<double>();
  EXPECT_LT(r_fact, 0.0);
  EXPECT_NEAR(out[0].at("r_total").get<double>(), 0.9 + out[0].at("lambda").get<double>() * r_fact, 1e-12);
  EXPECT_EQ(out[1].at("r_task").get<double>(), 0.6);
  EXPECT_EQ(out[1].at("r_total").get<double>(), 0.6);

  write(dir / "bad.jsonl", Json{{"response", "x"}}.dump() + "\n");
  const auto missing = cli({"--test-doubles", "score-fact", "--in", (dir / "bad.jsonl").string()});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("r_task"), std::string::npos);
}

TEST(Cli, AdvantageGoldenGroup) {
  const auto dir = scratch("adv");
  const Json group{{"rollouts", Json::array({{{"reward", 0.9}, {"steps", Json::array({Json::object()})}},
                                             {{"reward", 0.5}, {"steps", Json::array({Json::object()})}},
                                             {{"reward", 0.1}, {"steps", Json::array({Json::object()})}}})}};
  write(dir / "g.jsonl", group.dump() + "\n");
  const auto r = cli({"advantage", "--in", (dir / "g.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].at("rollouts")[0].at("advantages")[0].get<double>(), 1.2247, 1e-4);
}

TEST(Cli, DistillLoss) {
  const auto dir = scratch("distill");
  write(dir / "t.jsonl", Json{{"student", {-2.0, -0.5}}, {"teacher", {-1.0, -1.0}}}.dump() + "\n" +
                             Json{{"student", {-1.0, -5.0}}, {"teacher", {-2.0, -1.0}}, {"mask", {true, false}}}
                                 .dump() +
                             "\n");
  const auto r = cli({"distill-loss", "--in", (dir / "t.jsonl").string(), "--advantage", "1", "--beta", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].at("clip_fkl").get<double>(), 1.0);
  EXPECT_EQ(out[0].at("forward_kl").get<double>(), 1.25);
  EXPECT_EQ(out[1].at("clip_fkl").get<double>(), 0.0);
  EXPECT_EQ(out[1].at("mopd").get<double>(), 2.0);
  EXPECT_EQ(cli({"distill-loss", "--in", (dir / "t.jsonl").string(), "--beta", "-1"}).code, 2);
}

TEST(Cli, ScoreRubric) {
  const auto dir = scratch("rubric");
  write(dir / "r.jsonl", Json{{"id", "a"}, {"text", "Asks about \"allergies\""}, {"weight", 2}}.dump() + "\n" +
                             Json{{"id", "b"}, {"text", "Mentions \"fever\""}, {"weight", 2}}.dump() + "\n");
  const auto r = cli({"--test-doubles", "score-rubric", "--rubrics", (dir / "r.jsonl").string(), "--sample", "Any allergies?"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].at("task_reward").get<double>(), 0.5);
}

TEST(Cli, SimulateSelectsCase) {
  const auto dir = scratch("sim");
  ASSERT_EQ(cli({"gen-cases", "--n", "3", "--out", (dir / "cases.jsonl").string()}).code, 0);
  const auto cases = lines(slurp(dir / "cases.jsonl"));
  const std::string id = cases[1].at("case_id");
  const auto r = cli({"simulate", "--cases", (dir / "cases.jsonl").string(), "--case-id", id});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].at("case_id"), id);
  EXPECT_EQ(cli({"simulate", "--cases", (dir / "cases.jsonl").string(), "--case-id", "nope"}).code, 1);
}

TEST(Cli, PipelineRunNeedsPolicyOrTestDoubles) {
  const auto dir = scratch("policy");
  ASSERT_EQ(cli({"gen-cases", "--n", "2", "--out", (dir / "cases.jsonl").string()}).code, 0);
  const auto r = cli({"pipeline-run", "--cases", (dir / "cases.jsonl").string(), "--out", (dir / "t.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ConfigInvalid(backends."), std::string::npos) << r.err;
}

TEST(Cli, PipelineRunAndEvaluateDeterministic) {
  const auto dir = scratch("e2e");
  const auto cases = (dir / "cases.jsonl").string();
  ASSERT_EQ(cli({"--seed", "7", "gen-cases", "--n", "12", "--out", cases}).code, 0);
  for (const char* tag : {"1", "2"}) {
    const auto t = (dir / (std::string("t") + tag + ".jsonl")).string();
    const auto run = cli({"--seed", "7", "--test-doubles", "pipeline-run", "--cases", cases, "--out", t});
    ASSERT_EQ(run.code, 0) << run.err;
    const auto ev = cli({"--seed", "7", "--test-doubles", "evaluate", "--cases", cases, "--transcripts", t, "--report",
                         (dir / (std::string("report") + tag + ".json")).string()});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_FALSE(ev.out.empty());
  }
  EXPECT_EQ(slurp(dir / "t1.jsonl"), slurp(dir / "t2.jsonl"));
  EXPECT_EQ(slurp(dir / "report1.json"), slurp(dir / "report2.json"));
  EXPECT_EQ(slurp(dir / "report1.txt"), slurp(dir / "report2.txt"));
  const Json report = Json::parse(slurp(dir / "report1.json"));
  EXPECT_TRUE(report.is_object());
}

TEST(Cli, CacheStatsAndFlush) {
  const auto dir = scratch("cache");
  EXPECT_EQ(cli({"--test-doubles", "cache", "stats"}).code, 1);
  write(dir / "config.json", Json{{"cache", {{"directory", (dir / "store").string()}}}}.dump());
  const auto stats = cli({"--config", (dir / "config.json").string(), "--test-doubles", "cache", "stats"});
  ASSERT_EQ(stats.code, 0) << stats.err;
  EXPECT_EQ(Json::parse(stats.out).at("l1_size"), 0);
  const auto flush = cli({"--config", (dir / "config.json").string(), "--test-doubles", "cache", "flush", "--level", "both"});
  EXPECT_EQ(flush.code, 0) << flush.err;
  EXPECT_EQ(cli({"--config", (dir / "config.json").string(), "--test-doubles", "cache", "flush", "--level", "l3"}).code, 2);
}

TEST(Cli, InvalidConfigRejected) {
  const auto dir = scratch("config");
  write(dir / "config.json", Json{{"thresholds", {{"tau_min", 0.9}, {"tau_max", 0.8}}}}.dump());
  const auto r = cli({"--config", (dir / "config.json").string(), "gen-cases", "--n", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(cli({"--config", (dir / "missing.json").string(), "gen-cases"}).code, 2);
}
