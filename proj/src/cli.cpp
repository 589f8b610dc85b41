#include "clinrl/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <optional>
#include <thread>

#include "clinrl/backends.hpp"
#include "clinrl/case.hpp"
#include "clinrl/config.hpp"
#include "clinrl/distill.hpp"
#include "clinrl/io.hpp"
#include "clinrl/patient_sim.hpp"
#include "clinrl/service.hpp"
#include "clinrl/workflow.hpp"

namespace clinrl {

using io::Json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool test_doubles = false;
};

EngineConfig resolve_config(const GlobalOptions& g) {
  std::optional<std::filesystem::path> path;
  if (!g.config_path.empty()) path = g.config_path;
  EngineConfig c = load_config(path);
  if (g.seed) c.seed = *g.seed;
  if (g.test_doubles) c.backends.allow_test_doubles = true;
  c.validate();
  return c;
}

CacheOptions cache_options(const EngineConfig& c) {
  CacheOptions o;
  o.semantic_threshold = c.thresholds.theta_sem;
  o.numeric_guard = c.cache.numeric_guard;
  o.enabled = c.cache.enabled;
  o.directory = c.cache.directory;
  o.parallelism = c.parallelism.cache;
  return o;
}

/// Backends shared by the subcommands; built lazily from the config.
struct Runtime {
  explicit Runtime(EngineConfig c, std::unordered_map<std::string, Label> table = {})
      : config(std::move(c)),
        embedder(make_embedder(config)),
        verifier(make_verifier(config, std::move(table))),
        cache(std::make_unique<ClaimCache>(*embedder, *verifier, cache_options(config))) {}

  JudgeBackend& judge() {
    if (!judge_) judge_ = make_judge(config);
    return *judge_;
  }
  ExtractorBackend& extractor() {
    if (!extractor_) extractor_ = make_extractor(config);
    return *extractor_;
  }

  EngineConfig config;
  std::unique_ptr<EmbeddingBackend> embedder;
  std::unique_ptr<VerifierBackend> verifier;
  std::unique_ptr<ClaimCache> cache;

 private:
  std::unique_ptr<JudgeBackend> judge_;
  std::unique_ptr<ExtractorBackend> extractor_;
};

/// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    io::write_file(path, content);
  }
}

std::string jsonl(const std::vector<Json>& records) {
  std::string s;
  for (const auto& r : records) s += r.dump() + "\n";
  return s;
}

/// Records from a JSON array file or a line-delimited file.
std::vector<Json> read_records(const std::string& path) {
  const std::string text = io::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    const Json arr = io::parse(text, path);
    return std::vector<Json>(arr.begin(), arr.end());
  }
  return io::read_jsonl(path);
}

Json forward(Service& service, std::string_view path, const Json& body) {
  const HttpResponse r = service.handle("POST", path, body.dump());
  Json j = io::parse(r.body, "response");
  if (r.status != 200) {
    const Json& e = j.at("error");
    throw Error(Errc::InvalidInput, e.value("field", ""), e.value("message", ""));
  }
  j.erase("schema_version");
  j.erase("request_id");
  return j;
}

Array<double> to_array(const Json& j, std::string_view field, const std::string& path) {
  const auto v = io::get<std::vector<double>>(j, field, path);
  return Eigen::Map<const Array<double>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clinical reward and evaluation engine", "clinrl"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (overrides config and CLINRL_SEED)");
  app.add_flag("--test-doubles", g.test_doubles, "Use offline backends for empty endpoints");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host;
  std::optional<int> port;
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  auto* rubric = app.add_subcommand("score-rubric", "Score samples against a rubric file");
  std::string rubric_file, rubric_in, rubric_sample, rubric_out;
  rubric->add_option("--rubrics", rubric_file, "Clause file")->required()->check(CLI::ExistingFile);
  auto* rubric_in_opt = rubric->add_option("--in", rubric_in, "Samples, one {\"sample\"} record per line");
  rubric->add_option("--sample", rubric_sample, "Single sample text")->excludes(rubric_in_opt);
  rubric->add_option("--out", rubric_out);

  auto* fact = app.add_subcommand("score-fact", "Fact-aware reward over a trajectory file");
  std::string fact_in, fact_out, fact_cases;
  std::optional<double> fact_r_task;
  fact->add_option("--in", fact_in, "Records with response and optional r_task, verdicts")
      ->required()
      ->check(CLI::ExistingFile);
  fact->add_option("--r-task", fact_r_task, "Task reward for records without one")->check(CLI::Range(0.0, 1.0));
  fact->add_option("--cases", fact_cases, "Cases whose known claims seed the offline verifier");
  fact->add_option("--out", fact_out);

  auto* adv = app.add_subcommand("advantage", "Step advantages for rollout groups");
  std::string adv_in, adv_out;
  adv->add_option("--in", adv_in, "One {\"rollouts\"} group per line")->required()->check(CLI::ExistingFile);
  adv->add_option("--out", adv_out);

  auto* prun = app.add_subcommand("pipeline-run", "Run cases through the staged pipeline");
  std::string prun_cases, prun_out;
  prun->add_option("--cases", prun_cases)->required()->check(CLI::ExistingFile);
  prun->add_option("--out", prun_out, "Transcript file")->required();

  auto* sim = app.add_subcommand("simulate", "Scripted physician against the patient simulator");
  std::string sim_cases, sim_case_id, sim_out;
  sim->add_option("--cases", sim_cases)->required()->check(CLI::ExistingFile);
  sim->add_option("--case-id", sim_case_id, "Only this case");
  sim->add_option("--out", sim_out);

  auto* eval = app.add_subcommand("evaluate", "Score transcripts");
  std::string eval_cases, eval_transcripts, eval_report;
  std::size_t eval_bin = 5;
  eval->add_option("--cases", eval_cases)->required()->check(CLI::ExistingFile);
  eval->add_option("--transcripts", eval_transcripts)->required()->check(CLI::ExistingFile);
  eval->add_option("--report", eval_report, "Report file; the summary goes next to it as .txt")->required();
  eval->add_option("--bin-width", eval_bin)->check(CLI::PositiveNumber);

  auto* dist = app.add_subcommand("distill-loss", "Per-sample distillation losses");
  std::string dist_in, dist_out;
  double dist_adv = 0.0, dist_beta = 0.0;
  dist->add_option("--in", dist_in, "Records with student, teacher and optional mask")
      ->required()
      ->check(CLI::ExistingFile);
  dist->add_option("--advantage", dist_adv);
  dist->add_option("--beta", dist_beta)->check(CLI::NonNegativeNumber);
  dist->add_option("--out", dist_out);

  auto* cache = app.add_subcommand("cache", "Inspect or flush the persistent claim cache");
  cache->require_subcommand(1);
  auto* cache_stats = cache->add_subcommand("stats");
  auto* cache_flush = cache->add_subcommand("flush");
  std::string flush_level = "both";
  cache_flush->add_option("--level", flush_level)->check(CLI::IsMember({"l1", "l2", "both"}));

  auto* gen = app.add_subcommand("gen-cases", "Generate synthetic patient cases");
  std::size_t gen_n = 50;
  std::string gen_out;
  gen->add_option("--n", gen_n)->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    EngineConfig config = resolve_config(g);

    if (*gen) {
      std::vector<Json> records;
      for (const auto& c : generate_cases(gen_n, config.seed)) records.push_back(io::to_json(c));
      emit(gen_out, jsonl(records), out);
      return 0;
    }

    if (*serve) {
      if (!host.empty()) config.server.host = host;
      if (port) config.server.port = *port;
      Runtime rt(config);
      ServiceBackends b{&rt.judge(), &rt.extractor(), rt.embedder.get(), rt.cache.get(), nullptr};
      std::unique_ptr<PolicyBackend> policy;
      if (!config.backends.policy.empty()) {
        policy = std::make_unique<HttpPolicy>(config.backends.policy, config.backends.timeout_seconds);
        b.policy = policy.get();
      }
      Service service(config, b);
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      const int bound = service.start(config.server.host, config.server.port);
      err << "listening on " << config.server.host << ":" << bound << "\n";
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      service.stop();
      return 0;
    }

    if (*rubric) {
      const RubricSet set = io::load_rubric_file(rubric_file);
      Json clauses = Json::array();
      for (const auto& c : set.clauses()) clauses.push_back(io::to_json(c));
      std::vector<Json> samples;
      if (!rubric_sample.empty()) {
        samples.push_back({{"sample", rubric_sample}});
      } else if (!rubric_in.empty()) {
        samples = read_records(rubric_in);
      } else {
        err << "error: one of --in or --sample is required\n";
        return 2;
      }
      Runtime rt(config);
      Service service(config, {&rt.judge(), nullptr, nullptr, nullptr, nullptr});
      std::vector<Json> results;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        Json body{{"sample", io::get<std::string>(samples[i], "sample", "[" + std::to_string(i) + "]")},
                  {"clauses", clauses},
                  {"request_id", samples[i].value("id", "sample-" + std::to_string(i))}};
        Json r = forward(service, "/v1/reward/rubric", body);
        r["id"] = body["request_id"];
        results.push_back(std::move(r));
      }
      emit(rubric_out, jsonl(results), out);
      return 0;
    }

    if (*fact) {
      std::unordered_map<std::string, Label> table;
      if (!fact_cases.empty()) table = knowledge_table(io::read_cases(fact_cases));
      Runtime rt(config, std::move(table));
      const FactDeps deps{&rt.extractor(), rt.cache.get(), rt.embedder.get()};
      std::vector<Json> results;
      const auto records = read_records(fact_in);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string path = "[" + std::to_string(i) + "]";
        std::optional<double> r_task = fact_r_task;
        if (records[i].contains("r_task")) r_task = io::get<double>(records[i], "r_task", path);
        if (!r_task) throw Error(Errc::InvalidInput, path + ".r_task", "missing and no --r-task given");
        Json r = score_fact_record(records[i], *r_task, config, deps);
        if (records[i].contains("id")) r["id"] = records[i]["id"];
        results.push_back(std::move(r));
      }
      emit(fact_out, jsonl(results), out);
      return 0;
    }

    if (*adv) {
      Service service(config, {});
      std::vector<Json> results;
      for (const auto& group : read_records(adv_in)) {
        Json r = forward(service, "/v1/advantage/spar", group);
        if (group.contains("id")) r["id"] = group["id"];
        results.push_back(std::move(r));
      }
      emit(adv_out, jsonl(results), out);
      return 0;
    }

    if (*prun) {
      const auto cases = io::read_cases(prun_cases);
      Runtime rt(config, knowledge_table(cases));
      std::unique_ptr<PolicyBackend> http_policy;
      std::unique_ptr<ScriptedPolicy> scripted;
      PipelineRunDeps deps;
      if (!config.backends.policy.empty()) {
        http_policy = std::make_unique<HttpPolicy>(config.backends.policy, config.backends.timeout_seconds);
        deps.policy = http_policy.get();
      } else if (config.backends.allow_test_doubles) {
        scripted = std::make_unique<ScriptedPolicy>(cases, config.seed);
        deps.policy = scripted.get();
        deps.sessions = scripted.get();
      } else {
        throw Error(Errc::ConfigInvalid, "backends.policy", "no endpoint and test doubles disabled");
      }
      EvaluateOptions options;
      options.parallelism = config.parallelism.judge;
      RubricStageVerifier verifier(default_stage_rubrics(), rt.judge(), options);
      deps.verifier = &verifier;
      deps.extractor = &rt.extractor();
      deps.cache = rt.cache.get();
      std::vector<Json> records;
      for (const auto& t : run_pipeline(cases, config, deps)) records.push_back(to_json(t));
      emit(prun_out, jsonl(records), out);
      return 0;
    }

    if (*sim) {
      std::vector<Json> records;
      for (const auto& c : io::read_cases(sim_cases)) {
        if (!sim_case_id.empty() && c.case_id != sim_case_id) continue;
        const SessionView s = run_session(c, config.seed);
        Json pv = Json::array(), sv = Json::array();
        for (const auto& u : s.physician_view) pv.push_back(io::to_json(u));
        for (const auto& u : s.simulator_view) sv.push_back(io::to_json(u));
        records.push_back({{"schema_version", io::kSchemaVersion},
                           {"case_id", c.case_id},
                           {"mode", std::string(to_string(s.mode))},
                           {"variant", std::string(to_string(s.variant))},
                           {"physician_view", pv},
                           {"simulator_view", sv}});
      }
      if (!sim_case_id.empty() && records.empty()) throw Error(Errc::InvalidInput, sim_case_id, "no such case");
      emit(sim_out, jsonl(records), out);
      return 0;
    }

    if (*eval) {
      const auto cases = io::read_cases(eval_cases);
      std::vector<CaseTranscript> transcripts;
      const auto records = io::read_jsonl(eval_transcripts);
      for (std::size_t i = 0; i < records.size(); ++i) {
        transcripts.push_back(transcript_from_json(records[i], "[" + std::to_string(i) + "]"));
      }
      Runtime rt(config);
      EvaluationSettings settings;
      settings.turn_bin_width = eval_bin;
      const EvaluationReport report = evaluate_transcripts(cases, transcripts, rt.judge(), settings);
      io::write_file(eval_report, to_json(report).dump(2) + "\n");
      std::filesystem::path summary(eval_report);
      summary.replace_extension(".txt");
      const std::string text = report_summary(report);
      io::write_file(summary, text);
      out << text;
      return 0;
    }

    if (*dist) {
      std::vector<Json> results;
      const auto records = read_records(dist_in);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string path = "[" + std::to_string(i) + "]";
        TokenLogProbs t =
            TokenLogProbs::unmasked(to_array(records[i], "student", path), to_array(records[i], "teacher", path));
        if (records[i].contains("mask")) {
          const auto m = io::get<std::vector<bool>>(records[i], "mask", path);
          if (static_cast<Eigen::Index>(m.size()) != t.size()) {
            throw Error(Errc::LengthMismatch, path + ".mask");
          }
          for (std::size_t k = 0; k < m.size(); ++k) t.mask(static_cast<Eigen::Index>(k)) = m[k];
        }
        Json r{{"clip_fkl", clip_fkl_loss(t)},
               {"forward_kl", forward_kl_loss(t)},
               {"mopd", mopd_objective(t, dist_adv, dist_beta)}};
        if (records[i].contains("id")) r["id"] = records[i]["id"];
        results.push_back(std::move(r));
      }
      emit(dist_out, jsonl(results), out);
      return 0;
    }

    if (*cache) {
      if (config.cache.directory.empty()) throw Error(Errc::ConfigInvalid, "cache.directory", "not set");
      Runtime rt(config);
      if (*cache_flush) {
        rt.cache->flush(flush_level == "l1" ? FlushLevel::L1 : flush_level == "l2" ? FlushLevel::L2 : FlushLevel::Both);
      }
      (void)cache_stats;
      Json s = io::to_json(rt.cache->stats());
      s["l1_size"] = rt.cache->l1_size();
      s["l2_size"] = rt.cache->l2_size();
      out << s.dump() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace clinrl
