#include "clinrl/service.hpp"

#include <httplib.h>

#include "clinrl/fact_reward.hpp"
#include "clinrl/patient_sim.hpp"
#include "clinrl/spar.hpp"
#include "clinrl/text.hpp"
#include "clinrl/workflow.hpp"

namespace clinrl {

using io::Json;

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::JudgeUnavailable:
    case Errc::JudgeMalformedOutput:
    case Errc::ExtractorUnavailable:
    case Errc::ExtractorMalformedOutput:
    case Errc::VerifierUnavailable:
    case Errc::EmbeddingDimensionMismatch:
    case Errc::PolicyUnavailable:
    case Errc::BackendUnreachable:
      return 502;
    case Errc::ConfigInvalid:
    case Errc::PortUnavailable:
      return 500;
    default:
      return 400;
  }
}

namespace {

HttpResponse json_response(int status, Json body, const std::string& request_id) {
  body["schema_version"] = io::kSchemaVersion;
  body["request_id"] = request_id;
  return {status, body.dump(), "application/json"};
}

HttpResponse error_response(const Error& e, const std::string& request_id) {
  return json_response(http_status(e.code()),
                       {{"error", {{"code", std::string(to_string(e.code()))}, {"field", e.subject()}, {"message", e.what()}}}},
                       request_id);
}

HttpResponse not_found(std::string_view path, const std::string& request_id) {
  return json_response(404, {{"error", {{"code", "NotFound"}, {"field", "path"}, {"message", std::string(path)}}}},
                       request_id);
}

// Runs a handler and converts any failure into a structured error body so one
// request's failure never leaks into another.
template <class F>
HttpResponse guarded(const std::string& request_id, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return error_response(e, request_id);
  } catch (const std::exception& e) {
    return json_response(500, {{"error", {{"code", "Internal"}, {"field", ""}, {"message", e.what()}}}}, request_id);
  }
}

}  // namespace

Json score_fact_record(const Json& record, double r_task, const EngineConfig& config, const FactDeps& deps,
                       std::optional<GateParams> gate) {
  if (!(r_task >= 0.0 && r_task <= 1.0)) throw Error(Errc::InvalidInput, "r_task", "must lie in [0, 1]");
  const auto response = io::get<std::string>(record, "response");

  std::vector<LabeledClaim> labeled;
  Json claims_json = Json::array();
  if (record.contains("verdicts")) {
    // Caller-supplied verdicts bypass extraction and verification.
    const Json& arr = record.at("verdicts");
    if (!arr.is_array()) throw Error(Errc::InvalidInput, "verdicts", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const ClaimVerdict v = io::verdict_from_json(arr[i], "verdicts[" + std::to_string(i) + "]");
      labeled.push_back({AtomicClaim{v.claim_text, {}, i}, v.label});
      claims_json.push_back(io::to_json(v));
    }
  } else {
    if (!deps.extractor || !deps.cache) throw Error(Errc::BackendUnreachable, "fact", "no extractor or cache");
    const auto claims = extract_claims(response, *deps.extractor);
    const auto items = deps.cache->verify_batch(claims);
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i].ok()) {
        const Error& e = *items[i].error;
        throw Error(e.code(), "claims[" + std::to_string(i) + "]", e.detail());
      }
      labeled.push_back({claims[i], items[i].verdict->label});
      claims_json.push_back(io::to_json(*items[i].verdict));
    }
  }
  if (!deps.embedder) throw Error(Errc::BackendUnreachable, "embedder", "no embedder");

  const auto sentences = text::split_sentences(response);
  const auto clusters = cluster_claims(labeled, sentences, *deps.embedder, {config.thresholds.theta_cluster});
  const auto b = fact_aware_reward(r_task, clusters, gate.value_or(config.gate()), config.thresholds.eps_fact);

  Json clusters_json = Json::array();
  for (const auto& c : clusters) {
    Json members = Json::array();
    for (const auto& m : c.members) members.push_back(m.claim.order_index);
    clusters_json.push_back({{"representative", c.rep().claim.text},
                             {"label", std::string(to_string(c.rep().label))},
                             {"saliency", c.saliency},
                             {"members", members}});
  }
  return {{"r_task", b.r_task},
          {"r_fact", b.r_fact},
          {"lambda", b.lambda},
          {"r_total", b.r_total},
          {"cluster_count", b.cluster_count},
          {"claims", claims_json},
          {"clusters", clusters_json}};
}

struct Service::Server {
  httplib::Server http;
};

Service::Service(EngineConfig config, ServiceBackends backends)
    : config_(std::move(config)), backends_(backends), server_(std::make_unique<Server>()) {
  config_.validate();
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    HttpResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  // SO_REUSEADDR only, so a port already in use fails to bind.
  server_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server_->http.Get(".*", forward);
  server_->http.Post(".*", forward);
  const std::size_t threads = config_.server.threads;
  server_->http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
}

Service::~Service() {
  stop();
  std::lock_guard lock(jobs_mutex_);
  for (auto& [id, f] : jobs_) f.wait();
}

std::string Service::next_request_id() { return "req-" + std::to_string(++counter_); }

HttpResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  if (method == "GET") {
    const std::string rid = next_request_id();
    if (path == "/healthz") return {200, "ok", "text/plain"};
    if (path == "/v1/cache/stats") return guarded(rid, [&] { return cache_stats(rid); });
    constexpr std::string_view jobs = "/v1/jobs/";
    if (path.substr(0, jobs.size()) == jobs) return job(std::string(path.substr(jobs.size())));
    return not_found(path, rid);
  }
  if (method != "POST") return not_found(path, next_request_id());

  Json j;
  std::string rid;
  try {
    j = io::parse(body, "body");
    if (!j.is_object()) throw Error(Errc::InvalidInput, "$", "expected a JSON object");
    rid = j.contains("request_id") ? io::get<std::string>(j, "request_id") : next_request_id();
    io::check_schema(j);
  } catch (const Error& e) {
    return error_response(e, rid.empty() ? next_request_id() : rid);
  }

  if (path == "/v1/reward/rubric") return guarded(rid, [&] { return rubric(j, rid); });
  if (path == "/v1/reward/fact") return guarded(rid, [&] { return fact(j, rid); });
  if (path == "/v1/advantage/spar") return guarded(rid, [&] { return spar(j, rid); });
  if (path == "/v1/pipeline/step") return guarded(rid, [&] { return pipeline_step(j, rid); });
  if (path == "/v1/sim/turn") return guarded(rid, [&] { return sim_turn(j, rid); });
  return not_found(path, rid);
}

HttpResponse Service::rubric(const Json& body, const std::string& rid) {
  if (!backends_.judge) throw Error(Errc::JudgeUnavailable, "judge", "no judge backend");
  const auto sample = io::get<std::string>(body, "sample");
  if (!body.contains("clauses")) throw Error(Errc::InvalidInput, "clauses", "missing field");
  RubricSet set = io::rubric_set_from_json(body.at("clauses"));
  if (set.active().empty()) throw Error(Errc::EmptyRubricSet, "clauses", "no active clauses");
  EvaluateOptions options;
  options.parallelism = config_.parallelism.judge;
  options.shadow_candidates = io::get_or<bool>(body, "shadow", false);

  auto work = [this, sample, set = std::move(set), options, rid]() {
    return guarded(rid, [&] {
      const SampleEvaluation ev = evaluate_sample(sample, set, *backends_.judge, options);
      Json decisions = Json::array();
      for (const auto& d : ev.decisions) decisions.push_back(io::to_json(d));
      Json r{{"decisions", decisions}, {"task_reward", ev.task_reward}};
      if (options.shadow_candidates) {
        Json shadow = Json::array();
        for (const auto& d : ev.shadow_decisions) shadow.push_back(io::to_json(d));
        r["shadow_decisions"] = shadow;
      }
      return json_response(200, std::move(r), rid);
    });
  };

  if (!io::get_or<bool>(body, "async", false)) return work();

  // Judging starts on receipt; the caller polls by request id.
  std::lock_guard lock(jobs_mutex_);
  if (jobs_.count(rid)) throw Error(Errc::InvalidInput, "request_id", "already submitted");
  jobs_[rid] = std::async(std::launch::async, std::move(work)).share();
  return json_response(202, {{"status", "pending"}, {"poll", "/v1/jobs/" + rid}}, rid);
}

HttpResponse Service::job(const std::string& id) {
  std::shared_future<HttpResponse> f;
  {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return not_found("/v1/jobs/" + id, id);
    f = it->second;
  }
  if (f.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
    return json_response(202, {{"status", "pending"}}, id);
  }
  return f.get();
}

std::size_t Service::pending_jobs() const {
  std::lock_guard lock(jobs_mutex_);
  std::size_t n = 0;
  for (const auto& [id, f] : jobs_) {
    if (f.wait_for(std::chrono::seconds(0)) != std::future_status::ready) ++n;
  }
  return n;
}

HttpResponse Service::fact(const Json& body, const std::string& rid) {
  if (!backends_.extractor || !backends_.cache || !backends_.embedder) {
    throw Error(Errc::BackendUnreachable, "fact", "fact backends not configured");
  }
  const auto r_task = io::get<double>(body, "r_task");
  GateParams gate = config_.gate();
  if (body.contains("gate")) {
    const Json& g = body.at("gate");
    gate.tau_min = io::get_or<double>(g, "tau_min", gate.tau_min, "gate");
    gate.tau_max = io::get_or<double>(g, "tau_max", gate.tau_max, "gate");
    gate.kappa = io::get_or<double>(g, "kappa", gate.kappa, "gate");
  }
  const FactDeps deps{backends_.extractor, backends_.cache, backends_.embedder};
  return json_response(200, score_fact_record(body, r_task, config_, deps, gate), rid);
}

HttpResponse Service::spar(const Json& body, const std::string& rid) {
  if (!body.contains("rollouts") || !body.at("rollouts").is_array()) {
    throw Error(Errc::InvalidInput, "rollouts", "expected an array");
  }
  const Json& arr = body.at("rollouts");
  std::vector<Rollout> group;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    group.push_back(io::rollout_from_json(arr[i], config_.violations, "rollouts[" + std::to_string(i) + "]"));
  }
  std::vector<double> raw;
  for (const auto& r : group) raw.push_back(r.r_global);
  GroupStats stats;
  try {
    stats = group_stats(std::span<const double>(raw));
  } catch (const Error& e) {
    throw Error(e.code(), "rollouts", e.detail());
  }
  const auto adv = group_advantages(group, config_.thresholds.eps_adv);

  Json out = Json::array();
  for (std::size_t i = 0; i < group.size(); ++i) {
    Json gammas = Json::array();
    for (const auto& s : group[i].steps) gammas.push_back(validity_factor(s.violations));
    out.push_back({{"id", group[i].id},
                   {"gammas", gammas},
                   {"advantages", std::vector<double>(adv[i].data(), adv[i].data() + adv[i].size())}});
  }
  return json_response(
      200,
      {{"group", {{"mu_raw", stats.mu_raw}, {"sigma_raw", stats.sigma_raw}, {"group_size", stats.group_size}}},
       {"rollouts", out}},
      rid);
}

HttpResponse Service::pipeline_step(const Json& body, const std::string& rid) {
  if (!backends_.judge) throw Error(Errc::JudgeUnavailable, "judge", "no judge backend");
  if (!body.contains("context")) throw Error(Errc::InvalidInput, "context", "missing field");
  const StageContext ctx = io::context_from_json(body.at("context"));

  std::map<StageType, RubricSet> rubrics;
  if (body.contains("clauses")) {
    rubrics[ctx.stage] = io::rubric_set_from_json(body.at("clauses"));
  } else {
    rubrics = default_stage_rubrics();
  }
  EvaluateOptions options;
  options.parallelism = config_.parallelism.judge;
  RubricStageVerifier verifier(std::move(rubrics), *backends_.judge, options);

  std::unique_ptr<PolicyBackend> fixed;
  PolicyBackend* policy = backends_.policy;
  if (body.contains("response")) {
    fixed = std::make_unique<FunctionPolicy>(
        [text = io::get<std::string>(body, "response")](const StageContext&) { return text; });
    policy = fixed.get();
  }
  if (!policy) throw Error(Errc::InvalidInput, "response", "required when no policy backend is configured");

  const double tau = config_.stage_thresholds().at(ctx.stage);
  const AdvanceResult r = advance(ctx, *policy, verifier, tau, config_.instructions);
  const char* kind = r.kind == AdvanceResult::Kind::Extended    ? "extended"
                     : r.kind == AdvanceResult::Kind::Completed ? "completed"
                                                                : "discarded";
  return json_response(200,
                       {{"kind", kind},
                        {"score", r.score},
                        {"tau", tau},
                        {"response", r.response},
                        {"context", io::to_json(r.context)}},
                       rid);
}

HttpResponse Service::sim_turn(const Json& body, const std::string& rid) {
  if (!body.contains("case")) throw Error(Errc::InvalidInput, "case", "missing field");
  const PatientCase c = io::case_from_json(body.at("case"), "case");
  std::vector<Utterance> view;
  if (body.contains("simulator_view")) view = io::utterances_from_json(body.at("simulator_view"), "simulator_view");
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view[i].from_snippet) {
      throw Error(Errc::InvalidInput, "simulator_view[" + std::to_string(i) + "]",
                  "snippet content is hidden from the simulator");
    }
  }
  const auto utterance = io::get<std::string>(body, "utterance");
  const Utterance reply = PatientSimulator().respond(c, view, utterance);
  return json_response(200, {{"utterance", io::to_json(reply)}}, rid);
}

HttpResponse Service::cache_stats(const std::string& rid) const {
  if (!backends_.cache) throw Error(Errc::BackendUnreachable, "cache", "no cache configured");
  Json s = io::to_json(backends_.cache->stats());
  s["l1_size"] = backends_.cache->l1_size();
  s["l2_size"] = backends_.cache->l2_size();
  return json_response(200, {{"stats", s}}, rid);
}

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::PortUnavailable, host, "no free port");
  } else if (!server_->http.bind_to_port(host, port)) {
    throw Error(Errc::PortUnavailable, host + ":" + std::to_string(port));
  }
  listener_ = std::thread([this] { server_->http.listen_after_bind(); });
  server_->http.wait_until_ready();
  return bound;
}

void Service::stop() {
  if (server_) server_->http.stop();
  if (listener_.joinable()) listener_.join();
}

void Service::run() {
  if (!server_->http.bind_to_port(config_.server.host, config_.server.port)) {
    throw Error(Errc::PortUnavailable, config_.server.host + ":" + std::to_string(config_.server.port));
  }
  server_->http.listen_after_bind();
}

}  // namespace clinrl
