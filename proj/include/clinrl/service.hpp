#pragma once

#include <atomic>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "clinrl/claims.hpp"
#include "clinrl/config.hpp"
#include "clinrl/embedding.hpp"
#include "clinrl/fact_reward.hpp"
#include "clinrl/io.hpp"
#include "clinrl/pipeline.hpp"
#include "clinrl/rubric.hpp"
#include "clinrl/verify_cache.hpp"

namespace clinrl {

struct ServiceBackends {
  JudgeBackend* judge = nullptr;
  ExtractorBackend* extractor = nullptr;
  EmbeddingBackend* embedder = nullptr;
  ClaimCache* cache = nullptr;
  /// Used by /v1/pipeline/step when the request carries no response.
  PolicyBackend* policy = nullptr;
};

struct FactDeps {
  ExtractorBackend* extractor = nullptr;
  ClaimCache* cache = nullptr;
  EmbeddingBackend* embedder = nullptr;
};

/// Fact-aware reward breakdown for one {"response", optional "verdicts"}
/// record. Without verdicts the response is extracted and verified through
/// the cache; a failing claim raises with field "claims[i]".
io::Json score_fact_record(const io::Json& record, double r_task, const EngineConfig& config, const FactDeps& deps,
                           std::optional<GateParams> gate = std::nullopt);

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// HTTP status for an engine error: 400 for caller mistakes, 502 for
/// backend failures, 500 otherwise.
int http_status(Errc code) noexcept;

/// Request routing independent of the network layer. Every JSON response
/// carries schema_version and the request id; callers correlate by id since
/// asynchronous jobs may finish in any order.
class Service {
 public:
  Service(EngineConfig config, ServiceBackends backends);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body);

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws PortUnavailable.
  int start(const std::string& host, int port);
  void stop();
  /// Serves on the configured host and port until stopped.
  void run();

  /// Rubric jobs submitted asynchronously and not yet finished.
  std::size_t pending_jobs() const;

 private:
  struct Server;

  HttpResponse rubric(const io::Json& body, const std::string& request_id);
  HttpResponse fact(const io::Json& body, const std::string& request_id);
  HttpResponse spar(const io::Json& body, const std::string& request_id);
  HttpResponse pipeline_step(const io::Json& body, const std::string& request_id);
  HttpResponse sim_turn(const io::Json& body, const std::string& request_id);
  HttpResponse cache_stats(const std::string& request_id) const;
  HttpResponse job(const std::string& id);

  std::string next_request_id();

  EngineConfig config_;
  ServiceBackends backends_;
  std::atomic<std::uint64_t> counter_{0};
  mutable std::mutex jobs_mutex_;
  std::map<std::string, std::shared_future<HttpResponse>> jobs_;
  std::unique_ptr<Server> server_;
  std::thread listener_;
};

}  // namespace clinrl
