#pragma once

#include <memory>
#include <string>
#include <unordered_map>

#include "clinrl/claims.hpp"
#include "clinrl/config.hpp"
#include "clinrl/embedding.hpp"
#include "clinrl/pipeline.hpp"
#include "clinrl/rubric.hpp"
#include "clinrl/verify_cache.hpp"

namespace clinrl {

/// "http://host:port/path" split into the client base and request path.
struct HttpEndpoint {
  std::string base;
  std::string path;
};

HttpEndpoint parse_endpoint(const std::string& url);

/// POST {"prefix", "suffix"} -> {"output"}.
class HttpJudge final : public JudgeBackend {
 public:
  HttpJudge(const std::string& url, int timeout_seconds);
  std::string id() const override { return "http:" + url_; }
  std::string judge(std::string_view prefix, std::string_view suffix) override;

 private:
  std::string url_;
  HttpEndpoint endpoint_;
  int timeout_;
};

/// POST {"claim"} -> {"label", "note"}.
class HttpVerifier final : public VerifierBackend {
 public:
  HttpVerifier(const std::string& url, int timeout_seconds);
  VerifierResult verify(std::string_view claim) override;

 private:
  HttpEndpoint endpoint_;
  int timeout_;
};

/// POST {"text"} -> {"vector"}. The dimension is probed once at construction.
class HttpEmbedder final : public EmbeddingBackend {
 public:
  HttpEmbedder(const std::string& url, int timeout_seconds);
  Eigen::Index dimension() const override { return dimension_; }
  Embedding embed(std::string_view text) override;

 private:
  Embedding fetch(std::string_view text);

  HttpEndpoint endpoint_;
  int timeout_;
  Eigen::Index dimension_ = 0;
};

/// POST {"response"} -> {"claims": [{"text", "first", "last"}]}.
class HttpExtractor final : public ExtractorBackend {
 public:
  HttpExtractor(const std::string& url, int timeout_seconds);
  std::vector<RawClaim> extract(std::string_view response) override;

 private:
  HttpEndpoint endpoint_;
  int timeout_;
};

/// POST {"context"} -> {"response"}.
class HttpPolicy final : public PolicyBackend {
 public:
  HttpPolicy(const std::string& url, int timeout_seconds);
  std::string generate(const StageContext& context) override;

 private:
  HttpEndpoint endpoint_;
  int timeout_;
};

/// Backend factories. An empty endpoint yields the offline test double when
/// the config allows it and ConfigInvalid otherwise.
std::unique_ptr<JudgeBackend> make_judge(const EngineConfig& config);
std::unique_ptr<VerifierBackend> make_verifier(const EngineConfig& config,
                                               std::unordered_map<std::string, Label> table = {});
std::unique_ptr<EmbeddingBackend> make_embedder(const EngineConfig& config);
std::unique_ptr<ExtractorBackend> make_extractor(const EngineConfig& config);

}  // namespace clinrl
