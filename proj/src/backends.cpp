#include "clinrl/backends.hpp"

#include <httplib.h>

#include <regex>

#include "clinrl/io.hpp"

namespace clinrl {

HttpEndpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(Errc::ConfigInvalid, url, "expected http://host:port/path");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

namespace {

// One client per call keeps backends safe to share between threads.
io::Json post(const HttpEndpoint& ep, int timeout, const io::Json& body, Errc unavailable) {
  httplib::Client client(ep.base);
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  client.set_write_timeout(timeout, 0);
  const auto res = client.Post(ep.path, body.dump(), "application/json");
  if (!res) throw Error(unavailable, ep.base + ep.path, httplib::to_string(res.error()));
  if (res->status != 200) throw Error(unavailable, ep.base + ep.path, "HTTP " + std::to_string(res->status));
  try {
    return io::Json::parse(res->body);
  } catch (const io::Json::parse_error&) {
    throw Error(Errc::BackendUnreachable, ep.base + ep.path, "response is not JSON");
  }
}

}  // namespace

HttpJudge::HttpJudge(const std::string& url, int timeout_seconds)
    : url_(url), endpoint_(parse_endpoint(url)), timeout_(timeout_seconds) {}

std::string HttpJudge::judge(std::string_view prefix, std::string_view suffix) {
  const auto r = post(endpoint_, timeout_, {{"prefix", prefix}, {"suffix", suffix}}, Errc::JudgeUnavailable);
  if (!r.contains("output") || !r.at("output").is_string()) {
    throw Error(Errc::JudgeMalformedOutput, url_, "missing string field 'output'");
  }
  return r.at("output").get<std::string>();
}

HttpVerifier::HttpVerifier(const std::string& url, int timeout_seconds)
    : endpoint_(parse_endpoint(url)), timeout_(timeout_seconds) {}

VerifierResult HttpVerifier::verify(std::string_view claim) {
  const auto r = post(endpoint_, timeout_, {{"claim", claim}}, Errc::VerifierUnavailable);
  try {
    return {label_from_string(r.at("label").get<std::string>()), r.value("note", std::string())};
  } catch (const std::exception& e) {
    throw Error(Errc::VerifierUnavailable, std::string(claim), std::string("malformed verifier reply: ") + e.what());
  }
}

HttpEmbedder::HttpEmbedder(const std::string& url, int timeout_seconds)
    : endpoint_(parse_endpoint(url)), timeout_(timeout_seconds) {
  dimension_ = fetch("dimension probe").size();
  if (dimension_ == 0) throw Error(Errc::BackendUnreachable, url, "embedder returned an empty vector");
}

Embedding HttpEmbedder::fetch(std::string_view text) {
  const auto r = post(endpoint_, timeout_, {{"text", text}}, Errc::BackendUnreachable);
  std::vector<double> v;
  try {
    v = r.at("vector").get<std::vector<double>>();
  } catch (const std::exception&) {
    throw Error(Errc::BackendUnreachable, endpoint_.base + endpoint_.path, "missing numeric array 'vector'");
  }
  Embedding e = Eigen::Map<const Embedding>(v.data(), static_cast<Eigen::Index>(v.size()));
  const double n = e.norm();
  if (n > 0.0) e /= n;
  return e;
}

Embedding HttpEmbedder::embed(std::string_view text) {
  Embedding e = fetch(text);
  if (e.size() != dimension_) {
    throw Error(Errc::EmbeddingDimensionMismatch, std::string(text),
                "expected " + std::to_string(dimension_) + ", got " + std::to_string(e.size()));
  }
  return e;
}

HttpExtractor::HttpExtractor(const std::string& url, int timeout_seconds)
    : endpoint_(parse_endpoint(url)), timeout_(timeout_seconds) {}

std::vector<RawClaim> HttpExtractor::extract(std::string_view response) {
  const auto r = post(endpoint_, timeout_, {{"response", response}}, Errc::ExtractorUnavailable);
  std::vector<RawClaim> out;
  try {
    for (const auto& c : r.at("claims")) {
      out.push_back({c.at("text").get<std::string>(), {c.at("first").get<std::size_t>(), c.at("last").get<std::size_t>()}});
    }
  } catch (const std::exception& e) {
    throw Error(Errc::ExtractorMalformedOutput, endpoint_.base + endpoint_.path, e.what());
  }
  return out;
}

HttpPolicy::HttpPolicy(const std::string& url, int timeout_seconds)
    : endpoint_(parse_endpoint(url)), timeout_(timeout_seconds) {}

std::string HttpPolicy::generate(const StageContext& context) {
  const auto r = post(endpoint_, timeout_, {{"context", io::to_json(context)}}, Errc::PolicyUnavailable);
  if (!r.contains("response") || !r.at("response").is_string()) {
    throw Error(Errc::PolicyUnavailable, context.case_id, "missing string field 'response'");
  }
  return r.at("response").get<std::string>();
}

// ---------------------------------------------------------------------------

namespace {

void require_double(const EngineConfig& c, const char* backend) {
  if (!c.backends.allow_test_doubles) {
    throw Error(Errc::ConfigInvalid, std::string("backends.") + backend,
                "no endpoint configured and test doubles are disabled");
  }
}

}  // namespace

std::unique_ptr<JudgeBackend> make_judge(const EngineConfig& c) {
  if (!c.backends.judge.empty()) return std::make_unique<HttpJudge>(c.backends.judge, c.backends.timeout_seconds);
  require_double(c, "judge");
  return std::make_unique<KeyPhraseJudge>();
}

std::unique_ptr<VerifierBackend> make_verifier(const EngineConfig& c, std::unordered_map<std::string, Label> table) {
  if (!c.backends.verifier.empty()) {
    return std::make_unique<HttpVerifier>(c.backends.verifier, c.backends.timeout_seconds);
  }
  require_double(c, "verifier");
  return std::make_unique<TableVerifier>(std::move(table));
}

std::unique_ptr<EmbeddingBackend> make_embedder(const EngineConfig& c) {
  if (!c.backends.embedder.empty()) {
    return std::make_unique<HttpEmbedder>(c.backends.embedder, c.backends.timeout_seconds);
  }
  require_double(c, "embedder");
  return std::make_unique<HashEmbedder>();
}

std::unique_ptr<ExtractorBackend> make_extractor(const EngineConfig& c) {
  if (!c.backends.extractor.empty()) {
    return std::make_unique<HttpExtractor>(c.backends.extractor, c.backends.timeout_seconds);
  }
  require_double(c, "extractor");
  return std::make_unique<RuleExtractor>();
}

}  // namespace clinrl
