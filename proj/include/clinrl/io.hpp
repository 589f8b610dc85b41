#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clinrl/case.hpp"
#include "clinrl/error.hpp"
#include "clinrl/pipeline.hpp"
#include "clinrl/rubric.hpp"
#include "clinrl/spar.hpp"
#include "clinrl/verify_cache.hpp"

namespace clinrl::io {

using Json = nlohmann::json;

constexpr int kSchemaVersion = 1;

/// Required field. Missing or mistyped fields raise InvalidInput with the
/// field path as subject.
template <class T>
T get(const Json& j, std::string_view field, std::string_view path = {}) {
  const std::string where = path.empty() ? std::string(field) : std::string(path) + "." + std::string(field);
  if (!j.is_object()) throw Error(Errc::InvalidInput, std::string(path.empty() ? "$" : path), "expected an object");
  const auto it = j.find(field);
  if (it == j.end()) throw Error(Errc::InvalidInput, where, "missing field");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::InvalidInput, where, "wrong type");
  }
}

template <class T>
T get_or(const Json& j, std::string_view field, T fallback, std::string_view path = {}) {
  if (!j.is_object() || !j.contains(field) || j.at(std::string(field)).is_null()) return fallback;
  return get<T>(j, field, path);
}

/// Rejects records whose schema_version is present and not 1.
void check_schema(const Json& j, std::string_view path = {});

Json parse(std::string_view text, std::string_view what = "body");

std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

Json to_json(const Utterance& u);
Utterance utterance_from_json(const Json& j, std::string_view path = {});
std::vector<Utterance> utterances_from_json(const Json& j, std::string_view path);

Json to_json(const PatientCase& c);
PatientCase case_from_json(const Json& j, std::string_view path = {});
std::vector<PatientCase> read_cases(const std::filesystem::path& path);

Json to_json(const RubricClause& c);
RubricClause clause_from_json(const Json& j, std::string_view path = {});
RubricSet rubric_set_from_json(const Json& clauses, std::string_view path = "clauses");
/// JSON array of clauses, or JSONL with one clause per line.
RubricSet load_rubric_file(const std::filesystem::path& path);

Json to_json(const JudgeDecision& d);

Json to_json(const StageContext& c);
StageContext context_from_json(const Json& j, std::string_view path = "context");

Json to_json(const ClaimVerdict& v);
ClaimVerdict verdict_from_json(const Json& j, std::string_view path = {});

Json to_json(const CacheStats& s);

/// Violations are given by name and resolved through the taxonomy.
InteractionStep step_from_json(const Json& j, const ViolationTaxonomy& taxonomy, std::string_view path = {});
Rollout rollout_from_json(const Json& j, const ViolationTaxonomy& taxonomy, std::string_view path = {});

}  // namespace clinrl::io
