#include "clinrl/io.hpp"

#include <fstream>
#include <sstream>

#include "clinrl/text.hpp"

namespace clinrl::io {

namespace {

std::string at_index(std::string_view path, std::size_t i) {
  return std::string(path) + "[" + std::to_string(i) + "]";
}

std::string join_path(std::string_view path, std::string_view field) {
  return path.empty() ? std::string(field) : std::string(path) + "." + std::string(field);
}

const Json& array_field(const Json& j, std::string_view field, std::string_view path) {
  const auto where = join_path(path, field);
  if (!j.is_object() || !j.contains(field)) throw Error(Errc::InvalidInput, where, "missing field");
  const Json& a = j.at(std::string(field));
  if (!a.is_array()) throw Error(Errc::InvalidInput, where, "expected an array");
  return a;
}

std::vector<std::string> strings_or_empty(const Json& j, std::string_view field, std::string_view path) {
  if (!j.contains(field)) return {};
  return get<std::vector<std::string>>(j, field, path);
}

}  // namespace

void check_schema(const Json& j, std::string_view path) {
  if (j.is_object() && j.contains("schema_version")) {
    const int v = get<int>(j, "schema_version", path);
    if (v != kSchemaVersion) {
      throw Error(Errc::InvalidInput, join_path(path, "schema_version"), "unsupported version " + std::to_string(v));
    }
  }
}

Json parse(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidInput, std::string(what), e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidInput, path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::InvalidInput, path.string(), "cannot write file");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::InvalidInput, path.string(), "write failed");
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidInput, path.string(), "cannot open file");
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    Json j = parse(line, path.filename().string() + ":" + std::to_string(n));
    check_schema(j, path.filename().string() + ":" + std::to_string(n));
    out.push_back(std::move(j));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::string body;
  for (const auto& r : records) {
    body += r.dump();
    body += '\n';
  }
  write_file(path, body);
}

// ---------------------------------------------------------------------------

Json to_json(const Utterance& u) {
  Json j{{"role", to_string(u.role)}, {"text", u.text}};
  if (!u.fact_ids.empty()) j["fact_ids"] = u.fact_ids;
  if (u.from_snippet) j["from_snippet"] = true;
  return j;
}

Utterance utterance_from_json(const Json& j, std::string_view path) {
  Utterance u;
  const auto role = get<std::string>(j, "role", path);
  try {
    u.role = role_from_string(role);
  } catch (const Error& e) {
    throw Error(Errc::InvalidInput, join_path(path, "role"), e.detail());
  }
  u.text = get<std::string>(j, "text", path);
  u.fact_ids = strings_or_empty(j, "fact_ids", path);
  u.from_snippet = get_or<bool>(j, "from_snippet", false, path);
  return u;
}

std::vector<Utterance> utterances_from_json(const Json& j, std::string_view path) {
  if (!j.is_array()) throw Error(Errc::InvalidInput, std::string(path), "expected an array");
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(utterance_from_json(j[i], at_index(path, i)));
  return out;
}

Json to_json(const PatientCase& c) {
  Json profile = Json::array();
  for (const auto& f : c.profile) {
    Json fj{{"id", f.id}, {"keywords", f.keywords}, {"value", f.value}, {"statement", f.statement},
            {"question", f.question}};
    if (!f.checklist_id.empty()) fj["checklist_id"] = f.checklist_id;
    if (f.demographic) fj["demographic"] = true;
    profile.push_back(std::move(fj));
  }
  Json checklist = Json::array();
  for (const auto& item : c.checklist) {
    checklist.push_back({{"id", item.id}, {"category", to_string(item.category)}, {"level", to_string(item.level)}});
  }
  Json snippet = Json::array();
  for (const auto& u : c.snippet) snippet.push_back(to_json(u));
  Json knowledge = Json::array();
  for (const auto& k : c.knowledge) knowledge.push_back({{"text", k.text}, {"label", k.label}});

  Json j{{"schema_version", kSchemaVersion},
         {"case_id", c.case_id},
         {"department", c.department},
         {"chief_complaint", c.chief_complaint},
         {"profile", std::move(profile)},
         {"checklist", std::move(checklist)},
         {"behavior_constraints", c.behavior_constraints},
         {"lab_essential", c.lab_essential},
         {"lab_optional", c.lab_optional},
         {"diagnosis", c.diagnosis},
         {"icd10", c.icd10},
         {"knowledge", std::move(knowledge)}};
  if (!c.snippet.empty()) {
    j["snippet"] = std::move(snippet);
    j["snippet_injection"] = to_string(c.snippet_injection.value_or(InjectionVariant::EndOfTurn));
  }
  return j;
}

PatientCase case_from_json(const Json& j, std::string_view path) {
  check_schema(j, path);
  PatientCase c;
  c.case_id = get<std::string>(j, "case_id", path);
  c.department = get_or<std::string>(j, "department", "", path);
  c.chief_complaint = get_or<std::string>(j, "chief_complaint", "", path);

  const auto profile_path = join_path(path, "profile");
  const Json& profile = array_field(j, "profile", path);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const auto p = at_index(profile_path, i);
    const Json& fj = profile[i];
    ProfileFact f;
    f.id = get<std::string>(fj, "id", p);
    f.checklist_id = get_or<std::string>(fj, "checklist_id", "", p);
    f.keywords = get<std::vector<std::string>>(fj, "keywords", p);
    f.value = get<std::string>(fj, "value", p);
    f.statement = get_or<std::string>(fj, "statement", f.value, p);
    f.question = get_or<std::string>(fj, "question", "", p);
    f.demographic = get_or<bool>(fj, "demographic", false, p);
    c.profile.push_back(std::move(f));
  }

  const auto checklist_path = join_path(path, "checklist");
  const Json& checklist = array_field(j, "checklist", path);
  for (std::size_t i = 0; i < checklist.size(); ++i) {
    const auto p = at_index(checklist_path, i);
    ChecklistItem item;
    item.id = get<std::string>(checklist[i], "id", p);
    try {
      item.category = category_from_string(get<std::string>(checklist[i], "category", p));
      item.level = level_from_string(get<std::string>(checklist[i], "level", p));
    } catch (const Error& e) {
      throw Error(Errc::InvalidInput, p, e.detail());
    }
    c.checklist.push_back(std::move(item));
  }

  c.behavior_constraints = strings_or_empty(j, "behavior_constraints", path);
  if (j.contains("snippet")) {
    c.snippet = utterances_from_json(j.at("snippet"), join_path(path, "snippet"));
    try {
      c.snippet_injection = variant_from_string(get_or<std::string>(j, "snippet_injection", "EndOfTurn", path));
    } catch (const Error& e) {
      throw Error(Errc::InvalidInput, join_path(path, "snippet_injection"), e.detail());
    }
    if (!c.snippet.empty() && c.snippet.back().role != Role::Patient) {
      throw Error(Errc::InvalidInput, join_path(path, "snippet"), "must end with a patient utterance");
    }
  }
  c.lab_essential = strings_or_empty(j, "lab_essential", path);
  c.lab_optional = strings_or_empty(j, "lab_optional", path);
  c.diagnosis = get_or<std::string>(j, "diagnosis", "", path);
  c.icd10 = get_or<std::string>(j, "icd10", "", path);
  if (j.contains("knowledge")) {
    const auto kp = join_path(path, "knowledge");
    const Json& k = array_field(j, "knowledge", path);
    for (std::size_t i = 0; i < k.size(); ++i) {
      c.knowledge.push_back({get<std::string>(k[i], "text", at_index(kp, i)),
                             get<std::string>(k[i], "label", at_index(kp, i))});
    }
  }
  return c;
}

std::vector<PatientCase> read_cases(const std::filesystem::path& path) {
  std::vector<PatientCase> out;
  const auto records = read_jsonl(path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(case_from_json(records[i], path.filename().string() + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// ---------------------------------------------------------------------------

Json to_json(const RubricClause& c) {
  return {{"id", c.id()},
          {"text", c.text()},
          {"weight", c.weight()},
          {"kind", to_string(c.kind())},
          {"lifecycle", to_string(c.lifecycle())}};
}

RubricClause clause_from_json(const Json& j, std::string_view path) {
  const auto id = get<std::string>(j, "id", path);
  const auto text = get<std::string>(j, "text", path);
  const auto weight = get<int>(j, "weight", path);
  const auto kind_s = text::to_lower(get_or<std::string>(j, "kind", "core", path));
  const auto state_s = text::to_lower(get_or<std::string>(j, "lifecycle", "active", path));

  ClauseKind kind;
  if (kind_s == "core") kind = ClauseKind::Core;
  else if (kind_s == "dynamic") kind = ClauseKind::Dynamic;
  else throw Error(Errc::InvalidInput, join_path(path, "kind"), "expected core or dynamic");

  Lifecycle state;
  if (state_s == "candidate") state = Lifecycle::Candidate;
  else if (state_s == "active") state = Lifecycle::Active;
  else if (state_s == "retired") state = Lifecycle::Retired;
  else throw Error(Errc::InvalidInput, join_path(path, "lifecycle"), "expected candidate, active or retired");

  try {
    return RubricClause(id, text, weight, kind, state);
  } catch (const Error& e) {
    const auto field = e.code() == Errc::InvalidWeight ? "weight" : "lifecycle";
    throw Error(e.code(), join_path(path, field), e.detail());
  }
}

RubricSet rubric_set_from_json(const Json& clauses, std::string_view path) {
  if (!clauses.is_array()) throw Error(Errc::InvalidInput, std::string(path), "expected an array");
  RubricSet set;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    RubricClause c = clause_from_json(clauses[i], at_index(path, i));
    try {
      set.add(std::move(c));
    } catch (const Error& e) {
      throw Error(Errc::InvalidInput, at_index(path, i) + ".id", e.detail());
    }
  }
  return set;
}

RubricSet load_rubric_file(const std::filesystem::path& path) {
  const std::string body = read_file(path);
  const auto first = body.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && body[first] == '[') return rubric_set_from_json(parse(body, path.string()), "clauses");
  Json arr = Json::array();
  for (auto& r : read_jsonl(path)) arr.push_back(std::move(r));
  return rubric_set_from_json(arr, "clauses");
}

Json to_json(const JudgeDecision& d) {
  return {{"clause_id", d.clause_id}, {"satisfied", d.satisfied}, {"judge_id", d.judge_id}};
}

// ---------------------------------------------------------------------------

Json to_json(const StageContext& c) {
  Json history = Json::array();
  for (const auto& s : c.history) history.push_back({{"text", s.text}, {"origin", to_string(s.origin)}});
  Json j{{"case_id", c.case_id}, {"stage", to_string(c.stage)}, {"history", std::move(history)},
         {"stage_scores", c.stage_scores}};
  j["quality_score"] = c.quality_score ? Json(*c.quality_score) : Json(nullptr);
  return j;
}

StageContext context_from_json(const Json& j, std::string_view path) {
  StageContext c;
  c.case_id = get<std::string>(j, "case_id", path);
  try {
    c.stage = stage_from_string(get<std::string>(j, "stage", path));
  } catch (const Error& e) {
    throw Error(Errc::InvalidInput, join_path(path, "stage"), e.detail());
  }
  const auto hp = join_path(path, "history");
  const Json& history = array_field(j, "history", path);
  for (std::size_t i = 0; i < history.size(); ++i) {
    Segment s;
    s.text = get<std::string>(history[i], "text", at_index(hp, i));
    try {
      s.origin = origin_from_string(get_or<std::string>(history[i], "origin", "input", at_index(hp, i)));
    } catch (const Error& e) {
      throw Error(Errc::InvalidInput, at_index(hp, i) + ".origin", e.detail());
    }
    c.history.push_back(std::move(s));
  }
  if (j.contains("quality_score") && !j.at("quality_score").is_null()) {
    c.quality_score = get<double>(j, "quality_score", path);
  }
  if (j.contains("stage_scores")) c.stage_scores = get<std::vector<double>>(j, "stage_scores", path);
  return c;
}

Json to_json(const ClaimVerdict& v) {
  Json j{{"claim", v.claim_text},
         {"label", to_string(v.label)},
         {"provenance", {{"level", to_string(v.provenance.level)}, {"similarity", v.provenance.similarity}}}};
  if (v.evidence_note) j["evidence_note"] = *v.evidence_note;
  return j;
}

ClaimVerdict verdict_from_json(const Json& j, std::string_view path) {
  ClaimVerdict v;
  v.claim_text = get<std::string>(j, "claim", path);
  try {
    v.label = label_from_string(get<std::string>(j, "label", path));
  } catch (const Error& e) {
    throw Error(Errc::InvalidInput, join_path(path, "label"), e.detail());
  }
  if (j.contains("provenance")) {
    const auto pp = join_path(path, "provenance");
    const auto level = get<std::string>(j.at("provenance"), "level", pp);
    if (level == "L1Exact") v.provenance.level = CacheLevel::L1Exact;
    else if (level == "L2Semantic") v.provenance.level = CacheLevel::L2Semantic;
    else if (level == "External") v.provenance.level = CacheLevel::External;
    else throw Error(Errc::InvalidInput, pp + ".level", "unknown cache level");
    v.provenance.similarity = get_or<double>(j.at("provenance"), "similarity", 1.0, pp);
  }
  if (j.contains("evidence_note")) v.evidence_note = get<std::string>(j, "evidence_note", path);
  return v;
}

Json to_json(const CacheStats& s) {
  return {{"lookups", s.lookups},
          {"l1_hits", s.l1_hits},
          {"l2_hits", s.l2_hits},
          {"external_calls", s.external_calls},
          {"hit_rate", s.hit_rate()}};
}

// ---------------------------------------------------------------------------

InteractionStep step_from_json(const Json& j, const ViolationTaxonomy& taxonomy, std::string_view path) {
  InteractionStep s;
  s.user_turn = get_or<std::string>(j, "user_turn", "", path);
  s.assistant_turn = get_or<std::string>(j, "assistant_turn", "", path);
  const auto names = strings_or_empty(j, "violations", path);
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      s.violations.push_back(taxonomy.at(names[i]));
    } catch (const Error& e) {
      throw Error(e.code(), at_index(join_path(path, "violations"), i), e.detail());
    }
  }
  return s;
}

Rollout rollout_from_json(const Json& j, const ViolationTaxonomy& taxonomy, std::string_view path) {
  Rollout r;
  r.id = get_or<std::string>(j, "id", "", path);
  r.r_global = get<double>(j, "reward", path);
  const auto sp = join_path(path, "steps");
  const Json& steps = array_field(j, "steps", path);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    r.steps.push_back(step_from_json(steps[i], taxonomy, at_index(sp, i)));
    r.steps.back().index = i;
  }
  return r;
}

}  // namespace clinrl::io
