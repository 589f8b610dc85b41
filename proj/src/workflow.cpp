#include "clinrl/workflow.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "clinrl/text.hpp"

namespace clinrl {

ScriptedPolicy::ScriptedPolicy(const std::vector<PatientCase>& cases, std::uint64_t seed) : seed_(seed) {
  for (const auto& c : cases) {
    cases_[c.case_id] = &c;
    ordered_.push_back(&c);
  }
}

const PatientCase& ScriptedPolicy::find(const std::string& case_id) const {
  const auto it = cases_.find(case_id);
  if (it == cases_.end()) throw Error(Errc::PolicyUnavailable, case_id, "unknown case");
  return *it->second;
}

std::optional<SessionView> ScriptedPolicy::session(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(case_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string shifted_code(const std::string& code) {
  if (code.size() > 4) {
    std::string out = code;
    char& last = out.back();
    last = std::isdigit(static_cast<unsigned char>(last)) ? static_cast<char>('0' + (last - '0' + 1) % 10) : '0';
    return out;
  }
  return code + ".0";
}

}  // namespace

std::string ScriptedPolicy::generate(const StageContext& context) {
  const PatientCase& c = find(context.case_id);
  std::mt19937_64 rng(seed_ ^ text::fnv1a(c.case_id) ^ ((stage_index(context.stage) + 1) * 0x9E3779B97F4A7C15ULL));

  switch (context.stage) {
    case StageType::Inq: {
      SessionView s = run_session(c, seed_);
      std::string out = render_view(s.physician_view);
      std::lock_guard lock(mutex_);
      sessions_[c.case_id] = std::move(s);
      return out;
    }
    case StageType::DDX: {
      const PatientCase* other = ordered_[index_draw(rng, ordered_.size())];
      std::string out = "Differential diagnoses: " + c.diagnosis;
      if (other->diagnosis != c.diagnosis) out += ", " + other->diagnosis;
      out += ".";
      for (std::size_t i = 0; i < c.knowledge.size(); ++i) {
        if (i == 0 || unit_draw(rng) < 0.5) out += " " + c.knowledge[i].text;
      }
      return out;
    }
    case StageType::Lab: {
      std::vector<std::string> picks;
      for (const auto& t : c.lab_essential) {
        if (unit_draw(rng) < 0.85) picks.push_back(t);
      }
      for (const auto& t : c.lab_optional) {
        if (unit_draw(rng) < 0.5) picks.push_back(t);
      }
      if (unit_draw(rng) < 0.3) {
        const auto& u = lab_universe();
        const auto& extra = u[index_draw(rng, u.size())];
        if (std::find(picks.begin(), picks.end(), extra) == picks.end()) picks.push_back(extra);
      }
      if (picks.empty() && !c.lab_essential.empty()) picks.push_back(c.lab_essential.front());
      return "Suggested lab tests: " + text::join(picks, ", ") + ".";
    }
    case StageType::Diag: {
      const double u = unit_draw(rng);
      std::string name = c.diagnosis;
      std::string code = c.icd10;
      if (u >= 0.85) {
        const PatientCase* other = ordered_[index_draw(rng, ordered_.size())];
        name = other->diagnosis;
        code = other->icd10;
      } else if (u >= 0.7) {
        code = shifted_code(code);
      }
      return "Final diagnosis: " + name + " (" + code + ").";
    }
  }
  return {};
}

std::map<StageType, RubricSet> default_stage_rubrics() {
  std::map<StageType, RubricSet> r;
  r[StageType::Inq] = RubricSet({
      {"inq.intro", "Introduces themself as \"your physician\"", 4},
      {"inq.age", "Asks \"how old\" the patient is", 2},
      {"inq.onset", "Asks \"when did\" it start", 1},
      {"inq.allergy", "Asks about \"allergies\"", 1},
      {"inq.meds", "Asks about \"medication\"", 1},
      {"inq.duration", "Asks \"how long\" episodes last", 1},
      {"inq.blame", "Says \"your own fault\"", -3},
  });
  r[StageType::DDX] = RubricSet({
      {"ddx.list", "Opens with \"Differential diagnoses:\"", 3},
      {"ddx.followup", "States that the condition \"requires clinical follow-up\"", 1},
      {"ddx.no_labs", "Claims it \"does not require laboratory testing\"", -2},
      {"ddx.gene", "Claims it \"is caused by a single gene\"", -1},
  });
  r[StageType::Lab] = RubricSet({
      {"lab.list", "Opens with \"Suggested lab tests:\"", 3},
      {"lab.cbc", "Includes a \"complete blood count\"", 1},
  });
  r[StageType::Diag] = RubricSet({
      {"diag.final", "States a \"Final diagnosis:\"", 2},
      {"diag.code", "Gives the code in parentheses \"(\"", 1},
  });
  return r;
}

std::unordered_map<std::string, Label> knowledge_table(const std::vector<PatientCase>& cases) {
  std::unordered_map<std::string, Label> t;
  for (const auto& c : cases) {
    for (const auto& k : c.knowledge) t[k.text] = label_from_string(k.label);
  }
  return t;
}

const StageRecord* CaseTranscript::stage(StageType s) const {
  for (const auto& r : stages) {
    if (r.stage == s) return &r;
  }
  return nullptr;
}

io::Json to_json(const CaseTranscript& t) {
  io::Json dialogue = io::Json::array();
  for (const auto& u : t.dialogue) dialogue.push_back(io::to_json(u));
  io::Json stages = io::Json::array();
  for (const auto& s : t.stages) {
    stages.push_back({{"stage", to_string(s.stage)}, {"response", s.response}, {"score", s.score}});
  }
  io::Json verdicts = io::Json::array();
  for (const auto& v : t.verdicts) verdicts.push_back(io::to_json(v));
  return {{"schema_version", io::kSchemaVersion},
          {"case_id", t.case_id},
          {"status", t.status == CaseOutcome::Status::Completed ? "completed" : "discarded"},
          {"last_stage", to_string(t.last_stage)},
          {"dialogue", std::move(dialogue)},
          {"stages", std::move(stages)},
          {"verdicts", std::move(verdicts)}};
}

CaseTranscript transcript_from_json(const io::Json& j, std::string_view path) {
  io::check_schema(j, path);
  const std::string p(path);
  CaseTranscript t;
  t.case_id = io::get<std::string>(j, "case_id", path);
  const auto status = io::get<std::string>(j, "status", path);
  if (status == "completed") t.status = CaseOutcome::Status::Completed;
  else if (status == "discarded") t.status = CaseOutcome::Status::Discarded;
  else throw Error(Errc::InvalidInput, p + ".status", "expected completed or discarded");
  try {
    t.last_stage = stage_from_string(io::get<std::string>(j, "last_stage", path));
  } catch (const Error& e) {
    throw Error(Errc::InvalidInput, p + ".last_stage", e.detail());
  }
  if (j.contains("dialogue")) t.dialogue = io::utterances_from_json(j.at("dialogue"), p + ".dialogue");
  if (j.contains("stages")) {
    const auto& arr = j.at("stages");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string sp = p + ".stages[" + std::to_string(i) + "]";
      StageRecord r;
      try {
        r.stage = stage_from_string(io::get<std::string>(arr[i], "stage", sp));
      } catch (const Error& e) {
        throw Error(Errc::InvalidInput, sp + ".stage", e.detail());
      }
      r.response = io::get<std::string>(arr[i], "response", sp);
      r.score = io::get<double>(arr[i], "score", sp);
      t.stages.push_back(std::move(r));
    }
  }
  if (j.contains("verdicts")) {
    const auto& arr = j.at("verdicts");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      t.verdicts.push_back(io::verdict_from_json(arr[i], p + ".verdicts[" + std::to_string(i) + "]"));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

std::vector<CaseTranscript> run_pipeline(const std::vector<PatientCase>& cases, const EngineConfig& config,
                                         const PipelineRunDeps& deps) {
  if (!deps.policy || !deps.verifier) throw Error(Errc::InvalidInput, "pipeline", "policy and verifier required");

  PipelineConfig pc;
  pc.instructions = config.instructions;
  pc.thresholds = config.stage_thresholds();
  pc.slots = config.parallelism.slots;
  pc.parallelism = config.parallelism.pipeline;
  PipelineRunner runner(pc, *deps.policy, *deps.verifier);
  for (const auto& c : cases) runner.inject(c.case_id, "Patient presents with " + c.chief_complaint + ".");
  runner.run_to_completion();

  std::unordered_map<std::string, const CaseOutcome*> by_id;
  for (const auto& o : runner.outcomes()) by_id[o.case_id] = &o;

  std::vector<CaseTranscript> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    const CaseOutcome& o = *by_id.at(c.case_id);
    CaseTranscript t;
    t.case_id = c.case_id;
    t.status = o.status;
    t.last_stage = o.last_stage;
    std::size_t k = 0;
    for (const auto& seg : o.context.history) {
      if (seg.origin != Origin::Generated) continue;
      t.stages.push_back({kStages[k], seg.text, o.context.stage_scores.at(k)});
      ++k;
    }
    if (deps.sessions) {
      if (auto s = deps.sessions->session(c.case_id)) t.dialogue = std::move(s->physician_view);
    }
    if (const StageRecord* ddx = t.stage(StageType::DDX); ddx && deps.extractor && deps.cache) {
      const auto claims = extract_claims(ddx->response, *deps.extractor);
      for (auto& item : deps.cache->verify_batch(claims)) {
        if (item.ok()) t.verdicts.push_back(std::move(*item.verdict));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

EvaluationReport evaluate_transcripts(const std::vector<PatientCase>& cases,
                                      const std::vector<CaseTranscript>& transcripts, JudgeBackend& judge,
                                      const EvaluationSettings& settings) {
  std::unordered_map<std::string, const PatientCase*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;
  const ScanScorer scorer(ScanScorer::default_rubrics(), judge);

  EvaluationReport r;
  std::vector<ClaimVerdict> pooled;
  std::vector<SessionScores> sessions;
  for (const auto& t : transcripts) {
    const auto it = by_id.find(t.case_id);
    if (it == by_id.end()) throw Error(Errc::InvalidInput, t.case_id, "transcript refers to an unknown case");
    const PatientCase& c = *it->second;

    CaseEvaluation e;
    e.case_id = c.case_id;
    e.department = c.department;
    e.status = t.status == CaseOutcome::Status::Completed ? "completed" : "discarded";
    for (const auto& u : t.dialogue) {
      if (u.role == Role::Physician && !u.from_snippet) ++e.turns;
    }
    const FactTraceMatcher matcher(c);
    e.coverage = inquiry_coverage(c.checklist, t.dialogue, matcher, settings.coverage, &scorer);

    LabSelection sel;
    sel.essential.insert(c.lab_essential.begin(), c.lab_essential.end());
    sel.optional_tests.insert(c.lab_optional.begin(), c.lab_optional.end());
    if (const StageRecord* lab = t.stage(StageType::Lab)) sel.selected = parse_lab_selection(lab->response, lab_universe());
    sel.validate(lab_universe());
    e.lab = lab_f1(sel, settings.lab);

    if (const StageRecord* diag = t.stage(StageType::Diag); diag && !c.icd10.empty()) {
      if (const auto code = find_icd10(diag->response)) {
        e.predicted_icd10 = code->code();
        e.diagnosis = diagnosis_match(*code, DiagnosisCode(c.icd10));
      }
    }

    e.claims = t.verdicts.size();
    if (!t.verdicts.empty()) e.hallucination = hallucination_rate(std::span<const ClaimVerdict>(t.verdicts));
    pooled.insert(pooled.end(), t.verdicts.begin(), t.verdicts.end());

    SessionScores s{e.turns, {{"inquiry", e.coverage.total}}};
    for (const auto& [dim, v] : e.coverage.scan) s.scores[std::string(to_string(dim))] = v;
    sessions.push_back(std::move(s));
    r.cases.push_back(std::move(e));
  }

  if (!r.cases.empty()) {
    const double n = static_cast<double>(r.cases.size());
    for (const auto& e : r.cases) {
      r.inquiry += e.coverage.total;
      r.lab += e.lab.f1;
      r.diagnosis += e.diagnosis;
      for (const auto& [dim, v] : e.coverage.scan) r.scan[dim] += v;
    }
    r.inquiry /= n;
    r.lab /= n;
    r.diagnosis /= n;
    for (auto& [dim, v] : r.scan) v /= n;
  }
  r.claims = pooled.size();
  if (!pooled.empty()) r.hallucination = hallucination_rate(std::span<const ClaimVerdict>(pooled));
  if (sessions.size() >= 10) r.turn_bins = turn_bin_report(sessions, settings.turn_bin_width);
  return r;
}

namespace {

io::Json bin_json(const TurnBin& b) { return {{"turns", b.turns}, {"count", b.count}, {"means", b.means}}; }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

io::Json to_json(const EvaluationReport& r) {
  io::Json cases = io::Json::array();
  for (const auto& e : r.cases) {
    io::Json scan = io::Json::object();
    for (const auto& [d, v] : e.coverage.scan) scan[std::string(to_string(d))] = v;
    io::Json cats = io::Json::object();
    for (const auto& [c, v] : e.coverage.by_category) cats[std::string(to_string(c))] = v;
    cases.push_back({{"case_id", e.case_id},
                     {"department", e.department},
                     {"status", e.status},
                     {"turns", e.turns},
                     {"inquiry", {{"total", e.coverage.total},
                                  {"covered", e.coverage.covered},
                                  {"items", e.coverage.items},
                                  {"by_category", cats}}},
                     {"scan", scan},
                     {"lab", {{"weighted_recall", e.lab.weighted_recall},
                              {"precision", e.lab.precision},
                              {"f1", e.lab.f1}}},
                     {"diagnosis", {{"score", e.diagnosis}, {"predicted", e.predicted_icd10}}},
                     {"claims", e.claims},
                     {"hallucination", e.hallucination ? io::Json(*e.hallucination) : io::Json(nullptr)}});
  }
  io::Json scan = io::Json::object();
  for (const auto& [d, v] : r.scan) scan[std::string(to_string(d))] = v;
  io::Json bins = nullptr;
  if (r.turn_bins) {
    io::Json kept = io::Json::array();
    io::Json dropped = io::Json::array();
    for (const auto& b : r.turn_bins->retained) kept.push_back(bin_json(b));
    for (const auto& b : r.turn_bins->dropped) dropped.push_back(bin_json(b));
    bins = {{"total", r.turn_bins->total}, {"retained", kept}, {"dropped", dropped}};
  }
  return {{"schema_version", io::kSchemaVersion},
          {"stations", {{"inquiry", r.inquiry}, {"lab", r.lab}, {"diagnosis", r.diagnosis}}},
          {"scan", scan},
          {"hallucination", {{"rate", r.hallucination ? io::Json(*r.hallucination) : io::Json(nullptr)},
                             {"claims", r.claims}}},
          {"turn_bins", bins},
          {"cases", cases}};
}

std::string report_summary(const EvaluationReport& r) {
  std::string s;
  s += "cases: " + std::to_string(r.cases.size()) + "\n";
  s += "inquiry: " + fixed(r.inquiry) + "\n";
  s += "lab f1: " + fixed(r.lab) + "\n";
  s += "diagnosis: " + fixed(r.diagnosis) + "\n";
  for (const auto& [d, v] : r.scan) s += std::string(to_string(d)) + ": " + fixed(v) + "\n";
  s += "hallucination rate: " + (r.hallucination ? fixed(*r.hallucination) : std::string("n/a")) + " over " +
       std::to_string(r.claims) + " claims\n";
  if (r.turn_bins) {
    s += "turn bins (retained):\n";
    for (const auto& b : r.turn_bins->retained) {
      s += "  " + std::to_string(b.turns) + "+ turns, n=" + std::to_string(b.count) +
           ", inquiry=" + fixed(b.means.count("inquiry") ? b.means.at("inquiry") : 0.0) + "\n";
    }
    s += "turn bins dropped: " + std::to_string(r.turn_bins->dropped.size()) + "\n";
  } else {
    s += "turn bins: n/a (fewer than 10 sessions)\n";
  }
  return s;
}

}  // namespace clinrl
