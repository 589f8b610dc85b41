#include "clinrl/eval.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "clinrl/error.hpp"
#include "clinrl/text.hpp"

namespace clinrl {

std::string_view to_string(ScanDimension d) noexcept {
  switch (d) {
    case ScanDimension::SafetyStratification: return "SafetyStratification";
    case ScanDimension::InformationClarification: return "InformationClarification";
    case ScanDimension::AssociativeQuestioning: return "AssociativeQuestioning";
    case ScanDimension::NormativeOutput: return "NormativeOutput";
  }
  return "SafetyStratification";
}

bool is_excluded_utterance(const Utterance& u, const PatientCase& c) {
  if (u.role == Role::Physician) {
    static const std::regex intro(R"((\bi am dr\b|\bi'm dr\b|\bmy name is\b|\bi will be your (doctor|physician)\b))",
                                  std::regex::icase);
    return std::regex_search(u.text, intro);
  }
  if (u.fact_ids.empty()) return false;
  return std::all_of(u.fact_ids.begin(), u.fact_ids.end(), [&](const std::string& id) {
    const ProfileFact* f = c.fact(id);
    return f && f->demographic;
  });
}

FactTraceMatcher::FactTraceMatcher(const PatientCase& c) : case_(c) {
  for (const auto& f : c.profile) {
    if (!f.demographic && !f.checklist_id.empty()) fact_to_item_[f.id] = f.checklist_id;
  }
}

bool FactTraceMatcher::covered(const ChecklistItem& item, std::span<const Utterance> transcript) const {
  for (const auto& u : transcript) {
    if (u.role != Role::Patient || u.from_snippet || is_excluded_utterance(u, case_)) continue;
    for (const auto& id : u.fact_ids) {
      const auto it = fact_to_item_.find(id);
      if (it != fact_to_item_.end() && it->second == item.id) return true;
    }
  }
  return false;
}

bool ValueMatcher::covered(const ChecklistItem& item, std::span<const Utterance> transcript) const {
  const ProfileFact* fact = nullptr;
  for (const auto& f : case_.profile) {
    if (f.checklist_id == item.id && !f.demographic) fact = &f;
  }
  if (!fact || fact->value.empty()) return false;
  for (const auto& u : transcript) {
    if (u.role != Role::Patient || u.from_snippet || is_excluded_utterance(u, case_)) continue;
    if (text::contains_icase(u.text, fact->value)) return true;
  }
  return false;
}

ScanScorer::ScanScorer(std::map<ScanDimension, RubricSet> rubrics, JudgeBackend& judge, EvaluateOptions options)
    : rubrics_(std::move(rubrics)), judge_(judge), options_(options) {}

std::map<ScanDimension, RubricSet> ScanScorer::default_rubrics() {
  std::map<ScanDimension, RubricSet> r;
  r[ScanDimension::SafetyStratification] = RubricSet({
      {"safety.allergy", "Checks for \"allergies\" before any treatment talk", 3},
      {"safety.meds", "Reviews current \"medication\"", 2},
      {"safety.breath", "Screens for being \"short of breath\"", 2},
      {"safety.chronic", "Asks about \"chronic conditions\"", 1},
  });
  r[ScanDimension::InformationClarification] = RubricSet({
      {"clarify.onset", "Establishes \"when did\" symptoms start", 2},
      {"clarify.duration", "Clarifies \"how long\" episodes last", 2},
      {"clarify.severity", "Quantifies \"how bad\" it is", 1},
      {"clarify.location", "Pins down \"where exactly\" it is felt", 1},
  });
  r[ScanDimension::AssociativeQuestioning] = RubricSet({
      {"assoc.radiation", "Asks whether it \"spread\"s", 1},
      {"assoc.worse", "Explores what makes it \"worse\"", 1},
      {"assoc.better", "Explores what makes it \"better\"", 1},
      {"assoc.history", "Asks if it \"happened before\"", 1},
  });
  r[ScanDimension::NormativeOutput] = RubricSet({
      {"norm.intro", "Introduces themself as \"your physician\"", 2},
      {"norm.concern", "Acknowledges the patient's \"concern\"", 1},
      {"norm.blame", "Blames the patient with \"your own fault\"", -5},
  });
  return r;
}

std::map<ScanDimension, double> ScanScorer::score(std::string_view transcript) const {
  std::map<ScanDimension, double> out;
  for (const auto& [dim, set] : rubrics_) out[dim] = evaluate_sample(transcript, set, judge_, options_).task_reward;
  return out;
}

CoverageReport inquiry_coverage(std::span<const ChecklistItem> items, std::span<const Utterance> transcript,
                                const CoverageMatcher& matcher, CoverageWeights weights, const ScanScorer* scan) {
  if (items.empty()) throw Error(Errc::EmptyChecklist, "checklist");
  if (!(weights.l1 > 0.0) || !(weights.l2 > 0.0)) throw Error(Errc::InvalidInput, "weights", "must be positive");

  CoverageReport r;
  r.items = items.size();
  double num = 0.0;
  double den = 0.0;
  std::map<ChecklistCategory, std::pair<double, double>> cat;
  for (const auto& item : items) {
    const double w = item.level == ChecklistLevel::L2 ? weights.l2 : weights.l1;
    const bool hit = matcher.covered(item, transcript);
    den += w;
    cat[item.category].second += w;
    if (hit) {
      num += w;
      cat[item.category].first += w;
      ++r.covered;
    }
  }
  r.total = num / den;
  for (const auto& [c, nd] : cat) r.by_category[c] = nd.first / nd.second;
  if (scan) {
    std::string rendered;
    for (const auto& u : transcript) {
      rendered += to_string(u.role);
      rendered += ": ";
      rendered += u.text;
      rendered += '\n';
    }
    r.scan = scan->score(rendered);
  }
  return r;
}

// ---------------------------------------------------------------------------

void LabSelection::validate(std::span<const std::string> universe) const {
  for (const auto& e : essential) {
    if (optional_tests.count(e)) throw Error(Errc::InvalidInput, e, "test is both essential and optional");
  }
  if (universe.empty()) return;
  for (const auto& s : selected) {
    if (std::find(universe.begin(), universe.end(), s) == universe.end()) {
      throw Error(Errc::InvalidInput, s, "selected test outside the action space");
    }
  }
}

LabScore lab_f1(const LabSelection& sel, LabWeights weights) {
  if (!(weights.essential > 0.0) || !(weights.optional > 0.0)) {
    throw Error(Errc::InvalidInput, "lab_weights", "must be positive");
  }
  LabScore s;
  if (sel.selected.empty()) return s;
  std::size_t hit_e = 0;
  std::size_t hit_o = 0;
  for (const auto& t : sel.selected) {
    if (sel.essential.count(t)) ++hit_e;
    if (sel.optional_tests.count(t)) ++hit_o;
  }
  const double den = weights.essential * static_cast<double>(sel.essential.size()) +
                     weights.optional * static_cast<double>(sel.optional_tests.size());
  if (den > 0.0) {
    s.weighted_recall =
        (weights.essential * static_cast<double>(hit_e) + weights.optional * static_cast<double>(hit_o)) / den;
  }
  s.precision = static_cast<double>(hit_e + hit_o) / static_cast<double>(sel.selected.size());
  if (s.weighted_recall + s.precision > 0.0) {
    s.f1 = 2.0 * s.weighted_recall * s.precision / (s.weighted_recall + s.precision);
  }
  return s;
}

std::set<std::string> parse_lab_selection(std::string_view text, std::span<const std::string> universe) {
  const std::string lower = text::to_lower(text);
  auto boundary = [&](std::size_t i) { return i >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[i])); };
  std::set<std::string> out;
  for (const auto& name : universe) {
    const std::string needle = text::to_lower(name);
    for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
      if ((pos == 0 || boundary(pos - 1)) && boundary(pos + needle.size())) {
        out.insert(name);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
const std::regex& icd10_shape() {
  static const std::regex re(R"([A-Z][0-9]{2}(\.[0-9A-Z]{1,2})?)");
  return re;
}
}  // namespace

DiagnosisCode::DiagnosisCode(std::string_view code) : code_(text::trim(code)) {
  for (auto& ch : code_) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (!std::regex_match(code_, icd10_shape())) throw Error(Errc::InvalidCode, std::string(code));
}

double diagnosis_match(const DiagnosisCode& pred, const DiagnosisCode& truth) noexcept {
  if (pred.code() == truth.code()) return 1.0;
  if (pred.category() == truth.category()) return 0.5;
  if (pred.chapter() == truth.chapter()) return 0.25;
  return 0.0;
}

std::optional<DiagnosisCode> find_icd10(std::string_view text) {
  static const std::regex re(R"(\b[A-Z][0-9]{2}(\.[0-9A-Z]{1,2})?\b)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, re)) return std::nullopt;
  return DiagnosisCode(m.str());
}

// ---------------------------------------------------------------------------

double hallucination_weight(Label label) noexcept {
  switch (label) {
    case Label::Refuted: return 1.0;
    case Label::Uncertain: return 0.5;
    case Label::Supported: return 0.0;
  }
  return 0.0;
}

double hallucination_rate(std::span<const Label> labels) {
  if (labels.empty()) throw Error(Errc::ZeroClaims, "verdicts");
  // Integer half-units keep the sum exact and order independent.
  std::uint64_t halves = 0;
  for (Label l : labels) halves += l == Label::Refuted ? 2 : (l == Label::Uncertain ? 1 : 0);
  return static_cast<double>(halves) / (2.0 * static_cast<double>(labels.size()));
}

double hallucination_rate(std::span<const ClaimVerdict> verdicts) {
  std::vector<Label> labels;
  labels.reserve(verdicts.size());
  for (const auto& v : verdicts) labels.push_back(v.label);
  return hallucination_rate(std::span<const Label>(labels));
}

// ---------------------------------------------------------------------------

TurnBinReport turn_bin_report(std::span<const SessionScores> sessions, std::size_t bin_width) {
  if (sessions.size() < 10) throw Error(Errc::InvalidInput, "sessions", "need at least 10 sessions");
  if (bin_width == 0) throw Error(Errc::InvalidInput, "bin_width", "must be positive");

  struct Acc {
    std::size_t count = 0;
    std::map<std::string, double> sums;
    std::map<std::string, std::size_t> counts;
  };
  std::map<std::size_t, Acc> bins;
  for (const auto& s : sessions) {
    auto& a = bins[s.turns / bin_width * bin_width];
    ++a.count;
    for (const auto& [k, v] : s.scores) {
      a.sums[k] += v;
      ++a.counts[k];
    }
  }

  TurnBinReport r;
  r.total = sessions.size();
  for (const auto& [turns, a] : bins) {
    TurnBin b{turns, a.count, {}};
    for (const auto& [k, sum] : a.sums) b.means[k] = sum / static_cast<double>(a.counts.at(k));
    // Retained at >= 10%, compared in integers.
    (a.count * 10 >= r.total ? r.retained : r.dropped).push_back(std::move(b));
  }
  return r;
}

}  // namespace clinrl
