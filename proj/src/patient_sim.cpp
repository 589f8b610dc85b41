#include "clinrl/patient_sim.hpp"

#include <algorithm>

#include "clinrl/error.hpp"
#include "clinrl/text.hpp"

namespace clinrl {

std::string_view to_string(InteractionMode m) noexcept {
  return m == InteractionMode::Passive ? "Passive" : "Interruption";
}

ModeDraw sample_mode(std::mt19937_64& rng) {
  const double u_mode = unit_draw(rng);
  const double u_variant = unit_draw(rng);
  ModeDraw d;
  d.mode = u_mode < kPassiveProbability ? InteractionMode::Passive : InteractionMode::Interruption;
  d.variant = u_variant < kEndOfTurnProbability ? InjectionVariant::EndOfTurn : InjectionVariant::MidTurn;
  return d;
}

SessionView build_session(const PatientCase& c, InteractionMode mode, InjectionVariant variant) {
  SessionView s;
  s.mode = mode;
  s.variant = variant;
  if (mode == InteractionMode::Passive) return s;
  if (c.snippet.empty()) throw Error(Errc::SnippetMissing, c.case_id);
  if (c.snippet.back().role != Role::Patient) {
    throw Error(Errc::InvalidInput, c.case_id, "snippet must end with a patient utterance");
  }

  std::vector<Utterance> snippet = c.snippet;
  for (auto& u : snippet) u.from_snippet = true;

  std::vector<std::size_t> patient_turns;
  for (std::size_t i = 0; i < snippet.size(); ++i) {
    if (snippet[i].role == Role::Patient) patient_turns.push_back(i);
  }
  if (variant == InjectionVariant::MidTurn && patient_turns.size() >= 2) {
    const std::size_t cut = patient_turns[(patient_turns.size() - 1) / 2];
    const std::string question = snippet.back().text;
    snippet.resize(cut + 1);
    snippet.back().text += " " + question;
  }
  s.physician_view = std::move(snippet);
  return s;
}

void record_exchange(SessionView& session, Utterance physician, Utterance patient) {
  physician.from_snippet = false;
  patient.from_snippet = false;
  session.physician_view.push_back(physician);
  session.physician_view.push_back(patient);
  session.simulator_view.push_back(std::move(physician));
  session.simulator_view.push_back(std::move(patient));
}

bool check_asymmetry(const SessionView& session, const PatientCase& c) {
  std::vector<Utterance> expected;
  for (const auto& u : session.physician_view) {
    if (!u.from_snippet) expected.push_back(u);
  }
  if (expected != session.simulator_view) return false;
  for (const auto& u : session.simulator_view) {
    if (u.from_snippet) return false;
    for (const auto& line : c.snippet) {
      if (!line.text.empty() && u.text.find(line.text) != std::string::npos) return false;
    }
  }
  return true;
}

Utterance PatientSimulator::respond(const PatientCase& c, std::span<const Utterance> /*simulator_view*/,
                                    std::string_view physician_utterance) const {
  Utterance out;
  out.role = Role::Patient;
  std::vector<std::string> parts;
  for (const auto& f : c.profile) {
    const bool asked = std::any_of(f.keywords.begin(), f.keywords.end(), [&](const std::string& kw) {
      return text::contains_icase(physician_utterance, kw);
    });
    if (asked) {
      parts.push_back(f.statement);
      out.fact_ids.push_back(f.id);
    }
  }
  out.text = parts.empty() ? options_.dont_know : text::join(parts, " ");
  std::replace(out.text.begin(), out.text.end(), '?', '.');
  return out;
}

ScriptedPhysician::ScriptedPhysician(const PatientCase& c, std::uint64_t seed, PhysicianOptions options) {
  std::mt19937_64 rng(seed ^ text::fnv1a(c.case_id));
  if (!c.snippet.empty()) script_.push_back("That is a fair concern, and we will know more after a few questions.");

  const ProfileFact* age = nullptr;
  for (const auto& f : c.profile) {
    if (f.demographic && f.id == "f_age") age = &f;
  }
  script_.push_back(options.introduction + (age ? " " + age->question : std::string()));

  std::size_t restated = 0;
  for (const auto& f : c.profile) {
    if (f.demographic) continue;
    if (unit_draw(rng) < options.ask_probability) script_.push_back(f.question);
    if (age && restated < options.age_restatements && unit_draw(rng) < 0.2) {
      script_.push_back("Sorry, how old did you say you are?");
      ++restated;
    }
  }
}

std::string ScriptedPhysician::next() {
  if (cursor_ >= script_.size()) return {};
  return script_[cursor_++];
}

SessionView run_session(const PatientCase& c, std::uint64_t seed, const PhysicianOptions& physician,
                        const SimulatorOptions& simulator) {
  const InteractionMode mode = c.snippet.empty() ? InteractionMode::Passive : InteractionMode::Interruption;
  SessionView session =
      build_session(c, mode, c.snippet_injection.value_or(InjectionVariant::EndOfTurn));
  ScriptedPhysician doctor(c, seed, physician);
  PatientSimulator patient(simulator);
  for (std::string q = doctor.next(); !q.empty(); q = doctor.next()) {
    Utterance reply = patient.respond(c, session.simulator_view, q);
    record_exchange(session, Utterance{Role::Physician, std::move(q), {}, false}, std::move(reply));
    if (!check_asymmetry(session, c)) throw Error(Errc::InvalidInput, c.case_id, "snippet leaked to simulator");
  }
  return session;
}

std::string render_view(std::span<const Utterance> view) {
  std::string out;
  for (const auto& u : view) {
    out += to_string(u.role);
    out += ": ";
    out += u.text;
    out += '\n';
  }
  return out;
}

}  // namespace clinrl
