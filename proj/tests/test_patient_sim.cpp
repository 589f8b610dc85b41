#include "support.hpp"

#include <map>
#include <set>

#include "clinrl/case.hpp"
#include "clinrl/patient_sim.hpp"
#include "clinrl/text.hpp"

using namespace clinrl;

namespace {

PatientCase fever_case() {
  PatientCase c;
  c.case_id = "fever";
  c.chief_complaint = "fever";
  c.profile.push_back({"f_duration", "duration", {"how long", "when did"}, "3 days",
                       "The fever started 3 days ago.", "How long have you had the fever?", false});
  c.profile.push_back({"f_age", "", {"how old"}, "42", "I am 42 years old.", "How old are you?", true});
  c.checklist.push_back({"duration", ChecklistCategory::PresentIllness, ChecklistLevel::L2, false});
  return c;
}

PatientCase with_snippet(PatientCase c, InjectionVariant v) {
  c.snippet = {{Role::Physician, "What brings you in today?", {}, true},
               {Role::Patient, "I have had a fever.", {}, true},
               {Role::Physician, "Anything else?", {}, true},
               {Role::Patient, "Is this contagious?", {}, true}};
  c.snippet_injection = v;
  return c;
}

// Independent check: the simulator view is the physician view with snippet
// lines removed, and never repeats snippet text.
void expect_asymmetric(const SessionView& s, const PatientCase& c) {
  std::vector<Utterance> filtered;
  for (const auto& u : s.physician_view) {
    if (!u.from_snippet) filtered.push_back(u);
  }
  ASSERT_EQ(filtered, s.simulator_view);
  for (const auto& u : s.simulator_view) {
    for (const auto& line : c.snippet) ASSERT_EQ(u.text.find(line.text), std::string::npos);
  }
}

}  // namespace

TEST(ModeSampling, ObservedProportions) {
  std::mt19937_64 rng(7);
  int passive = 0, interruption = 0, end_of_turn = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto d = sample_mode(rng);
    if (d.mode == InteractionMode::Passive) {
      ++passive;
    } else {
      ++interruption;
      if (d.variant == InjectionVariant::EndOfTurn) ++end_of_turn;
    }
  }
  EXPECT_GE(passive / 10000.0, 0.74);
  EXPECT_LE(passive / 10000.0, 0.76);
  EXPECT_GE(static_cast<double>(end_of_turn) / interruption, 0.48);
  EXPECT_LE(static_cast<double>(end_of_turn) / interruption, 0.52);
}

TEST(ModeSampling, SameSeedSameSequence) {
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 500; ++i) EXPECT_EQ(sample_mode(a), sample_mode(b));
}

TEST(Simulator, AnswersFromProfile) {
  const auto c = fever_case();
  PatientSimulator sim;
  const auto u = sim.respond(c, {}, "How long have you had the fever?");
  EXPECT_NE(u.text.find("3 days"), std::string::npos);
  EXPECT_EQ(u.fact_ids, (std::vector<std::string>{"f_duration"}));
  EXPECT_EQ(u.role, Role::Patient);
}

TEST(Simulator, AbsentFactGivesDontKnow) {
  const auto c = fever_case();
  PatientSimulator sim;
  const auto u = sim.respond(c, {}, "Do you smoke?");
  EXPECT_EQ(u.text, SimulatorOptions{}.dont_know);
  EXPECT_TRUE(u.fact_ids.empty());
}

TEST(Simulator, NeverAsksQuestions) {
  auto c = fever_case();
  c.profile[0].statement = "Why would that matter? It started 3 days ago.";
  PatientSimulator sim;
  EXPECT_EQ(sim.respond(c, {}, "how long?").text.find('?'), std::string::npos);
}

TEST(BuildSession, PassiveStartsEmpty) {
  const auto s = build_session(fever_case(), InteractionMode::Passive, InjectionVariant::EndOfTurn);
  EXPECT_TRUE(s.physician_view.empty());
  EXPECT_TRUE(s.simulator_view.empty());
}

TEST(BuildSession, EndOfTurnEndsWithPatientQuestion) {
  const auto c = with_snippet(fever_case(), InjectionVariant::EndOfTurn);
  const auto s = build_session(c, InteractionMode::Interruption, InjectionVariant::EndOfTurn);
  ASSERT_EQ(s.physician_view.size(), 4u);
  EXPECT_EQ(s.physician_view.back().text, "Is this contagious?");
  EXPECT_TRUE(s.simulator_view.empty());
}

TEST(BuildSession, MidTurnFoldsQuestionIntoEarlierTurn) {
  const auto c = with_snippet(fever_case(), InjectionVariant::MidTurn);
  const auto s = build_session(c, InteractionMode::Interruption, InjectionVariant::MidTurn);
  ASSERT_EQ(s.physician_view.size(), 2u);
  EXPECT_EQ(s.physician_view.back().role, Role::Patient);
  EXPECT_NE(s.physician_view.back().text.find("I have had a fever."), std::string::npos);
  EXPECT_NE(s.physician_view.back().text.find("Is this contagious?"), std::string::npos);
}

TEST(BuildSession, Errors) {
  EXPECT_ERRC(build_session(fever_case(), InteractionMode::Interruption, InjectionVariant::EndOfTurn),
              Errc::SnippetMissing);
  auto c = with_snippet(fever_case(), InjectionVariant::EndOfTurn);
  c.snippet.pop_back();
  EXPECT_ERRC(build_session(c, InteractionMode::Interruption, InjectionVariant::EndOfTurn), Errc::InvalidInput);
}

TEST(SessionProperty, AsymmetryOnEveryTurn) {
  const auto cases = generate_cases(100, 17);
  std::size_t interruption = 0;
  for (const auto& c : cases) {
    SessionView s = build_session(c, c.snippet.empty() ? InteractionMode::Passive : InteractionMode::Interruption,
                                  c.snippet_injection.value_or(InjectionVariant::EndOfTurn));
    if (!c.snippet.empty()) ++interruption;
    ScriptedPhysician doc(c, 5);
    PatientSimulator sim;
    for (auto q = doc.next(); !q.empty(); q = doc.next()) {
      auto reply = sim.respond(c, s.simulator_view, q);
      record_exchange(s, {Role::Physician, q, {}, false}, reply);
      expect_asymmetric(s, c);
      ASSERT_TRUE(check_asymmetry(s, c));
    }
  }
  EXPECT_GT(interruption, 0u);
}

TEST(SessionProperty, PassivityAndFactFidelity) {
  for (const auto& c : generate_cases(60, 23)) {
    const auto s = run_session(c, 3);
    for (const auto& u : s.simulator_view) {
      if (u.role != Role::Patient) continue;
      EXPECT_EQ(u.text.find('?'), std::string::npos);
      if (u.fact_ids.empty()) {
        EXPECT_EQ(u.text, SimulatorOptions{}.dont_know);
        continue;
      }
      std::vector<std::string> statements;
      for (const auto& id : u.fact_ids) {
        const ProfileFact* f = c.fact(id);
        ASSERT_NE(f, nullptr) << id;
        std::string st = f->statement;
        std::replace(st.begin(), st.end(), '?', '.');
        statements.push_back(st);
      }
      EXPECT_EQ(u.text, text::join(statements, " "));
    }
  }
}

TEST(Session, Deterministic) {
  const auto cases = generate_cases(10, 4);
  for (const auto& c : cases) {
    const auto a = run_session(c, 11), b = run_session(c, 11);
    EXPECT_EQ(a.physician_view, b.physician_view);
  }
}

TEST(CaseGeneration, ShapeAndDistribution) {
  const auto cases = generate_cases(400, 7);
  std::size_t items = 0, l2 = 0;
  std::map<std::string, int> departments;
  for (const auto& c : cases) {
    EXPECT_GE(c.checklist.size(), 20u);
    EXPECT_LE(c.checklist.size(), 35u);
    items += c.checklist.size();
    for (const auto& it : c.checklist) l2 += it.level == ChecklistLevel::L2;
    ++departments[c.department];
    std::set<std::string> ids;
    for (const auto& it : c.checklist) EXPECT_TRUE(ids.insert(it.id).second);
    for (const auto& f : c.profile) {
      if (!f.demographic) {
        EXPECT_TRUE(ids.count(f.checklist_id)) << f.id;
      }
    }
    if (!c.snippet.empty()) {
      EXPECT_EQ(c.snippet.back().role, Role::Patient);
      EXPECT_TRUE(c.snippet_injection.has_value());
    }
    for (const auto& lab : c.lab_essential) {
      EXPECT_NE(std::find(lab_universe().begin(), lab_universe().end(), lab), lab_universe().end());
    }
  }
  const double l2_rate = static_cast<double>(l2) / static_cast<double>(items);
  EXPECT_NEAR(l2_rate, 0.513, 0.02);
  EXPECT_GT(departments["General Practice"], departments["Geriatrics"]);
}

TEST(CaseGeneration, LabUniverseHas38Categories) {
  const auto& u = lab_universe();
  EXPECT_EQ(u.size(), 38u);
  EXPECT_EQ(std::set<std::string>(u.begin(), u.end()).size(), 38u);
}

TEST(CaseGeneration, Deterministic) {
  const auto a = generate_cases(20, 7), b = generate_cases(20, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].case_id, b[i].case_id);
    EXPECT_EQ(a[i].icd10, b[i].icd10);
    EXPECT_EQ(a[i].checklist.size(), b[i].checklist.size());
    EXPECT_EQ(a[i].snippet, b[i].snippet);
  }
}
