#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinrl/case.hpp"

namespace clinrl {

enum class InteractionMode { Passive, Interruption };

std::string_view to_string(InteractionMode m) noexcept;

struct ModeDraw {
  InteractionMode mode = InteractionMode::Passive;
  InjectionVariant variant = InjectionVariant::EndOfTurn;

  bool operator==(const ModeDraw&) const = default;
};

constexpr double kPassiveProbability = 0.75;
constexpr double kEndOfTurnProbability = 0.5;

/// Passive with probability 0.75; otherwise Interruption, split evenly
/// between end-of-turn and mid-turn placement. Consumes two draws.
ModeDraw sample_mode(std::mt19937_64& rng);

struct SessionView {
  InteractionMode mode = InteractionMode::Passive;
  InjectionVariant variant = InjectionVariant::EndOfTurn;
  std::vector<Utterance> physician_view;
  /// The same dialogue with every snippet utterance removed.
  std::vector<Utterance> simulator_view;
};

/// Passive sessions start empty. Interruption sessions seed the physician
/// view with the snippet; mid-turn placement cuts the snippet after its
/// midpoint exchange and folds the final patient question into that turn.
SessionView build_session(const PatientCase& c, InteractionMode mode, InjectionVariant variant);

/// Appends one exchange to both views.
void record_exchange(SessionView& session, Utterance physician, Utterance patient);

/// simulator_view equals physician_view with snippet utterances removed and
/// contains no snippet text.
bool check_asymmetry(const SessionView& session, const PatientCase& c);

struct SimulatorOptions {
  std::string dont_know = "I'm not sure about that.";
};

/// Deterministic template patient: answers with the statements of the
/// profile facts whose keywords appear in the question, and nothing else.
class PatientSimulator {
 public:
  explicit PatientSimulator(SimulatorOptions options = {}) : options_(std::move(options)) {}

  /// Receives only the simulator's own view so snippet content is out of
  /// reach by construction.
  Utterance respond(const PatientCase& c, std::span<const Utterance> simulator_view,
                    std::string_view physician_utterance) const;

  const SimulatorOptions& options() const noexcept { return options_; }

 private:
  SimulatorOptions options_;
};

struct PhysicianOptions {
  /// Probability that a given checklist question is asked.
  double ask_probability = 0.8;
  /// Times the physician re-asks the patient's age.
  std::size_t age_restatements = 1;
  std::string introduction = "Hello, I am Dr. Reyes and I will be your physician today.";
};

/// Seeded scripted physician that works through the case's profile
/// questions. Used by the CLI and by property tests.
class ScriptedPhysician {
 public:
  ScriptedPhysician(const PatientCase& c, std::uint64_t seed, PhysicianOptions options = {});

  /// Next physician utterance, or an empty string once the script is done.
  std::string next();

 private:
  std::vector<std::string> script_;
  std::size_t cursor_ = 0;
};

/// Runs a full scripted session and checks asymmetry after every exchange;
/// throws Error(InvalidInput) if the check ever fails.
SessionView run_session(const PatientCase& c, std::uint64_t seed, const PhysicianOptions& physician = {},
                        const SimulatorOptions& simulator = {});

/// Plain dual-view rendering used in transcripts.
std::string render_view(std::span<const Utterance> view);

}  // namespace clinrl
