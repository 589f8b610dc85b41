#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clinrl/random.hpp"

namespace clinrl {

enum class ChecklistCategory { PresentIllness, PastHistory, PersonalSocial, ObGyn, Family };
enum class ChecklistLevel { L1, L2 };

std::string_view to_string(ChecklistCategory c) noexcept;
std::string_view to_string(ChecklistLevel l) noexcept;
ChecklistCategory category_from_string(std::string_view s);
ChecklistLevel level_from_string(std::string_view s);

struct ChecklistItem {
  std::string id;
  ChecklistCategory category = ChecklistCategory::PresentIllness;
  ChecklistLevel level = ChecklistLevel::L1;
  bool covered = false;
};

/// One answerable fact about the patient. Demographic facts carry no
/// checklist id and never earn coverage.
struct ProfileFact {
  std::string id;
  std::string checklist_id;
  std::vector<std::string> keywords;
  std::string value;
  /// Full sentence the simulator speaks when the fact is asked about.
  std::string statement;
  /// Question a scripted physician uses to elicit the fact.
  std::string question;
  bool demographic = false;
};

enum class Role { Physician, Patient };

std::string_view to_string(Role r) noexcept;
Role role_from_string(std::string_view s);

struct Utterance {
  Role role = Role::Patient;
  std::string text;
  /// Profile facts the utterance discloses.
  std::vector<std::string> fact_ids;
  bool from_snippet = false;

  bool operator==(const Utterance&) const = default;
};

enum class InjectionVariant { EndOfTurn, MidTurn };

std::string_view to_string(InjectionVariant v) noexcept;
InjectionVariant variant_from_string(std::string_view s);

/// A statement with a known verification label, used by the scripted
/// policy and the table verifier.
struct KnownClaim {
  std::string text;
  std::string label;
};

struct PatientCase {
  std::string case_id;
  std::string department;
  std::string chief_complaint;
  std::vector<ProfileFact> profile;
  std::vector<ChecklistItem> checklist;
  std::vector<std::string> behavior_constraints;
  /// Present exactly when the case runs in Interruption-Injected mode; the
  /// last utterance is a patient question.
  std::vector<Utterance> snippet;
  std::optional<InjectionVariant> snippet_injection;
  std::vector<std::string> lab_essential;
  std::vector<std::string> lab_optional;
  std::string diagnosis;
  std::string icd10;
  std::vector<KnownClaim> knowledge;

  const ProfileFact* fact(std::string_view id) const;
};

/// The 38-category lab action space.
const std::vector<std::string>& lab_universe();

/// Department weights used by the synthetic generator.
struct DepartmentShare {
  std::string_view name;
  int cases;
};
const std::vector<DepartmentShare>& department_shares();

/// Synthetic cases with seeded, reproducible content. Checklist sizes are
/// uniform in [20, 35], Level-2 items occur with probability 0.513 and
/// categories follow the observed evaluation mix.
std::vector<PatientCase> generate_cases(std::size_t n, std::uint64_t seed);

}  // namespace clinrl
