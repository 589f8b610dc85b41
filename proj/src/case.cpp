#include "clinrl/case.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "clinrl/error.hpp"
#include "clinrl/patient_sim.hpp"

namespace clinrl {

std::string_view to_string(ChecklistCategory c) noexcept {
  switch (c) {
    case ChecklistCategory::PresentIllness: return "PresentIllness";
    case ChecklistCategory::PastHistory: return "PastHistory";
    case ChecklistCategory::PersonalSocial: return "PersonalSocial";
    case ChecklistCategory::ObGyn: return "ObGyn";
    case ChecklistCategory::Family: return "Family";
  }
  return "PresentIllness";
}

std::string_view to_string(ChecklistLevel l) noexcept { return l == ChecklistLevel::L2 ? "L2" : "L1"; }

ChecklistCategory category_from_string(std::string_view s) {
  for (auto c : {ChecklistCategory::PresentIllness, ChecklistCategory::PastHistory, ChecklistCategory::PersonalSocial,
                 ChecklistCategory::ObGyn, ChecklistCategory::Family}) {
    if (to_string(c) == s) return c;
  }
  throw Error(Errc::InvalidInput, std::string(s), "unknown checklist category");
}

ChecklistLevel level_from_string(std::string_view s) {
  if (s == "L1") return ChecklistLevel::L1;
  if (s == "L2") return ChecklistLevel::L2;
  throw Error(Errc::InvalidInput, std::string(s), "unknown checklist level");
}

std::string_view to_string(Role r) noexcept { return r == Role::Physician ? "physician" : "patient"; }

Role role_from_string(std::string_view s) {
  if (s == "physician") return Role::Physician;
  if (s == "patient") return Role::Patient;
  throw Error(Errc::InvalidInput, std::string(s), "unknown role");
}

std::string_view to_string(InjectionVariant v) noexcept {
  return v == InjectionVariant::EndOfTurn ? "EndOfTurn" : "MidTurn";
}

InjectionVariant variant_from_string(std::string_view s) {
  if (s == "EndOfTurn") return InjectionVariant::EndOfTurn;
  if (s == "MidTurn") return InjectionVariant::MidTurn;
  throw Error(Errc::InvalidInput, std::string(s), "unknown injection variant");
}

const ProfileFact* PatientCase::fact(std::string_view id) const {
  for (const auto& f : profile) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

const std::vector<std::string>& lab_universe() {
  static const std::vector<std::string> labs = {
      "complete blood count", "c-reactive protein",     "procalcitonin",
      "erythrocyte sedimentation rate", "basic metabolic panel", "liver function tests",
      "renal function tests", "serum electrolytes",     "blood glucose",
      "hba1c",                "lipid panel",            "thyroid function tests",
      "troponin",             "bnp",                    "d-dimer",
      "coagulation panel",    "arterial blood gas",     "blood culture",
      "urinalysis",           "urine culture",          "stool routine",
      "fecal occult blood",   "serum amylase",          "serum lipase",
      "pregnancy test",       "iron studies",           "vitamin b12",
      "folate",               "reticulocyte count",     "peripheral blood smear",
      "antinuclear antibody", "rheumatoid factor",      "uric acid",
      "serum albumin",        "chest x-ray",            "electrocardiogram",
      "abdominal ultrasound", "head ct",
  };
  return labs;
}

const std::vector<DepartmentShare>& department_shares() {
  static const std::vector<DepartmentShare> shares = {
      {"General Practice", 111}, {"Surgery", 50},         {"Gynecology", 26},      {"Neurology", 25},
      {"Gastroenterology", 18},  {"Hematology", 15},      {"Nephrology", 15},      {"Cardiology", 14},
      {"Respiratory", 14},       {"Endocrinology", 7},    {"Rheumatology", 6},     {"Geriatrics", 2},
  };
  return shares;
}

namespace {

struct Topic {
  std::string_view id;
  ChecklistCategory category;
  std::string_view keyword;
  std::string_view question;
  std::string_view statement;  // "{}" marks the value
  std::vector<std::string_view> values;
};

using C = ChecklistCategory;

const std::vector<Topic>& topics() {
  static const std::vector<Topic> t = {
      {"onset", C::PresentIllness, "when did", "When did this start?", "It started {}.",
       {"3 days ago", "a week ago", "2 weeks ago", "this morning"}},
      {"duration", C::PresentIllness, "how long", "How long does each episode last?", "Each episode lasts {}.",
       {"a few minutes", "about an hour", "most of the day"}},
      {"location", C::PresentIllness, "where exactly", "Where exactly do you feel it?", "I feel it {}.",
       {"in my chest", "in my lower belly", "behind my eyes", "in my lower back"}},
      {"character", C::PresentIllness, "feel like", "What does it feel like?", "It feels {}.",
       {"sharp", "dull and heavy", "burning", "like pressure"}},
      {"severity", C::PresentIllness, "how bad", "How bad is it on a scale to ten?", "I would rate it {} out of 10.",
       {"4", "6", "8"}},
      {"radiation", C::PresentIllness, "spread", "Does it spread anywhere?", "It spreads {}.",
       {"to my left arm", "to my back", "nowhere else"}},
      {"aggravating", C::PresentIllness, "worse", "What makes it worse?", "It gets worse {}.",
       {"when I walk", "after meals", "at night", "when I lie flat"}},
      {"relieving", C::PresentIllness, "better", "What makes it better?", "It gets better {}.",
       {"with rest", "when I sit up", "with paracetamol"}},
      {"fever", C::PresentIllness, "fever", "Have you had a fever?", "My highest temperature was {}.",
       {"38.5 C", "39 C", "37.8 C"}},
      {"cough", C::PresentIllness, "cough", "Do you have a cough?", "My cough is {}.",
       {"dry", "productive with yellow sputum", "mild"}},
      {"dyspnea", C::PresentIllness, "short of breath", "Do you get short of breath?", "I get short of breath {}.",
       {"on stairs", "at rest", "only when running"}},
      {"nausea", C::PresentIllness, "nausea", "Any nausea or vomiting?", "I have had {}.",
       {"mild nausea", "nausea with vomiting twice", "no nausea"}},
      {"appetite", C::PresentIllness, "appetite", "How is your appetite?", "My appetite is {}.",
       {"poor", "normal", "reduced"}},
      {"weight", C::PresentIllness, "weight", "Any change in your weight?", "I have {}.",
       {"lost 3 kg", "gained 2 kg", "kept a stable weight"}},
      {"sleep", C::PresentIllness, "sleep", "How are you sleeping?", "My sleep is {}.",
       {"broken", "normal", "short"}},
      {"urination", C::PresentIllness, "urinat", "Any changes when urinating?", "I pass urine {}.",
       {"more often", "with burning", "normally"}},
      {"bowel", C::PresentIllness, "bowel", "Any changes in your bowel habits?", "My bowel habits are {}.",
       {"loose", "constipated", "unchanged"}},
      {"episodes", C::PresentIllness, "happened before", "Has this happened before?", "It has happened {}.",
       {"twice", "never", "once last year"}},
      {"treatment", C::PresentIllness, "tried", "Have you tried any treatment?", "I have tried {}.",
       {"ibuprofen", "nothing yet", "an antacid"}},
      {"dizziness", C::PresentIllness, "dizz", "Do you feel dizzy?", "I feel dizzy {}.",
       {"when standing up", "rarely", "most mornings"}},
      {"headache", C::PresentIllness, "headache", "Do you have headaches?", "My headaches are {}.",
       {"daily", "occasional", "absent"}},
      {"palpitations", C::PresentIllness, "palpitation", "Do you notice palpitations?", "I notice palpitations {}.",
       {"at night", "after coffee", "never"}},
      {"swelling", C::PresentIllness, "swelling", "Any swelling?", "I have swelling {}.",
       {"in both ankles", "around my eyes", "nowhere"}},
      {"rash", C::PresentIllness, "rash", "Any rash?", "I have {}.", {"a red rash on my arms", "no rash"}},
      {"fatigue", C::PresentIllness, "tired", "Do you feel tired?", "I feel tired {}.",
       {"all day", "in the evenings", "rarely"}},
      {"chronic", C::PastHistory, "chronic", "Do you have any chronic conditions?", "I have {}.",
       {"high blood pressure", "type 2 diabetes", "asthma", "no chronic conditions"}},
      {"surgery", C::PastHistory, "operation", "Have you had any operation?", "I had {}.",
       {"my appendix removed", "a knee operation", "no operations"}},
      {"medications", C::PastHistory, "medication", "Do you take any medication?", "I take {}.",
       {"metformin", "amlodipine", "no regular medication"}},
      {"allergies", C::PastHistory, "allerg", "Do you have any allergies?", "I am allergic to {}.",
       {"penicillin", "nothing I know of", "shellfish"}},
      {"admissions", C::PastHistory, "hospital", "Have you been admitted to hospital?", "I was admitted {}.",
       {"once for pneumonia", "never"}},
      {"vaccination", C::PastHistory, "vaccin", "Are your vaccinations up to date?", "My vaccinations are {}.",
       {"up to date", "incomplete"}},
      {"transfusion", C::PastHistory, "transfusion", "Have you ever had a transfusion?", "I have {}.",
       {"never had a transfusion", "had one transfusion"}},
      {"infections", C::PastHistory, "infectious", "Any infectious diseases such as hepatitis?", "I have {}.",
       {"no infectious diseases", "had hepatitis B"}},
      {"injuries", C::PastHistory, "injur", "Any serious injuries?", "I have had {}.",
       {"a broken wrist", "no serious injuries"}},
      {"mental", C::PastHistory, "mental health", "Any mental health history?", "My mental health history is {}.",
       {"depression in the past", "unremarkable"}},
      {"smoking", C::PersonalSocial, "smok", "Do you smoke?", "I smoke {}.",
       {"ten cigarettes a day", "not at all", "occasionally"}},
      {"alcohol", C::PersonalSocial, "alcohol", "Do you drink alcohol?", "I drink {}.",
       {"on weekends", "every day", "no alcohol"}},
      {"occupation", C::PersonalSocial, "your job", "What is your job?", "I work as {}.",
       {"a teacher", "a driver", "an accountant", "a nurse"}},
      {"exercise", C::PersonalSocial, "exercise", "How much exercise do you get?", "I exercise {}.",
       {"twice a week", "rarely", "daily"}},
      {"diet", C::PersonalSocial, "diet", "How is your diet?", "My diet is {}.",
       {"mostly home cooked", "high in salt", "vegetarian"}},
      {"travel", C::PersonalSocial, "travel", "Any recent travel?", "I have {}.",
       {"not travelled recently", "returned from abroad last week"}},
      {"living", C::PersonalSocial, "live with", "Who do you live with?", "I live with {}.",
       {"my partner", "my parents", "nobody"}},
      {"drugs", C::PersonalSocial, "recreational", "Any recreational drug use?", "I use {}.",
       {"no recreational drugs", "cannabis occasionally"}},
      {"menstrual", C::ObGyn, "period", "When was your last period?", "My last period was {}.",
       {"2 weeks ago", "6 weeks ago", "years ago"}},
      {"pregnancy", C::ObGyn, "pregnan", "Could you be pregnant?", "I am {}.",
       {"not pregnant", "possibly pregnant"}},
      {"contraception", C::ObGyn, "contracept", "Do you use contraception?", "I use {}.",
       {"the pill", "condoms", "no contraception"}},
      {"menopause", C::ObGyn, "menopause", "Have you gone through menopause?", "I am {}.",
       {"premenopausal", "postmenopausal"}},
      {"births", C::ObGyn, "given birth", "Have you given birth?", "I have {}.",
       {"two children", "no children"}},
      {"discharge", C::ObGyn, "discharge", "Any unusual discharge?", "I have {}.",
       {"no discharge", "some discharge"}},
      {"parents", C::Family, "parents", "Are your parents healthy?", "My parents are {}.",
       {"healthy", "both hypertensive", "deceased"}},
      {"siblings", C::Family, "siblings", "Any illness among your siblings?", "My siblings have {}.",
       {"no illness", "diabetes"}},
      {"cancer", C::Family, "cancer", "Any cancer in the family?", "In my family there is {}.",
       {"no cancer", "breast cancer"}},
      {"hereditary", C::Family, "inherited", "Any inherited conditions?", "We have {}.",
       {"no inherited conditions", "thalassemia"}},
      {"heart", C::Family, "heart disease", "Any heart disease in the family?", "My family has {}.",
       {"no heart disease", "early heart attacks"}},
  };
  return t;
}

// Observed category mix of checklist items.
constexpr std::array<double, 5> kCategoryShare = {0.558, 0.196, 0.146, 0.054, 0.047};
constexpr double kLevel2Share = 0.513;

struct Diagnosis {
  std::string_view name;
  std::string_view icd10;
  std::string_view complaint;
  std::vector<std::string_view> essential;
  std::vector<std::string_view> optional;
};

const std::vector<std::vector<Diagnosis>>& diagnoses() {
  static const std::vector<std::vector<Diagnosis>> d = {
      {{"Community-acquired pneumonia", "J18.9", "fever and cough",
        {"complete blood count", "c-reactive protein", "chest x-ray"}, {"procalcitonin", "blood culture"}},
       {"Acute upper respiratory infection", "J06.9", "a sore throat", {"complete blood count"}, {"c-reactive protein"}}},
      {{"Acute appendicitis", "K35.8", "pain in my lower belly",
        {"complete blood count", "c-reactive protein", "abdominal ultrasound"}, {"urinalysis", "pregnancy test"}},
       {"Cholelithiasis", "K80.2", "pain after fatty meals", {"liver function tests", "abdominal ultrasound"},
        {"serum lipase"}}},
      {{"Pelvic inflammatory disease", "N73.9", "pelvic pain", {"pregnancy test", "complete blood count", "urinalysis"},
        {"c-reactive protein"}}},
      {{"Migraine without aura", "G43.0", "bad headaches", {"head ct"}, {"complete blood count"}},
       {"Ischaemic stroke", "I63.9", "weakness in my arm", {"head ct", "blood glucose", "coagulation panel"},
        {"lipid panel", "electrocardiogram"}}},
      {{"Gastric ulcer", "K25.9", "burning stomach pain", {"complete blood count", "fecal occult blood"},
        {"liver function tests"}},
       {"Acute gastroenteritis", "A09.0", "diarrhoea", {"stool routine", "serum electrolytes"},
        {"complete blood count"}}},
      {{"Iron deficiency anaemia", "D50.9", "constant tiredness", {"complete blood count", "iron studies"},
        {"reticulocyte count", "peripheral blood smear"}}},
      {{"Urinary tract infection", "N39.0", "burning when I pass urine", {"urinalysis", "urine culture"},
        {"renal function tests"}},
       {"Chronic kidney disease", "N18.3", "swollen ankles", {"renal function tests", "serum electrolytes", "urinalysis"},
        {"serum albumin"}}},
      {{"Stable angina", "I20.8", "chest tightness on exertion", {"electrocardiogram", "troponin", "lipid panel"},
        {"blood glucose"}},
       {"Heart failure", "I50.9", "breathlessness at night", {"bnp", "electrocardiogram", "chest x-ray"},
        {"renal function tests"}}},
      {{"Asthma exacerbation", "J45.9", "wheezing", {"arterial blood gas", "chest x-ray"}, {"complete blood count"}},
       {"COPD exacerbation", "J44.1", "worsening breathlessness", {"arterial blood gas", "chest x-ray"},
        {"c-reactive protein"}}},
      {{"Type 2 diabetes mellitus", "E11.9", "constant thirst", {"blood glucose", "hba1c"}, {"lipid panel"}},
       {"Hyperthyroidism", "E05.9", "weight loss and palpitations", {"thyroid function tests"},
        {"electrocardiogram"}}},
      {{"Gout", "M10.9", "a painful swollen toe", {"uric acid"}, {"c-reactive protein"}},
       {"Rheumatoid arthritis", "M06.9", "stiff painful hands", {"rheumatoid factor", "erythrocyte sedimentation rate"},
        {"antinuclear antibody"}}},
      {{"Essential hypertension", "I10", "morning headaches", {"renal function tests", "electrocardiogram"},
        {"lipid panel"}}},
  };
  return d;
}

const std::vector<std::string_view> kPatientQuestions = {
    "Doctor, is this something serious?",
    "Will I need to stay in hospital?",
    "Do I need antibiotics?",
    "Could this be caused by stress?",
};

std::string fill(std::string_view templ, std::string_view value) {
  std::string out(templ);
  const auto pos = out.find("{}");
  if (pos != std::string::npos) out.replace(pos, 2, value);
  return out;
}

template <class Rng>
std::size_t weighted_draw(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = unit_draw(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

PatientCase make_case(std::size_t index, std::mt19937_64& rng) {
  PatientCase c;
  char id[32];
  std::snprintf(id, sizeof id, "case-%04zu", index + 1);
  c.case_id = id;

  std::vector<double> dept_w;
  for (const auto& d : department_shares()) dept_w.push_back(d.cases);
  const std::size_t dept = weighted_draw(rng, dept_w);
  c.department = std::string(department_shares()[dept].name);
  const auto& options = diagnoses()[dept];
  const Diagnosis& dx = options[index_draw(rng, options.size())];
  c.diagnosis = std::string(dx.name);
  c.icd10 = std::string(dx.icd10);
  c.chief_complaint = std::string(dx.complaint);
  c.lab_essential.assign(dx.essential.begin(), dx.essential.end());
  c.lab_optional.assign(dx.optional.begin(), dx.optional.end());

  const int age = 18 + static_cast<int>(index_draw(rng, 68));
  c.profile.push_back({"f_age", "", {"how old", "your age"}, std::to_string(age),
                       "I am " + std::to_string(age) + " years old.", "How old are you?", true});

  // Checklist: 20-35 items, category by share among topics still unused.
  const std::size_t n_items = 20 + index_draw(rng, 16);
  std::array<std::vector<const Topic*>, 5> pools;
  for (const auto& t : topics()) pools[static_cast<std::size_t>(t.category)].push_back(&t);
  for (std::size_t i = 0; i < n_items; ++i) {
    std::vector<double> w(5);
    for (std::size_t k = 0; k < 5; ++k) w[k] = pools[k].empty() ? 0.0 : kCategoryShare[k];
    auto& pool = pools[weighted_draw(rng, w)];
    const std::size_t pick = index_draw(rng, pool.size());
    const Topic* t = pool[pick];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));

    const auto value = t->values[index_draw(rng, t->values.size())];
    const bool critical = unit_draw(rng) < kLevel2Share;
    c.checklist.push_back({std::string(t->id), t->category, critical ? ChecklistLevel::L2 : ChecklistLevel::L1});
    c.profile.push_back({"f_" + std::string(t->id), std::string(t->id), {std::string(t->keyword)},
                         std::string(value), fill(t->statement, value), std::string(t->question), false});
  }

  c.behavior_constraints = {"Answer only what is asked.", "Do not ask the physician about their own questions.",
                            "Do not volunteer unrequested history."};

  const ModeDraw draw = sample_mode(rng);
  if (draw.mode == InteractionMode::Interruption) {
    c.snippet_injection = draw.variant;
    c.snippet = {
        {Role::Physician, "What brings you in today?", {}, true},
        {Role::Patient, "I have had " + c.chief_complaint + ".", {}, true},
        {Role::Physician, "Is there anything else you want to mention?", {}, true},
        {Role::Patient, std::string(kPatientQuestions[index_draw(rng, kPatientQuestions.size())]), {}, true},
    };
  }

  const std::string dx_name(dx.name);
  c.knowledge = {
      {dx_name + " is coded as " + c.icd10 + " in ICD-10.", "Supported"},
      {dx_name + " is assessed with " + c.lab_essential.front() + ".", "Supported"},
      {dx_name + " requires clinical follow-up.", "Supported"},
      {dx_name + " does not require laboratory testing.", "Refuted"},
      {dx_name + " is caused by a single gene.", "Refuted"},
      {dx_name + " is linked to seasonal weather changes.", "Uncertain"},
  };
  return c;
}

}  // namespace

std::vector<PatientCase> generate_cases(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PatientCase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_case(i, rng));
  return out;
}

}  // namespace clinrl
