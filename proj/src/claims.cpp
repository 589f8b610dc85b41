#include "clinrl/claims.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <optional>
#include <regex>
#include <tuple>
#include <unordered_set>

#include "clinrl/error.hpp"
#include "clinrl/text.hpp"

namespace clinrl {

namespace {

const std::vector<std::string> kPronouns = {"it", "they", "he", "she", "this", "these"};
const std::vector<std::string> kAdverbs = {"also", "often", "usually", "commonly", "typically", "generally",
                                           "frequently", "rarely", "still", "then", "now"};
const std::vector<std::string> kClauseBreaks = {";", ", and ", ", but ", ", while "};

std::string bare_word(std::string_view w) {
  std::string out;
  for (char c : w) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '\'') {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool contains(const std::vector<std::string>& list, const std::string& w) {
  return std::find(list.begin(), list.end(), w) != list.end();
}

std::vector<std::string> split_clauses(std::string_view sentence) {
  std::vector<std::string> out;
  std::string rest(sentence);
  while (true) {
    std::size_t best = std::string::npos;
    std::size_t len = 0;
    for (const auto& brk : kClauseBreaks) {
      const auto pos = rest.find(brk);
      if (pos < best) {
        best = pos;
        len = brk.size();
      }
    }
    if (best == std::string::npos) break;
    out.push_back(rest.substr(0, best));
    rest = rest.substr(best + len);
  }
  out.push_back(rest);
  return out;
}

std::string strip_terminal(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' || s.back() == ':' || s.back() == '!'))
    s.remove_suffix(1);
  return std::string(text::trim(s));
}

std::string finish_claim(std::string s) {
  s = strip_terminal(s);
  if (s.empty()) return s;
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}

struct MultipleChoice {
  std::vector<std::pair<std::size_t, char>> option_sentences;
  std::optional<char> selected;
};

MultipleChoice detect_multiple_choice(const std::vector<std::string>& sentences) {
  static const std::regex kOption(R"(^\(?([A-Ha-h])[\).:]\s+.+)");
  static const std::regex kAnswer(R"((?:answer|correct option|correct choice)\s*(?:is)?\s*[:\-]?\s*\(?([A-Ha-h])\b)",
                                  std::regex::icase);
  MultipleChoice mc;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::smatch m;
    if (std::regex_match(sentences[i], m, kOption)) {
      mc.option_sentences.emplace_back(i, static_cast<char>(std::toupper(m[1].str()[0])));
    } else if (std::regex_search(sentences[i], m, kAnswer)) {
      mc.selected = static_cast<char>(std::toupper(m[1].str()[0]));
    }
  }
  if (mc.option_sentences.size() < 2) mc.option_sentences.clear();
  return mc;
}

std::string strip_option_label(const std::string& s) {
  static const std::regex kLabel(R"(^\(?[A-Ha-h][\).:]\s+)");
  return std::regex_replace(s, kLabel, "", std::regex_constants::format_first_only);
}

}  // namespace

const std::vector<std::string>& RuleExtractor::default_lexicon() {
  static const std::vector<std::string> kLexicon = {
      "is",        "are",      "was",       "were",      "be",       "been",     "has",       "have",
      "had",       "causes",   "cause",     "caused",    "inhibits", "inhibit",  "treats",    "treat",
      "treated",   "reduces",  "reduce",    "increases", "increase", "prevents", "prevent",   "indicates",
      "indicate",  "requires", "require",   "contains",  "contain",  "blocks",   "block",     "lowers",
      "lower",     "raises",   "raise",     "affects",   "affect",   "involves", "involve",   "suggests",
      "suggest",   "recommends", "recommended", "includes", "include", "lasts",  "occurs",    "occur",
      "develops",  "develop",  "elevates",  "should",    "binds",    "bind",     "metabolizes", "acts",
      "presents",  "leads",    "lead",      "results",   "improves", "improve",  "worsens",   "relieves"};
  return kLexicon;
}

RuleExtractor::RuleExtractor(RuleExtractorOptions options) : options_(std::move(options)) {
  if (options_.lexicon.empty()) options_.lexicon = default_lexicon();
  for (auto& w : options_.lexicon) w = text::to_lower(w);
  std::map<std::string, std::string> lowered;
  for (auto& [k, v] : options_.aliases) lowered[text::to_lower(k)] = v;
  options_.aliases = std::move(lowered);
}

std::vector<RawClaim> RuleExtractor::extract(std::string_view response) {
  const auto sentences = text::split_sentences(response);
  const auto mc = detect_multiple_choice(sentences);
  std::unordered_set<std::size_t> dropped;
  std::unordered_set<std::size_t> selected_option;
  for (const auto& [idx, letter] : mc.option_sentences) {
    if (mc.selected && *mc.selected == letter) {
      selected_option.insert(idx);
    } else {
      dropped.insert(idx);
    }
  }

  std::vector<RawClaim> out;
  std::string subject;
  for (std::size_t si = 0; si < sentences.size(); ++si) {
    if (dropped.count(si)) continue;
    std::string sentence = selected_option.count(si) ? strip_option_label(sentences[si]) : sentences[si];
    if (!sentence.empty() && text::trim(sentence).back() == '?') continue;

    for (const auto& clause : split_clauses(strip_terminal(sentence))) {
      auto ws = words(clause);
      if (ws.empty()) continue;

      // Locate the first factual verb; units without one are noise.
      std::size_t verb = ws.size();
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (contains(options_.lexicon, bare_word(ws[i]))) {
          verb = i;
          break;
        }
      }
      if (verb == ws.size()) continue;

      const std::string first = bare_word(ws[0]);
      if (contains(kPronouns, first)) {
        const auto alias = options_.aliases.find(first);
        const std::string antecedent = alias != options_.aliases.end() ? alias->second : subject;
        if (antecedent.empty()) continue;  // unresolved pronoun: not self-contained
        ws[0] = antecedent;
      } else if (verb == 0 || (verb > 0 && std::all_of(ws.begin(), ws.begin() + static_cast<long>(verb), [](const auto& w) {
                                 return contains(kAdverbs, bare_word(w));
                               }))) {
        if (subject.empty()) continue;
        ws.insert(ws.begin(), subject);
        ++verb;
      } else {
        // New explicit subject: the words before the verb minus trailing adverbs.
        std::size_t end = verb;
        while (end > 0 && contains(kAdverbs, bare_word(ws[end - 1]))) --end;
        std::vector<std::string> subj(ws.begin(), ws.begin() + static_cast<long>(end));
        subject = text::join(subj, " ");
      }
      if (ws.size() < 2) continue;

      auto claim = finish_claim(text::join(ws, " "));
      if (!claim.empty()) out.push_back({std::move(claim), {si, si}});
    }
  }
  return out;
}

std::vector<AtomicClaim> extract_claims(std::string_view response, ExtractorBackend& extractor) {
  if (text::trim(response).empty()) throw Error(Errc::InvalidInput, "response", "empty response");
  std::vector<RawClaim> raw;
  try {
    raw = extractor.extract(response);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::ExtractorUnavailable, {}, e.what());
  }

  std::vector<std::size_t> order(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    order[i] = i;
    if (text::trim(raw[i].text).empty()) throw Error(Errc::ExtractorMalformedOutput, {}, "empty claim text");
    if (raw[i].span.last < raw[i].span.first)
      throw Error(Errc::ExtractorMalformedOutput, raw[i].text, "inverted source span");
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a].span.first < raw[b].span.first; });

  std::vector<AtomicClaim> out;
  std::unordered_set<std::string> seen;
  for (const std::size_t i : order) {
    std::string t(text::trim(raw[i].text));
    if (!seen.insert(t).second) continue;
    out.push_back({std::move(t), raw[i].span, out.size()});
  }
  return out;
}

SemanticMatcher::SemanticMatcher(EmbeddingBackend& embedder, double threshold)
    : embedder_(&embedder), threshold_(threshold) {
  if (!(threshold > -1.0 && threshold <= 1.0)) throw Error(Errc::InvalidThresholds, "theta_match");
}

double SemanticMatcher::similarity(std::string_view a, std::string_view b) {
  return cosine(embedder_->embed(a), embedder_->embed(b));
}

ExtractionReport compare_extractions(std::span<const AtomicClaim> reference, std::span<const AtomicClaim> candidate,
                                     SemanticMatcher& matcher) {
  if (reference.empty()) throw Error(Errc::EmptyReference);

  auto& embedder = matcher.embedder();
  Matrix<double> ref(embedder.dimension(), static_cast<Eigen::Index>(reference.size()));
  Matrix<double> cand(embedder.dimension(), static_cast<Eigen::Index>(candidate.size()));
  for (std::size_t i = 0; i < reference.size(); ++i) ref.col(static_cast<Eigen::Index>(i)) = embedder.embed(reference[i].text);
  for (std::size_t j = 0; j < candidate.size(); ++j) cand.col(static_cast<Eigen::Index>(j)) = embedder.embed(candidate[j].text);
  const Matrix<double> sim = ref.transpose() * cand;

  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      if (sim(i, j) >= matcher.threshold()) pairs.emplace_back(sim(i, j), i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });

  std::vector<bool> ref_used(reference.size(), false);
  std::vector<bool> cand_used(candidate.size(), false);
  std::size_t matched = 0;
  for (const auto& [s, i, j] : pairs) {
    if (ref_used[i] || cand_used[j]) continue;
    ref_used[i] = cand_used[j] = true;
    ++matched;
  }

  ExtractionReport r;
  r.recall = static_cast<double>(matched) / static_cast<double>(reference.size());
  r.reference_exclusive_rate = 1.0 - r.recall;
  r.candidate_exclusive_rate =
      candidate.empty() ? 0.0
                        : static_cast<double>(candidate.size() - matched) / static_cast<double>(candidate.size());
  r.claim_count = static_cast<double>(candidate.size());
  return r;
}

ExtractionReport mean_report(std::span<const ExtractionReport> reports) {
  ExtractionReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.recall += r.recall;
    m.candidate_exclusive_rate += r.candidate_exclusive_rate;
    m.reference_exclusive_rate += r.reference_exclusive_rate;
    m.claim_count += r.claim_count;
  }
  const double n = static_cast<double>(reports.size());
  m.recall /= n;
  m.candidate_exclusive_rate /= n;
  m.reference_exclusive_rate /= n;
  m.claim_count /= n;
  return m;
}

}  // namespace clinrl
