#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinrl/embedding.hpp"
#include "clinrl/error.hpp"

namespace clinrl {

/// Inclusive sentence-index range of the response a claim came from.
struct SourceSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const SourceSpan&) const = default;
};

struct AtomicClaim {
  std::string text;
  SourceSpan span;
  std::size_t order_index = 0;
};

struct RawClaim {
  std::string text;
  SourceSpan span;
};

class ExtractorBackend {
 public:
  virtual ~ExtractorBackend() = default;
  virtual std::vector<RawClaim> extract(std::string_view response) = 0;
};

struct RuleExtractorOptions {
  /// Pronoun (lower case) -> antecedent. Pronouns missing here resolve to the
  /// subject of the most recent claim.
  std::map<std::string, std::string> aliases;
  /// Copulas and domain verbs marking a unit as factual. Empty means default.
  std::vector<std::string> lexicon;
};

/// Deterministic extractor. Sentences split on terminal punctuation, then
/// into clauses on ';', ", and", ", but", ", while". A clause is kept when it
/// is declarative and contains a lexicon verb. Leading pronouns are replaced
/// by their antecedent and subject-less clauses inherit the previous subject.
/// For multiple-choice responses (two or more lettered option lines) only the
/// selected option is kept; the other options are distractors.
class RuleExtractor final : public ExtractorBackend {
 public:
  explicit RuleExtractor(RuleExtractorOptions options = {});

  std::vector<RawClaim> extract(std::string_view response) override;

  static const std::vector<std::string>& default_lexicon();

 private:
  RuleExtractorOptions options_;
};

/// Runs the extractor and enforces the output contract: claims ordered by
/// first appearance, exact duplicates dropped (earliest kept), order_index
/// 0..n-1.
std::vector<AtomicClaim> extract_claims(std::string_view response, ExtractorBackend& extractor);

/// Claim equivalence by embedding cosine.
class SemanticMatcher {
 public:
  explicit SemanticMatcher(EmbeddingBackend& embedder, double threshold = 0.90);

  double threshold() const noexcept { return threshold_; }
  double similarity(std::string_view a, std::string_view b);
  bool equivalent(std::string_view a, std::string_view b) { return similarity(a, b) >= threshold_; }
  EmbeddingBackend& embedder() noexcept { return *embedder_; }

 private:
  EmbeddingBackend* embedder_;
  double threshold_;
};

struct ExtractionReport {
  double recall = 0.0;
  double candidate_exclusive_rate = 0.0;
  double reference_exclusive_rate = 0.0;
  double claim_count = 0.0;
};

/// Greedy maximal one-to-one matching by descending similarity (ties broken by
/// reference then candidate index), then the fidelity rates. claim_count is the
/// candidate's claim count.
ExtractionReport compare_extractions(std::span<const AtomicClaim> reference, std::span<const AtomicClaim> candidate,
                                     SemanticMatcher& matcher);

/// Per-response mean of each field.
ExtractionReport mean_report(std::span<const ExtractionReport> reports);

}  // namespace clinrl
