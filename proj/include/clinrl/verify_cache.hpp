#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinrl/claims.hpp"
#include "clinrl/embedding.hpp"
#include "clinrl/error.hpp"

namespace clinrl {

enum class Label { Supported, Refuted, Uncertain };

std::string_view to_string(Label label) noexcept;
Label label_from_string(std::string_view s);

enum class CacheLevel { L1Exact, L2Semantic, External };

std::string_view to_string(CacheLevel level) noexcept;

struct Provenance {
  CacheLevel level = CacheLevel::External;
  /// Cosine to the reused entry; meaningful for L2Semantic only.
  double similarity = 1.0;
};

struct ClaimVerdict {
  std::string claim_text;
  Label label = Label::Uncertain;
  Provenance provenance;
  std::optional<std::string> evidence_note;
};

/// l1_hits + l2_hits + external_calls == lookups at every snapshot. Lookups
/// whose external verification failed are not counted.
struct CacheStats {
  std::uint64_t lookups = 0;
  std::uint64_t l1_hits = 0;
  std::uint64_t l2_hits = 0;
  std::uint64_t external_calls = 0;

  double hit_rate() const noexcept {
    return lookups == 0 ? 0.0 : static_cast<double>(l1_hits + l2_hits) / static_cast<double>(lookups);
  }
  bool consistent() const noexcept { return l1_hits + l2_hits + external_calls == lookups; }
};

struct VerifierResult {
  Label label = Label::Uncertain;
  std::string evidence_note;
};

/// The search-augmented verification agent. Throws on failure.
class VerifierBackend {
 public:
  virtual ~VerifierBackend() = default;
  virtual VerifierResult verify(std::string_view claim) = 0;
};

/// Ground-truth table keyed by exact claim text.
class TableVerifier final : public VerifierBackend {
 public:
  explicit TableVerifier(std::unordered_map<std::string, Label> table, Label fallback = Label::Uncertain);

  VerifierResult verify(std::string_view claim) override;
  std::uint64_t calls() const noexcept { return calls_.load(); }

 private:
  std::unordered_map<std::string, Label> table_;
  Label fallback_;
  std::atomic<std::uint64_t> calls_{0};
};

struct Neighbor {
  std::size_t key = 0;
  double similarity = 0.0;
};

/// Nearest-neighbor index over unit vectors, by inner product.
class VectorIndex {
 public:
  virtual ~VectorIndex() = default;
  virtual void add(const Embedding& v, std::size_t key) = 0;
  virtual std::optional<Neighbor> nearest(const Embedding& q) const = 0;
  virtual void clear() = 0;
  virtual std::size_t size() const = 0;
};

/// Brute-force scan over a column-major matrix of stored vectors.
class ExactIndex final : public VectorIndex {
 public:
  explicit ExactIndex(Eigen::Index dimension);

  void add(const Embedding& v, std::size_t key) override;
  std::optional<Neighbor> nearest(const Embedding& q) const override;
  void clear() override;
  std::size_t size() const override { return keys_.size(); }

 private:
  Matrix<double> data_;
  std::vector<std::size_t> keys_;
};

enum class FlushLevel { L1, L2, Both };

struct CacheOptions {
  double semantic_threshold = 0.95;
  /// Reject an L2 hit when the two texts carry different numeric tokens
  /// (dosages, durations).
  bool numeric_guard = true;
  /// false: every lookup goes to the verifier and nothing is stored.
  bool enabled = true;
  /// Empty: in-memory only. Otherwise holds l1.log and l2.log.
  std::filesystem::path directory;
  std::size_t parallelism = 1;
};

struct BatchItem {
  std::optional<ClaimVerdict> verdict;
  std::optional<Error> error;

  bool ok() const noexcept { return verdict.has_value(); }
};

/// Two-level claim verdict cache: L1 by exact text, L2 by embedding nearest
/// neighbor, then the external verifier. Thread-safe; concurrent misses on
/// the same text share one verifier call.
class ClaimCache {
 public:
  ClaimCache(EmbeddingBackend& embedder, VerifierBackend& verifier, CacheOptions options = {},
             std::unique_ptr<VectorIndex> index = nullptr);
  ~ClaimCache();

  ClaimCache(const ClaimCache&) = delete;
  ClaimCache& operator=(const ClaimCache&) = delete;

  ClaimVerdict verify(std::string_view claim_text);
  ClaimVerdict verify(const AtomicClaim& claim) { return verify(claim.text); }

  /// Order-preserving. A failing claim is reported in its slot; the rest of
  /// the batch still runs.
  std::vector<BatchItem> verify_batch(std::span<const AtomicClaim> claims);

  CacheStats stats() const;
  void flush(FlushLevel level);

  /// Rewrites both logs with one record per live entry.
  void compact();

  std::size_t l1_size() const;
  std::size_t l2_size() const;
  const CacheOptions& options() const noexcept { return options_; }

 private:
  struct Entry {
    Label label;
    std::string note;
  };
  struct SemanticEntry {
    std::string text;
    Label label;
    std::string note;
    Embedding vector;
  };

  void load();
  void compact_unlocked();
  void append_l1(const std::string& text, const Entry& e);
  void append_l2(const SemanticEntry& e);
  bool guard_allows(std::string_view a, std::string_view b) const;

  EmbeddingBackend& embedder_;
  VerifierBackend& verifier_;
  CacheOptions options_;
  std::unique_ptr<VectorIndex> index_;

  mutable std::mutex mutex_;
  std::unordered_map<std::string, Entry> l1_;
  std::vector<SemanticEntry> l2_;
  std::unordered_map<std::string, std::shared_future<VerifierResult>> in_flight_;
  CacheStats stats_;
};

}  // namespace clinrl
