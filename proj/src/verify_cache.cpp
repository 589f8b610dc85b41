#include "clinrl/verify_cache.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "clinrl/text.hpp"

namespace clinrl {

using nlohmann::json;

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::Supported: return "Supported";
    case Label::Refuted: return "Refuted";
    case Label::Uncertain: return "Uncertain";
  }
  return "Uncertain";
}

Label label_from_string(std::string_view s) {
  const auto l = text::to_lower(text::trim(s));
  if (l == "supported") return Label::Supported;
  if (l == "refuted") return Label::Refuted;
  if (l == "uncertain") return Label::Uncertain;
  throw Error(Errc::InvalidInput, std::string(s), "unknown verdict label");
}

std::string_view to_string(CacheLevel level) noexcept {
  switch (level) {
    case CacheLevel::L1Exact: return "L1Exact";
    case CacheLevel::L2Semantic: return "L2Semantic";
    case CacheLevel::External: return "External";
  }
  return "External";
}

TableVerifier::TableVerifier(std::unordered_map<std::string, Label> table, Label fallback)
    : table_(std::move(table)), fallback_(fallback) {}

VerifierResult TableVerifier::verify(std::string_view claim) {
  ++calls_;
  const auto it = table_.find(std::string(claim));
  if (it == table_.end()) return {fallback_, "no ground-truth entry"};
  return {it->second, "ground-truth table"};
}

ExactIndex::ExactIndex(Eigen::Index dimension) : data_(dimension, 0) {}

void ExactIndex::add(const Embedding& v, std::size_t key) {
  if (v.size() != data_.rows()) throw Error(Errc::EmbeddingDimensionMismatch);
  const auto n = static_cast<Eigen::Index>(keys_.size());
  if (n == data_.cols()) data_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(16, 2 * n));
  data_.col(n) = v;
  keys_.push_back(key);
}

std::optional<Neighbor> ExactIndex::nearest(const Embedding& q) const {
  if (keys_.empty()) return std::nullopt;
  if (q.size() != data_.rows()) throw Error(Errc::EmbeddingDimensionMismatch);
  const auto n = static_cast<Eigen::Index>(keys_.size());
  Eigen::Index best = 0;
  const double sim = (data_.leftCols(n).transpose() * q).maxCoeff(&best);
  return Neighbor{keys_[static_cast<std::size_t>(best)], sim};
}

void ExactIndex::clear() {
  data_.resize(data_.rows(), 0);
  keys_.clear();
}

// ---------------------------------------------------------------------------

ClaimCache::ClaimCache(EmbeddingBackend& embedder, VerifierBackend& verifier, CacheOptions options,
                       std::unique_ptr<VectorIndex> index)
    : embedder_(embedder), verifier_(verifier), options_(std::move(options)), index_(std::move(index)) {
  if (!(options_.semantic_threshold > 0.0 && options_.semantic_threshold <= 1.0)) {
    throw Error(Errc::InvalidThresholds, "theta_sem");
  }
  if (!index_) index_ = std::make_unique<ExactIndex>(embedder_.dimension());
  if (!options_.directory.empty()) {
    std::filesystem::create_directories(options_.directory);
    load();
  }
}

ClaimCache::~ClaimCache() = default;

bool ClaimCache::guard_allows(std::string_view a, std::string_view b) const {
  return !options_.numeric_guard || text::numeric_tokens(a) == text::numeric_tokens(b);
}

ClaimVerdict ClaimCache::verify(std::string_view claim_text) {
  const std::string key(claim_text);
  if (!options_.enabled) {
    VerifierResult r;
    try {
      r = verifier_.verify(key);
    } catch (const std::exception& e) {
      throw Error(Errc::VerifierUnavailable, key, e.what());
    }
    std::lock_guard lock(mutex_);
    ++stats_.lookups;
    ++stats_.external_calls;
    return {key, r.label, {CacheLevel::External, 1.0}, r.evidence_note};
  }

  const Embedding e = embedder_.embed(key);
  if (e.size() != embedder_.dimension()) throw Error(Errc::EmbeddingDimensionMismatch, key);

  std::unique_lock lock(mutex_);
  if (const auto it = l1_.find(key); it != l1_.end()) {
    ++stats_.lookups;
    ++stats_.l1_hits;
    return {key, it->second.label, {CacheLevel::L1Exact, 1.0}, it->second.note};
  }
  if (const auto n = index_->nearest(e); n && n->similarity >= options_.semantic_threshold) {
    const auto& hit = l2_[n->key];
    if (guard_allows(key, hit.text)) {
      ++stats_.lookups;
      ++stats_.l2_hits;
      return {key, hit.label, {CacheLevel::L2Semantic, n->similarity}, hit.note};
    }
  }
  if (const auto it = in_flight_.find(key); it != in_flight_.end()) {
    auto pending = it->second;
    lock.unlock();
    const VerifierResult r = pending.get();
    lock.lock();
    ++stats_.lookups;
    ++stats_.l1_hits;
    return {key, r.label, {CacheLevel::L1Exact, 1.0}, r.evidence_note};
  }

  std::promise<VerifierResult> promise;
  in_flight_.emplace(key, promise.get_future().share());
  lock.unlock();

  VerifierResult r;
  try {
    r = verifier_.verify(key);
  } catch (const std::exception& ex) {
    Error err(Errc::VerifierUnavailable, key, ex.what());
    promise.set_exception(std::make_exception_ptr(err));
    lock.lock();
    in_flight_.erase(key);
    throw err;
  }

  lock.lock();
  const Entry entry{r.label, r.evidence_note};
  l1_[key] = entry;
  SemanticEntry sem{key, r.label, r.evidence_note, e};
  index_->add(e, l2_.size());
  l2_.push_back(sem);
  if (!options_.directory.empty()) {
    append_l1(key, entry);
    append_l2(sem);
  }
  ++stats_.lookups;
  ++stats_.external_calls;
  in_flight_.erase(key);
  promise.set_value(r);
  return {key, r.label, {CacheLevel::External, 1.0}, r.evidence_note};
}

std::vector<BatchItem> ClaimCache::verify_batch(std::span<const AtomicClaim> claims) {
  std::vector<BatchItem> out(claims.size());
  auto run_one = [&](std::size_t i) {
    try {
      out[i].verdict = verify(claims[i].text);
    } catch (const Error& e) {
      out[i].error = e;
    } catch (const std::exception& e) {
      out[i].error = Error(Errc::VerifierUnavailable, claims[i].text, e.what());
    }
  };
  const std::size_t workers = std::min(options_.parallelism, claims.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < claims.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < claims.size(); i = next++) run_one(i);
    });
  }
  return out;
}

CacheStats ClaimCache::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t ClaimCache::l1_size() const {
  std::lock_guard lock(mutex_);
  return l1_.size();
}

std::size_t ClaimCache::l2_size() const {
  std::lock_guard lock(mutex_);
  return l2_.size();
}

void ClaimCache::flush(FlushLevel level) {
  std::lock_guard lock(mutex_);
  if (level == FlushLevel::L1 || level == FlushLevel::Both) {
    l1_.clear();
    if (!options_.directory.empty()) std::ofstream(options_.directory / "l1.log", std::ios::trunc);
  }
  if (level == FlushLevel::L2 || level == FlushLevel::Both) {
    l2_.clear();
    index_->clear();
    if (!options_.directory.empty()) std::ofstream(options_.directory / "l2.log", std::ios::trunc);
  }
}

namespace {

json l1_record(const std::string& text, Label label, const std::string& note) {
  return {{"key", text}, {"label", to_string(label)}, {"note", note}};
}

json l2_record(const std::string& text, Label label, const std::string& note, const Embedding& v) {
  json j = l1_record(text, label, note);
  j["vector"] = std::vector<double>(v.data(), v.data() + v.size());
  return j;
}

}  // namespace

void ClaimCache::append_l1(const std::string& text, const Entry& e) {
  std::ofstream out(options_.directory / "l1.log", std::ios::app);
  out << l1_record(text, e.label, e.note).dump() << '\n';
}

void ClaimCache::append_l2(const SemanticEntry& e) {
  std::ofstream out(options_.directory / "l2.log", std::ios::app);
  out << l2_record(e.text, e.label, e.note, e.vector).dump() << '\n';
}

void ClaimCache::load() {
  std::size_t l1_lines = 0;
  if (std::ifstream in(options_.directory / "l1.log"); in) {
    for (std::string line; std::getline(in, line);) {
      if (text::trim(line).empty()) continue;
      const auto j = json::parse(line);
      l1_[j.at("key").get<std::string>()] = {label_from_string(j.at("label").get<std::string>()),
                                              j.value("note", std::string{})};
      ++l1_lines;
    }
  }
  if (std::ifstream in(options_.directory / "l2.log"); in) {
    for (std::string line; std::getline(in, line);) {
      if (text::trim(line).empty()) continue;
      const auto j = json::parse(line);
      const auto vec = j.at("vector").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(vec.size()) != embedder_.dimension()) {
        throw Error(Errc::EmbeddingDimensionMismatch, j.at("key").get<std::string>(), "persisted vector");
      }
      SemanticEntry e{j.at("key").get<std::string>(), label_from_string(j.at("label").get<std::string>()),
                      j.value("note", std::string{}), Eigen::Map<const Embedding>(vec.data(), static_cast<Eigen::Index>(vec.size()))};
      index_->add(e.vector, l2_.size());
      l2_.push_back(std::move(e));
    }
  }
  if (l1_lines > 2 * l1_.size() + 16) compact_unlocked();
}

void ClaimCache::compact() {
  std::lock_guard lock(mutex_);
  compact_unlocked();
}

void ClaimCache::compact_unlocked() {
  if (options_.directory.empty()) return;
  const auto write_atomically = [&](const std::filesystem::path& target, auto&& body) {
    const auto tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      body(out);
    }
    std::filesystem::rename(tmp, target);
  };
  // Sorted keys keep compacted files byte-stable.
  std::vector<const std::string*> keys;
  keys.reserve(l1_.size());
  for (const auto& [k, e] : l1_) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
  write_atomically(options_.directory / "l1.log", [&](std::ofstream& out) {
    for (const auto* k : keys) {
      const auto& e = l1_.at(*k);
      out << l1_record(*k, e.label, e.note).dump() << '\n';
    }
  });
  write_atomically(options_.directory / "l2.log", [&](std::ofstream& out) {
    for (const auto& e : l2_) out << l2_record(e.text, e.label, e.note, e.vector).dump() << '\n';
  });
}

}  // namespace clinrl
