#include "support.hpp"

#include <chrono>
#include <filesystem>
#include <random>
#include <thread>

#include "clinrl/case.hpp"
#include "clinrl/verify_cache.hpp"

using namespace clinrl;
using clinrl::testing::FixedEmbedder;
using clinrl::testing::unit2;

namespace {

class CountingVerifier final : public VerifierBackend {
 public:
  VerifierResult verify(std::string_view claim) override {
    ++calls;
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    if (claim.find("fail") != std::string_view::npos) throw std::runtime_error("search agent down");
    return {claim.find("false") != std::string_view::npos ? Label::Refuted : Label::Supported, "note"};
  }
  std::atomic<int> calls{0};
  std::chrono::milliseconds delay{0};
};

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("clinrl_cache_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

std::vector<AtomicClaim> claims_of(const std::vector<std::string>& t) {
  std::vector<AtomicClaim> out;
  for (std::size_t i = 0; i < t.size(); ++i) out.push_back({t[i], {i, i}, i});
  return out;
}

}  // namespace

TEST(ClaimCache, ExactRepeatIsL1WithoutExternalCall) {
  HashEmbedder emb;
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  const auto first = cache.verify("Aspirin inhibits COX-1.");
  EXPECT_EQ(first.provenance.level, CacheLevel::External);
  EXPECT_EQ(cache.l1_size(), 1u);
  EXPECT_EQ(cache.l2_size(), 1u);
  const auto again = cache.verify("Aspirin inhibits COX-1.");
  EXPECT_EQ(again.provenance.level, CacheLevel::L1Exact);
  EXPECT_EQ(again.label, first.label);
  EXPECT_EQ(ver.calls.load(), 1);
}

TEST(ClaimCache, SemanticHitReusesLabelWithSimilarity) {
  FixedEmbedder emb(2);
  const double angle = std::acos(0.97);
  emb.set("stored claim false", unit2(0.0));
  emb.set("paraphrase", unit2(angle));
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  cache.verify("stored claim false");
  const auto v = cache.verify("paraphrase");
  EXPECT_EQ(v.provenance.level, CacheLevel::L2Semantic);
  EXPECT_NEAR(v.provenance.similarity, 0.97, 1e-12);
  EXPECT_EQ(v.label, Label::Refuted);
  EXPECT_EQ(ver.calls.load(), 1);
}

TEST(ClaimCache, BelowThresholdGoesExternal) {
  FixedEmbedder emb(2);
  emb.set("a", unit2(0.0));
  emb.set("b", unit2(std::acos(0.94)));
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  cache.verify("a");
  EXPECT_EQ(cache.verify("b").provenance.level, CacheLevel::External);
}

TEST(ClaimCache, NumericGuardRejectsDosageMismatch) {
  FixedEmbedder fixed(2);
  fixed.set("dose 5 mg", unit2(0.0));
  fixed.set("dose 50 mg", unit2(0.0));
  CountingVerifier v2;
  ClaimCache guarded(fixed, v2);
  guarded.verify("dose 5 mg");
  EXPECT_EQ(guarded.verify("dose 50 mg").provenance.level, CacheLevel::External);
  CacheOptions off;
  off.numeric_guard = false;
  CountingVerifier v3;
  ClaimCache unguarded(fixed, v3, off);
  unguarded.verify("dose 5 mg");
  EXPECT_EQ(unguarded.verify("dose 50 mg").provenance.level, CacheLevel::L2Semantic);
}

TEST(ClaimCache, BatchWithSharedClaimsCallsExternalOnlyForNovel) {
  FixedEmbedder emb(16);
  std::vector<std::string> prior, batch;
  for (int i = 0; i < 10; ++i) {
    Embedding v = Embedding::Zero(16);
    v(i) = 1.0;
    emb.set("prior " + std::to_string(i), v);
    Embedding p = v;
    p(15) = 0.2;
    emb.set("para " + std::to_string(i), p);
    prior.push_back("prior " + std::to_string(i));
  }
  for (int i = 0; i < 8; ++i) batch.push_back("para " + std::to_string(i));
  batch.push_back("novel one");
  batch.push_back("novel two");
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  cache.verify_batch(claims_of(prior));
  const auto before = cache.stats();
  const auto items = cache.verify_batch(claims_of(batch));
  const auto after = cache.stats();
  EXPECT_LE(after.external_calls - before.external_calls, 2u);
  EXPECT_EQ(after.l2_hits - before.l2_hits, 8u);
  for (const auto& it : items) EXPECT_TRUE(it.ok());
}

TEST(ClaimCache, IdenticalBatchOneExternalCall) {
  HashEmbedder emb;
  CountingVerifier ver;
  CacheOptions opt;
  opt.parallelism = 4;
  ver.delay = std::chrono::milliseconds(20);
  ClaimCache cache(emb, ver, opt);
  const auto items = cache.verify_batch(claims_of(std::vector<std::string>(12, "Insulin lowers glucose.")));
  EXPECT_EQ(ver.calls.load(), 1);
  const auto s = cache.stats();
  EXPECT_EQ(s.external_calls, 1u);
  EXPECT_EQ(s.lookups, 12u);
  EXPECT_TRUE(s.consistent());
  for (const auto& it : items) EXPECT_EQ(it.verdict->label, Label::Supported);
}

TEST(ClaimCache, EmptyBatchLeavesStats) {
  HashEmbedder emb;
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  EXPECT_TRUE(cache.verify_batch({}).empty());
  EXPECT_EQ(cache.stats().lookups, 0u);
}

TEST(ClaimCache, FailingClaimReportedInItsSlot) {
  HashEmbedder emb;
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  const auto items = cache.verify_batch(claims_of({"good claim one", "this will fail", "good claim two"}));
  EXPECT_TRUE(items[0].ok());
  ASSERT_FALSE(items[1].ok());
  EXPECT_EQ(items[1].error->code(), Errc::VerifierUnavailable);
  EXPECT_TRUE(items[2].ok());
  const auto s = cache.stats();
  EXPECT_EQ(s.lookups, 2u);
  EXPECT_TRUE(s.consistent());
  EXPECT_EQ(cache.l1_size(), 2u);
}

TEST(ClaimCache, HitRateArithmetic) {
  CacheStats s{100, 50, 20, 30};
  EXPECT_DOUBLE_EQ(s.hit_rate(), 0.70);
  EXPECT_TRUE(s.consistent());
}

TEST(ClaimCache, FlushThenExternal) {
  HashEmbedder emb;
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  cache.verify("Metformin lowers glucose.");
  cache.flush(FlushLevel::Both);
  EXPECT_EQ(cache.verify("Metformin lowers glucose.").provenance.level, CacheLevel::External);
  cache.flush(FlushLevel::L1);
  EXPECT_EQ(cache.verify("Metformin lowers glucose.").provenance.level, CacheLevel::L2Semantic);
}

TEST(ClaimCache, DisabledAlwaysExternal) {
  HashEmbedder emb;
  CountingVerifier ver;
  CacheOptions opt;
  opt.enabled = false;
  ClaimCache cache(emb, ver, opt);
  cache.verify("x is y");
  cache.verify("x is y");
  EXPECT_EQ(ver.calls.load(), 2);
  EXPECT_EQ(cache.l1_size(), 0u);
}

TEST(ClaimCache, PersistsAcrossInstances) {
  const auto dir = temp_dir("persist");
  HashEmbedder emb;
  CountingVerifier ver;
  CacheOptions opt;
  opt.directory = dir;
  {
    ClaimCache cache(emb, ver, opt);
    cache.verify("Statins lower LDL cholesterol.");
    cache.verify("Warfarin is false claim.");
  }
  ClaimCache reopened(emb, ver, opt);
  EXPECT_EQ(reopened.l1_size(), 2u);
  const auto v = reopened.verify("Warfarin is false claim.");
  EXPECT_EQ(v.provenance.level, CacheLevel::L1Exact);
  EXPECT_EQ(v.label, Label::Refuted);
  EXPECT_EQ(ver.calls.load(), 2);
  reopened.compact();
  reopened.flush(FlushLevel::Both);
  ClaimCache empty(emb, ver, opt);
  EXPECT_EQ(empty.l1_size(), 0u);
  std::filesystem::remove_all(dir);
}

TEST(ClaimCache, InvalidThreshold) {
  HashEmbedder emb;
  CountingVerifier ver;
  CacheOptions opt;
  opt.semantic_threshold = 0.0;
  EXPECT_ERRC(ClaimCache(emb, ver, opt), Errc::InvalidThresholds);
}

TEST(ExactIndex, NearestByInnerProduct) {
  ExactIndex idx(2);
  EXPECT_FALSE(idx.nearest(unit2(0.0)).has_value());
  idx.add(unit2(0.0), 7);
  idx.add(unit2(1.0), 9);
  const auto n = idx.nearest(unit2(0.9));
  ASSERT_TRUE(n);
  EXPECT_EQ(n->key, 9u);
  EXPECT_NEAR(n->similarity, std::cos(0.1), 1e-12);
  EXPECT_ERRC(idx.add(Embedding::Zero(3), 1), Errc::EmbeddingDimensionMismatch);
}

namespace {

std::vector<std::string> workload(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> nouns{"aspirin", "metformin", "insulin", "warfarin", "heparin", "statin",
                                       "lisinopril", "amoxicillin", "prednisone", "albuterol"};
  const std::vector<std::string> verbs{"reduces", "increases", "treats", "causes", "prevents"};
  const std::vector<std::string> objects{"fever", "glucose", "clotting", "pressure", "infection", "inflammation",
                                         "pain", "asthma"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = nouns[index_draw(rng, nouns.size())];
    const auto& b = verbs[index_draw(rng, verbs.size())];
    const auto& c = objects[index_draw(rng, objects.size())];
    switch (index_draw(rng, 3)) {
      case 0: out.push_back(a + " " + b + " " + c); break;
      case 1: out.push_back("The " + c + " " + b + " " + a); break;
      default: out.push_back(a + " " + b + " the " + c); break;
    }
  }
  return out;
}

}  // namespace

TEST(ClaimCacheProperty, ConservationAndDeterminism) {
  const auto w = workload(5, 600);
  auto run = [&](double theta) {
    HashEmbedder emb;
    CountingVerifier ver;
    CacheOptions opt;
    opt.semantic_threshold = theta;
    ClaimCache cache(emb, ver, opt);
    std::vector<Label> labels;
    for (const auto& t : w) {
      labels.push_back(cache.verify(t).label);
      EXPECT_TRUE(cache.stats().consistent());
    }
    return std::make_pair(labels, cache.stats());
  };
  const auto [l1, s1] = run(0.95);
  const auto [l2, s2] = run(0.95);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(s1.l1_hits, s2.l1_hits);
  EXPECT_EQ(s1.l2_hits, s2.l2_hits);
  EXPECT_EQ(s1.external_calls, s2.external_calls);
}

TEST(ClaimCacheProperty, L1LabelMatchesOriginalVerdict) {
  HashEmbedder emb;
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  std::unordered_map<std::string, Label> first;
  for (const auto& t : workload(6, 400)) {
    const auto v = cache.verify(t);
    if (v.provenance.level == CacheLevel::External) first.emplace(t, v.label);
    if (v.provenance.level == CacheLevel::L1Exact) {
      ASSERT_TRUE(first.count(t));
      EXPECT_EQ(first.at(t), v.label);
    }
  }
}

TEST(ClaimCacheProperty, RaisingThresholdNeverAddsL2Hits) {
  // Paraphrase workload built on HashEmbedder word-order invariance.
  const auto w = workload(8, 500);
  std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
  for (double theta : {0.5, 0.7, 0.9, 0.95, 0.99, 1.0}) {
    HashEmbedder emb;
    CountingVerifier ver;
    CacheOptions opt;
    opt.semantic_threshold = theta;
    ClaimCache cache(emb, ver, opt);
    for (const auto& t : w) cache.verify(t);
    EXPECT_LE(cache.stats().l2_hits, prev) << theta;
    prev = cache.stats().l2_hits;
  }
}

TEST(ClaimCacheProperty, ConcurrentLookupsStayConsistent) {
  HashEmbedder emb;
  CountingVerifier ver;
  ClaimCache cache(emb, ver);
  const auto w = workload(9, 400);
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = 0; i < w.size(); ++i) cache.verify(w[(i + 100 * t) % w.size()]);
    });
  }
  threads.clear();
  const auto s = cache.stats();
  EXPECT_TRUE(s.consistent());
  EXPECT_EQ(s.lookups, 1600u);
}
