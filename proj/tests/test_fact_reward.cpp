#include "support.hpp"

#include <random>

#include "clinrl/case.hpp"
#include "clinrl/fact_reward.hpp"

using namespace clinrl;
using clinrl::testing::FixedEmbedder;
using clinrl::testing::unit2;

namespace {

ClaimCluster cluster(double saliency, Label label) {
  ClaimCluster c;
  c.members.push_back({{"claim", {0, 0}, 0}, label});
  c.saliency = saliency;
  return c;
}

LabeledClaim labeled(const std::string& text, std::size_t order, Label label = Label::Supported) {
  return {{text, {order, order}, order}, label};
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(ClusterClaims, IdenticalClaimsFormOneCluster) {
  HashEmbedder emb;
  std::vector<LabeledClaim> claims{labeled("Aspirin inhibits COX-1.", 0), labeled("Aspirin inhibits COX-1.", 1),
                                   labeled("Aspirin inhibits COX-1.", 2)};
  const std::vector<std::string> sentences{"Aspirin inhibits COX-1."};
  const auto clusters = cluster_claims(claims, sentences, emb);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].members.size(), 3u);
  EXPECT_EQ(clusters[0].rep().claim.order_index, 0u);
  EXPECT_NEAR(clusters[0].saliency, 1.0, 1e-12);
}

TEST(ClusterClaims, DistantClaimsStaySeparate) {
  FixedEmbedder emb(2);
  emb.set("a", unit2(0.0));
  emb.set("b", unit2(std::acos(0.80)));
  std::vector<LabeledClaim> claims{labeled("a", 0), labeled("b", 1)};
  const auto clusters = cluster_claims(claims, std::vector<std::string>{}, emb);
  EXPECT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[0].saliency, 0.0);
}

TEST(ClusterClaims, RepresentativeIsEarliestRegardlessOfInputOrder) {
  HashEmbedder emb;
  std::vector<LabeledClaim> claims{labeled("cox inhibits aspirin", 4, Label::Refuted),
                                   labeled("aspirin inhibits cox", 1, Label::Supported)};
  const auto clusters = cluster_claims(claims, std::vector<std::string>{"x"}, emb);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].rep().claim.order_index, 1u);
  EXPECT_EQ(clusters[0].rep().label, Label::Supported);
}

TEST(FactPenalty, HandEvaluated) {
  const std::vector<ClaimCluster> mixed{cluster(1.0, Label::Supported), cluster(1.0, Label::Refuted)};
  EXPECT_DOUBLE_EQ(fact_penalty(mixed), -1.0 / (2.0 + 1e-8));
  const std::vector<ClaimCluster> good{cluster(0.7, Label::Supported), cluster(0.2, Label::Supported)};
  EXPECT_EQ(fact_penalty(good), 0.0);
  const std::vector<ClaimCluster> bad{cluster(0.7, Label::Refuted), cluster(0.2, Label::Uncertain)};
  EXPECT_NEAR(fact_penalty(bad), -1.0, 1e-7);
  EXPECT_EQ(fact_penalty({}), 0.0);
}

TEST(Gate, HandEvaluatedValues) {
  EXPECT_EQ(gate_lambda(0.85), 0.5);
  EXPECT_NEAR(gate_lambda(0.95), 0.9933071490757153, 1e-12);
  EXPECT_NEAR(gate_lambda(0.55), 3.059022269256247e-07, 1e-15);
  EXPECT_ERRC(gate_lambda(1.2), Errc::InvalidInput);
  GateParams bad;
  bad.tau_max = 0.7;
  EXPECT_ERRC(gate_lambda(0.8, bad), Errc::InvalidThresholds);
}

TEST(GateProperty, MonotoneAndSymmetric) {
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double r = i / 1000.0;
    const double l = gate_lambda(r);
    EXPECT_NEAR(l, logistic(10.0 * (r - 0.85) / 0.2), 1e-12);
    if (r > 0.3 && r < 1.0) {
      EXPECT_GT(l, prev) << r;
    }
    prev = l;
  }
  EXPECT_NEAR(gate_lambda(0.75) + gate_lambda(0.95), 1.0, 1e-12);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    GateParams p;
    p.tau_min = 0.5 * unit_draw(rng);
    p.tau_max = p.tau_min + 0.05 + 0.4 * unit_draw(rng);
    p.kappa = 1.0 + 20.0 * unit_draw(rng);
    EXPECT_EQ(gate_lambda(p.center(), p), 0.5);
    EXPECT_NEAR(gate_lambda(p.tau_min, p) + gate_lambda(p.tau_max, p), 1.0, 1e-12);
  }
}

TEST(FactAwareReward, ComposedExample) {
  const std::vector<ClaimCluster> mixed{cluster(1.0, Label::Supported), cluster(1.0, Label::Refuted)};
  const auto b = fact_aware_reward(0.9, mixed);
  EXPECT_NEAR(b.lambda, logistic(2.5), 1e-12);
  EXPECT_NEAR(b.r_total, 0.9 - logistic(2.5) * 0.5, 1e-8);
  EXPECT_NEAR(b.r_total, 0.4379, 1e-4);
  EXPECT_EQ(b.cluster_count, 2u);
}

TEST(FactAwareReward, ProtectionZoneAndNoClaims) {
  const std::vector<ClaimCluster> bad{cluster(1.0, Label::Refuted)};
  EXPECT_NEAR(fact_aware_reward(0.5, bad).r_total, 0.5, 3e-8);
  EXPECT_EQ(fact_aware_reward(0.9, {}).r_total, 0.9);
  const std::vector<ClaimCluster> good{cluster(0.4, Label::Supported), cluster(0.9, Label::Supported)};
  EXPECT_EQ(fact_aware_reward(0.93, good).r_total, 0.93);
}

TEST(NaiveReward, Arithmetic) {
  EXPECT_DOUBLE_EQ(naive_reward(0.8, 2, 10, 0.5), 0.7);
  EXPECT_EQ(naive_reward(0.8, 0, 10, 0.5), 0.8);
  EXPECT_DOUBLE_EQ(naive_reward(0.8, 7, 7, 1.0), 0.8 - 1.0);
  EXPECT_ERRC(naive_reward(0.8, 0, 0, 0.5), Errc::ZeroClaims);
}

TEST(FactRewardProperty, PenaltyBoundedAndSaliencyConcentration) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + index_draw(rng, 12);
    std::vector<ClaimCluster> cs;
    for (std::size_t i = 0; i < n; ++i) {
      cs.push_back(cluster(unit_draw(rng), static_cast<Label>(index_draw(rng, 3))));
    }
    const double r = fact_penalty(cs);
    ASSERT_GE(r, -1.0);
    ASSERT_LE(r, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (cs[i].rep().label != Label::Refuted) continue;
      auto bumped = cs;
      bumped[i].saliency = std::min(1.0, bumped[i].saliency + 0.3 * unit_draw(rng));
      ASSERT_LE(fact_penalty(bumped), r + 1e-15);
    }
  }
}

TEST(FactRewardProperty, AntiDilution) {
  HashEmbedder emb;
  const std::vector<std::string> base_text{"Metformin lowers blood glucose.", "Metformin causes lactic acidosis often.",
                                           "Metformin is first line therapy."};
  std::vector<LabeledClaim> claims{labeled(base_text[0], 0), labeled(base_text[1], 1, Label::Refuted),
                                   labeled(base_text[2], 2)};
  const std::vector<std::string> sentences = base_text;
  const double r_fact = fact_penalty(cluster_claims(claims, sentences, emb));
  double prev_naive = naive_reward(0.9, 1, claims.size(), 1.0);
  const std::vector<std::string> paraphrases{"blood glucose metformin lowers", "the glucose lowers metformin blood",
                                             "first line therapy metformin", "therapy is metformin first line"};
  for (std::size_t k = 0; k < 12; ++k) {
    claims.push_back(labeled(paraphrases[k % paraphrases.size()] + std::string(k / 4, ' '), claims.size()));
    EXPECT_EQ(fact_penalty(cluster_claims(claims, sentences, emb)), r_fact);
    const double naive = naive_reward(0.9, 1, claims.size(), 1.0);
    EXPECT_GT(naive, prev_naive);
    prev_naive = naive;
  }
}
