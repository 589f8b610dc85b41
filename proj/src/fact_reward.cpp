#include "clinrl/fact_reward.hpp"

#include <algorithm>

#include "clinrl/error.hpp"

namespace clinrl {

std::vector<ClaimCluster> cluster_claims(std::span<const LabeledClaim> claims, std::span<const std::string> sentences,
                                         EmbeddingBackend& embedder, const ClusterOptions& options) {
  std::vector<std::size_t> order(claims.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return claims[a].claim.order_index < claims[b].claim.order_index;
  });

  const Eigen::Index d = embedder.dimension();
  Matrix<double> sentence_vecs(d, static_cast<Eigen::Index>(sentences.size()));
  for (std::size_t j = 0; j < sentences.size(); ++j) {
    sentence_vecs.col(static_cast<Eigen::Index>(j)) = embedder.embed(sentences[j]);
  }

  std::vector<ClaimCluster> clusters;
  std::vector<std::vector<Embedding>> member_vecs;
  for (const std::size_t i : order) {
    const Embedding v = embedder.embed(claims[i].claim.text);
    if (v.size() != d) throw Error(Errc::EmbeddingDimensionMismatch, claims[i].claim.text);
    bool placed = false;
    for (std::size_t k = 0; k < clusters.size() && !placed; ++k) {
      const bool all_close = std::all_of(member_vecs[k].begin(), member_vecs[k].end(),
                                         [&](const Embedding& m) { return cosine(m, v) >= options.threshold; });
      if (all_close) {
        clusters[k].members.push_back(claims[i]);
        member_vecs[k].push_back(v);
        placed = true;
      }
    }
    if (placed) continue;
    ClaimCluster c;
    c.members.push_back(claims[i]);
    c.representative = 0;
    if (sentences.empty()) {
      c.saliency = 0.0;
    } else {
      double best = 0.0;
      for (Eigen::Index j = 0; j < sentence_vecs.cols(); ++j) best = std::max(best, cosine(sentence_vecs.col(j), v));
      c.saliency = std::min(best, 1.0);
    }
    clusters.push_back(std::move(c));
    member_vecs.push_back({v});
  }
  return clusters;
}

namespace {

void collect(std::span<const ClaimCluster> clusters, Eigen::VectorXd& w, Eigen::Array<int, Eigen::Dynamic, 1>& ind) {
  w.resize(static_cast<Eigen::Index>(clusters.size()));
  ind.resize(static_cast<Eigen::Index>(clusters.size()));
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    w[i] = clusters[k].saliency;
    ind[i] = penalized(clusters[k].rep().label) ? 1 : 0;
  }
}

}  // namespace

double fact_penalty(std::span<const ClaimCluster> clusters, double eps) {
  Eigen::VectorXd w;
  Eigen::Array<int, Eigen::Dynamic, 1> ind;
  collect(clusters, w, ind);
  return weighted_penalty(w, ind, eps);
}

void GateParams::validate() const {
  if (!(tau_max > tau_min)) throw Error(Errc::InvalidThresholds, "gate", "tau_max must exceed tau_min");
  if (!(kappa > 0.0)) throw Error(Errc::InvalidThresholds, "gate", "kappa must be positive");
}

double gate_lambda(double r_task, const GateParams& params) {
  params.validate();
  if (!(r_task >= 0.0 && r_task <= 1.0)) throw Error(Errc::InvalidInput, "r_task", "must lie in [0,1]");
  return gate(r_task, params);
}

FactRewardBreakdown fact_aware_reward(double r_task, std::span<const ClaimCluster> clusters,
                                      const GateParams& params, double eps) {
  FactRewardBreakdown b;
  b.r_task = r_task;
  b.lambda = gate_lambda(r_task, params);
  b.r_fact = fact_penalty(clusters, eps);
  b.r_total = b.r_task + b.lambda * b.r_fact;
  b.cluster_count = clusters.size();
  for (const auto& c : clusters) {
    if (penalized(c.rep().label)) b.penalized_mass += c.saliency;
  }
  return b;
}

double naive_reward(double r_task, std::size_t n_hallu, std::size_t n_total, double alpha) {
  if (n_total == 0) throw Error(Errc::ZeroClaims);
  if (n_hallu > n_total) throw Error(Errc::InvalidInput, "n_hallu", "exceeds n_total");
  return r_task + alpha * (-static_cast<double>(n_hallu) / static_cast<double>(n_total));
}

}  // namespace clinrl
