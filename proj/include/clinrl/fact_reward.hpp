#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "clinrl/claims.hpp"
#include "clinrl/embedding.hpp"
#include "clinrl/linalg.hpp"
#include "clinrl/verify_cache.hpp"

namespace clinrl {

struct LabeledClaim {
  AtomicClaim claim;
  Label label = Label::Uncertain;
};

struct ClaimCluster {
  std::vector<LabeledClaim> members;
  /// Lowest order_index member.
  std::size_t representative = 0;
  /// max_j cos(repr, sentence_j), floored at 0.
  double saliency = 0.0;

  const LabeledClaim& rep() const { return members.at(representative); }
};

/// Penalty indicator: Refuted and Uncertain representatives count as errors.
inline bool penalized(Label label) noexcept { return label != Label::Supported; }

struct ClusterOptions {
  double threshold = 0.90;
};

/// Greedy clustering in order_index order: a claim joins the first cluster
/// whose every member is within `threshold` cosine of it, otherwise opens a
/// new cluster.
std::vector<ClaimCluster> cluster_claims(std::span<const LabeledClaim> claims, std::span<const std::string> sentences,
                                         EmbeddingBackend& embedder, const ClusterOptions& options = {});

/// -sum(w * I) / (sum(w) + eps) over cluster representatives.
template <typename DerivedW, typename DerivedI>
typename DerivedW::Scalar weighted_penalty(const Eigen::DenseBase<DerivedW>& saliency,
                                           const Eigen::DenseBase<DerivedI>& indicator,
                                           typename DerivedW::Scalar eps) {
  using Scalar = typename DerivedW::Scalar;
  if (saliency.size() == 0) return Scalar(0);
  const Scalar num = (saliency.derived().array() * indicator.derived().array().template cast<Scalar>()).sum();
  const Scalar den = saliency.derived().array().sum() + eps;
  return -num / den;
}

constexpr double kFactEpsilon = 1e-8;

double fact_penalty(std::span<const ClaimCluster> clusters, double eps = kFactEpsilon);

struct GateParams {
  double tau_min = 0.75;
  double tau_max = 0.95;
  double kappa = 10.0;

  double center() const noexcept { return 0.5 * (tau_min + tau_max); }
  double width() const noexcept { return tau_max - tau_min; }
  void validate() const;
};

/// sigma(kappa * (r_task - mu) / delta).
template <typename Scalar>
Scalar gate(Scalar r_task, const GateParams& p) {
  return sigmoid<Scalar>(Scalar(p.kappa) * (r_task - Scalar(p.center())) / Scalar(p.width()));
}

double gate_lambda(double r_task, const GateParams& params = {});

struct FactRewardBreakdown {
  double r_task = 0.0;
  double r_fact = 0.0;
  double lambda = 0.0;
  double r_total = 0.0;
  std::size_t cluster_count = 0;
  /// Saliency mass of penalized representatives.
  double penalized_mass = 0.0;
};

FactRewardBreakdown fact_aware_reward(double r_task, std::span<const ClaimCluster> clusters,
                                      const GateParams& params = {}, double eps = kFactEpsilon);

/// r_task + alpha * (-n_hallu / n_total), the count-based baseline.
double naive_reward(double r_task, std::size_t n_hallu, std::size_t n_total, double alpha);

}  // namespace clinrl
