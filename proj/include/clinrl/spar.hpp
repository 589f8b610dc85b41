#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clinrl/linalg.hpp"

namespace clinrl {

struct ViolationType {
  std::string name;
  double lambda = 1.0;  ///< penalty coefficient in (0, 1)
};

/// Named violation types and their coefficients. Defaults: repetition 0.1,
/// safety_risk 0.15, rigid_phrasing 0.9.
class ViolationTaxonomy {
 public:
  static ViolationTaxonomy defaults();

  void set(std::string name, double lambda);
  const ViolationType& at(const std::string& name) const;
  bool contains(const std::string& name) const { return types_.count(name) != 0; }
  const std::map<std::string, ViolationType>& types() const noexcept { return types_; }

 private:
  std::map<std::string, ViolationType> types_;
};

/// 1 for an empty set, otherwise the smallest coefficient present.
double validity_factor(std::span<const ViolationType> violations);

struct InteractionStep {
  std::size_t index = 0;
  std::string user_turn;
  std::string assistant_turn;
  std::vector<ViolationType> violations;
};

/// Statistics of the raw (unpenalized) global rewards of one prompt's group.
struct GroupStats {
  double mu_raw = 0.0;
  double sigma_raw = 0.0;
  std::size_t group_size = 0;
};

template <typename Derived>
GroupStats group_stats(const Eigen::DenseBase<Derived>& raw_rewards) {
  const auto m = population_moments(raw_rewards);
  return {static_cast<double>(m.mean), static_cast<double>(m.stddev), static_cast<std::size_t>(raw_rewards.size())};
}

GroupStats group_stats(std::span<const double> raw_rewards);

constexpr double kAdvantageEpsilon = 1e-6;

/// (gamma_j * r_global - mu_raw) / (sigma_raw + eps) for a vector of gammas.
template <typename Derived>
Vector<typename Derived::Scalar> spar_advantages(const Eigen::MatrixBase<Derived>& gammas,
                                                 typename Derived::Scalar r_global, const GroupStats& stats,
                                                 typename Derived::Scalar eps = kAdvantageEpsilon) {
  using Scalar = typename Derived::Scalar;
  return ((gammas.array() * r_global - Scalar(stats.mu_raw)) / (Scalar(stats.sigma_raw) + eps)).matrix();
}

/// Step advantages of one rollout. `group` holds the raw global rewards of
/// every rollout for the prompt, including this one.
Eigen::VectorXd step_advantages(std::span<const InteractionStep> trajectory, double r_global,
                                std::span<const double> group, double eps = kAdvantageEpsilon);

struct Rollout {
  std::string id;
  double r_global = 0.0;
  std::vector<InteractionStep> steps;
};

/// Step advantages for every rollout of a group; statistics are computed once
/// from the raw global rewards.
std::vector<Eigen::VectorXd> group_advantages(std::span<const Rollout> group, double eps = kAdvantageEpsilon);

/// Linear likelihood-ratio clip interval.
struct ClipRange {
  double low = 0.8;
  double high = 1.2;
};

/// min(r * A, clip(r, low, high) * A) per step with r = exp(logp_new - logp_old).
Eigen::VectorXd weighted_update_terms(const Eigen::VectorXd& advantages, const Eigen::VectorXd& logp_new,
                                      const Eigen::VectorXd& logp_old, const ClipRange& clip = {});

// ---------------------------------------------------------------------------
// Toy curriculum

/// A softmax policy picks one of three behaviors per step (clean, a severe
/// violation, a mild violation). A rollout's raw reward drops with its share
/// of severe steps plus Gaussian noise. The policy is trained with SPAR
/// advantages and a score-function gradient.
struct CurriculumConfig {
  std::size_t iterations = 200;
  std::size_t group_size = 8;
  std::size_t steps_per_rollout = 6;
  double lambda_severe = 0.1;
  double lambda_mild = 0.9;
  /// Logits for (clean, severe, mild).
  Eigen::Vector3d initial_logits = Eigen::Vector3d::Zero();
  bool allow_violations = true;
  double learning_rate = 0.05;
  double base_reward = 0.9;
  double severe_cost = 0.6;
  double noise = 0.05;
  /// A behavior counts as resolved once its probability drops below this.
  double resolved_below = 0.05;
};

struct CurriculumPoint {
  std::size_t iteration = 0;
  Eigen::Vector3d probs = Eigen::Vector3d::Zero();
  double mu_raw = 0.0;
  double sigma_raw = 0.0;
  /// Mean advantage over severe / mild steps this iteration (NaN if none).
  double mean_adv_severe = 0.0;
  double mean_adv_mild = 0.0;
  /// (1 - lambda_mild) * mean r_global / (sigma_raw + eps): the amount a mild
  /// penalty pulls a step below an unpenalized one.
  double mild_gap = 0.0;
  /// Largest |A_j - A_unpenalized| over all steps; zero without violations.
  double max_penalty_shift = 0.0;
};

struct CurriculumTrace {
  std::vector<CurriculumPoint> points;
  std::optional<std::size_t> severe_resolved_at;
  std::optional<std::size_t> mild_resolved_at;
};

CurriculumTrace curriculum_demo(const CurriculumConfig& config, std::uint64_t seed);

}  // namespace clinrl
