#include "clinrl/spar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "clinrl/error.hpp"
#include "clinrl/random.hpp"

namespace clinrl {

ViolationTaxonomy ViolationTaxonomy::defaults() {
  ViolationTaxonomy t;
  t.set("repetition", 0.1);
  t.set("safety_risk", 0.15);
  t.set("rigid_phrasing", 0.9);
  return t;
}

void ViolationTaxonomy::set(std::string name, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw Error(Errc::InvalidInput, name, "penalty coefficient must lie in (0,1)");
  }
  types_[name] = {name, lambda};
}

const ViolationType& ViolationTaxonomy::at(const std::string& name) const {
  const auto it = types_.find(name);
  if (it == types_.end()) throw Error(Errc::UnknownViolation, name);
  return it->second;
}

double validity_factor(std::span<const ViolationType> violations) {
  double gamma = 1.0;
  for (const auto& v : violations) {
    if (!(v.lambda > 0.0 && v.lambda < 1.0)) {
      throw Error(Errc::InvalidInput, v.name, "penalty coefficient must lie in (0,1)");
    }
    gamma = std::min(gamma, v.lambda);
  }
  return gamma;
}

GroupStats group_stats(std::span<const double> raw_rewards) {
  if (raw_rewards.size() < 2) throw Error(Errc::GroupTooSmall);
  return group_stats(Eigen::Map<const Eigen::VectorXd>(raw_rewards.data(), static_cast<Eigen::Index>(raw_rewards.size())));
}

namespace {

Eigen::VectorXd gammas_of(std::span<const InteractionStep> steps) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(steps.size()));
  for (std::size_t j = 0; j < steps.size(); ++j) g[static_cast<Eigen::Index>(j)] = validity_factor(steps[j].violations);
  return g;
}

}  // namespace

Eigen::VectorXd step_advantages(std::span<const InteractionStep> trajectory, double r_global,
                                std::span<const double> group, double eps) {
  const GroupStats stats = group_stats(group);
  if (std::find(group.begin(), group.end(), r_global) == group.end()) {
    throw Error(Errc::InvalidInput, "r_global", "rollout reward is not a member of its group");
  }
  return spar_advantages(gammas_of(trajectory), r_global, stats, eps);
}

std::vector<Eigen::VectorXd> group_advantages(std::span<const Rollout> group, double eps) {
  std::vector<double> raw;
  raw.reserve(group.size());
  for (const auto& r : group) raw.push_back(r.r_global);
  const GroupStats stats = group_stats(raw);
  std::vector<Eigen::VectorXd> out;
  out.reserve(group.size());
  for (const auto& r : group) out.push_back(spar_advantages(gammas_of(r.steps), r.r_global, stats, eps));
  return out;
}

Eigen::VectorXd weighted_update_terms(const Eigen::VectorXd& advantages, const Eigen::VectorXd& logp_new,
                                      const Eigen::VectorXd& logp_old, const ClipRange& clip) {
  if (advantages.size() != logp_new.size() || advantages.size() != logp_old.size()) {
    throw Error(Errc::LengthMismatch, "update terms");
  }
  if (!(clip.low > 0.0 && clip.low <= 1.0 && clip.high >= 1.0)) {
    throw Error(Errc::InvalidInput, "clip", "need 0 < low <= 1 <= high");
  }
  const Eigen::ArrayXd ratio = (logp_new - logp_old).array().exp();
  const Eigen::ArrayXd unclipped = ratio * advantages.array();
  const Eigen::ArrayXd clipped = ratio.max(clip.low).min(clip.high) * advantages.array();
  return unclipped.min(clipped).matrix();
}

// ---------------------------------------------------------------------------

CurriculumTrace curriculum_demo(const CurriculumConfig& cfg, std::uint64_t seed) {
  if (cfg.group_size < 2) throw Error(Errc::GroupTooSmall);
  if (cfg.steps_per_rollout == 0) throw Error(Errc::InvalidInput, "steps_per_rollout");

  enum Behavior : int { kClean = 0, kSevere = 1, kMild = 2 };
  std::mt19937_64 rng(seed);

  Eigen::Vector3d logits = cfg.initial_logits;
  constexpr double kMasked = -std::numeric_limits<double>::infinity();
  if (!cfg.allow_violations) logits[kSevere] = logits[kMild] = kMasked;
  const double lambdas[3] = {1.0, cfg.lambda_severe, cfg.lambda_mild};

  CurriculumTrace trace;
  const std::size_t G = cfg.group_size;
  const std::size_t L = cfg.steps_per_rollout;
  std::vector<std::vector<int>> actions(G, std::vector<int>(L));
  Eigen::VectorXd raw(static_cast<Eigen::Index>(G));

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Eigen::Vector3d probs;
    {
      const double m = logits.maxCoeff();
      for (int b = 0; b < 3; ++b) probs[b] = std::isinf(logits[b]) ? 0.0 : std::exp(logits[b] - m);
      probs /= probs.sum();
    }
    if (!trace.severe_resolved_at && probs[kSevere] < cfg.resolved_below) trace.severe_resolved_at = it;
    if (!trace.mild_resolved_at && probs[kMild] < cfg.resolved_below) trace.mild_resolved_at = it;

    for (std::size_t g = 0; g < G; ++g) {
      std::size_t severe = 0;
      for (std::size_t j = 0; j < L; ++j) {
        const double u = unit_draw(rng);
        const int a = u < probs[kClean] ? kClean : (u < probs[kClean] + probs[kSevere] ? kSevere : kMild);
        actions[g][j] = a;
        if (a == kSevere) ++severe;
      }
      const double r = cfg.base_reward - cfg.severe_cost * static_cast<double>(severe) / static_cast<double>(L) +
                       cfg.noise * normal_draw(rng);
      raw[static_cast<Eigen::Index>(g)] = std::clamp(r, 0.0, 1.0);
    }
    const GroupStats stats = group_stats(raw);

    CurriculumPoint pt;
    pt.iteration = it;
    pt.probs = probs;
    pt.mu_raw = stats.mu_raw;
    pt.sigma_raw = stats.sigma_raw;

    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    double adv_sum[3] = {0, 0, 0};
    std::size_t adv_n[3] = {0, 0, 0};
    for (std::size_t g = 0; g < G; ++g) {
      const double r = raw[static_cast<Eigen::Index>(g)];
      Eigen::VectorXd gammas(static_cast<Eigen::Index>(L));
      for (std::size_t j = 0; j < L; ++j) gammas[static_cast<Eigen::Index>(j)] = lambdas[actions[g][j]];
      const Eigen::VectorXd adv = spar_advantages(gammas, r, stats);
      const double plain = (r - stats.mu_raw) / (stats.sigma_raw + kAdvantageEpsilon);
      for (std::size_t j = 0; j < L; ++j) {
        const int a = actions[g][j];
        const double A = adv[static_cast<Eigen::Index>(j)];
        adv_sum[a] += A;
        ++adv_n[a];
        pt.max_penalty_shift = std::max(pt.max_penalty_shift, std::abs(A - plain));
        Eigen::Vector3d score = -probs;
        score[a] += 1.0;
        grad += A * score;
      }
    }
    grad /= static_cast<double>(G * L);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    pt.mean_adv_severe = adv_n[kSevere] ? adv_sum[kSevere] / static_cast<double>(adv_n[kSevere]) : nan;
    pt.mean_adv_mild = adv_n[kMild] ? adv_sum[kMild] / static_cast<double>(adv_n[kMild]) : nan;
    pt.mild_gap = (1.0 - cfg.lambda_mild) * raw.mean() / (stats.sigma_raw + kAdvantageEpsilon);
    trace.points.push_back(pt);

    for (int b = 0; b < 3; ++b) {
      if (!std::isinf(logits[b])) logits[b] += cfg.learning_rate * grad[b];
    }
  }
  return trace;
}

}  // namespace clinrl
