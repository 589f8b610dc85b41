#pragma once

#include <cstdint>
#include <vector>

#include "clinrl/error.hpp"
#include "clinrl/linalg.hpp"

namespace clinrl {

/// Aligned per-token log-probabilities of student and teacher with an
/// inclusion mask (prompt tokens are usually masked out).
struct TokenLogProbs {
  Array<double> student;
  Array<double> teacher;
  Eigen::Array<bool, Eigen::Dynamic, 1> mask;

  /// All tokens included.
  static TokenLogProbs unmasked(Array<double> student, Array<double> teacher);

  Eigen::Index size() const noexcept { return student.size(); }
  Eigen::Index masked_count() const noexcept { return mask.count(); }

  /// Throws LengthMismatch, EmptyMask, or InvalidInput for a positive log-prob.
  void validate() const;
};

/// Mean over masked tokens of 1[logp_s < logp_t] * (-logp_s).
double clip_fkl_loss(const TokenLogProbs& t);

/// Plain forward-KL surrogate on teacher samples: mean of -logp_s.
double forward_kl_loss(const TokenLogProbs& t);

/// -A * mean(logp_s) + beta * mean(logp_s - logp_t).
double mopd_objective(const TokenLogProbs& t, double advantage, double beta);

/// Toy categorical policy: one logits row per token position and the action
/// taken at each position.
struct ToyPolicy {
  Matrix<double> logits;
  std::vector<Eigen::Index> actions;

  Matrix<double> log_probs() const { return log_softmax_rows(logits); }
  /// Log-probability of the taken action at every position.
  Array<double> action_log_probs() const;
};

/// Analytic gradients with respect to the student logits. The clip
/// indicator is held constant.
Matrix<double> clip_fkl_grad(const ToyPolicy& student, const Array<double>& teacher,
                             const Eigen::Array<bool, Eigen::Dynamic, 1>& mask);
Matrix<double> forward_kl_grad(const ToyPolicy& student, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask);
Matrix<double> mopd_grad(const ToyPolicy& student, const Array<double>& teacher,
                         const Eigen::Array<bool, Eigen::Dynamic, 1>& mask, double advantage, double beta);
/// Gradient of mean(logp_s) over masked tokens.
Matrix<double> mean_logp_grad(const ToyPolicy& student, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask);

enum class DistillLoss { ClipFkl, ForwardKl, Mopd };

struct GradCheckOptions {
  double fd_epsilon = 1e-5;
  double advantage = 0.0;
  double beta = 0.0;
  /// Denominator floor for the relative error.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Positions skipped because |logp_s - logp_t| < 10 * fd_epsilon.
  std::size_t excluded_positions = 0;
};

/// Analytic gradient against central finite differences.
GradCheckResult grad_check(DistillLoss loss, const ToyPolicy& student, const Array<double>& teacher,
                           const Eigen::Array<bool, Eigen::Dynamic, 1>& mask, const GradCheckOptions& options = {});

/// Offline comparison of Clip-FKL and plain forward KL. Each position has a
/// reference action the student already prefers more strongly than the
/// teacher; the teacher's samples form the training set.
struct AblationConfig {
  Eigen::Index positions = 64;
  Eigen::Index categories = 5;
  Eigen::Index samples_per_position = 2;
  double teacher_reference_prob = 0.5;
  double student_reference_logit = 3.0;
  int steps = 300;
  double learning_rate = 1.0;
};

struct AblationResult {
  /// Mean probability of the reference action before training.
  double initial_reference_prob = 0.0;
  double clip_fkl_reference_prob = 0.0;
  double forward_kl_reference_prob = 0.0;
  double clip_fkl_final_loss = 0.0;
  double forward_kl_final_loss = 0.0;
};

AblationResult distill_ablation(const AblationConfig& config, std::uint64_t seed);

}  // namespace clinrl
