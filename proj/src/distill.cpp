#include "clinrl/distill.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "clinrl/case.hpp"

namespace clinrl {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

TokenLogProbs TokenLogProbs::unmasked(Array<double> student, Array<double> teacher) {
  TokenLogProbs t;
  t.mask = Mask::Constant(student.size(), true);
  t.student = std::move(student);
  t.teacher = std::move(teacher);
  return t;
}

void TokenLogProbs::validate() const {
  if (student.size() != teacher.size() || student.size() != mask.size()) {
    throw Error(Errc::LengthMismatch, "token_logprobs",
                "student " + std::to_string(student.size()) + ", teacher " + std::to_string(teacher.size()) +
                    ", mask " + std::to_string(mask.size()));
  }
  if (masked_count() == 0) throw Error(Errc::EmptyMask, "token_logprobs");
  if ((student > 0.0).any() || (teacher > 0.0).any()) {
    throw Error(Errc::InvalidInput, "token_logprobs", "log-probabilities must be <= 0");
  }
}

namespace {

double masked_mean(const Array<double>& values, const Mask& mask) {
  return mask.select(values, 0.0).sum() / static_cast<double>(mask.count());
}

}  // namespace

double clip_fkl_loss(const TokenLogProbs& t) {
  t.validate();
  const Mask gate = t.mask && (t.student < t.teacher);
  return gate.select(-t.student, 0.0).sum() / static_cast<double>(t.masked_count());
}

double forward_kl_loss(const TokenLogProbs& t) {
  t.validate();
  return masked_mean(-t.student, t.mask);
}

double mopd_objective(const TokenLogProbs& t, double advantage, double beta) {
  if (!(beta >= 0.0)) throw Error(Errc::InvalidInput, "beta", "must be >= 0");
  t.validate();
  const double policy_term = -advantage * masked_mean(t.student, t.mask);
  if (beta == 0.0) return policy_term;
  return policy_term + beta * masked_mean(t.student - t.teacher, t.mask);
}

Array<double> ToyPolicy::action_log_probs() const {
  if (static_cast<Eigen::Index>(actions.size()) != logits.rows()) {
    throw Error(Errc::LengthMismatch, "toy_policy", "one action per logits row");
  }
  const Matrix<double> lp = log_probs();
  Array<double> out(lp.rows());
  for (Eigen::Index r = 0; r < lp.rows(); ++r) out(r) = lp(r, actions[static_cast<std::size_t>(r)]);
  return out;
}

namespace {

// d(logp_s[a]) / d(logits) per row is e_a - p. `coef` scales each row.
Matrix<double> scaled_score(const ToyPolicy& s, const Array<double>& coef) {
  Matrix<double> g = -s.log_probs().array().exp().matrix();
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    g(r, s.actions[static_cast<std::size_t>(r)]) += 1.0;
    g.row(r) *= coef(r);
  }
  return g;
}

void check_shapes(const ToyPolicy& s, const Mask& mask) {
  if (mask.size() != s.logits.rows() || static_cast<Eigen::Index>(s.actions.size()) != s.logits.rows()) {
    throw Error(Errc::LengthMismatch, "toy_policy");
  }
  if (mask.count() == 0) throw Error(Errc::EmptyMask, "toy_policy");
}

}  // namespace

Matrix<double> clip_fkl_grad(const ToyPolicy& student, const Array<double>& teacher, const Mask& mask) {
  check_shapes(student, mask);
  const Array<double> ls = student.action_log_probs();
  const Mask gate = mask && (ls < teacher);
  const double m = static_cast<double>(mask.count());
  return scaled_score(student, gate.select(Array<double>::Constant(ls.size(), -1.0 / m), 0.0));
}

Matrix<double> forward_kl_grad(const ToyPolicy& student, const Mask& mask) {
  check_shapes(student, mask);
  const double m = static_cast<double>(mask.count());
  return scaled_score(student, mask.select(Array<double>::Constant(mask.size(), -1.0 / m), 0.0));
}

Matrix<double> mean_logp_grad(const ToyPolicy& student, const Mask& mask) {
  check_shapes(student, mask);
  const double m = static_cast<double>(mask.count());
  return scaled_score(student, mask.select(Array<double>::Constant(mask.size(), 1.0 / m), 0.0));
}

Matrix<double> mopd_grad(const ToyPolicy& student, const Array<double>& teacher, const Mask& mask, double advantage,
                         double beta) {
  if (teacher.size() != mask.size()) throw Error(Errc::LengthMismatch, "teacher");
  return (beta - advantage) * mean_logp_grad(student, mask);
}

namespace {

double evaluate(DistillLoss loss, const ToyPolicy& s, const Array<double>& teacher, const Mask& mask,
                const GradCheckOptions& o) {
  TokenLogProbs t{s.action_log_probs(), teacher, mask};
  switch (loss) {
    case DistillLoss::ClipFkl: return clip_fkl_loss(t);
    case DistillLoss::ForwardKl: return forward_kl_loss(t);
    case DistillLoss::Mopd: return mopd_objective(t, o.advantage, o.beta);
  }
  return 0.0;
}

Matrix<double> analytic(DistillLoss loss, const ToyPolicy& s, const Array<double>& teacher, const Mask& mask,
                        const GradCheckOptions& o) {
  switch (loss) {
    case DistillLoss::ClipFkl: return clip_fkl_grad(s, teacher, mask);
    case DistillLoss::ForwardKl: return forward_kl_grad(s, mask);
    case DistillLoss::Mopd: return mopd_grad(s, teacher, mask, o.advantage, o.beta);
  }
  return {};
}

}  // namespace

GradCheckResult grad_check(DistillLoss loss, const ToyPolicy& student, const Array<double>& teacher, const Mask& mask,
                           const GradCheckOptions& options) {
  const Matrix<double> g = analytic(loss, student, teacher, mask, options);
  const Array<double> ls = student.action_log_probs();
  const double eps = options.fd_epsilon;

  GradCheckResult out;
  ToyPolicy probe = student;
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    if (loss == DistillLoss::ClipFkl && mask(r) && std::abs(ls(r) - teacher(r)) < 10.0 * eps) {
      ++out.excluded_positions;
      continue;
    }
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      const double saved = probe.logits(r, c);
      probe.logits(r, c) = saved + eps;
      const double up = evaluate(loss, probe, teacher, mask, options);
      probe.logits(r, c) = saved - eps;
      const double down = evaluate(loss, probe, teacher, mask, options);
      probe.logits(r, c) = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(numeric), std::abs(g(r, c)), options.floor});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - g(r, c)) / denom);
      ++out.checked;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

AblationResult distill_ablation(const AblationConfig& cfg, std::uint64_t seed) {
  if (cfg.positions < 1 || cfg.categories < 2 || cfg.samples_per_position < 1 || cfg.steps < 0) {
    throw Error(Errc::InvalidInput, "ablation", "bad dimensions");
  }
  std::mt19937_64 rng(seed);
  const Eigen::Index T = cfg.positions;
  const Eigen::Index K = cfg.categories;
  const Eigen::Index S = cfg.samples_per_position;

  std::vector<Eigen::Index> reference(static_cast<std::size_t>(T));
  Matrix<double> teacher_p(T, K);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto c = static_cast<Eigen::Index>(index_draw(rng, static_cast<std::size_t>(K)));
    reference[static_cast<std::size_t>(t)] = c;
    Array<double> w(K);
    for (Eigen::Index k = 0; k < K; ++k) w(k) = 0.2 + unit_draw(rng);
    w(c) = 0.0;
    w *= (1.0 - cfg.teacher_reference_prob) / w.sum();
    w(c) = cfg.teacher_reference_prob;
    teacher_p.row(t) = w.matrix().transpose();
  }

  // Offline teacher samples: row t*S + s samples position t.
  std::vector<Eigen::Index> actions;
  Array<double> teacher_lp(T * S);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double u = unit_draw(rng);
      Eigen::Index a = K - 1;
      for (Eigen::Index k = 0; k < K; ++k) {
        if (u < teacher_p(t, k)) {
          a = k;
          break;
        }
        u -= teacher_p(t, k);
      }
      actions.push_back(a);
      teacher_lp(t * S + s) = std::log(teacher_p(t, a));
    }
  }
  const Mask mask = Mask::Constant(T * S, true);

  Matrix<double> init = Matrix<double>::Zero(T, K);
  for (Eigen::Index t = 0; t < T; ++t) init(t, reference[static_cast<std::size_t>(t)]) = cfg.student_reference_logit;

  auto expand = [&](const Matrix<double>& shared) {
    ToyPolicy p;
    p.logits.resize(T * S, K);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index s = 0; s < S; ++s) p.logits.row(t * S + s) = shared.row(t);
    }
    p.actions = actions;
    return p;
  };
  auto reference_prob = [&](const Matrix<double>& shared) {
    const Matrix<double> p = log_softmax_rows(shared).array().exp().matrix();
    double sum = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) sum += p(t, reference[static_cast<std::size_t>(t)]);
    return sum / static_cast<double>(T);
  };
  auto train = [&](DistillLoss loss, double& final_loss) {
    Matrix<double> shared = init;
    for (int step = 0; step < cfg.steps; ++step) {
      const ToyPolicy p = expand(shared);
      const Matrix<double> g = loss == DistillLoss::ClipFkl ? clip_fkl_grad(p, teacher_lp, mask)
                                                             : forward_kl_grad(p, mask);
      for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index s = 0; s < S; ++s) shared.row(t) -= cfg.learning_rate * g.row(t * S + s);
      }
    }
    const ToyPolicy p = expand(shared);
    TokenLogProbs tl{p.action_log_probs(), teacher_lp, mask};
    final_loss = loss == DistillLoss::ClipFkl ? clip_fkl_loss(tl) : forward_kl_loss(tl);
    return reference_prob(shared);
  };

  AblationResult r;
  r.initial_reference_prob = reference_prob(init);
  r.clip_fkl_reference_prob = train(DistillLoss::ClipFkl, r.clip_fkl_final_loss);
  r.forward_kl_reference_prob = train(DistillLoss::ForwardKl, r.forward_kl_final_loss);
  return r;
}

}  // namespace clinrl
