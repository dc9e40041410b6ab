// Shared helpers for the trainer gradient suite: an explicitly-detached
// re-assembly of the batch objective, used both to certify that batch_loss
// treats its E-step targets as constants and as the closure for central
// finite differences.
#ifndef IMPLAB_TESTS_SUPPORT_HPP
#define IMPLAB_TESTS_SUPPORT_HPP

#include <span>
#include <vector>

#include "implab/labels.hpp"
#include "implab/model.hpp"
#include "implab/noise.hpp"
#include "implab/posterior.hpp"
#include "implab/trainer.hpp"

namespace implab::testing {

inline void flatten_gradients(Gradients& g, std::span<double> out) {
  size_t off = 0;
  for (auto view : parameter_views(g)) {
    for (size_t i = 0; i < view.size(); ++i) out[off + i] = view[i];
    off += view.size();
  }
}

// The same information-equivalence rules the trainer applies: singleton
// candidate sets are exact labels, and under an exactly-identity transition
// noisy annotations are exact/clean ones.
inline LabelInfo resolve_for_loss(const LabelInfo& info, bool identity_t) {
  using K = LabelInfo::Kind;
  if (info.kind == K::kCandidates && info.candidates.size() == 1)
    return LabelInfo::exact(info.candidates[0]);
  if (identity_t && info.kind == K::kNoisy) return LabelInfo::exact(info.label);
  if (identity_t && info.kind == K::kNoisyCandidates) {
    if (info.candidates.size() == 1)
      return LabelInfo::exact(info.candidates[0]);
    return LabelInfo::partial(info.candidates);
  }
  return info;
}

// Frozen E-step state captured before any perturbation: soft targets from
// the current predictions, and the transition matrix the (detached) student
// conditioning uses.
struct DetachedTargets {
  std::vector<LabelInfo> resolved;
  std::vector<PosteriorTarget> targets;  // empty slot for exact samples
  Matrix frozen_transition;
  bool identity_transition = false;
};

inline DetachedTargets capture_targets(const ImpreciseDataset& data,
                                       std::span<const int> indices,
                                       const Classifier& model,
                                       const NoiseModel* noise) {
  DetachedTargets out;
  if (noise) {
    out.frozen_transition = noise->transition_matrix();
    out.identity_transition = transition_is_identity(out.frozen_transition);
  }
  out.resolved.resize(indices.size());
  out.targets.resize(indices.size());
  for (size_t b = 0; b < indices.size(); ++b) {
    const int idx = indices[b];
    const ProbVector p = model.forward(data.samples[idx].features);
    out.resolved[b] =
        resolve_for_loss(data.infos[idx], out.identity_transition);
    const LabelInfo& info = out.resolved[b];
    using K = LabelInfo::Kind;
    switch (info.kind) {
      case K::kExact:
        break;
      case K::kCandidates:
        out.targets[b] = posterior_partial(p, info.candidates);
        break;
      case K::kUnlabeled:
        out.targets[b] = posterior_unlabeled(p);
        break;
      case K::kNoisy:
        out.targets[b] = posterior_noisy(p, info.label, out.frozen_transition);
        break;
      case K::kNoisyCandidates:
        out.targets[b] = posterior_noisy_partial(p, info.candidates,
                                                 out.frozen_transition);
        break;
    }
  }
  return out;
}

// Evaluates the batch objective with augmentation disabled and targets held
// fixed, filling analytic gradients (model parameters first, then omega when
// a noise model is present). Must agree with batch_loss at the capture point
// and with central finite differences everywhere.
inline double detached_batch_objective(const ImpreciseDataset& data,
                                       std::span<const int> indices,
                                       const Classifier& model,
                                       const NoiseModel* noise,
                                       double entropy_weight,
                                       const DetachedTargets& fixed,
                                       std::span<double> analytic) {
  const int C = model.num_classes;
  const size_t B = indices.size();
  const double inv_b = 1.0 / static_cast<double>(B);
  const bool want_grad = !analytic.empty();

  Matrix live_transition;
  if (noise) live_transition = noise->transition_matrix();

  Gradients model_grad = Gradients::zeros_like(model);
  Matrix omega_grad(noise ? C : 0, noise ? C : 0);

  std::vector<Classifier::Cache> caches(B);
  std::vector<ProbVector> preds(B);
  for (size_t b = 0; b < B; ++b)
    preds[b] = model.forward(data.samples[indices[b]].features, &caches[b]);

  double loss = 0.0;
  double sup_sum = 0.0, cons_sum = 0.0;
  std::vector<double> dlogits(C);

  // Entropy balance over the batch predictions.
  std::vector<double> ent_grad;
  if (entropy_weight > 0.0) {
    loss += entropy_weight * entropy_balance_loss(preds);
    ProbVector mean(C, 0.0);
    for (const auto& p : preds)
      for (int k = 0; k < C; ++k) mean[k] += p[k];
    for (double& v : mean) v *= inv_b;
    ent_grad = entropy_balance_mean_grad(mean);
    for (double& v : ent_grad) v *= entropy_weight * inv_b;
  }

  for (size_t b = 0; b < B; ++b) {
    const LabelInfo& info = fixed.resolved[b];
    const ProbVector& p = preds[b];
    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    if (!ent_grad.empty()) {
      std::vector<double> tmp(C);
      softmax_vjp(p, ent_grad, tmp);
      for (int k = 0; k < C; ++k) dlogits[k] += tmp[k];
    }

    using K = LabelInfo::Kind;
    switch (info.kind) {
      case K::kExact: {
        std::vector<double> onehot(C, 0.0);
        onehot[info.label] = 1.0;
        sup_sum += soft_cross_entropy(p, onehot);
        for (int k = 0; k < C; ++k) dlogits[k] += inv_b * (p[k] - onehot[k]);
        break;
      }
      case K::kCandidates:
      case K::kUnlabeled: {
        const ProbVector& t = fixed.targets[b].probs;
        cons_sum += soft_cross_entropy(p, t);
        for (int k = 0; k < C; ++k) dlogits[k] += inv_b * (p[k] - t[k]);
        break;
      }
      case K::kNoisy: {
        const ProbVector& t = fixed.targets[b].probs;
        const PosteriorTarget student =
            posterior_noisy(p, info.label, fixed.frozen_transition);
        cons_sum += soft_cross_entropy(student.probs, t);
        for (int k = 0; k < C; ++k)
          dlogits[k] += inv_b * (student.probs[k] - t[k]);

        const NoisyNllGradients g = noise_gradients(p, info.label, *noise);
        sup_sum += g.loss;
        for (int k = 0; k < C; ++k) dlogits[k] += inv_b * g.d_logits[k];
        if (want_grad)
          for (size_t t2 = 0; t2 < omega_grad.data.size(); ++t2)
            omega_grad.data[t2] += inv_b * g.d_omega.data[t2];
        break;
      }
      case K::kNoisyCandidates: {
        const ProbVector& t = fixed.targets[b].probs;
        const PosteriorTarget student = posterior_noisy_partial(
            p, info.candidates, fixed.frozen_transition);
        cons_sum += soft_cross_entropy(student.probs, t);
        for (int k = 0; k < C; ++k)
          dlogits[k] += inv_b * (student.probs[k] - t[k]);

        // Candidate-marginal likelihood through the live transition.
        std::vector<double> lik(C, 0.0);
        for (int y = 0; y < C; ++y)
          for (int c : info.candidates) lik[y] += live_transition.at(y, c);
        double m = 0.0;
        for (int y = 0; y < C; ++y) m += p[y] * lik[y];
        const double guarded = std::max(m, kEps);
        sup_sum += -std::log(guarded);
        if (m >= kEps) {
          for (int y = 0; y < C; ++y)
            dlogits[y] += inv_b * (p[y] - p[y] * lik[y] / m);
          if (want_grad) {
            std::vector<std::uint8_t> in_set(C, 0);
            for (int c : info.candidates) in_set[c] = 1;
            for (int y = 0; y < C; ++y)
              for (int j = 0; j < C; ++j)
                omega_grad.at(y, j) += inv_b * -(p[y] / m) *
                                       live_transition.at(y, j) *
                                       ((in_set[j] ? 1.0 : 0.0) - lik[y]);
          }
        }
        break;
      }
    }
    if (want_grad) backward_from_logits(model, caches[b], dlogits, model_grad);
  }
  loss += (sup_sum + cons_sum) * inv_b;

  if (want_grad) {
    const size_t model_params = model.parameter_count();
    flatten_gradients(model_grad, analytic.subspan(0, model_params));
    for (size_t t = 0; t < omega_grad.data.size(); ++t)
      analytic[model_params + t] = omega_grad.data[t];
  }
  return loss;
}

}  // namespace implab::testing

#endif  // IMPLAB_TESTS_SUPPORT_HPP
