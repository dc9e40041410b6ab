#include <cmath>

#include "implab/trainer.hpp"

namespace implab {

namespace {

// Expected complete-data log-likelihood (averaged over samples) under fixed
// posteriors, together with its ascent gradients. The per-sample likelihood
// factor L_i(y; omega) is 1 for exact/partial/unlabeled information (their
// conditional likelihood does not depend on the parameters), T[y][y_hat] for
// noisy labels and sum_{c in s} T[y][c] for noisy candidate sets.
struct QEval {
  double value = 0.0;
  Gradients d_model;  // ascent direction (gradient of Q, not -Q)
  Matrix d_omega;
};

QEval q_objective(const ImpreciseDataset& d, const Classifier& model,
                  const NoiseModel* noise,
                  const std::vector<PosteriorTarget>& posteriors,
                  bool want_grad) {
  const int C = d.num_classes;
  const double inv_n = 1.0 / static_cast<double>(d.size());
  Matrix transition;
  if (noise) transition = noise->transition_matrix();

  QEval q;
  if (want_grad) {
    q.d_model = Gradients::zeros_like(model);
    if (noise) q.d_omega = Matrix(C, C);
  }

  std::vector<double> dlogits(C);
  Classifier::Cache cache;
  for (size_t i = 0; i < d.size(); ++i) {
    const ProbVector p = model.forward(d.samples[i].features, &cache);
    const ProbVector& gamma = posteriors[i].probs;

    for (int y = 0; y < C; ++y) {
      if (gamma[y] == 0.0) continue;
      q.value += inv_n * gamma[y] * std::log(std::max(p[y], kEps));
    }
    if (want_grad) {
      for (int y = 0; y < C; ++y) dlogits[y] = inv_n * (gamma[y] - p[y]);
      backward_from_logits(model, cache, dlogits, q.d_model);
    }

    const LabelInfo& info = d.infos[i];
    using K = LabelInfo::Kind;
    if (info.kind == K::kNoisy) {
      for (int y = 0; y < C; ++y) {
        if (gamma[y] == 0.0) continue;
        const double t_val = transition.at(y, info.label);
        q.value += inv_n * gamma[y] * std::log(std::max(t_val, kEps));
        if (want_grad && t_val > kEps) {
          // d log T[y][y_hat] / d omega[y][j] = 1[j == y_hat] - T[y][j]
          for (int j = 0; j < C; ++j)
            q.d_omega.at(y, j) +=
                inv_n * gamma[y] *
                ((j == info.label ? 1.0 : 0.0) - transition.at(y, j));
        }
      }
    } else if (info.kind == K::kNoisyCandidates) {
      std::vector<std::uint8_t> in_set(C, 0);
      for (int c : info.candidates) in_set[c] = 1;
      for (int y = 0; y < C; ++y) {
        if (gamma[y] == 0.0) continue;
        double lik = 0.0;
        for (int c : info.candidates) lik += transition.at(y, c);
        q.value += inv_n * gamma[y] * std::log(std::max(lik, kEps));
        if (want_grad && lik > kEps) {
          // d log(sum_{c in s} T[y][c]) / d omega[y][j]
          //   = T[y][j] (1[j in s] - lik) / lik
          for (int j = 0; j < C; ++j)
            q.d_omega.at(y, j) += inv_n * gamma[y] * transition.at(y, j) *
                                  ((in_set[j] ? 1.0 : 0.0) - lik) / lik;
        }
      }
    }
  }
  return q;
}

std::vector<PosteriorTarget> e_step(const ImpreciseDataset& d,
                                    const Classifier& model,
                                    const NoiseModel* noise) {
  Matrix transition;
  if (noise) transition = noise->transition_matrix();
  std::vector<PosteriorTarget> out;
  out.reserve(d.size());
  for (size_t i = 0; i < d.size(); ++i) {
    const ProbVector p = model.forward(d.samples[i].features);
    const LabelInfo& info = d.infos[i];
    using K = LabelInfo::Kind;
    switch (info.kind) {
      case K::kExact:
        out.push_back(posterior_exact(info.label, d.num_classes));
        break;
      case K::kCandidates:
        out.push_back(posterior_partial(p, info.candidates));
        break;
      case K::kUnlabeled:
        out.push_back(posterior_unlabeled(p));
        break;
      case K::kNoisy:
        out.push_back(posterior_noisy(p, info.label, transition));
        break;
      case K::kNoisyCandidates:
        out.push_back(posterior_noisy_partial(p, info.candidates, transition));
        break;
    }
  }
  return out;
}

}  // namespace

EmCheckResult exact_em_check(const ImpreciseDataset& d, Classifier model,
                             const NoiseModel* noise, int iterations,
                             int m_steps, double step_size) {
  if (d.size() == 0) throw ContractError("exact_em_check: empty dataset");
  if (d.size() > 2000)
    throw ContractError("exact_em_check: dataset too large for full batch (" +
                        std::to_string(d.size()) + " > 2000)");
  if (iterations < 0 || m_steps < 1 || step_size <= 0.0)
    throw ConfigError("exact_em_check: bad iteration settings");

  EmCheckResult result;
  if (noise) result.noise = *noise;
  NoiseModel* w = result.noise ? &*result.noise : nullptr;

  result.loglik_trace.push_back(observed_log_likelihood(d, model, w));

  for (int it = 0; it < iterations; ++it) {
    const std::vector<PosteriorTarget> gamma = e_step(d, model, w);

    for (int step = 0; step < m_steps; ++step) {
      QEval q0 = q_objective(d, model, w, gamma, /*want_grad=*/true);
      const auto grad_views = parameter_views(q0.d_model);

      bool accepted = false;
      double lr = step_size;
      for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
        Classifier trial = model;
        auto views = parameter_views(trial);
        size_t vi = 0;
        for (auto& view : views) {
          for (size_t k = 0; k < view.size(); ++k)
            view[k] += lr * grad_views[vi][k];
          ++vi;
        }
        NoiseModel trial_noise;
        if (w) {
          trial_noise = *w;
          for (size_t k = 0; k < trial_noise.omega.data.size(); ++k)
            trial_noise.omega.data[k] += lr * q0.d_omega.data[k];
        }
        const QEval q1 = q_objective(d, trial, w ? &trial_noise : nullptr,
                                     gamma, /*want_grad=*/false);
        if (q1.value >= q0.value) {
          model = std::move(trial);
          if (w) *w = std::move(trial_noise);
          accepted = true;
        } else {
          lr *= 0.5;  // backtrack: only Q-improving updates are accepted
        }
      }
      if (!accepted) break;  // converged for this posterior
    }

    result.loglik_trace.push_back(observed_log_likelihood(d, model, w));
  }

  result.model = std::move(model);
  return result;
}

}  // namespace implab
