#include "implab/posterior.hpp"

#include <string>

namespace implab {

PosteriorTarget posterior_partial(std::span<const double> pred,
                                  std::span<const int> candidates) {
  if (candidates.empty())
    throw ContractError("posterior_partial: empty candidate set");
  const size_t C = pred.size();
  PosteriorTarget t;
  t.probs.assign(C, 0.0);
  t.support.assign(C, 0);

  double mass = 0.0;
  for (int c : candidates) {
    if (c < 0 || static_cast<size_t>(c) >= C)
      throw ContractError("posterior_partial: candidate " + std::to_string(c) +
                          " out of range");
    t.support[c] = 1;
    mass += pred[c];
  }
  if (mass < kEps) {
    const double u = 1.0 / static_cast<double>(candidates.size());
    for (int c : candidates) t.probs[c] = u;
  } else {
    for (int c : candidates) t.probs[c] = pred[c] / mass;
  }
  return t;
}

PosteriorTarget posterior_unlabeled(std::span<const double> pred) {
  PosteriorTarget t;
  t.probs.assign(pred.begin(), pred.end());
  t.support.assign(pred.size(), 1);
  return t;
}

PosteriorTarget posterior_noisy(std::span<const double> pred, int y_hat,
                                const Matrix& transition) {
  const size_t C = pred.size();
  if (y_hat < 0 || static_cast<size_t>(y_hat) >= C)
    throw ContractError("posterior_noisy: observed label " +
                        std::to_string(y_hat) + " out of range");
  PosteriorTarget t;
  t.probs.assign(C, 0.0);
  t.support.assign(C, 1);

  double mass = 0.0;
  for (size_t y = 0; y < C; ++y) {
    t.probs[y] = pred[y] * transition.at(static_cast<int>(y), y_hat);
    mass += t.probs[y];
  }
  if (mass < kEps) {
    t.probs.assign(pred.begin(), pred.end());
  } else {
    for (double& v : t.probs) v /= mass;
  }
  return t;
}

PosteriorTarget posterior_noisy_partial(std::span<const double> pred,
                                        std::span<const int> candidates,
                                        const Matrix& transition) {
  if (candidates.empty())
    throw ContractError("posterior_noisy_partial: empty candidate set");
  const size_t C = pred.size();
  PosteriorTarget t;
  t.probs.assign(C, 0.0);
  t.support.assign(C, 1);

  double mass = 0.0;
  for (size_t y = 0; y < C; ++y) {
    double lik = 0.0;
    for (int c : candidates) {
      if (c < 0 || static_cast<size_t>(c) >= C)
        throw ContractError("posterior_noisy_partial: candidate " +
                            std::to_string(c) + " out of range");
      lik += transition.at(static_cast<int>(y), c);
    }
    t.probs[y] = pred[y] * lik;
    mass += t.probs[y];
  }
  if (mass < kEps) {
    t.probs.assign(pred.begin(), pred.end());
  } else {
    for (double& v : t.probs) v /= mass;
  }
  return t;
}

PosteriorTarget posterior_exact(int y, int num_classes) {
  if (y < 0 || y >= num_classes)
    throw ContractError("posterior_exact: label " + std::to_string(y) +
                        " out of range");
  PosteriorTarget t;
  t.probs.assign(num_classes, 0.0);
  t.support.assign(num_classes, 0);
  t.probs[y] = 1.0;
  t.support[y] = 1;
  return t;
}

}  // namespace implab
