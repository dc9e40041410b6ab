#ifndef IMPLAB_POSTERIOR_HPP
#define IMPLAB_POSTERIOR_HPP

#include <span>
#include <vector>

#include "implab/common.hpp"

namespace implab {

// A soft target over true labels together with the set of classes that may
// legally carry mass. Mass outside the support is exactly zero.
struct PosteriorTarget {
  ProbVector probs;
  std::vector<std::uint8_t> support;

  bool operator==(const PosteriorTarget&) const = default;
};

// Renormalizes pred over the candidate set s; mass off s is zero. Falls back
// to uniform over s when the candidate mass is below 1e-12.
PosteriorTarget posterior_partial(std::span<const double> pred,
                                  std::span<const int> candidates);

// Identity: the full predicted distribution is the soft target.
PosteriorTarget posterior_unlabeled(std::span<const double> pred);

// target_y proportional to pred_y * T[y][y_hat] (rows of T indexed by the
// true class). Falls back to pred itself when the normalizer vanishes.
PosteriorTarget posterior_noisy(std::span<const double> pred, int y_hat,
                                const Matrix& transition);

// target_y proportional to pred_y * sum_{y_hat in s} T[y][y_hat]; support is
// the full class range (the true label may lie outside s).
PosteriorTarget posterior_noisy_partial(std::span<const double> pred,
                                        std::span<const int> candidates,
                                        const Matrix& transition);

// One-hot delta at y.
PosteriorTarget posterior_exact(int y, int num_classes);

}  // namespace implab

#endif  // IMPLAB_POSTERIOR_HPP
