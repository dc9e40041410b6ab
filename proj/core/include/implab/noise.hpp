#ifndef IMPLAB_NOISE_HPP
#define IMPLAB_NOISE_HPP

#include <span>
#include <string>

#include "implab/common.hpp"

namespace implab {

// Learnable instance-independent label-noise model with C^2 parameters.
//
// The induced row-stochastic transition matrix is
//   T[y][y_hat] = rowsoftmax(scale * 1[y_hat == y] + omega[y][y_hat]),
// rows indexed by the true class. scale sets the near-diagonal prior;
// omega = 0 starts training from "labels are mostly clean".
struct NoiseModel {
  int num_classes = 0;
  double scale = 1.0;
  Matrix omega;

  static NoiseModel make(int num_classes, double scale);

  Matrix transition_matrix() const;

  bool operator==(const NoiseModel&) const = default;
};

// True whether every diagonal entry is exactly 1 and every off-diagonal is
// exactly 0 (the row softmax saturates once scale exceeds ~746).
bool transition_is_identity(const Matrix& t);

// p(y_hat | x) = sum_y pred_y * T[y][y_hat]; maps the simplex to itself.
ProbVector noisy_marginal(std::span<const double> pred, const Matrix& transition);

// Gradients of  -log(max(noisy_marginal(pred, T)[y_hat], 1e-12))  with
// respect to omega and to pred's pre-softmax logits.
struct NoisyNllGradients {
  Matrix d_omega;
  std::vector<double> d_logits;
  double loss = 0.0;
};
NoisyNllGradients noise_gradients(std::span<const double> pred, int y_hat,
                                  const NoiseModel& model);

// Same computation against a precomputed transition matrix (the matrix must
// come from the same omega the returned d_omega refers to).
NoisyNllGradients noise_gradients(std::span<const double> pred, int y_hat,
                                  const Matrix& transition);

// Max over rows of the total-variation distance (half L1) between two
// row-stochastic matrices.
double transition_recovery_error(const Matrix& t_est, const Matrix& t_true);

// {"C": C, "scale": s, "T": [[...], ...]} with 17-significant-digit floats.
std::string transition_to_json(const NoiseModel& model);

}  // namespace implab

#endif  // IMPLAB_NOISE_HPP
