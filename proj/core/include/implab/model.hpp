#ifndef IMPLAB_MODEL_HPP
#define IMPLAB_MODEL_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "implab/common.hpp"

namespace implab {

enum class Arch { kLinear, kMlp };

// A small softmax classifier with hand-derived gradients.
//
// Linear:  logits = W1 x + b1                (W1 is C x D)
// MLP:     h = relu(W1 x + b1), logits = W2 h + b2
//
// Hidden weights are initialized uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
// from the seed; the output layer starts at zero so an untrained model
// predicts the uniform distribution.
struct Classifier {
  Arch arch = Arch::kLinear;
  int input_dim = 0;
  int num_classes = 0;
  int hidden = 0;

  Matrix w1;                // linear: C x D, mlp: H x D
  std::vector<double> b1;   // linear: C,     mlp: H
  Matrix w2;                // mlp: C x H
  std::vector<double> b2;   // mlp: C

  static Classifier make_linear(int input_dim, int num_classes,
                                std::uint64_t seed);
  static Classifier make_mlp(int input_dim, int num_classes, int hidden,
                             std::uint64_t seed);

  // Intermediates kept for the backward pass.
  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden_act;  // post-relu, mlp only
    ProbVector prob;
  };

  // Softmax output; throws ShapeError naming both dimensions on mismatch.
  ProbVector forward(std::span<const double> features,
                     Cache* cache = nullptr) const;

  std::vector<ProbVector> forward_batch(
      const std::vector<std::vector<double>>& features) const;

  size_t parameter_count() const;
  bool operator==(const Classifier&) const = default;
};

// Parameter-shaped gradient accumulator.
struct Gradients {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;

  static Gradients zeros_like(const Classifier& c);
  void zero();
  void scale(double s);
};

// Accumulates parameter gradients for one sample given dL/dlogits.
void backward_from_logits(const Classifier& c, const Classifier::Cache& cache,
                          std::span<const double> dlogits, Gradients& out);

// Mutable flat views over every parameter array, in a fixed order. The same
// order is used for gradients, momentum buffers, and finite differences.
std::vector<std::span<double>> parameter_views(Classifier& c);
std::vector<std::span<double>> parameter_views(Gradients& g);

// ---------------------------------------------------------------------------
// Losses

// loss = -sum_k target_k * log(max(pred_k, 1e-12)).
//
// The max() guard keeps the value finite for zero predictions, keeps the loss
// nonnegative, and makes the loss exactly zero when pred == target is one-hot.
// Both arguments must be on the simplex; target carries no gradient. The
// gradient with respect to pre-softmax logits is pred - target.
double soft_cross_entropy(std::span<const double> pred,
                          std::span<const double> target);

// dL/dlogits for soft_cross_entropy.
void soft_cross_entropy_logit_grad(std::span<const double> pred,
                                   std::span<const double> target,
                                   std::span<double> out);

// Negative entropy of the batch-mean prediction:
//   sum_k mean_k * log(max(mean_k, 1e-12))
// Minimized by a uniform class marginal; exactly 0 for a single one-hot row.
double entropy_balance_loss(const std::vector<ProbVector>& batch);

// d(entropy_balance_loss)/d(mean_k); chain through each sample's softmax with
// weight 1/batch_size.
std::vector<double> entropy_balance_mean_grad(const ProbVector& mean);

// Generic softmax Jacobian application: given g = dL/dp returns dL/dz with
// dz_j = p_j * (g_j - sum_k g_k p_k).
void softmax_vjp(std::span<const double> prob, std::span<const double> dprob,
                 std::span<double> dlogits);

// ---------------------------------------------------------------------------
// Optimizer: SGD with momentum, decoupled weight decay, and the cosine
// schedule lr(k) = lr0 * cos(7*pi*k / (16*K)).

struct OptimizerState {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  long step = 0;
  long total_steps = 1;
  std::vector<double> buffers;  // one momentum scalar per parameter

  static OptimizerState make(double lr0, double momentum, double weight_decay,
                             long total_steps, size_t parameter_count);

  // Learning rate the next step will use; positive while step < total_steps.
  double current_lr() const;
};

// buf = mu*buf + g;  p -= lr*buf + lr*wd*p.  Throws ScheduleExhaustedError
// once step reaches total_steps; throws ShapeError on mismatched sizes.
void sgd_step(std::vector<std::span<double>> params,
              std::vector<std::span<double>> grads, OptimizerState& state);

// Cosine law evaluated at an arbitrary step (usable at the k = K boundary).
double cosine_lr(double lr0, long step, long total_steps);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
//
// The closure evaluates the loss at the current parameters and fills the
// analytic gradient (flattened in view order). Central differences perturb
// every scalar; returns max |analytic - numeric| / max(|numeric|, 1e-8).
using LossClosure = std::function<double(std::span<double> analytic_grad)>;

double finite_difference_check(std::vector<std::span<double>> params,
                               const LossClosure& loss, double epsilon);

}  // namespace implab

#endif  // IMPLAB_MODEL_HPP
