#ifndef IMPLAB_TRAINER_HPP
#define IMPLAB_TRAINER_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "implab/labels.hpp"
#include "implab/model.hpp"
#include "implab/noise.hpp"
#include "implab/posterior.hpp"

namespace implab {

enum class TaskKind { kSupervised, kPll, kSsl, kNll, kMixed };

const char* task_name(TaskKind t);
TaskKind parse_task(const std::string& name);  // throws ConfigError

struct TrainConfig {
  TaskKind task = TaskKind::kSupervised;
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  double entropy_weight = 0.1;  // class-balance loss weight

  // Feature-space augmentation. Weak adds Gaussian noise of weak_noise *
  // per-feature-std; strong adds strong_noise * std then drops coordinates
  // with probability strong_dropout, rescaling survivors by 1/(1 - rho).
  double weak_noise = 0.05;
  double strong_noise = 0.2;
  double strong_dropout = 0.25;

  double target_ema = 0.0;   // per-sample soft-target EMA momentum; 0 = off
  double noise_scale = 1.0;  // noise-model prior scale
  double noise_lr = -1.0;    // learning rate for omega; < 0 means lr

  // The synthetic benchmark is linearly separable up to its Bayes rate, so
  // linear is the default; the MLP alternative is one 64-wide relu layer.
  Arch arch = Arch::kLinear;
  int hidden = 64;
  std::uint64_t seed = 1;

  void validate() const;
};

struct MetricsRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_consistency = 0.0;
  double loss_supervised = 0.0;
  double loss_entropy = 0.0;
  double test_acc = 0.0;
  double obs_loglik = 0.0;
  std::optional<double> transition_tv;
};

// epoch,loss_total,loss_consistency,loss_supervised,loss_entropy,test_acc,
// obs_loglik,transition_tv  -- floats at 17 significant digits, empty cell
// when a field does not apply.
void write_metrics_csv(const std::vector<MetricsRecord>& records,
                       const std::string& path);

// ---------------------------------------------------------------------------

enum class AugmentKind { kWeak, kStrong };

// Draw order per call: one Gaussian per feature, then (strong only) one
// uniform per feature for the dropout mask.
std::vector<double> augment(std::span<const double> features, AugmentKind kind,
                            rng::Stream& stream, const TrainConfig& cfg,
                            std::span<const double> feature_std);

// Per-feature population standard deviation of a dataset.
std::vector<double> feature_stddev(const ImpreciseDataset& d);

// ---------------------------------------------------------------------------

// Loss (summed over the batch) and parameter gradients for one batch.
//
// Per sample, by annotation kind:
//   Exact            CE(weak pred, one-hot)
//   Candidates       CE(strong pred, detached renormalized weak posterior)
//   Unlabeled        CE(strong pred, detached weak pred)
//   Noisy            CE(noise-conditioned strong posterior, detached
//                       noise-conditioned weak posterior)
//                    + CE(noisy marginal of weak pred, observed label)
//   NoisyCandidates  the candidate-set analogue of Noisy
// plus entropy_weight * entropy_balance_loss over the batch's weak preds.
//
// Degenerate information is routed through the stronger kind it is
// equivalent to: a singleton candidate set is an exact label, and when the
// transition matrix is exactly the identity a noisy label is an exact label
// (and a noisy candidate set a clean one). This makes the collapse to
// supervised training bit-exact.
//
// The E-step targets are detached: gradients flow through student branches
// only, and omega gradients come only from the supervised marginal terms.
struct BatchLossResult {
  double total = 0.0;
  double consistency = 0.0;
  double supervised = 0.0;
  double entropy = 0.0;
  Gradients model_grad;
  Matrix omega_grad;  // empty when no noise model is involved
};

BatchLossResult batch_loss(const ImpreciseDataset& data,
                           std::span<const int> indices,
                           const Classifier& model, const NoiseModel* noise,
                           const TrainConfig& cfg, int epoch,
                           std::span<const double> feature_std,
                           std::vector<PosteriorTarget>* ema_targets = nullptr);

// ---------------------------------------------------------------------------

struct TrainResult {
  Classifier model;
  std::optional<NoiseModel> noise;
  std::vector<MetricsRecord> metrics;
};

// Online EM: one gradient step per E-step, deterministic batch order from
// the seed, one MetricsRecord per epoch. true_transition, when given, is
// only used to report the transition recovery error.
TrainResult train(const ImpreciseDataset& train_data,
                  const ImpreciseDataset& test_data, const TrainConfig& cfg,
                  const Matrix* true_transition = nullptr);

// Fraction of argmax predictions equal to true labels; ties break toward the
// smallest class index.
double evaluate(const Classifier& model, const ImpreciseDataset& test_data);

// Log-likelihood of the observed information (summed over samples):
//   exact      log p(y | x)
//   partial    log sum_{y in s} p(y | x)
//   unlabeled  0
//   noisy      log sum_y p(y | x) T[y][y_hat]
//   noisy set  log sum_y p(y | x) sum_{y_hat in s} T[y][y_hat]
double observed_log_likelihood(const ImpreciseDataset& d,
                               const Classifier& model,
                               const NoiseModel* noise);

// ---------------------------------------------------------------------------

// Full-batch generalized EM on un-augmented features with no entropy loss:
// each iteration recomputes detached posteriors, then takes up to m_steps
// backtracking ascent steps on the expected complete-data log-likelihood,
// accepting a step only if it improves. The returned trace (initial value
// plus one entry per iteration) is non-decreasing up to float error.
struct EmCheckResult {
  std::vector<double> loglik_trace;
  Classifier model;
  std::optional<NoiseModel> noise;
};

EmCheckResult exact_em_check(const ImpreciseDataset& d, Classifier model,
                             const NoiseModel* noise, int iterations,
                             int m_steps, double step_size);

}  // namespace implab

#endif  // IMPLAB_TRAINER_HPP
