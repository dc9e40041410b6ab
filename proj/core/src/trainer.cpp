#include "implab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace implab {

const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::kSupervised: return "supervised";
    case TaskKind::kPll: return "pll";
    case TaskKind::kSsl: return "ssl";
    case TaskKind::kNll: return "nll";
    case TaskKind::kMixed: return "mixed";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  if (name == "supervised") return TaskKind::kSupervised;
  if (name == "pll") return TaskKind::kPll;
  if (name == "ssl") return TaskKind::kSsl;
  if (name == "nll") return TaskKind::kNll;
  if (name == "mixed") return TaskKind::kMixed;
  throw ConfigError("unknown task '" + name +
                    "' (expected supervised|pll|ssl|nll|mixed)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (entropy_weight < 0.0) throw ConfigError("entropy weight must be >= 0");
  if (weak_noise < 0.0 || strong_noise < 0.0)
    throw ConfigError("augmentation noise must be >= 0");
  if (weak_noise > strong_noise)
    throw ConfigError("weak augmentation must not exceed strong");
  if (strong_dropout < 0.0 || strong_dropout >= 1.0)
    throw ConfigError("strong dropout must lie in [0, 1)");
  if (target_ema < 0.0 || target_ema >= 1.0)
    throw ConfigError("target EMA momentum must lie in [0, 1)");
  if (noise_scale < 0.0) throw ConfigError("noise scale must be >= 0");
}

void write_metrics_csv(const std::vector<MetricsRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "epoch,loss_total,loss_consistency,loss_supervised,loss_entropy,"
         "test_acc,obs_loglik,transition_tv\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const auto& r : records) {
    out << r.epoch << ",";
    put(r.loss_total); out << ",";
    put(r.loss_consistency); out << ",";
    put(r.loss_supervised); out << ",";
    put(r.loss_entropy); out << ",";
    put(r.test_acc); out << ",";
    put(r.obs_loglik); out << ",";
    if (r.transition_tv) put(*r.transition_tv);
    out << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------

std::vector<double> feature_stddev(const ImpreciseDataset& d) {
  const int D = d.feature_dim();
  std::vector<double> mean(D, 0.0), var(D, 0.0);
  for (const auto& s : d.samples)
    for (int j = 0; j < D; ++j) mean[j] += s.features[j];
  for (double& m : mean) m /= static_cast<double>(d.size());
  for (const auto& s : d.samples)
    for (int j = 0; j < D; ++j) {
      const double c = s.features[j] - mean[j];
      var[j] += c * c;
    }
  for (int j = 0; j < D; ++j)
    var[j] = std::sqrt(var[j] / static_cast<double>(d.size()));
  return var;
}

std::vector<double> augment(std::span<const double> features, AugmentKind kind,
                            rng::Stream& stream, const TrainConfig& cfg,
                            std::span<const double> feature_std) {
  std::vector<double> out(features.begin(), features.end());
  const double sigma =
      kind == AugmentKind::kWeak ? cfg.weak_noise : cfg.strong_noise;
  if (sigma > 0.0)
    for (size_t j = 0; j < out.size(); ++j)
      out[j] += sigma * feature_std[j] * stream.gaussian();
  if (kind == AugmentKind::kStrong && cfg.strong_dropout > 0.0) {
    const double keep_scale = 1.0 / (1.0 - cfg.strong_dropout);
    for (double& v : out)
      v = stream.uniform() < cfg.strong_dropout ? 0.0 : v * keep_scale;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t aug_seed(std::uint64_t run_seed, int epoch, int index) {
  return rng::derive(rng::derive(rng::derive(run_seed, 0xa06), epoch), index);
}

// The kind a sample is effectively trained under. Singleton candidate sets
// carry the same information as an exact label; under an exactly-identity
// transition matrix, so do noisy labels.
struct ResolvedInfo {
  LabelInfo::Kind kind;
  int label;
  std::span<const int> candidates;
};

ResolvedInfo resolve_info(const LabelInfo& info, bool identity_transition) {
  using K = LabelInfo::Kind;
  switch (info.kind) {
    case K::kExact:
      return {K::kExact, info.label, {}};
    case K::kCandidates:
      if (info.candidates.size() == 1)
        return {K::kExact, info.candidates[0], {}};
      return {K::kCandidates, -1, info.candidates};
    case K::kUnlabeled:
      return {K::kUnlabeled, -1, {}};
    case K::kNoisy:
      if (identity_transition) return {K::kExact, info.label, {}};
      return {K::kNoisy, info.label, {}};
    case K::kNoisyCandidates:
      if (identity_transition) {
        if (info.candidates.size() == 1)
          return {K::kExact, info.candidates[0], {}};
        return {K::kCandidates, -1, info.candidates};
      }
      return {K::kNoisyCandidates, -1, info.candidates};
  }
  throw Error("unreachable");
}

// -log(max(sum_{c in s} marginal[c], eps)) and its gradients; the
// candidate-marginal analogue of noise_gradients.
struct MixedNllGradients {
  double loss = 0.0;
  std::vector<double> d_logits;
  Matrix d_omega;
};

MixedNllGradients mixed_noise_gradients(std::span<const double> pred,
                                        std::span<const int> candidates,
                                        const Matrix& t) {
  const int C = t.rows;
  std::vector<double> lik(C, 0.0);  // a_y = sum_{c in s} T[y][c]
  for (int y = 0; y < C; ++y)
    for (int c : candidates) lik[y] += t.at(y, c);
  double marginal = 0.0;
  for (int y = 0; y < C; ++y) marginal += pred[y] * lik[y];
  const double m = std::max(marginal, kEps);

  MixedNllGradients g;
  g.loss = -std::log(m);
  g.d_logits.assign(C, 0.0);
  g.d_omega = Matrix(C, C);
  if (marginal < kEps) return g;

  for (int y = 0; y < C; ++y)
    g.d_logits[y] = pred[y] - pred[y] * lik[y] / m;
  std::vector<std::uint8_t> in_set(C, 0);
  for (int c : candidates) in_set[c] = 1;
  for (int y = 0; y < C; ++y) {
    const double w = pred[y] / m;
    if (w == 0.0) continue;
    for (int j = 0; j < C; ++j)
      g.d_omega.at(y, j) =
          -w * t.at(y, j) * ((in_set[j] ? 1.0 : 0.0) - lik[y]);
  }
  return g;
}

void apply_target_ema(PosteriorTarget& target, int index, double momentum,
                      std::vector<PosteriorTarget>* store) {
  if (!store || momentum <= 0.0) return;
  PosteriorTarget& prev = (*store)[index];
  if (prev.probs.empty()) {
    prev = target;
    return;
  }
  for (size_t k = 0; k < target.probs.size(); ++k) {
    target.probs[k] =
        momentum * prev.probs[k] + (1.0 - momentum) * target.probs[k];
    target.support[k] = target.support[k] || prev.support[k];
  }
  prev = target;
}

}  // namespace

BatchLossResult batch_loss(const ImpreciseDataset& data,
                           std::span<const int> indices,
                           const Classifier& model, const NoiseModel* noise,
                           const TrainConfig& cfg, int epoch,
                           std::span<const double> feature_std,
                           std::vector<PosteriorTarget>* ema_targets) {
  if (indices.empty()) throw ContractError("batch_loss: empty batch");
  const int C = model.num_classes;
  const size_t B = indices.size();
  const double inv_b = 1.0 / static_cast<double>(B);

  Matrix transition;
  bool identity_transition = false;
  if (noise) {
    transition = noise->transition_matrix();
    identity_transition = transition_is_identity(transition);
  }

  BatchLossResult result;
  result.model_grad = Gradients::zeros_like(model);
  if (noise) result.omega_grad = Matrix(C, C);

  struct PerSample {
    ResolvedInfo info{LabelInfo::Kind::kUnlabeled, -1, {}};
    Classifier::Cache weak;
    Classifier::Cache strong;
    PosteriorTarget target;  // detached soft target (consistency kinds)
  };
  std::vector<PerSample> ps(B);

  // Pass 1: forward passes and detached targets.
  for (size_t b = 0; b < B; ++b) {
    const int idx = indices[b];
    const Sample& sample = data.samples[idx];
    const LabelInfo& raw = data.infos[idx];
    if ((raw.kind == LabelInfo::Kind::kNoisy ||
         raw.kind == LabelInfo::Kind::kNoisyCandidates) &&
        !noise)
      throw ConfigError("batch_loss: noisy annotations require a noise model");

    PerSample& s = ps[b];
    s.info = resolve_info(raw, identity_transition);

    rng::Stream stream(aug_seed(cfg.seed, epoch, idx));
    const auto weak_features =
        augment(sample.features, AugmentKind::kWeak, stream, cfg, feature_std);
    model.forward(weak_features, &s.weak);

    using K = LabelInfo::Kind;
    if (s.info.kind != K::kExact) {
      const auto strong_features = augment(
          sample.features, AugmentKind::kStrong, stream, cfg, feature_std);
      model.forward(strong_features, &s.strong);
      switch (s.info.kind) {
        case K::kCandidates:
          s.target = posterior_partial(s.weak.prob, s.info.candidates);
          break;
        case K::kUnlabeled:
          s.target = posterior_unlabeled(s.weak.prob);
          break;
        case K::kNoisy:
          s.target = posterior_noisy(s.weak.prob, s.info.label, transition);
          break;
        case K::kNoisyCandidates:
          s.target = posterior_noisy_partial(s.weak.prob, s.info.candidates,
                                             transition);
          break;
        default: break;
      }
      apply_target_ema(s.target, idx, cfg.target_ema, ema_targets);
    }
  }

  // Entropy balance term over the batch's weak predictions; per-sample
  // contribution to d/dp is entropy_weight * H'(mean) / B.
  std::vector<double> entropy_mean_grad;
  if (cfg.entropy_weight > 0.0) {
    std::vector<ProbVector> weak_preds;
    weak_preds.reserve(B);
    for (const auto& s : ps) weak_preds.push_back(s.weak.prob);
    result.entropy = cfg.entropy_weight * entropy_balance_loss(weak_preds);
    ProbVector mean(C, 0.0);
    for (const auto& p : weak_preds)
      for (int k = 0; k < C; ++k) mean[k] += p[k];
    for (double& v : mean) v *= inv_b;
    entropy_mean_grad = entropy_balance_mean_grad(mean);
    const double w = cfg.entropy_weight * inv_b;
    for (double& v : entropy_mean_grad) v *= w;
  }

  // Pass 2: losses and gradients. Cross-entropy components are averaged over
  // the batch; the gradients returned are exactly those of result.total.
  std::vector<double> dweak(C), dstrong(C), scratch(C);
  for (size_t b = 0; b < B; ++b) {
    PerSample& s = ps[b];
    const int idx = indices[b];
    std::fill(dweak.begin(), dweak.end(), 0.0);

    if (!entropy_mean_grad.empty()) {
      softmax_vjp(s.weak.prob, entropy_mean_grad, scratch);
      for (int k = 0; k < C; ++k) dweak[k] += scratch[k];
    }

    using K = LabelInfo::Kind;
    switch (s.info.kind) {
      case K::kExact: {
        std::vector<double> onehot(C, 0.0);
        onehot[s.info.label] = 1.0;
        result.supervised += soft_cross_entropy(s.weak.prob, onehot);
        for (int k = 0; k < C; ++k)
          dweak[k] += inv_b * (s.weak.prob[k] - onehot[k]);
        break;
      }
      case K::kCandidates:
      case K::kUnlabeled: {
        result.consistency +=
            soft_cross_entropy(s.strong.prob, s.target.probs);
        for (int k = 0; k < C; ++k)
          dstrong[k] = inv_b * (s.strong.prob[k] - s.target.probs[k]);
        backward_from_logits(model, s.strong, dstrong, result.model_grad);
        break;
      }
      case K::kNoisy: {
        // Consistency between noise-conditioned posteriors; the transition
        // is detached here, so omega sees no gradient from this term.
        const PosteriorTarget student =
            posterior_noisy(s.strong.prob, s.info.label, transition);
        result.consistency +=
            soft_cross_entropy(student.probs, s.target.probs);
        for (int k = 0; k < C; ++k)
          dstrong[k] = inv_b * (student.probs[k] - s.target.probs[k]);
        backward_from_logits(model, s.strong, dstrong, result.model_grad);

        const NoisyNllGradients g =
            noise_gradients(s.weak.prob, s.info.label, transition);
        result.supervised += g.loss;
        for (int k = 0; k < C; ++k) dweak[k] += inv_b * g.d_logits[k];
        for (size_t t = 0; t < g.d_omega.data.size(); ++t)
          result.omega_grad.data[t] += inv_b * g.d_omega.data[t];
        break;
      }
      case K::kNoisyCandidates: {
        const PosteriorTarget student = posterior_noisy_partial(
            s.strong.prob, s.info.candidates, transition);
        result.consistency +=
            soft_cross_entropy(student.probs, s.target.probs);
        for (int k = 0; k < C; ++k)
          dstrong[k] = inv_b * (student.probs[k] - s.target.probs[k]);
        backward_from_logits(model, s.strong, dstrong, result.model_grad);

        const MixedNllGradients g =
            mixed_noise_gradients(s.weak.prob, s.info.candidates, transition);
        result.supervised += g.loss;
        for (int k = 0; k < C; ++k) dweak[k] += inv_b * g.d_logits[k];
        for (size_t t = 0; t < g.d_omega.data.size(); ++t)
          result.omega_grad.data[t] += inv_b * g.d_omega.data[t];
        break;
      }
    }
    backward_from_logits(model, s.weak, dweak, result.model_grad);

    const double so_far = result.consistency + result.supervised;
    if (!std::isfinite(so_far))
      throw NumericError("batch_loss: non-finite loss at sample index " +
                         std::to_string(idx));
  }

  result.consistency *= inv_b;
  result.supervised *= inv_b;
  result.total = result.consistency + result.supervised + result.entropy;
  return result;
}

// ---------------------------------------------------------------------------

double evaluate(const Classifier& model, const ImpreciseDataset& test_data) {
  if (test_data.size() == 0) throw ContractError("evaluate: empty test set");
  size_t hits = 0;
  for (const auto& s : test_data.samples) {
    const ProbVector p = model.forward(s.features);
    int best = 0;
    for (int k = 1; k < model.num_classes; ++k)
      if (p[k] > p[best]) best = k;  // ties keep the smallest index
    if (best == s.true_label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_data.size());
}

double observed_log_likelihood(const ImpreciseDataset& d,
                               const Classifier& model,
                               const NoiseModel* noise) {
  Matrix transition;
  if (noise) transition = noise->transition_matrix();
  double total = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const ProbVector p = model.forward(d.samples[i].features);
    const LabelInfo& info = d.infos[i];
    using K = LabelInfo::Kind;
    switch (info.kind) {
      case K::kExact:
        total += std::log(std::max(p[info.label], kEps));
        break;
      case K::kCandidates: {
        double m = 0.0;
        for (int c : info.candidates) m += p[c];
        total += std::log(std::max(m, kEps));
        break;
      }
      case K::kUnlabeled:
        break;
      case K::kNoisy: {
        if (!noise)
          throw ConfigError(
              "observed_log_likelihood: noisy entries need a noise model");
        double m = 0.0;
        for (int y = 0; y < d.num_classes; ++y)
          m += p[y] * transition.at(y, info.label);
        total += std::log(std::max(m, kEps));
        break;
      }
      case K::kNoisyCandidates: {
        if (!noise)
          throw ConfigError(
              "observed_log_likelihood: noisy entries need a noise model");
        double m = 0.0;
        for (int y = 0; y < d.num_classes; ++y) {
          double lik = 0.0;
          for (int c : info.candidates) lik += transition.at(y, c);
          m += p[y] * lik;
        }
        total += std::log(std::max(m, kEps));
        break;
      }
    }
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

bool dataset_has_noisy(const ImpreciseDataset& d) {
  for (const auto& info : d.infos)
    if (info.kind == LabelInfo::Kind::kNoisy ||
        info.kind == LabelInfo::Kind::kNoisyCandidates)
      return true;
  return false;
}

void check_task_compatibility(const ImpreciseDataset& d, TaskKind task) {
  using K = LabelInfo::Kind;
  for (const auto& info : d.infos) {
    bool ok = false;
    switch (task) {
      case TaskKind::kSupervised: ok = info.kind == K::kExact; break;
      case TaskKind::kPll:
        ok = info.kind == K::kExact || info.kind == K::kCandidates;
        break;
      case TaskKind::kSsl:
        ok = info.kind == K::kExact || info.kind == K::kUnlabeled;
        break;
      case TaskKind::kNll:
        ok = info.kind == K::kExact || info.kind == K::kNoisy;
        break;
      case TaskKind::kMixed: ok = true; break;
    }
    if (!ok)
      throw ConfigError(std::string("dataset contains ") +
                        kind_name(info.kind) +
                        " annotations, incompatible with task " +
                        task_name(task));
  }
}

}  // namespace

namespace {

// Cycles a shuffled index list, reshuffling on wrap-around.
class IndexCycler {
 public:
  IndexCycler(std::vector<int> items, std::uint64_t seed)
      : items_(std::move(items)), rng_(seed) {
    rng_.shuffle(items_);
  }

  void take(int count, std::vector<int>& out) {
    for (int i = 0; i < count; ++i) {
      if (pos_ == items_.size()) {
        rng_.shuffle(items_);
        pos_ = 0;
      }
      out.push_back(items_[pos_++]);
    }
  }

 private:
  std::vector<int> items_;
  size_t pos_ = 0;
  rng::Stream rng_;
};

}  // namespace

TrainResult train(const ImpreciseDataset& train_data,
                  const ImpreciseDataset& test_data, const TrainConfig& cfg,
                  const Matrix* true_transition) {
  cfg.validate();
  check_task_compatibility(train_data, cfg.task);
  if (train_data.size() == 0) throw ContractError("train: empty dataset");

  const int C = train_data.num_classes;
  const int D = train_data.feature_dim();
  const int N = static_cast<int>(train_data.size());

  TrainResult result;
  result.model = cfg.arch == Arch::kLinear
                     ? Classifier::make_linear(D, C, cfg.seed)
                     : Classifier::make_mlp(D, C, cfg.hidden, cfg.seed);
  const bool needs_noise_model = dataset_has_noisy(train_data) ||
                                 cfg.task == TaskKind::kNll ||
                                 cfg.task == TaskKind::kMixed;
  if (needs_noise_model) result.noise = NoiseModel::make(C, cfg.noise_scale);

  if (cfg.epochs == 0) return result;

  // Samples with any label information and fully unlabeled ones form two
  // streams; when both are nonempty each step takes half its batch from
  // each, so supervision keeps a fixed share of every step no matter how
  // small the labeled fraction is. An epoch covers the larger stream once.
  std::vector<int> labeled_idx, unlabeled_idx;
  for (int i = 0; i < N; ++i)
    (train_data.infos[i].kind == LabelInfo::Kind::kUnlabeled ? unlabeled_idx
                                                             : labeled_idx)
        .push_back(i);
  const bool two_stream = !labeled_idx.empty() && !unlabeled_idx.empty();
  const int half_l = std::max(1, cfg.batch_size / 2);
  const int half_u = std::max(1, cfg.batch_size - half_l);

  int steps_per_epoch;
  if (two_stream) {
    const int need_l = (static_cast<int>(labeled_idx.size()) + half_l - 1) / half_l;
    const int need_u =
        (static_cast<int>(unlabeled_idx.size()) + half_u - 1) / half_u;
    steps_per_epoch = std::max(need_l, need_u);
  } else {
    steps_per_epoch = (N + cfg.batch_size - 1) / cfg.batch_size;
  }
  const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  OptimizerState model_opt =
      OptimizerState::make(cfg.lr, cfg.momentum, cfg.weight_decay, total_steps,
                           result.model.parameter_count());
  // omega tracks batch statistics of a posterior that itself depends on
  // omega; momentum would amplify that feedback loop, so the noise model
  // steps without it. Weight decay anchors the transition matrix to the
  // diagonal prior rather than just initializing there.
  OptimizerState omega_opt;
  if (result.noise)
    omega_opt = OptimizerState::make(cfg.noise_lr < 0.0 ? cfg.lr : cfg.noise_lr,
                                     0.0, cfg.weight_decay, total_steps,
                                     result.noise->omega.data.size());

  const std::vector<double> feat_std = feature_stddev(train_data);
  std::vector<PosteriorTarget> ema_store;
  if (cfg.target_ema > 0.0) ema_store.resize(train_data.size());

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed =
        rng::derive(rng::derive(cfg.seed, 0x5f0f), epoch);
    IndexCycler labeled_cycler(labeled_idx, rng::derive(epoch_seed, 1));
    IndexCycler unlabeled_cycler(unlabeled_idx, rng::derive(epoch_seed, 2));
    if (!two_stream) {
      rng::Stream shuffle_stream(epoch_seed);
      shuffle_stream.shuffle(order);
    }

    double sum_total = 0.0, sum_cons = 0.0, sum_sup = 0.0, sum_ent = 0.0;
    std::vector<int> batch;
    for (int step = 0; step < steps_per_epoch; ++step) {
      batch.clear();
      if (two_stream) {
        labeled_cycler.take(half_l, batch);
        unlabeled_cycler.take(half_u, batch);
      } else {
        const int start = step * cfg.batch_size;
        const int len = std::min(cfg.batch_size, N - start);
        batch.assign(order.begin() + start, order.begin() + start + len);
      }

      BatchLossResult loss = batch_loss(
          train_data, batch, result.model,
          result.noise ? &*result.noise : nullptr, cfg, epoch, feat_std,
          cfg.target_ema > 0.0 ? &ema_store : nullptr);

      if (loss.total > 1e6)
        throw NumericError("train: loss diverged at epoch " +
                           std::to_string(epoch));

      sgd_step(parameter_views(result.model),
               parameter_views(loss.model_grad), model_opt);
      if (result.noise) {
        std::vector<std::span<double>> w{
            std::span<double>(result.noise->omega.data)};
        std::vector<std::span<double>> g{
            std::span<double>(loss.omega_grad.data)};
        sgd_step(w, g, omega_opt);
      }

      sum_total += loss.total;
      sum_cons += loss.consistency;
      sum_sup += loss.supervised;
      sum_ent += loss.entropy;
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    const double inv_s = 1.0 / static_cast<double>(steps_per_epoch);
    rec.loss_total = sum_total * inv_s;
    rec.loss_consistency = sum_cons * inv_s;
    rec.loss_supervised = sum_sup * inv_s;
    rec.loss_entropy = sum_ent * inv_s;
    rec.test_acc = evaluate(result.model, test_data);
    rec.obs_loglik = observed_log_likelihood(
        train_data, result.model, result.noise ? &*result.noise : nullptr);
    if (result.noise && true_transition)
      rec.transition_tv = transition_recovery_error(
          result.noise->transition_matrix(), *true_transition);
    result.metrics.push_back(rec);
  }
  return result;
}

}  // namespace implab
