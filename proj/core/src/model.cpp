#include "implab/model.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace implab {

namespace {

void init_uniform(Matrix& m, int fan_in, rng::Stream& stream) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : m.data) v = (2.0 * stream.uniform() - 1.0) * bound;
}

}  // namespace

Classifier Classifier::make_linear(int input_dim, int num_classes,
                                   std::uint64_t seed) {
  (void)seed;  // the zero-initialized head consumes no draws
  Classifier c;
  c.arch = Arch::kLinear;
  c.input_dim = input_dim;
  c.num_classes = num_classes;
  c.w1 = Matrix(num_classes, input_dim);
  c.b1.assign(num_classes, 0.0);
  return c;
}

Classifier Classifier::make_mlp(int input_dim, int num_classes, int hidden,
                                std::uint64_t seed) {
  Classifier c;
  c.arch = Arch::kMlp;
  c.input_dim = input_dim;
  c.num_classes = num_classes;
  c.hidden = hidden;
  c.w1 = Matrix(hidden, input_dim);
  c.b1.assign(hidden, 0.0);
  c.w2 = Matrix(num_classes, hidden);  // zero-initialized head
  c.b2.assign(num_classes, 0.0);
  rng::Stream stream(rng::derive(seed, 0x1117));
  init_uniform(c.w1, input_dim, stream);
  return c;
}

ProbVector Classifier::forward(std::span<const double> features,
                               Cache* cache) const {
  if (static_cast<int>(features.size()) != input_dim)
    throw ShapeError("feature dimension " + std::to_string(features.size()) +
                     " does not match model input dimension " +
                     std::to_string(input_dim));

  std::vector<double> logits(num_classes, 0.0);
  std::vector<double> hidden_act;
  if (arch == Arch::kLinear) {
    for (int k = 0; k < num_classes; ++k) {
      double z = b1[k];
      const double* wr = w1.data.data() + static_cast<size_t>(k) * input_dim;
      for (int d = 0; d < input_dim; ++d) z += wr[d] * features[d];
      logits[k] = z;
    }
  } else {
    hidden_act.resize(hidden);
    for (int h = 0; h < hidden; ++h) {
      double z = b1[h];
      const double* wr = w1.data.data() + static_cast<size_t>(h) * input_dim;
      for (int d = 0; d < input_dim; ++d) z += wr[d] * features[d];
      hidden_act[h] = z > 0.0 ? z : 0.0;
    }
    for (int k = 0; k < num_classes; ++k) {
      double z = b2[k];
      const double* wr = w2.data.data() + static_cast<size_t>(k) * hidden;
      for (int h = 0; h < hidden; ++h) z += wr[h] * hidden_act[h];
      logits[k] = z;
    }
  }

  ProbVector prob = softmax(logits);
  if (cache) {
    cache->input.assign(features.begin(), features.end());
    cache->hidden_act = std::move(hidden_act);
    cache->prob = prob;
  }
  return prob;
}

std::vector<ProbVector> Classifier::forward_batch(
    const std::vector<std::vector<double>>& features) const {
  std::vector<ProbVector> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(forward(f));
  return out;
}

size_t Classifier::parameter_count() const {
  return w1.data.size() + b1.size() + w2.data.size() + b2.size();
}

Gradients Gradients::zeros_like(const Classifier& c) {
  Gradients g;
  g.w1 = Matrix(c.w1.rows, c.w1.cols);
  g.b1.assign(c.b1.size(), 0.0);
  g.w2 = Matrix(c.w2.rows, c.w2.cols);
  g.b2.assign(c.b2.size(), 0.0);
  return g;
}

void Gradients::zero() {
  std::fill(w1.data.begin(), w1.data.end(), 0.0);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(w2.data.begin(), w2.data.end(), 0.0);
  std::fill(b2.begin(), b2.end(), 0.0);
}

void Gradients::scale(double s) {
  for (double& v : w1.data) v *= s;
  for (double& v : b1) v *= s;
  for (double& v : w2.data) v *= s;
  for (double& v : b2) v *= s;
}

void backward_from_logits(const Classifier& c, const Classifier::Cache& cache,
                          std::span<const double> dlogits, Gradients& out) {
  const int D = c.input_dim;
  if (c.arch == Arch::kLinear) {
    for (int k = 0; k < c.num_classes; ++k) {
      const double g = dlogits[k];
      if (g == 0.0) continue;
      double* wr = out.w1.data.data() + static_cast<size_t>(k) * D;
      for (int d = 0; d < D; ++d) wr[d] += g * cache.input[d];
      out.b1[k] += g;
    }
    return;
  }

  // dL/dh = W2^T dlogits, masked by relu activity.
  std::vector<double> dh(c.hidden, 0.0);
  for (int k = 0; k < c.num_classes; ++k) {
    const double g = dlogits[k];
    double* wr = out.w2.data.data() + static_cast<size_t>(k) * c.hidden;
    const double* w2r = c.w2.data.data() + static_cast<size_t>(k) * c.hidden;
    for (int h = 0; h < c.hidden; ++h) {
      wr[h] += g * cache.hidden_act[h];
      dh[h] += g * w2r[h];
    }
    out.b2[k] += g;
  }
  for (int h = 0; h < c.hidden; ++h) {
    if (cache.hidden_act[h] <= 0.0) continue;  // relu gate
    const double g = dh[h];
    double* wr = out.w1.data.data() + static_cast<size_t>(h) * D;
    for (int d = 0; d < D; ++d) wr[d] += g * cache.input[d];
    out.b1[h] += g;
  }
}

std::vector<std::span<double>> parameter_views(Classifier& c) {
  std::vector<std::span<double>> views;
  views.emplace_back(c.w1.data);
  views.emplace_back(c.b1);
  if (c.arch == Arch::kMlp) {
    views.emplace_back(c.w2.data);
    views.emplace_back(c.b2);
  }
  return views;
}

std::vector<std::span<double>> parameter_views(Gradients& g) {
  std::vector<std::span<double>> views;
  views.emplace_back(g.w1.data);
  views.emplace_back(g.b1);
  if (!g.w2.data.empty() || !g.b2.empty()) {
    views.emplace_back(g.w2.data);
    views.emplace_back(g.b2);
  }
  return views;
}

// ---------------------------------------------------------------------------

double soft_cross_entropy(std::span<const double> pred,
                          std::span<const double> target) {
  require_simplex(pred, "pred");
  require_simplex(target, "target");
  double loss = 0.0;
  for (size_t k = 0; k < pred.size(); ++k) {
    if (target[k] == 0.0) continue;
    loss -= target[k] * std::log(std::max(pred[k], kEps));
  }
  return loss;
}

void soft_cross_entropy_logit_grad(std::span<const double> pred,
                                   std::span<const double> target,
                                   std::span<double> out) {
  for (size_t k = 0; k < pred.size(); ++k) out[k] = pred[k] - target[k];
}

double entropy_balance_loss(const std::vector<ProbVector>& batch) {
  if (batch.empty()) throw ContractError("entropy_balance_loss: empty batch");
  const size_t C = batch.front().size();
  std::vector<double> mean(C, 0.0);
  for (const auto& p : batch)
    for (size_t k = 0; k < C; ++k) mean[k] += p[k];
  double loss = 0.0;
  for (size_t k = 0; k < C; ++k) {
    mean[k] /= static_cast<double>(batch.size());
    if (mean[k] == 0.0) continue;
    loss += mean[k] * std::log(std::max(mean[k], kEps));
  }
  return loss;
}

std::vector<double> entropy_balance_mean_grad(const ProbVector& mean) {
  std::vector<double> g(mean.size());
  for (size_t k = 0; k < mean.size(); ++k) {
    if (mean[k] > kEps)
      g[k] = std::log(mean[k]) + 1.0;
    else
      g[k] = std::log(kEps);
  }
  return g;
}

void softmax_vjp(std::span<const double> prob, std::span<const double> dprob,
                 std::span<double> dlogits) {
  double dot = 0.0;
  for (size_t k = 0; k < prob.size(); ++k) dot += dprob[k] * prob[k];
  for (size_t k = 0; k < prob.size(); ++k)
    dlogits[k] = prob[k] * (dprob[k] - dot);
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::make(double lr0, double momentum,
                                    double weight_decay, long total_steps,
                                    size_t parameter_count) {
  OptimizerState s;
  s.lr0 = lr0;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.step = 0;
  s.total_steps = total_steps;
  s.buffers.assign(parameter_count, 0.0);
  return s;
}

double cosine_lr(double lr0, long step, long total_steps) {
  const double pi = 3.14159265358979323846;
  return lr0 * std::cos(7.0 * pi * static_cast<double>(step) /
                        (16.0 * static_cast<double>(total_steps)));
}

double OptimizerState::current_lr() const {
  return cosine_lr(lr0, step, total_steps);
}

void sgd_step(std::vector<std::span<double>> params,
              std::vector<std::span<double>> grads, OptimizerState& state) {
  if (state.step >= state.total_steps)
    throw ScheduleExhaustedError("sgd_step: schedule exhausted at step " +
                                 std::to_string(state.step) + " of " +
                                 std::to_string(state.total_steps));
  if (params.size() != grads.size())
    throw ShapeError("sgd_step: " + std::to_string(params.size()) +
                     " parameter views vs " + std::to_string(grads.size()) +
                     " gradient views");
  size_t total = 0;
  for (const auto& p : params) total += p.size();
  if (total != state.buffers.size())
    throw ShapeError("sgd_step: " + std::to_string(total) +
                     " parameters vs " + std::to_string(state.buffers.size()) +
                     " momentum buffers");

  const double lr = state.current_lr();
  size_t off = 0;
  for (size_t v = 0; v < params.size(); ++v) {
    if (params[v].size() != grads[v].size())
      throw ShapeError("sgd_step: view " + std::to_string(v) + " has " +
                       std::to_string(params[v].size()) + " parameters vs " +
                       std::to_string(grads[v].size()) + " gradients");
    for (size_t i = 0; i < params[v].size(); ++i) {
      double& buf = state.buffers[off + i];
      buf = state.momentum * buf + grads[v][i];
      params[v][i] -= lr * buf + lr * state.weight_decay * params[v][i];
    }
    off += params[v].size();
  }
  ++state.step;
}

// ---------------------------------------------------------------------------

double finite_difference_check(std::vector<std::span<double>> params,
                               const LossClosure& loss, double epsilon) {
  if (epsilon < 1e-7 || epsilon > 1e-4)
    throw ContractError("finite_difference_check: epsilon outside [1e-7, 1e-4]");

  size_t total = 0;
  for (const auto& p : params) total += p.size();
  std::vector<double> analytic(total, 0.0);
  const double base = loss(analytic);
  if (!std::isfinite(base))
    throw NumericError("finite_difference_check: non-finite loss");

  std::vector<double> scratch(total, 0.0);
  double worst = 0.0;
  size_t off = 0;
  for (auto& view : params) {
    for (size_t i = 0; i < view.size(); ++i) {
      const double saved = view[i];
      view[i] = saved + epsilon;
      const double up = loss(scratch);
      view[i] = saved - epsilon;
      const double down = loss(scratch);
      view[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_difference_check: non-finite loss under perturbation");
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = std::abs(analytic[off + i] - numeric) /
                         std::max(std::abs(numeric), 1e-8);
      worst = std::max(worst, err);
    }
    off += view.size();
  }
  return worst;
}

}  // namespace implab
