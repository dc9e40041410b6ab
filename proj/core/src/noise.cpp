#include "implab/noise.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace implab {

NoiseModel NoiseModel::make(int num_classes, double scale) {
  if (num_classes < 2) throw ConfigError("NoiseModel: need at least 2 classes");
  if (scale < 0.0) throw ConfigError("NoiseModel: negative scale");
  NoiseModel m;
  m.num_classes = num_classes;
  m.scale = scale;
  m.omega = Matrix(num_classes, num_classes);
  return m;
}

Matrix NoiseModel::transition_matrix() const {
  const int C = num_classes;
  Matrix t(C, C);
  std::vector<double> logits(C);
  for (int y = 0; y < C; ++y) {
    for (int j = 0; j < C; ++j)
      logits[j] = omega.at(y, j) + (j == y ? scale : 0.0);
    ProbVector row = softmax(logits);
    for (int j = 0; j < C; ++j) t.at(y, j) = row[j];
  }
  return t;
}

bool transition_is_identity(const Matrix& t) {
  for (int y = 0; y < t.rows; ++y)
    for (int j = 0; j < t.cols; ++j)
      if (t.at(y, j) != (y == j ? 1.0 : 0.0)) return false;
  return true;
}

ProbVector noisy_marginal(std::span<const double> pred,
                          const Matrix& transition) {
  const int C = transition.rows;
  ProbVector out(C, 0.0);
  for (int y = 0; y < C; ++y) {
    const double p = pred[y];
    if (p == 0.0) continue;
    for (int j = 0; j < C; ++j) out[j] += p * transition.at(y, j);
  }
  return out;
}

NoisyNllGradients noise_gradients(std::span<const double> pred, int y_hat,
                                  const NoiseModel& model) {
  return noise_gradients(pred, y_hat, model.transition_matrix());
}

NoisyNllGradients noise_gradients(std::span<const double> pred, int y_hat,
                                  const Matrix& t) {
  const int C = t.rows;
  if (y_hat < 0 || y_hat >= C)
    throw ContractError("noise_gradients: observed label out of range");

  double marginal = 0.0;
  for (int y = 0; y < C; ++y) marginal += pred[y] * t.at(y, y_hat);
  const double m = std::max(marginal, kEps);

  NoisyNllGradients g;
  g.loss = -std::log(m);
  g.d_omega = Matrix(C, C);
  g.d_logits.assign(C, 0.0);
  if (marginal < kEps) return g;  // guarded flat region

  // d/d p_y = -T[y][y_hat] / m, then through the softmax Jacobian:
  // d/dz = p - posterior, with posterior_y = p_y T[y][y_hat] / m.
  for (int y = 0; y < C; ++y)
    g.d_logits[y] = pred[y] - pred[y] * t.at(y, y_hat) / m;

  // Row softmax Jacobian: dT[y][y_hat]/domega[y][j] =
  //   T[y][y_hat] (1[j == y_hat] - T[y][j]).
  for (int y = 0; y < C; ++y) {
    const double w = pred[y] * t.at(y, y_hat) / m;  // posterior weight
    if (w == 0.0) continue;
    for (int j = 0; j < C; ++j)
      g.d_omega.at(y, j) = w * (t.at(y, j) - (j == y_hat ? 1.0 : 0.0));
  }
  return g;
}

double transition_recovery_error(const Matrix& t_est, const Matrix& t_true) {
  if (t_est.rows != t_true.rows || t_est.cols != t_true.cols)
    throw ShapeError("transition_recovery_error: " +
                     std::to_string(t_est.rows) + "x" +
                     std::to_string(t_est.cols) + " vs " +
                     std::to_string(t_true.rows) + "x" +
                     std::to_string(t_true.cols));
  double worst = 0.0;
  for (int y = 0; y < t_est.rows; ++y) {
    double tv = 0.0;
    for (int j = 0; j < t_est.cols; ++j)
      tv += std::abs(t_est.at(y, j) - t_true.at(y, j));
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

std::string transition_to_json(const NoiseModel& model) {
  const Matrix t = model.transition_matrix();
  char buf[64];
  std::ostringstream out;
  out << "{\"C\": " << model.num_classes << ", \"scale\": ";
  std::snprintf(buf, sizeof(buf), "%.17g", model.scale);
  out << buf << ", \"T\": [";
  for (int y = 0; y < t.rows; ++y) {
    out << (y ? ", [" : "[");
    for (int j = 0; j < t.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", t.at(y, j));
      out << (j ? ", " : "") << buf;
    }
    out << "]";
  }
  out << "]}";
  return out.str();
}

}  // namespace implab
