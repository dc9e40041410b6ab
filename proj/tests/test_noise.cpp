#include <doctest.h>

#include <cmath>

#include "implab/noise.hpp"

using namespace implab;

TEST_CASE("transition_matrix: zero scale and zero omega is uniform") {
  const auto m = NoiseModel::make(4, 0.0);
  const Matrix t = m.transition_matrix();
  for (int y = 0; y < 4; ++y)
    for (int j = 0; j < 4; ++j)
      CHECK(t.at(y, j) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("transition_matrix: saturation toward the identity") {
  const auto m = NoiseModel::make(5, 30.0);
  const Matrix t = m.transition_matrix();
  for (int y = 0; y < 5; ++y) CHECK(t.at(y, y) > 1.0 - 1e-12);

  // Past the subnormal exponent range the softmax is exactly the identity.
  const auto hard = NoiseModel::make(5, 1000.0);
  CHECK(transition_is_identity(hard.transition_matrix()));
  CHECK_FALSE(transition_is_identity(t));
}

TEST_CASE("transition_matrix: pinned diagonal for scale 1, C = 10") {
  const auto m = NoiseModel::make(10, 1.0);
  const Matrix t = m.transition_matrix();
  for (int y = 0; y < 10; ++y)
    CHECK(t.at(y, y) == doctest::Approx(0.23196931668407395).epsilon(1e-12));
}

TEST_CASE("transition_matrix: rows stay stochastic for random omega") {
  rng::Stream rng(8);
  for (double scale : {0.0, 1.0, 7.5, 50.0}) {
    auto m = NoiseModel::make(6, scale);
    for (double& v : m.omega.data) v = 3.0 * rng.gaussian();
    const Matrix t = m.transition_matrix();
    for (int y = 0; y < 6; ++y) {
      double sum = 0.0;
      for (int j = 0; j < 6; ++j) {
        CHECK(t.at(y, j) >= 0.0);
        sum += t.at(y, j);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("transition_matrix: diagonal grows monotonically in scale") {
  double prev = 0.0;
  bool first = true;
  for (double scale : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
    const auto m = NoiseModel::make(8, scale);
    const double diag = m.transition_matrix().at(3, 3);
    if (!first) CHECK(diag > prev);
    prev = diag;
    first = false;
  }
}

TEST_CASE("noisy_marginal: identity, uniform, and pinned cases") {
  Matrix identity(3, 3);
  for (int i = 0; i < 3; ++i) identity.at(i, i) = 1.0;
  const ProbVector pred{0.5, 0.2, 0.3};
  CHECK(noisy_marginal(pred, identity) == pred);

  Matrix uniform(3, 3, 1.0 / 3.0);
  const ProbVector flat = noisy_marginal(pred, uniform);
  for (double v : flat) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Matrix t(2, 2);
  t.at(0, 0) = 0.8; t.at(0, 1) = 0.2;
  t.at(1, 0) = 0.3; t.at(1, 1) = 0.7;
  const ProbVector m = noisy_marginal(ProbVector{0.9, 0.1}, t);
  CHECK(m[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.25).epsilon(1e-12));

  double sum = 0.0;
  for (double v : m) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("noise_gradients: perfect fit has zero loss and gradients") {
  auto m = NoiseModel::make(3, 1000.0);  // exact identity
  const auto g = noise_gradients(ProbVector{0.0, 1.0, 0.0}, 1, m);
  CHECK(g.loss == 0.0);
  for (double v : g.d_logits) CHECK(v == 0.0);
  for (double v : g.d_omega.data) CHECK(v == 0.0);
}

TEST_CASE("noise_gradients: omega rows for zero-mass classes stay zero") {
  auto m = NoiseModel::make(4, 1.0);
  const auto g = noise_gradients(ProbVector{0.0, 0.5, 0.5, 0.0}, 2, m);
  for (int j = 0; j < 4; ++j) {
    CHECK(g.d_omega.at(0, j) == 0.0);
    CHECK(g.d_omega.at(3, j) == 0.0);
  }
}

TEST_CASE("noise_gradients: matches central differences over omega") {
  rng::Stream rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = NoiseModel::make(5, 1.0);
    for (double& v : m.omega.data) v = rng.gaussian();
    ProbVector pred(5);
    double sum = 0.0;
    for (double& v : pred) {
      v = rng.uniform() + 1e-3;
      sum += v;
    }
    for (double& v : pred) v /= sum;
    const int y_hat = static_cast<int>(rng.bounded(5));

    const auto analytic = noise_gradients(pred, y_hat, m);
    const double eps = 1e-6;
    for (int y = 0; y < 5; ++y)
      for (int j = 0; j < 5; ++j) {
        const double saved = m.omega.at(y, j);
        m.omega.at(y, j) = saved + eps;
        const double up = noise_gradients(pred, y_hat, m).loss;
        m.omega.at(y, j) = saved - eps;
        const double down = noise_gradients(pred, y_hat, m).loss;
        m.omega.at(y, j) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double err = std::abs(analytic.d_omega.at(y, j) - numeric) /
                           std::max(std::abs(numeric), 1e-8);
        CHECK(err <= 1e-4);
      }
  }
}

TEST_CASE("transition_recovery_error: pinned values and symmetry") {
  Matrix identity(10, 10);
  for (int i = 0; i < 10; ++i) identity.at(i, i) = 1.0;
  Matrix uniform(10, 10, 0.1);

  CHECK(transition_recovery_error(identity, identity) == 0.0);
  CHECK(transition_recovery_error(identity, uniform) ==
        doctest::Approx(0.9).epsilon(1e-12));
  CHECK(transition_recovery_error(identity, uniform) ==
        transition_recovery_error(uniform, identity));
  CHECK_THROWS_AS(transition_recovery_error(identity, Matrix(3, 3)),
                  ShapeError);
}

TEST_CASE("transition_to_json: emits the declared schema") {
  auto m = NoiseModel::make(2, 1.5);
  const std::string json = transition_to_json(m);
  CHECK(json.find("\"C\": 2") != std::string::npos);
  CHECK(json.find("\"scale\": 1.5") != std::string::npos);
  CHECK(json.find("\"T\": [[") != std::string::npos);
}
