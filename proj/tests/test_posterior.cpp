#include <doctest.h>

#include <cmath>

#include "implab/posterior.hpp"

using namespace implab;

namespace {

void check_valid(const PosteriorTarget& t) {
  double sum = 0.0;
  for (size_t k = 0; k < t.probs.size(); ++k) {
    CHECK(t.probs[k] >= 0.0);
    CHECK(std::isfinite(t.probs[k]));
    if (!t.support[k]) CHECK(t.probs[k] == 0.0);
    sum += t.probs[k];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

}  // namespace

TEST_CASE("posterior_partial: renormalization over the candidate set") {
  const std::vector<int> s{0, 1};
  const auto t = posterior_partial(ProbVector{0.5, 0.3, 0.2}, s);
  CHECK(t.probs[0] == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(t.probs[1] == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(t.probs[2] == 0.0);
  CHECK(t.support == std::vector<std::uint8_t>{1, 1, 0});
  check_valid(t);
}

TEST_CASE("posterior_partial: full candidate set is the identity") {
  const ProbVector pred{0.2, 0.5, 0.3};
  const std::vector<int> all{0, 1, 2};
  const auto t = posterior_partial(pred, all);
  for (int k = 0; k < 3; ++k)
    CHECK(t.probs[k] == doctest::Approx(pred[k]).epsilon(1e-12));
}

TEST_CASE("posterior_partial: zero-mass fallback is uniform over the set") {
  const auto t = posterior_partial(ProbVector{0.0, 0.0, 1.0},
                                   std::vector<int>{0, 1});
  CHECK(t.probs[0] == 0.5);
  CHECK(t.probs[1] == 0.5);
  CHECK(t.probs[2] == 0.0);
  check_valid(t);
  CHECK_THROWS_AS(posterior_partial(ProbVector{1.0}, std::vector<int>{}),
                  ContractError);
}

TEST_CASE("posterior_partial: invariant to positive rescaling of pred") {
  rng::Stream rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ProbVector pred(6);
    double sum = 0.0;
    for (double& v : pred) {
      v = rng.uniform() + 1e-6;
      sum += v;
    }
    for (double& v : pred) v /= sum;
    std::vector<int> s;
    for (int c = 0; c < 6; ++c)
      if (rng.uniform() < 0.5) s.push_back(c);
    if (s.empty()) s.push_back(static_cast<int>(rng.bounded(6)));

    const double scale = 0.1 + 5.0 * rng.uniform();
    ProbVector scaled = pred;
    for (double& v : scaled) v *= scale;  // off-simplex on purpose

    const auto a = posterior_partial(pred, s);
    const auto b = posterior_partial(scaled, s);
    for (int k = 0; k < 6; ++k)
      CHECK(a.probs[k] == doctest::Approx(b.probs[k]).epsilon(1e-9));
  }
}

TEST_CASE("posterior_unlabeled: identity with full support") {
  const ProbVector pred{0.9, 0.1};
  const auto t = posterior_unlabeled(pred);
  CHECK(t.probs == pred);
  CHECK(t.support == std::vector<std::uint8_t>{1, 1});

  const ProbVector uniform{0.25, 0.25, 0.25, 0.25};
  CHECK(posterior_unlabeled(uniform).probs == uniform);
}

TEST_CASE("posterior_noisy: delta and uninformative noise models") {
  Matrix identity(3, 3);
  for (int i = 0; i < 3; ++i) identity.at(i, i) = 1.0;
  const auto delta = posterior_noisy(ProbVector{0.2, 0.5, 0.3}, 1, identity);
  CHECK(delta.probs == ProbVector{0.0, 1.0, 0.0});

  Matrix uniform(3, 3, 1.0 / 3.0);
  const ProbVector pred{0.2, 0.5, 0.3};
  const auto flat = posterior_noisy(pred, 0, uniform);
  for (int k = 0; k < 3; ++k)
    CHECK(flat.probs[k] == doctest::Approx(pred[k]).epsilon(1e-12));
}

TEST_CASE("posterior_noisy: pinned arithmetic") {
  Matrix t(2, 2);
  t.at(0, 0) = 0.8; t.at(0, 1) = 0.2;
  t.at(1, 0) = 0.3; t.at(1, 1) = 0.7;
  const auto post = posterior_noisy(ProbVector{0.6, 0.4}, 0, t);
  CHECK(post.probs[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(post.probs[1] == doctest::Approx(0.2).epsilon(1e-12));
  check_valid(post);

  CHECK_THROWS_AS(posterior_noisy(ProbVector{0.6, 0.4}, 2, t), ContractError);
}

TEST_CASE("posterior_noisy_partial: reductions and pinned arithmetic") {
  Matrix identity(3, 3);
  for (int i = 0; i < 3; ++i) identity.at(i, i) = 1.0;
  const ProbVector pred{0.5, 0.3, 0.2};
  const std::vector<int> s01{0, 1};

  // Identity transition collapses to the clean partial posterior.
  const auto a = posterior_noisy_partial(pred, s01, identity);
  const auto b = posterior_partial(pred, s01);
  for (int k = 0; k < 3; ++k)
    CHECK(a.probs[k] == doctest::Approx(b.probs[k]).epsilon(1e-12));

  // Full candidate set: row-stochasticity makes the likelihood constant.
  Matrix t(3, 3);
  t.at(0, 0) = 0.8; t.at(0, 1) = 0.1; t.at(0, 2) = 0.1;
  t.at(1, 0) = 0.2; t.at(1, 1) = 0.6; t.at(1, 2) = 0.2;
  t.at(2, 0) = 0.3; t.at(2, 1) = 0.1; t.at(2, 2) = 0.6;
  const auto full = posterior_noisy_partial(pred, std::vector<int>{0, 1, 2}, t);
  for (int k = 0; k < 3; ++k)
    CHECK(full.probs[k] == doctest::Approx(pred[k]).epsilon(1e-12));

  // Single candidate {0}: likelihoods (0.8, 0.2, 0.3), normalizer 0.52.
  const auto single = posterior_noisy_partial(pred, std::vector<int>{0}, t);
  CHECK(single.probs[0] == doctest::Approx(0.7692307692307693).epsilon(1e-12));
  CHECK(single.probs[1] == doctest::Approx(0.11538461538461538).epsilon(1e-12));
  CHECK(single.probs[2] == doctest::Approx(0.11538461538461538).epsilon(1e-12));
  // Support stays full: the true label may sit outside the candidates.
  CHECK(single.support == std::vector<std::uint8_t>{1, 1, 1});
}

TEST_CASE("posterior_exact: one-hot with singleton support") {
  const auto t = posterior_exact(0, 3);
  CHECK(t.probs == ProbVector{1.0, 0.0, 0.0});
  CHECK(t.support == std::vector<std::uint8_t>{1, 0, 0});
  CHECK_THROWS_AS(posterior_exact(5, 3), ContractError);
}

TEST_CASE("posteriors: no NaN on the closed simplex, including corners") {
  Matrix t(3, 3, 1e-13);  // nearly-zero rows force the fallback paths
  const std::vector<ProbVector> corners{
      {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0},
      {0.5, 0.5, 0.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  for (const auto& pred : corners) {
    check_valid(posterior_partial(pred, std::vector<int>{1, 2}));
    check_valid(posterior_unlabeled(pred));
    const auto noisy = posterior_noisy(pred, 0, t);
    for (double v : noisy.probs) CHECK(std::isfinite(v));
    const auto mixed = posterior_noisy_partial(pred, std::vector<int>{0, 2}, t);
    for (double v : mixed.probs) CHECK(std::isfinite(v));
  }
}
