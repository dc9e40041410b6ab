#ifndef IMPLAB_AUTOMATON_HPP
#define IMPLAB_AUTOMATON_HPP

#include <vector>

#include "implab/labels.hpp"
#include "implab/noise.hpp"
#include "implab/posterior.hpp"

namespace implab {

// Per-position label constraints over a sample sequence.
//
// Position i may emit symbol y only if allowed[i][y]; a full path scores
// prod_i emission[i][y_i] * weight[i][y_i]. Exact labels give singleton
// allowed sets, partial labels give their candidate sets, unlabeled and
// noisy positions allow every class; noisy positions additionally weight
// symbol y by T[y][y_hat_i].
struct LabelNfa {
  int length = 0;
  int num_classes = 0;
  std::vector<std::vector<std::uint8_t>> allowed;  // N x C
  std::vector<ProbVector> emissions;               // N x C, rows on simplex
  std::vector<std::vector<double>> weights;        // N x C, nonnegative

  static LabelNfa make(std::vector<std::vector<std::uint8_t>> allowed,
                       std::vector<ProbVector> emissions,
                       std::vector<std::vector<double>> weights = {});

  void validate() const;
};

// Log-domain forward and backward scores.
//
// alpha[i][y]: total log mass of constraint-satisfying prefixes ending with
// symbol y at position i (including position i's emission and weight).
// beta[i][y]: total log mass of suffixes strictly after position i.
// For every i, logsumexp_y(alpha[i][y] + beta[i][y]) equals the total path
// mass of the automaton.
struct TrellisScores {
  Matrix log_alpha;
  Matrix log_beta;
};

TrellisScores forward_backward_scores(const LabelNfa& nfa);

// Per-position posteriors P(y_i = y | constraints):
//   posterior(i, y) = alpha(i, y) beta(i, y) / sum_y' alpha(i, y') beta(i, y')
// computed with log-sum-exp; O(N * C) for the per-sample-independent
// constraints handled here. Throws DegeneratePositionError when a position's
// allowed symbols carry zero total mass.
std::vector<PosteriorTarget> forward_backward(const LabelNfa& nfa);

// Enumeration oracle: scores every label sequence (requires C^N <= 1e6) and
// marginalizes per position. forward_backward must agree with this.
std::vector<PosteriorTarget> brute_force_posterior(const LabelNfa& nfa);

// Builds the constraint automaton for a dataset given per-sample emissions.
// Datasets containing noisy kinds require a noise model.
LabelNfa nfa_from_dataset(const ImpreciseDataset& dataset,
                          std::vector<ProbVector> emissions,
                          const NoiseModel* noise = nullptr);

}  // namespace implab

#endif  // IMPLAB_AUTOMATON_HPP
