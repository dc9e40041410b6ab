#include "implab/automaton.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace implab {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

LabelNfa LabelNfa::make(std::vector<std::vector<std::uint8_t>> allowed,
                        std::vector<ProbVector> emissions,
                        std::vector<std::vector<double>> weights) {
  LabelNfa nfa;
  nfa.length = static_cast<int>(allowed.size());
  nfa.num_classes = allowed.empty() ? 0 : static_cast<int>(allowed[0].size());
  nfa.allowed = std::move(allowed);
  nfa.emissions = std::move(emissions);
  if (weights.empty()) {
    weights.assign(nfa.length,
                   std::vector<double>(nfa.num_classes, 1.0));
  }
  nfa.weights = std::move(weights);
  nfa.validate();
  return nfa;
}

void LabelNfa::validate() const {
  if (static_cast<int>(emissions.size()) != length ||
      static_cast<int>(weights.size()) != length)
    throw ShapeError("LabelNfa: " + std::to_string(length) +
                     " positions vs " + std::to_string(emissions.size()) +
                     " emissions and " + std::to_string(weights.size()) +
                     " weight rows");
  for (int i = 0; i < length; ++i) {
    if (static_cast<int>(allowed[i].size()) != num_classes ||
        static_cast<int>(emissions[i].size()) != num_classes ||
        static_cast<int>(weights[i].size()) != num_classes)
      throw ShapeError("LabelNfa: row " + std::to_string(i) +
                       " width does not match " +
                       std::to_string(num_classes) + " classes");
    bool any = false;
    for (int y = 0; y < num_classes; ++y) {
      any = any || allowed[i][y];
      if (weights[i][y] < 0.0)
        throw ContractError("LabelNfa: negative weight at position " +
                            std::to_string(i));
    }
    if (!any)
      throw ContractError("LabelNfa: empty allowed set at position " +
                          std::to_string(i));
    require_simplex(emissions[i], "LabelNfa emission");
  }
}

namespace {

// log(emission * weight) restricted to the allowed set; -inf elsewhere.
Matrix position_scores(const LabelNfa& nfa) {
  Matrix s(nfa.length, nfa.num_classes, kNegInf);
  for (int i = 0; i < nfa.length; ++i)
    for (int y = 0; y < nfa.num_classes; ++y)
      if (nfa.allowed[i][y]) {
        const double mass = nfa.emissions[i][y] * nfa.weights[i][y];
        s.at(i, y) = mass > 0.0 ? std::log(mass) : kNegInf;
      }
  return s;
}

}  // namespace

TrellisScores forward_backward_scores(const LabelNfa& nfa) {
  const int N = nfa.length;
  const int C = nfa.num_classes;
  const Matrix score = position_scores(nfa);

  TrellisScores t;
  t.log_alpha = Matrix(N, C, kNegInf);
  t.log_beta = Matrix(N, C, kNegInf);

  // Forward. Every allowed symbol at position i is reachable from every
  // allowed symbol at i-1, so the incoming mass is the full prefix total.
  double prefix = 0.0;  // log mass of all paths through positions < i
  for (int i = 0; i < N; ++i) {
    for (int y = 0; y < C; ++y)
      t.log_alpha.at(i, y) = prefix + score.at(i, y);
    const double total = log_sum_exp(t.log_alpha.row(i));
    if (total == kNegInf) throw DegeneratePositionError(i);
    prefix = total;
  }

  // Backward: beta(i, y) is the mass of everything after position i, which
  // by the same reachability argument is shared by all allowed y.
  std::vector<double> next(C);
  double suffix = 0.0;
  for (int i = N - 1; i >= 0; --i) {
    for (int y = 0; y < C; ++y)
      if (nfa.allowed[i][y]) t.log_beta.at(i, y) = suffix;
    for (int y = 0; y < C; ++y) next[y] = score.at(i, y) + suffix;
    suffix = log_sum_exp(next);
  }
  return t;
}

std::vector<PosteriorTarget> forward_backward(const LabelNfa& nfa) {
  nfa.validate();
  const TrellisScores t = forward_backward_scores(nfa);
  const int N = nfa.length;
  const int C = nfa.num_classes;

  std::vector<PosteriorTarget> out(N);
  std::vector<double> joint(C);
  for (int i = 0; i < N; ++i) {
    for (int y = 0; y < C; ++y)
      joint[y] = t.log_alpha.at(i, y) + t.log_beta.at(i, y);
    const double norm = log_sum_exp(joint);
    if (norm == kNegInf) throw DegeneratePositionError(i);
    PosteriorTarget& p = out[i];
    p.probs.assign(C, 0.0);
    p.support.assign(C, 0);
    for (int y = 0; y < C; ++y) {
      p.support[y] = nfa.allowed[i][y];
      if (joint[y] != kNegInf) p.probs[y] = std::exp(joint[y] - norm);
    }
  }
  return out;
}

std::vector<PosteriorTarget> brute_force_posterior(const LabelNfa& nfa) {
  nfa.validate();
  const int N = nfa.length;
  const int C = nfa.num_classes;

  double combos = 1.0;
  for (int i = 0; i < N; ++i) combos *= C;
  if (combos > 1e6)
    throw ContractError("brute_force_posterior: C^N = " +
                        std::to_string(combos) + " exceeds 1e6");

  std::vector<std::vector<double>> marginal(
      N, std::vector<double>(C, 0.0));
  std::vector<int> seq(N, 0);
  double total = 0.0;
  while (true) {
    double mass = 1.0;
    for (int i = 0; i < N && mass > 0.0; ++i) {
      const int y = seq[i];
      mass *= nfa.allowed[i][y]
                  ? nfa.emissions[i][y] * nfa.weights[i][y]
                  : 0.0;
    }
    if (mass > 0.0) {
      total += mass;
      for (int i = 0; i < N; ++i) marginal[i][seq[i]] += mass;
    }
    int pos = N - 1;
    while (pos >= 0 && ++seq[pos] == C) seq[pos--] = 0;
    if (pos < 0) break;
  }

  if (total <= 0.0) {
    // Mirror forward_backward's diagnostic: report the first position whose
    // allowed mass is zero.
    for (int i = 0; i < N; ++i) {
      double m = 0.0;
      for (int y = 0; y < C; ++y)
        if (nfa.allowed[i][y]) m += nfa.emissions[i][y] * nfa.weights[i][y];
      if (m == 0.0) throw DegeneratePositionError(i);
    }
    throw DegeneratePositionError(0);
  }

  std::vector<PosteriorTarget> out(N);
  for (int i = 0; i < N; ++i) {
    double row = 0.0;
    for (double v : marginal[i]) row += v;
    PosteriorTarget& p = out[i];
    p.probs.assign(C, 0.0);
    p.support.assign(C, 0);
    for (int y = 0; y < C; ++y) {
      p.support[y] = nfa.allowed[i][y];
      p.probs[y] = marginal[i][y] / row;
    }
  }
  return out;
}

LabelNfa nfa_from_dataset(const ImpreciseDataset& dataset,
                          std::vector<ProbVector> emissions,
                          const NoiseModel* noise) {
  const int N = static_cast<int>(dataset.size());
  const int C = dataset.num_classes;
  if (static_cast<int>(emissions.size()) != N)
    throw ShapeError("nfa_from_dataset: " + std::to_string(emissions.size()) +
                     " emissions vs " + std::to_string(N) + " samples");

  Matrix transition;
  bool have_transition = false;

  std::vector<std::vector<std::uint8_t>> allowed(
      N, std::vector<std::uint8_t>(C, 0));
  std::vector<std::vector<double>> weights(N, std::vector<double>(C, 1.0));

  for (int i = 0; i < N; ++i) {
    const LabelInfo& info = dataset.infos[i];
    switch (info.kind) {
      case LabelInfo::Kind::kExact:
        allowed[i][info.label] = 1;
        break;
      case LabelInfo::Kind::kCandidates:
        for (int c : info.candidates) allowed[i][c] = 1;
        break;
      case LabelInfo::Kind::kUnlabeled:
        std::fill(allowed[i].begin(), allowed[i].end(), 1);
        break;
      case LabelInfo::Kind::kNoisy:
      case LabelInfo::Kind::kNoisyCandidates: {
        if (!noise)
          throw ConfigError("nfa_from_dataset: dataset has noisy entries but "
                            "no noise model was given");
        if (!have_transition) {
          transition = noise->transition_matrix();
          have_transition = true;
        }
        std::fill(allowed[i].begin(), allowed[i].end(), 1);
        if (info.kind == LabelInfo::Kind::kNoisy) {
          for (int y = 0; y < C; ++y)
            weights[i][y] = transition.at(y, info.label);
        } else {
          for (int y = 0; y < C; ++y) {
            double lik = 0.0;
            for (int c : info.candidates) lik += transition.at(y, c);
            weights[i][y] = lik;
          }
        }
        break;
      }
    }
  }
  return LabelNfa::make(std::move(allowed), std::move(emissions),
                        std::move(weights));
}

}  // namespace implab
