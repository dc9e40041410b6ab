#include "implab/labels.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace implab {

LabelInfo LabelInfo::exact(int y) {
  LabelInfo info;
  info.kind = Kind::kExact;
  info.label = y;
  return info;
}

LabelInfo LabelInfo::partial(std::vector<int> s) {
  if (s.empty()) throw ContractError("partial label with empty candidate set");
  LabelInfo info;
  info.kind = Kind::kCandidates;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  info.candidates = std::move(s);
  return info;
}

LabelInfo LabelInfo::unlabeled() { return LabelInfo{}; }

LabelInfo LabelInfo::noisy(int y_hat) {
  LabelInfo info;
  info.kind = Kind::kNoisy;
  info.label = y_hat;
  return info;
}

LabelInfo LabelInfo::noisy_partial(std::vector<int> s) {
  LabelInfo info = partial(std::move(s));
  info.kind = Kind::kNoisyCandidates;
  return info;
}

bool LabelInfo::contains(int cls) const {
  switch (kind) {
    case Kind::kExact:
    case Kind::kNoisy:
      return label == cls;
    case Kind::kUnlabeled:
      return true;
    case Kind::kCandidates:
    case Kind::kNoisyCandidates:
      return std::binary_search(candidates.begin(), candidates.end(), cls);
  }
  return false;
}

const char* kind_name(LabelInfo::Kind k) {
  switch (k) {
    case LabelInfo::Kind::kExact: return "exact";
    case LabelInfo::Kind::kCandidates: return "partial";
    case LabelInfo::Kind::kUnlabeled: return "unlabeled";
    case LabelInfo::Kind::kNoisy: return "noisy";
    case LabelInfo::Kind::kNoisyCandidates: return "noisy_partial";
  }
  return "?";
}

// ---------------------------------------------------------------------------

ImpreciseDataset make_blobs(int n, int dim, int num_classes, double separation,
                            std::uint64_t seed, std::uint64_t center_seed) {
  if (num_classes < 2) throw ConfigError("make_blobs: need at least 2 classes");
  if (num_classes > dim)
    throw ConfigError("make_blobs: simplex center placement needs C <= D (C=" +
                      std::to_string(num_classes) + ", D=" +
                      std::to_string(dim) + ")");
  if (separation < 0.0) throw ConfigError("make_blobs: negative separation");

  // Orthonormal center directions via modified Gram-Schmidt on a seeded
  // Gaussian matrix: a random rotation of the coordinate simplex. Scaling by
  // separation / sqrt(2) gives pairwise center distance exactly
  // `separation`, and the rotation spreads each class's signal over all
  // features instead of a single coordinate.
  rng::Stream center_stream(rng::derive(center_seed, 0xce47e5));
  std::vector<std::vector<double>> centers(num_classes,
                                           std::vector<double>(dim));
  for (int k = 0; k < num_classes; ++k) {
    for (double& v : centers[k]) v = center_stream.gaussian();
    for (int j = 0; j < k; ++j) {
      double dot = 0.0;
      for (int t = 0; t < dim; ++t) dot += centers[k][t] * centers[j][t];
      for (int t = 0; t < dim; ++t) centers[k][t] -= dot * centers[j][t];
    }
    double norm = 0.0;
    for (double v : centers[k]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9)
      throw NumericError("make_blobs: degenerate center direction");
    for (double& v : centers[k]) v /= norm;  // unit, pairwise sqrt(2) apart
  }
  const double scale = separation / std::sqrt(2.0);
  for (auto& center : centers)
    for (double& v : center) v *= scale;

  rng::Stream stream(rng::derive(seed, 0xb10b5));
  ImpreciseDataset d;
  d.num_classes = num_classes;
  d.meta.seed = seed;
  d.samples.reserve(n);
  d.infos.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int cls = i % num_classes;
    Sample s;
    s.true_label = cls;
    s.features.resize(dim);
    for (int j = 0; j < dim; ++j)
      s.features[j] = stream.gaussian() + centers[cls][j];
    d.samples.push_back(std::move(s));
    d.infos.push_back(LabelInfo::exact(cls));
  }
  return d;
}

namespace {

void require_exact_labels(const ImpreciseDataset& d, const char* op) {
  for (const auto& info : d.infos)
    if (info.kind != LabelInfo::Kind::kExact)
      throw ContractError(std::string(op) + ": input dataset must carry exact labels");
}

}  // namespace

ImpreciseDataset make_partial(const ImpreciseDataset& d, double q,
                              std::uint64_t seed) {
  if (q < 0.0 || q > 1.0)
    throw ConfigError("make_partial: q must be in [0,1], got " + std::to_string(q));
  require_exact_labels(d, "make_partial");

  ImpreciseDataset out = d;
  out.meta.partial_ratio = q;
  out.meta.seed = seed;
  rng::Stream stream(rng::derive(seed, 0x9a27));
  for (size_t i = 0; i < d.size(); ++i) {
    const int y = d.samples[i].true_label;
    std::vector<int> s{y};
    for (int c = 0; c < d.num_classes; ++c) {
      if (c == y) continue;
      if (stream.uniform() < q) s.push_back(c);
    }
    out.infos[i] = LabelInfo::partial(std::move(s));
  }
  return out;
}

ImpreciseDataset make_symmetric_noise(const ImpreciseDataset& d, double eta,
                                      std::uint64_t seed) {
  if (eta < 0.0 || eta > 1.0)
    throw ConfigError("make_symmetric_noise: eta must be in [0,1], got " +
                      std::to_string(eta));
  require_exact_labels(d, "make_symmetric_noise");

  ImpreciseDataset out = d;
  out.meta.noise_ratio = eta;
  out.meta.seed = seed;
  rng::Stream stream(rng::derive(seed, 0x401e));
  for (size_t i = 0; i < d.size(); ++i) {
    int y = d.samples[i].true_label;
    if (stream.uniform() < eta) {
      // uniform over the other C-1 classes
      int r = static_cast<int>(stream.bounded(
          static_cast<std::uint64_t>(d.num_classes - 1)));
      y = r < y ? r : r + 1;
    }
    out.infos[i] = LabelInfo::noisy(y);
  }
  return out;
}

ImpreciseDataset make_asymmetric_noise(const ImpreciseDataset& d, double eta,
                                       const std::function<int(int)>& pair_map,
                                       std::uint64_t seed) {
  if (eta < 0.0 || eta > 1.0)
    throw ConfigError("make_asymmetric_noise: eta must be in [0,1], got " +
                      std::to_string(eta));
  require_exact_labels(d, "make_asymmetric_noise");

  for (int c = 0; c < d.num_classes; ++c) {
    if (pair_map(c) == c)
      std::cerr << "warning: asymmetric pair map sends class " << c
                << " to itself (no-op for that class)\n";
  }

  ImpreciseDataset out = d;
  out.meta.noise_ratio = eta;
  out.meta.seed = seed;
  rng::Stream stream(rng::derive(seed, 0xa5e));
  for (size_t i = 0; i < d.size(); ++i) {
    int y = d.samples[i].true_label;
    if (stream.uniform() < eta) y = pair_map(y);
    out.infos[i] = LabelInfo::noisy(y);
  }
  return out;
}

std::function<int(int)> circular_pair_map(int num_classes) {
  return [num_classes](int y) { return (y + 1) % num_classes; };
}

ImpreciseDataset select_labeled_subset(const ImpreciseDataset& d, long l,
                                       std::uint64_t seed) {
  require_exact_labels(d, "select_labeled_subset");
  const int C = d.num_classes;
  if (l <= 0 || l % C != 0)
    throw ConfigError("select_labeled_subset: label budget " +
                      std::to_string(l) + " not divisible by " +
                      std::to_string(C) + " classes");
  const long per_class = l / C;

  std::vector<std::vector<int>> by_class(C);
  for (size_t i = 0; i < d.size(); ++i)
    by_class[d.samples[i].true_label].push_back(static_cast<int>(i));
  for (int c = 0; c < C; ++c)
    if (static_cast<long>(by_class[c].size()) < per_class)
      throw ConfigError("select_labeled_subset: class " + std::to_string(c) +
                        " has " + std::to_string(by_class[c].size()) +
                        " samples, needs " + std::to_string(per_class));

  ImpreciseDataset out = d;
  out.meta.label_budget = l;
  out.meta.seed = seed;
  rng::Stream stream(rng::derive(seed, 0x5e1ec7));
  for (auto& info : out.infos) info = LabelInfo::unlabeled();
  for (int c = 0; c < C; ++c) {
    stream.shuffle(by_class[c]);
    for (long j = 0; j < per_class; ++j)
      out.infos[by_class[c][j]] = LabelInfo::exact(c);
  }
  return out;
}

ImpreciseDataset make_mixed(const ImpreciseDataset& d, long l, double q,
                            double eta, std::uint64_t seed) {
  if (q < 0.0 || q > 1.0)
    throw ConfigError("make_mixed: q must be in [0,1], got " + std::to_string(q));
  if (eta < 0.0 || eta > 1.0)
    throw ConfigError("make_mixed: eta must be in [0,1], got " +
                      std::to_string(eta));

  ImpreciseDataset out = select_labeled_subset(d, l, rng::derive(seed, 1));
  rng::Stream flip_stream(rng::derive(seed, 2));
  rng::Stream cand_stream(rng::derive(seed, 3));

  // With both corruption knobs at zero the generator certifies the kept
  // labels are exact; annotations stay Exact instead of degenerate
  // singleton candidate sets.
  const bool uncorrupted = q == 0.0 && eta == 0.0;

  for (size_t i = 0; i < out.size(); ++i) {
    if (out.infos[i].kind != LabelInfo::Kind::kExact) continue;
    int anchor = out.infos[i].label;
    if (flip_stream.uniform() < eta) {
      int r = static_cast<int>(flip_stream.bounded(
          static_cast<std::uint64_t>(d.num_classes - 1)));
      anchor = r < anchor ? r : r + 1;
    }
    if (uncorrupted) continue;
    std::vector<int> s{anchor};
    for (int c = 0; c < d.num_classes; ++c) {
      if (c == anchor) continue;
      if (cand_stream.uniform() < q) s.push_back(c);
    }
    out.infos[i] = LabelInfo::noisy_partial(std::move(s));
  }
  out.meta.partial_ratio = q;
  out.meta.noise_ratio = eta;
  out.meta.label_budget = l;
  out.meta.seed = seed;
  return out;
}

}  // namespace implab
